use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;

use arena_api::AppState;
use arena_core::judge::{BackendRegistry, CommandBackend, FailingBackend, MockBackend};
use arena_core::sandbox::{default_registry, RuntimeRegistry, Sandbox, SandboxConfig};
use arena_core::store::Store;
use arena_core::{Arena, ArenaOptions};

use crate::config::{BackendConfig, ConfigError, ServeConfig};

fn load_registry(cfg: &ServeConfig) -> Result<RuntimeRegistry, ConfigError> {
    let Some(path) = &cfg.runtimes else {
        return Ok(default_registry());
    };
    let text = std::fs::read_to_string(path).map_err(|_| ConfigError::MissingRegistry { path: path.clone() })?;
    RuntimeRegistry::from_json(&text).map_err(|e| ConfigError::Registry {
        path: path.clone(),
        message: e.to_string(),
    })
}

fn backends(cfg: &ServeConfig) -> BackendRegistry {
    let mut reg = BackendRegistry::new();
    for b in &cfg.backends {
        match b {
            BackendConfig::Mock { id } => reg.insert(Arc::new(MockBackend::new(id))),
            BackendConfig::Fail { id, message } => reg.insert(Arc::new(FailingBackend::new(
                id,
                message.clone().unwrap_or_else(|| "backend disabled".into()),
            ))),
            BackendConfig::Command { id, command, timeout_secs } => reg.insert(Arc::new(CommandBackend::new(
                id,
                command.clone(),
                Duration::from_secs(*timeout_secs),
            ))),
        }
    }
    reg
}

fn seed_users(store: &Store, cfg: &ServeConfig) -> anyhow::Result<()> {
    for u in &cfg.users {
        if store.user_by_name(&u.name).is_some() {
            continue;
        }
        let password = u.password()?;
        store
            .create_user(&u.name, &password, u.group, u.kind, u.backend.clone())
            .with_context(|| format!("creating user {}", u.name))?;
        tracing::info!(user = %u.name, group = ?u.group, "seeded user");
    }
    Ok(())
}

async fn shutdown_signal() {
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    tokio::select! {
        _ = tokio::signal::ctrl_c() => {}
        _ = term => {}
    }
    tracing::info!("shutdown requested");
}

pub fn run(config_path: &Path) -> anyhow::Result<()> {
    let cfg = ServeConfig::load(config_path)?;
    let registry = load_registry(&cfg)?;
    let store = Arc::new(Store::open(&cfg.store).with_context(|| format!("opening store {}", cfg.store.display()))?);
    seed_users(&store, &cfg)?;

    let mut sandbox_config = SandboxConfig {
        root: cfg.sandbox.root.clone(),
        network: cfg.sandbox.network,
        ..SandboxConfig::default()
    };
    if let Some(drop) = cfg.sandbox.drop_privileges {
        sandbox_config.drop_privileges = drop;
    }
    let sandbox = Arc::new(Sandbox::new(sandbox_config, registry).context("initialising sandbox")?);
    let mut options = ArenaOptions::default();
    if let Some(w) = cfg.workers {
        options.workers = w;
    }
    let arena = Arc::new(Arena::start(store, sandbox, backends(&cfg), options)?);
    for issue in arena.health_check() {
        tracing::warn!(?issue, "reference solution self-check failed");
    }

    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&cfg.bind)
            .await
            .with_context(|| format!("binding {}", cfg.bind))?;
        let addr = listener.local_addr()?;
        if let Some(every) = cfg.checkpoint_interval() {
            let arena = arena.clone();
            tokio::spawn(async move {
                let mut tick = tokio::time::interval(every);
                tick.tick().await;
                loop {
                    tick.tick().await;
                    let a = arena.clone();
                    match tokio::task::spawn_blocking(move || a.checkpoint()).await {
                        Ok(Ok(_)) => {}
                        Ok(Err(e)) => tracing::error!(error = %e, "scheduled checkpoint failed"),
                        Err(e) => tracing::error!(error = %e, "scheduled checkpoint panicked"),
                    }
                }
            });
        }
        tracing::info!(%addr, "listening");
        println!("arena ready on http://{addr}");
        std::io::stdout().flush()?;
        arena_api::serve(listener, AppState::new(arena.clone()), shutdown_signal()).await?;
        anyhow::Ok(())
    })?;

    let timeout = Duration::from_secs(cfg.drain_timeout_secs);
    let pending = arena.queued();
    if arena.shutdown(timeout) {
        tracing::info!(pending, "judge stopped; queued submissions resume on next start");
    } else {
        tracing::warn!("drain timed out; interrupted submissions resume on next start");
    }
    Ok(())
}
