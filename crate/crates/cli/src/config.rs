//! `arena serve` configuration file.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use arena_core::model::{GeneratorKind, UserGroup};
use arena_core::sandbox::NetworkIsolation;

/// Problems with the configuration are reported with exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config file {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("runtime registry file {path} not found")]
    MissingRegistry { path: PathBuf },
    #[error("invalid runtime registry {path}: {message}")]
    Registry { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    /// Journal directory.
    pub store: PathBuf,
    /// JSON runtime registry; the built-in registry when absent.
    pub runtimes: Option<PathBuf>,
    pub workers: Option<usize>,
    /// Seconds between automatic checkpoints (daily by default); 0 disables them.
    #[serde(default = "default_checkpoint_interval")]
    pub checkpoint_interval_secs: u64,
    #[serde(default = "default_drain")]
    pub drain_timeout_secs: u64,
    #[serde(default)]
    pub sandbox: SandboxSection,
    #[serde(default)]
    pub users: Vec<SeedUser>,
    #[serde(default)]
    pub backends: Vec<BackendConfig>,
}

fn default_bind() -> String {
    "127.0.0.1:8080".into()
}

fn default_checkpoint_interval() -> u64 {
    24 * 60 * 60
}

fn default_drain() -> u64 {
    30
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SandboxSection {
    pub root: Option<PathBuf>,
    #[serde(default)]
    pub network: NetworkIsolation,
    pub drop_privileges: Option<bool>,
}

/// A user created at start-up unless the name already exists.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedUser {
    pub name: String,
    pub password: Option<String>,
    /// Environment variable holding the password.
    pub password_env: Option<String>,
    pub group: UserGroup,
    #[serde(default = "default_kind")]
    pub kind: GeneratorKind,
    pub backend: Option<String>,
}

fn default_kind() -> GeneratorKind {
    GeneratorKind::None
}

impl SeedUser {
    pub fn password(&self) -> Result<String, ConfigError> {
        match (&self.password, &self.password_env) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(var)) => std::env::var(var)
                .map_err(|_| ConfigError::Invalid(format!("user {}: environment variable {var} is not set", self.name))),
            (None, None) => Err(ConfigError::Invalid(format!("user {}: password or password_env required", self.name))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    /// Serves fixture programs, falling back to reference solutions.
    Mock { id: String },
    /// Always fails; useful for exercising the refund path.
    Fail { id: String, message: Option<String> },
    /// Runs an external resolver with the request on stdin.
    Command {
        id: String,
        command: Vec<String>,
        #[serde(default = "default_backend_timeout")]
        timeout_secs: u64,
    },
}

fn default_backend_timeout() -> u64 {
    120
}

impl ServeConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        let mut cfg: ServeConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_owned(),
            message: e.message().to_owned(),
        })?;
        // Relative paths are taken relative to the config file.
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.store = base.join(&cfg.store);
        cfg.runtimes = cfg.runtimes.map(|p| base.join(p));
        cfg.sandbox.root = cfg.sandbox.root.map(|p| base.join(p));
        if cfg.workers == Some(0) {
            return Err(ConfigError::Invalid("workers must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn checkpoint_interval(&self) -> Option<Duration> {
        (self.checkpoint_interval_secs > 0).then(|| Duration::from_secs(self.checkpoint_interval_secs))
    }
}
