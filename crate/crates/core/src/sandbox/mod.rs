//! Isolated execution of guest programs.
//!
//! Each run is a separate OS process in an ephemeral working directory with
//! an empty environment, CPU/memory/output ceilings, no network, and (when
//! the host is root) a dedicated unprivileged uid so concurrent guests cannot
//! read each other's directories. CPU time, not wall time, is the scoring
//! clock; wall time is only a backstop at twice the CPU limit by default.

mod process;

use std::collections::BTreeMap;
use std::fs;
use std::os::unix::fs::{chown, PermissionsExt};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use tempfile::TempDir;

pub use process::{kill_uid, probe_network_isolation, Identity};

pub const DEFAULT_CPU_MS: u64 = 2000;
pub const DEFAULT_MEMORY_KIB: u64 = 256 * 1024;
pub const DEFAULT_OUTPUT_CAP: u64 = 8 * 1024 * 1024;
pub const STDERR_CAP: usize = 64 * 1024;
pub const COMPILE_LOG_CAP: usize = 16 * 1024;
const ARTIFACT_BIN: &str = "main";

#[derive(Debug, thiserror::Error)]
pub enum SandboxError {
    #[error("runtime {0} is already registered")]
    DuplicateRuntime(String),
    #[error("unknown language {0}")]
    UnknownLanguage(String),
    #[error("invalid runtime {language}: {reason}")]
    InvalidRuntime { language: String, reason: String },
    #[error("invalid runtime registry: {0}")]
    Registry(String),
    #[error("sandbox setup failed: {0}")]
    Setup(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One guest language. Commands are argv templates with `{src}`, `{bin}`
/// and `{dir}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuestRuntime {
    pub language: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compile_command: Option<Vec<String>>,
    pub run_command: Vec<String>,
    pub source_filename: String,
}

impl GuestRuntime {
    fn validate(&self) -> Result<(), SandboxError> {
        let bad = |reason: &str| SandboxError::InvalidRuntime {
            language: self.language.clone(),
            reason: reason.into(),
        };
        if self.language.trim().is_empty() {
            return Err(bad("empty language id"));
        }
        if self.run_command.is_empty() {
            return Err(bad("run_command is empty"));
        }
        if matches!(&self.compile_command, Some(c) if c.is_empty()) {
            return Err(bad("compile_command is empty"));
        }
        if self.source_filename.is_empty() || self.source_filename.contains('/') {
            return Err(bad("source_filename must be a bare file name"));
        }
        Ok(())
    }
}

/// Read-mostly language registry.
#[derive(Debug, Default)]
pub struct RuntimeRegistry {
    runtimes: RwLock<BTreeMap<String, GuestRuntime>>,
}

impl RuntimeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses a registry document: a JSON array of runtimes.
    pub fn from_json(text: &str) -> Result<Self, SandboxError> {
        let list: Vec<GuestRuntime> =
            serde_json::from_str(text).map_err(|e| SandboxError::Registry(e.to_string()))?;
        let reg = RuntimeRegistry::new();
        for rt in list {
            reg.register(rt)?;
        }
        Ok(reg)
    }

    pub fn register(&self, rt: GuestRuntime) -> Result<(), SandboxError> {
        rt.validate()?;
        let mut map = self.runtimes.write().unwrap_or_else(|e| e.into_inner());
        if map.contains_key(&rt.language) {
            return Err(SandboxError::DuplicateRuntime(rt.language));
        }
        map.insert(rt.language.clone(), rt);
        Ok(())
    }

    pub fn get(&self, language: &str) -> Option<GuestRuntime> {
        self.runtimes
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(language)
            .cloned()
    }

    pub fn languages(&self) -> Vec<String> {
        self.runtimes
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .keys()
            .cloned()
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunLimits {
    pub cpu_ms: u64,
    pub wall_ms: u64,
    pub memory_kib: u64,
    pub output_cap_bytes: u64,
}

impl RunLimits {
    /// Wall clock at twice the CPU limit, default output cap.
    pub fn new(cpu_ms: u64, memory_kib: u64) -> Self {
        RunLimits {
            cpu_ms: cpu_ms.max(1),
            wall_ms: cpu_ms.max(1) * 2,
            memory_kib: memory_kib.max(1),
            output_cap_bytes: DEFAULT_OUTPUT_CAP,
        }
    }

    /// Guests never get network access.
    pub fn no_network(&self) -> bool {
        true
    }

    fn normalized(mut self) -> Self {
        self.cpu_ms = self.cpu_ms.max(1);
        self.wall_ms = self.wall_ms.max(self.cpu_ms);
        self.memory_kib = self.memory_kib.max(1);
        self.output_cap_bytes = self.output_cap_bytes.max(1);
        self
    }
}

impl Default for RunLimits {
    fn default() -> Self {
        RunLimits::new(DEFAULT_CPU_MS, DEFAULT_MEMORY_KIB)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Ok,
    Timeout,
    MemoryExceeded,
    NonzeroExit(i32),
    Killed(i32),
    SetupFailure(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub status: RunStatus,
    pub stdout: Vec<u8>,
    pub stdout_truncated: bool,
    pub stderr: Vec<u8>,
    pub cpu_ms: u64,
    pub wall_ms: u64,
    pub peak_memory_kib: u64,
}

impl RunResult {
    pub fn is_setup_failure(&self) -> bool {
        matches!(self.status, RunStatus::SetupFailure(_))
    }

    pub fn stderr_excerpt(&self, max: usize) -> String {
        let text = String::from_utf8_lossy(&self.stderr);
        match text.char_indices().nth(max) {
            Some((i, _)) => text[..i].to_owned(),
            None => text.into_owned(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkIsolation {
    /// Refuse to run a guest that would have network access.
    #[default]
    Required,
    BestEffort,
    Off,
}

#[derive(Debug, Clone)]
pub struct SandboxConfig {
    /// Parent of all artifact and run directories. A private temporary
    /// directory when unset.
    pub root: Option<PathBuf>,
    pub network: NetworkIsolation,
    /// Drop to per-run uids. Requires root; ignored otherwise.
    pub drop_privileges: bool,
    pub uid_base: u32,
    pub uid_count: u32,
    /// Address-space ceiling as a multiple of the memory limit, plus a
    /// fixed allowance for interpreter start-up mappings.
    pub address_space_factor: u64,
    pub address_space_slack_kib: u64,
    pub file_size_bytes: u64,
    pub compile_limits: RunLimits,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        SandboxConfig {
            root: None,
            network: NetworkIsolation::Required,
            drop_privileges: true,
            uid_base: 61_000,
            uid_count: 1_000,
            address_space_factor: 2,
            address_space_slack_kib: 64 * 1024,
            file_size_bytes: 64 * 1024 * 1024,
            compile_limits: RunLimits {
                cpu_ms: 20_000,
                wall_ms: 40_000,
                memory_kib: 1024 * 1024,
                output_cap_bytes: 1024 * 1024,
            },
        }
    }
}

/// Compiled (or, for interpreted languages, staged) guest program. Its
/// directory is removed on drop.
#[derive(Debug)]
pub struct Artifact {
    language: String,
    run_command: Vec<String>,
    source_path: PathBuf,
    bin_path: PathBuf,
    dir: TempDir,
}

impl Artifact {
    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn dir(&self) -> &Path {
        self.dir.path()
    }
}

#[derive(Debug)]
pub enum CompileOutcome {
    Compiled(Artifact),
    Failed { log: String },
    /// Host-side problem while compiling; never the guest's fault.
    SetupFailure(String),
}

enum Root {
    Owned(TempDir),
    Shared(PathBuf),
}

impl Root {
    fn path(&self) -> &Path {
        match self {
            Root::Owned(t) => t.path(),
            Root::Shared(p) => p,
        }
    }
}

pub struct Sandbox {
    config: SandboxConfig,
    registry: RuntimeRegistry,
    root: Root,
    as_root: bool,
    next_uid: AtomicU32,
}

impl std::fmt::Debug for Sandbox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Sandbox")
            .field("root", &self.root.path())
            .field("languages", &self.registry.languages())
            .field("drops_privileges", &self.drops_privileges())
            .finish()
    }
}

impl Sandbox {
    pub fn new(config: SandboxConfig, registry: RuntimeRegistry) -> Result<Self, SandboxError> {
        let root = match &config.root {
            Some(p) => {
                fs::create_dir_all(p)?;
                Root::Shared(p.clone())
            }
            None => Root::Owned(tempfile::Builder::new().prefix("arena-sandbox-").tempdir()?),
        };
        fs::set_permissions(root.path(), fs::Permissions::from_mode(0o711))?;
        // SAFETY: geteuid has no preconditions.
        let as_root = unsafe { libc::geteuid() } == 0;
        if config.network == NetworkIsolation::Required && !probe_network_isolation(as_root) {
            return Err(SandboxError::Setup(
                "network namespaces unavailable; set network isolation to best_effort or off".into(),
            ));
        }
        Ok(Sandbox {
            next_uid: AtomicU32::new(0),
            config,
            registry,
            root,
            as_root,
        })
    }

    pub fn registry(&self) -> &RuntimeRegistry {
        &self.registry
    }

    pub fn register_runtime(&self, rt: GuestRuntime) -> Result<(), SandboxError> {
        self.registry.register(rt)
    }

    pub fn root(&self) -> &Path {
        self.root.path()
    }

    pub fn drops_privileges(&self) -> bool {
        self.as_root && self.config.drop_privileges
    }

    /// uid range guests may run under, when privileges are dropped.
    pub fn uid_range(&self) -> Option<std::ops::Range<u32>> {
        self.drops_privileges()
            .then(|| self.config.uid_base..self.config.uid_base + self.config.uid_count)
    }

    fn allocate_identity(&self) -> Option<Identity> {
        if !self.drops_privileges() {
            return None;
        }
        let slot = self.next_uid.fetch_add(1, Ordering::Relaxed) % self.config.uid_count.max(1);
        let uid = self.config.uid_base + slot;
        Some(Identity { uid, gid: uid })
    }

    /// Fresh private directory for one run, owned by the run identity.
    fn workdir(&self, identity: Option<Identity>) -> std::io::Result<TempDir> {
        let dir = tempfile::Builder::new().prefix("run-").tempdir_in(self.root.path())?;
        fs::set_permissions(dir.path(), fs::Permissions::from_mode(0o700))?;
        if let Some(id) = identity {
            chown(dir.path(), Some(id.uid), Some(id.gid))?;
        }
        Ok(dir)
    }

    fn address_space_bytes(&self, limits: &RunLimits) -> u64 {
        limits
            .memory_kib
            .saturating_mul(self.config.address_space_factor.max(1))
            .saturating_add(self.config.address_space_slack_kib)
            .saturating_mul(1024)
    }

    fn spawn(&self, argv: &[String], cwd: &Path, input: &[u8], limits: &RunLimits, identity: Option<Identity>) -> RunResult {
        let limits = limits.normalized();
        process::run(&process::SpawnSpec {
            argv,
            cwd,
            input,
            limits: &limits,
            identity,
            network: self.config.network,
            address_space_bytes: self.address_space_bytes(&limits),
            file_size_bytes: self.config.file_size_bytes,
            stderr_cap_bytes: STDERR_CAP,
        })
    }

    /// Prepares `source` for execution. Interpreted runtimes (no compile
    /// command) pass the staged source through unchanged.
    pub fn compile(&self, language: &str, source: &str) -> Result<CompileOutcome, SandboxError> {
        let rt = self
            .registry
            .get(language)
            .ok_or_else(|| SandboxError::UnknownLanguage(language.to_owned()))?;

        let dir = tempfile::Builder::new().prefix("art-").tempdir_in(self.root.path())?;
        fs::set_permissions(dir.path(), fs::Permissions::from_mode(0o711))?;
        let source_path = dir.path().join(&rt.source_filename);
        let bin_path = dir.path().join(ARTIFACT_BIN);
        fs::write(&source_path, source)?;
        fs::set_permissions(&source_path, fs::Permissions::from_mode(0o644))?;

        if let Some(compile) = &rt.compile_command {
            let identity = self.allocate_identity();
            let work = self.workdir(identity)?;
            let src = work.path().join(&rt.source_filename);
            let bin = work.path().join(ARTIFACT_BIN);
            fs::write(&src, source)?;
            if let Some(id) = identity {
                chown(&src, Some(id.uid), Some(id.gid))?;
            }
            let argv = expand(compile, &src, &bin, work.path());
            let result = self.spawn(&argv, work.path(), &[], &self.config.compile_limits, identity);
            match &result.status {
                RunStatus::SetupFailure(msg) => return Ok(CompileOutcome::SetupFailure(msg.clone())),
                RunStatus::Ok if bin.is_file() => {
                    fs::copy(&bin, &bin_path)?;
                    fs::set_permissions(&bin_path, fs::Permissions::from_mode(0o755))?;
                }
                status => {
                    let mut log = String::from_utf8_lossy(&result.stderr).into_owned();
                    if log.trim().is_empty() {
                        log = String::from_utf8_lossy(&result.stdout).into_owned();
                    }
                    let note = match status {
                        RunStatus::Timeout => "compilation timed out".to_owned(),
                        RunStatus::MemoryExceeded => "compilation exceeded memory limit".to_owned(),
                        RunStatus::Ok => "compiler produced no output binary".to_owned(),
                        other => format!("compiler exited with {other:?}"),
                    };
                    if !log.is_empty() && !log.ends_with('\n') {
                        log.push('\n');
                    }
                    log.push_str(&note);
                    return Ok(CompileOutcome::Failed {
                        log: truncate_chars(&log, COMPILE_LOG_CAP),
                    });
                }
            }
        }

        Ok(CompileOutcome::Compiled(Artifact {
            language: rt.language,
            run_command: rt.run_command,
            source_path,
            bin_path,
            dir,
        }))
    }

    /// Runs the artifact with `input` on stdin.
    pub fn execute(&self, artifact: &Artifact, input: &[u8], limits: &RunLimits) -> RunResult {
        self.execute_with_args(artifact, &[], input, limits)
    }

    /// Like [`Sandbox::execute`], appending `extra_args` to the run command.
    pub fn execute_with_args(&self, artifact: &Artifact, extra_args: &[String], input: &[u8], limits: &RunLimits) -> RunResult {
        let identity = self.allocate_identity();
        let work = match self.workdir(identity) {
            Ok(w) => w,
            Err(e) => {
                return RunResult {
                    status: RunStatus::SetupFailure(format!("workdir: {e}")),
                    stdout: Vec::new(),
                    stdout_truncated: false,
                    stderr: Vec::new(),
                    cpu_ms: 0,
                    wall_ms: 0,
                    peak_memory_kib: 0,
                }
            }
        };
        let mut argv = expand(&artifact.run_command, &artifact.source_path, &artifact.bin_path, work.path());
        argv.extend(extra_args.iter().cloned());
        let result = self.spawn(&argv, work.path(), input, limits, identity);
        if let Err(e) = work.close() {
            tracing::warn!(error = %e, "failed to remove run directory");
        }
        result
    }
}

fn expand(template: &[String], src: &Path, bin: &Path, dir: &Path) -> Vec<String> {
    template
        .iter()
        .map(|arg| {
            arg.replace("{src}", &src.to_string_lossy())
                .replace("{bin}", &bin.to_string_lossy())
                .replace("{dir}", &dir.to_string_lossy())
        })
        .collect()
}

fn truncate_chars(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => s[..i].to_owned(),
        None => s.to_owned(),
    }
}

/// The stock registry: Python 3, C, C++, Go and Haskell. Toolchains that
/// are not installed simply fail at spawn time.
pub fn default_runtimes() -> Vec<GuestRuntime> {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    vec![
        GuestRuntime {
            language: "python3".into(),
            compile_command: None,
            run_command: s(&["python3", "-S", "{src}"]),
            source_filename: "main.py".into(),
        },
        GuestRuntime {
            language: "c".into(),
            compile_command: Some(s(&["gcc", "-O2", "-std=c11", "-o", "{bin}", "{src}", "-lm"])),
            run_command: s(&["{bin}"]),
            source_filename: "main.c".into(),
        },
        GuestRuntime {
            language: "cpp".into(),
            compile_command: Some(s(&["g++", "-O2", "-std=c++17", "-o", "{bin}", "{src}"])),
            run_command: s(&["{bin}"]),
            source_filename: "main.cpp".into(),
        },
        GuestRuntime {
            language: "go".into(),
            compile_command: Some(s(&["go", "build", "-o", "{bin}", "{src}"])),
            run_command: s(&["{bin}"]),
            source_filename: "main.go".into(),
        },
        GuestRuntime {
            language: "haskell".into(),
            compile_command: Some(s(&["ghc", "-O2", "-o", "{bin}", "{src}"])),
            run_command: s(&["{bin}"]),
            source_filename: "Main.hs".into(),
        },
    ]
}

pub fn default_registry() -> RuntimeRegistry {
    let reg = RuntimeRegistry::new();
    for rt in default_runtimes() {
        reg.register(rt).expect("stock runtimes are valid");
    }
    reg
}
