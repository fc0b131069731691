//! Spawning and supervising one guest process.
//!
//! The child is placed in its own process group, optionally in a fresh
//! network namespace, under kernel resource limits and (when the host runs
//! as root) an unprivileged uid. The host multiplexes stdin/stdout/stderr
//! with `poll(2)` on a single thread while sampling `/proc/<pid>` for CPU
//! time and resident memory, and reaps with `wait4(2)` to read `rusage`.

use std::ffi::OsStr;
use std::io::{self, Read, Write};
use std::os::fd::AsRawFd;
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use super::{NetworkIsolation, RunLimits, RunResult, RunStatus};

/// Credentials a guest runs under when the host can drop privileges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Identity {
    pub uid: u32,
    pub gid: u32,
}

#[derive(Debug, Clone)]
pub struct SpawnSpec<'a> {
    pub argv: &'a [String],
    pub cwd: &'a Path,
    pub input: &'a [u8],
    pub limits: &'a RunLimits,
    pub identity: Option<Identity>,
    pub network: NetworkIsolation,
    /// Virtual address-space ceiling; the resident limit is enforced by sampling.
    pub address_space_bytes: u64,
    pub file_size_bytes: u64,
    pub stderr_cap_bytes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum KillReason {
    Cpu,
    Wall,
    Memory,
}

/// Markers runtimes print when an allocation fails.
const OOM_MARKERS: &[&str] = &[
    "MemoryError",
    "std::bad_alloc",
    "out of memory",
    "Cannot allocate memory",
    "memory allocation failed",
    "heap overflow",
];

pub fn resolve_program(name: &str) -> Option<PathBuf> {
    if name.contains('/') {
        let p = PathBuf::from(name);
        return p.exists().then_some(p);
    }
    let path = std::env::var_os("PATH").unwrap_or_else(|| "/usr/local/bin:/usr/bin:/bin".into());
    std::env::split_paths(&path)
        .map(|dir| dir.join(name))
        .find(|candidate| is_executable(candidate))
}

fn is_executable(p: &Path) -> bool {
    use std::os::unix::fs::PermissionsExt;
    p.metadata()
        .map(|m| m.is_file() && m.permissions().mode() & 0o111 != 0)
        .unwrap_or(false)
}

fn setup_failure(msg: impl Into<String>) -> RunResult {
    RunResult {
        status: RunStatus::SetupFailure(msg.into()),
        stdout: Vec::new(),
        stdout_truncated: false,
        stderr: Vec::new(),
        cpu_ms: 0,
        wall_ms: 0,
        peak_memory_kib: 0,
    }
}

fn set_rlimit(resource: libc::__rlimit_resource_t, value: u64) -> io::Result<()> {
    let lim = libc::rlimit {
        rlim_cur: value,
        rlim_max: value,
    };
    // SAFETY: plain syscall on a stack value.
    if unsafe { libc::setrlimit(resource, &lim) } != 0 {
        return Err(io::Error::last_os_error());
    }
    Ok(())
}

/// Runs one guest to completion. Never panics on guest behaviour; host-side
/// problems come back as `RunStatus::SetupFailure`.
/// The only variable a guest inherits. Toolchains such as gcc locate their
/// helpers through it.
const GUEST_PATH: &str = "/usr/local/bin:/usr/bin:/bin";

pub fn run(spec: &SpawnSpec<'_>) -> RunResult {
    let Some((program, args)) = spec.argv.split_first() else {
        return setup_failure("empty command");
    };
    let Some(program_path) = resolve_program(program) else {
        return setup_failure(format!("program {program:?} not found"));
    };

    let limits = *spec.limits;
    let identity = spec.identity;
    let network = spec.network;
    let address_space = spec.address_space_bytes;
    let file_size = spec.file_size_bytes;
    let memory_bytes = limits.memory_kib.saturating_mul(1024);
    let cpu_secs = limits.cpu_ms.div_ceil(1000) + 1;

    let mut cmd = Command::new(&program_path);
    cmd.arg0(OsStr::new(program))
        .args(args)
        .current_dir(spec.cwd)
        .env_clear()
        .env("PATH", GUEST_PATH)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());

    // SAFETY: the closure runs in the forked child before exec and only
    // issues raw syscalls; it allocates nothing.
    unsafe {
        cmd.pre_exec(move || {
            if libc::setpgid(0, 0) != 0 {
                return Err(io::Error::last_os_error());
            }
            match network {
                NetworkIsolation::Off => {}
                NetworkIsolation::Required | NetworkIsolation::BestEffort => {
                    if libc::unshare(libc::CLONE_NEWNET) != 0
                        && (identity.is_some()
                            || libc::unshare(libc::CLONE_NEWUSER | libc::CLONE_NEWNET) != 0)
                        && network == NetworkIsolation::Required
                    {
                        return Err(io::Error::last_os_error());
                    }
                }
            }
            set_rlimit(libc::RLIMIT_AS, address_space)?;
            set_rlimit(libc::RLIMIT_STACK, memory_bytes.max(8 << 20).min(address_space))?;
            let cpu = libc::rlimit {
                rlim_cur: cpu_secs,
                rlim_max: cpu_secs + 1,
            };
            if libc::setrlimit(libc::RLIMIT_CPU, &cpu) != 0 {
                return Err(io::Error::last_os_error());
            }
            set_rlimit(libc::RLIMIT_FSIZE, file_size)?;
            set_rlimit(libc::RLIMIT_CORE, 0)?;
            set_rlimit(libc::RLIMIT_NOFILE, 256)?;
            if let Some(id) = identity {
                set_rlimit(libc::RLIMIT_NPROC, 128)?;
                if libc::setgroups(0, std::ptr::null()) != 0
                    || libc::setgid(id.gid) != 0
                    || libc::setuid(id.uid) != 0
                {
                    return Err(io::Error::last_os_error());
                }
            }
            libc::prctl(libc::PR_SET_PDEATHSIG, libc::SIGKILL as libc::c_ulong, 0, 0, 0);
            Ok(())
        });
    }

    let start = Instant::now();
    let mut child = match cmd.spawn() {
        Ok(c) => c,
        Err(e) => return setup_failure(format!("spawn {program}: {e}")),
    };
    let pid = child.id() as libc::pid_t;

    let mut stdin = child.stdin.take();
    let mut stdout = child.stdout.take().expect("piped stdout");
    let mut stderr = child.stderr.take().expect("piped stderr");
    for fd in [stdout.as_raw_fd(), stderr.as_raw_fd()]
        .into_iter()
        .chain(stdin.as_ref().map(|s| s.as_raw_fd()))
    {
        set_nonblocking(fd);
    }

    let mut out = Capture::new(limits.output_cap_bytes as usize);
    let mut err = Capture::new(spec.stderr_cap_bytes);
    let mut written = 0usize;
    if spec.input.is_empty() {
        stdin = None;
    }

    let ticks = clock_ticks();
    let page_kib = page_size() / 1024;
    let mut kill_reason = None;
    let mut peak_rss_kib = 0u64;
    let mut peak_vm_kib = 0u64;
    let mut interval = Duration::from_micros(500);
    let mut status: libc::c_int = 0;
    // SAFETY: zeroed rusage is a valid out-parameter.
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    let mut out_open = true;
    let mut err_open = true;

    loop {
        let mut fds = Vec::with_capacity(3);
        if out_open {
            fds.push(pollfd(stdout.as_raw_fd(), libc::POLLIN));
        }
        if err_open {
            fds.push(pollfd(stderr.as_raw_fd(), libc::POLLIN));
        }
        if let Some(s) = &stdin {
            fds.push(pollfd(s.as_raw_fd(), libc::POLLOUT));
        }
        let timeout = interval.as_millis().max(1) as libc::c_int;
        if fds.is_empty() {
            std::thread::sleep(interval);
        } else {
            // SAFETY: fds is a valid slice of pollfd for its length.
            unsafe { libc::poll(fds.as_mut_ptr(), fds.len() as libc::nfds_t, timeout) };
        }

        if out_open {
            out_open = out.drain(&mut stdout);
        }
        if err_open {
            err_open = err.drain(&mut stderr);
        }
        if let Some(s) = stdin.as_mut() {
            match s.write(&spec.input[written..]) {
                Ok(n) => {
                    written += n;
                    if written >= spec.input.len() {
                        stdin = None;
                    }
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => {}
                Err(_) => stdin = None,
            }
        }

        // SAFETY: status and usage are valid out-parameters.
        let r = unsafe { libc::wait4(pid, &mut status, libc::WNOHANG, &mut usage) };
        if r == pid {
            break;
        }
        if r < 0 {
            let e = io::Error::last_os_error();
            if e.kind() != io::ErrorKind::Interrupted {
                kill_group(pid);
                return setup_failure(format!("wait4: {e}"));
            }
        }

        if kill_reason.is_none() {
            let sample = sample_proc(pid, ticks, page_kib);
            if let Some(s) = sample {
                peak_rss_kib = peak_rss_kib.max(s.rss_kib);
                peak_vm_kib = peak_vm_kib.max(s.vm_kib);
                kill_reason = if s.cpu_ms > limits.cpu_ms {
                    Some(KillReason::Cpu)
                } else if s.rss_kib > limits.memory_kib {
                    Some(KillReason::Memory)
                } else {
                    None
                };
            }
            if kill_reason.is_none() && start.elapsed() > Duration::from_millis(limits.wall_ms) {
                kill_reason = Some(KillReason::Wall);
            }
            if kill_reason.is_some() {
                kill_group(pid);
            }
        }
        interval = (interval * 2).min(Duration::from_millis(5));
    }
    let wall_ms = start.elapsed().as_millis() as u64;

    // Anything left in the group (or under the sandbox uid) dies now.
    kill_group(pid);
    if let Some(id) = identity {
        kill_uid(id.uid);
    }
    drop(stdin);
    out.drain(&mut stdout);
    err.drain(&mut stderr);

    let cpu_us = timeval_us(usage.ru_utime) + timeval_us(usage.ru_stime);
    let cpu_ms = cpu_us.div_ceil(1000);
    let maxrss_kib = (usage.ru_maxrss.max(0) as u64).max(peak_rss_kib);
    let stderr_text = String::from_utf8_lossy(&err.buf);
    let oom_marked = OOM_MARKERS.iter().any(|m| stderr_text.contains(m));
    let vm_exhausted = peak_vm_kib.saturating_mul(1024) >= address_space / 10 * 9;

    let exited = libc::WIFEXITED(status);
    let code = libc::WEXITSTATUS(status);
    let signal = if libc::WIFSIGNALED(status) { Some(libc::WTERMSIG(status)) } else { None };

    let status = match kill_reason {
        Some(KillReason::Cpu) | Some(KillReason::Wall) => RunStatus::Timeout,
        Some(KillReason::Memory) => RunStatus::MemoryExceeded,
        None if cpu_ms > limits.cpu_ms || signal == Some(libc::SIGXCPU) => RunStatus::Timeout,
        None if maxrss_kib > limits.memory_kib => RunStatus::MemoryExceeded,
        None if exited && code == 0 => RunStatus::Ok,
        None if oom_marked || vm_exhausted => RunStatus::MemoryExceeded,
        None if exited => RunStatus::NonzeroExit(code),
        None => RunStatus::Killed(signal.unwrap_or(0)),
    };

    RunResult {
        status,
        stdout: out.buf,
        stdout_truncated: out.truncated,
        stderr: err.buf,
        cpu_ms,
        wall_ms,
        peak_memory_kib: maxrss_kib,
    }
}

struct Capture {
    buf: Vec<u8>,
    cap: usize,
    truncated: bool,
}

impl Capture {
    fn new(cap: usize) -> Self {
        Capture {
            buf: Vec::new(),
            cap,
            truncated: false,
        }
    }

    /// Reads whatever is available. Returns `false` at EOF.
    fn drain(&mut self, r: &mut impl Read) -> bool {
        let mut chunk = [0u8; 16 * 1024];
        loop {
            match r.read(&mut chunk) {
                Ok(0) => return false,
                Ok(n) => {
                    let room = self.cap.saturating_sub(self.buf.len());
                    if n > room {
                        self.truncated = true;
                    }
                    self.buf.extend_from_slice(&chunk[..n.min(room)]);
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => return true,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(_) => return false,
            }
        }
    }
}

fn pollfd(fd: libc::c_int, events: libc::c_short) -> libc::pollfd {
    libc::pollfd {
        fd,
        events,
        revents: 0,
    }
}

fn set_nonblocking(fd: libc::c_int) {
    // SAFETY: fcntl on an fd we own.
    unsafe {
        let flags = libc::fcntl(fd, libc::F_GETFL);
        libc::fcntl(fd, libc::F_SETFL, flags | libc::O_NONBLOCK);
    }
}

fn kill_group(pgid: libc::pid_t) {
    // SAFETY: signalling a process group we created.
    unsafe {
        libc::kill(-pgid, libc::SIGKILL);
    }
}

/// Kills every process owned by `uid` from a short-lived helper running as
/// that uid; catches guests that left their process group.
pub fn kill_uid(uid: u32) {
    // SAFETY: the forked child only makes async-signal-safe syscalls and
    // exits without returning into Rust code.
    unsafe {
        let child = libc::fork();
        if child == 0 {
            if libc::setuid(uid) == 0 {
                libc::kill(-1, libc::SIGKILL);
            }
            libc::_exit(0);
        }
        if child > 0 {
            let mut st = 0;
            libc::waitpid(child, &mut st, 0);
        }
    }
}

struct ProcSample {
    cpu_ms: u64,
    rss_kib: u64,
    vm_kib: u64,
}

fn sample_proc(pid: libc::pid_t, ticks: u64, page_kib: u64) -> Option<ProcSample> {
    let stat = std::fs::read_to_string(format!("/proc/{pid}/stat")).ok()?;
    let after = &stat[stat.rfind(')')? + 1..];
    let fields: Vec<&str> = after.split_whitespace().collect();
    // Field 14/15 overall are utime/stime; `after` starts at field 3.
    let utime: u64 = fields.get(11)?.parse().ok()?;
    let stime: u64 = fields.get(12)?.parse().ok()?;
    let statm = std::fs::read_to_string(format!("/proc/{pid}/statm")).ok()?;
    let mut it = statm.split_whitespace();
    let vm_pages: u64 = it.next()?.parse().ok()?;
    let rss_pages: u64 = it.next()?.parse().ok()?;
    Some(ProcSample {
        cpu_ms: (utime + stime) * 1000 / ticks.max(1),
        rss_kib: rss_pages * page_kib,
        vm_kib: vm_pages * page_kib,
    })
}

fn clock_ticks() -> u64 {
    // SAFETY: sysconf has no preconditions.
    let t = unsafe { libc::sysconf(libc::_SC_CLK_TCK) };
    if t > 0 {
        t as u64
    } else {
        100
    }
}

fn page_size() -> u64 {
    // SAFETY: sysconf has no preconditions.
    let p = unsafe { libc::sysconf(libc::_SC_PAGESIZE) };
    if p > 0 {
        p as u64
    } else {
        4096
    }
}

fn timeval_us(tv: libc::timeval) -> u64 {
    (tv.tv_sec.max(0) as u64) * 1_000_000 + tv.tv_usec.max(0) as u64
}

/// Whether the host can create network namespaces for guests.
pub fn probe_network_isolation(as_root: bool) -> bool {
    let mut cmd = Command::new("/bin/true");
    // SAFETY: only raw syscalls in the child.
    unsafe {
        cmd.pre_exec(move || {
            if libc::unshare(libc::CLONE_NEWNET) == 0 {
                return Ok(());
            }
            if !as_root && libc::unshare(libc::CLONE_NEWUSER | libc::CLONE_NEWNET) == 0 {
                return Ok(());
            }
            Err(io::Error::last_os_error())
        });
    }
    cmd.stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}
