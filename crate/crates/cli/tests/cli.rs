use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_arena");
const SUM: &str = "a, b = map(int, input().split())\nprint(a + b)\n";
const SLOW_SUM: &str = "import time\nt = time.process_time()\nwhile time.process_time() - t < 0.4:\n    pass\na, b = map(int, input().split())\nprint(a + b)\n";

fn config(dir: &Path, extra: &str) -> PathBuf {
    let text = format!(
        r#"bind = "127.0.0.1:0"
store = "store"
workers = 1
drain_timeout_secs = 2

[[users]]
name = "admin"
password = "admin-pw"
group = "curator"

[[users]]
name = "alice"
password = "alice-pw"
group = "generator"
kind = "human"

[[users]]
name = "bot"
password = "bot-pw"
group = "generator"
kind = "machine"
{extra}"#
    );
    let path = dir.join("arena.toml");
    std::fs::write(&path, text).unwrap();
    path
}

struct Server {
    child: Child,
    url: String,
    log: Arc<Mutex<String>>,
}

impl Server {
    fn start(config: &Path) -> Server {
        let mut child = Command::new(BIN)
            .args(["serve", "--config"])
            .arg(config)
            .env("RUST_LOG", "info")
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .unwrap();
        let log = Arc::new(Mutex::new(String::new()));
        let stderr = child.stderr.take().unwrap();
        let sink = log.clone();
        std::thread::spawn(move || {
            for line in BufReader::new(stderr).lines().map_while(Result::ok) {
                sink.lock().unwrap().push_str(&line);
                sink.lock().unwrap().push('\n');
            }
        });
        let mut stdout = BufReader::new(child.stdout.take().unwrap());
        let mut line = String::new();
        stdout.read_line(&mut line).unwrap();
        let url = line
            .trim()
            .strip_prefix("arena ready on ")
            .unwrap_or_else(|| panic!("no readiness line: {line:?}; log: {}", log.lock().unwrap()))
            .to_owned();
        let sink = log.clone();
        std::thread::spawn(move || {
            for line in stdout.lines().map_while(Result::ok) {
                sink.lock().unwrap().push_str(&line);
            }
        });
        Server { child, url, log }
    }

    fn signal(&self, sig: &str) {
        let status = Command::new("kill").args([sig, &self.child.id().to_string()]).status().unwrap();
        assert!(status.success());
    }

    fn wait_exit(&mut self, within: Duration) -> std::process::ExitStatus {
        let deadline = Instant::now() + within;
        loop {
            if let Some(st) = self.child.try_wait().unwrap() {
                return st;
            }
            assert!(Instant::now() < deadline, "server did not exit");
            std::thread::sleep(Duration::from_millis(50));
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Runs the CLI against `server` with a per-user token file.
struct Cli {
    server: String,
    token_file: PathBuf,
}

impl Cli {
    fn new(server: &str, dir: &Path, user: &str) -> Cli {
        Cli {
            server: server.to_owned(),
            token_file: dir.join(format!("{user}.token")),
        }
    }

    fn run(&self, args: &[&str], password: Option<&str>) -> Output {
        let mut cmd = Command::new(BIN);
        cmd.arg("--server")
            .arg(&self.server)
            .arg("--token-file")
            .arg(&self.token_file)
            .args(args)
            .env_remove("ARENA_TOKEN")
            .env_remove("ARENA_PASSWORD")
            .env("RUST_LOG", "warn");
        if let Some(p) = password {
            cmd.env("ARENA_PASSWORD", p);
        }
        cmd.output().unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args, None);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    }

    fn structured(&self, args: &[&str]) -> Vec<Value> {
        let mut full = vec!["--output", "structured"];
        full.extend_from_slice(args);
        self.ok(&full)
            .lines()
            .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("{l}: {e}")))
            .collect()
    }

    fn login(&self, user: &str, password: &str) -> String {
        let out = self.run(&["login", user], Some(password));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(&self.token_file).unwrap()
    }
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn record(pid: &str) -> String {
    json!({
        "pid": pid,
        "title": format!("sum {pid}"),
        "statement": "print a + b",
        "bps": 5,
        "canonical_solutions": [{"language": "python3", "source": SUM}],
        "test_cases": [{"input": "MSAyCg==", "output": "Mwo="}, {"input": "MTAgMjAK", "output": "MzAK"}],
    })
    .to_string()
}

/// Forwards TCP connections to `upstream`, recording request lines.
struct Proxy {
    url: String,
    requests: Arc<Mutex<Vec<String>>>,
}

impl Proxy {
    fn start(upstream: &str) -> Proxy {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let upstream = upstream.trim_start_matches("http://").to_owned();
        let requests = Arc::new(Mutex::new(Vec::new()));
        let seen = requests.clone();
        std::thread::spawn(move || {
            for client in listener.incoming().map_while(Result::ok) {
                let server = TcpStream::connect(&upstream).unwrap();
                let (mut c_read, mut s_write) = (client.try_clone().unwrap(), server.try_clone().unwrap());
                let (mut s_read, mut c_write) = (server, client);
                let seen = seen.clone();
                std::thread::spawn(move || {
                    let mut buf = [0u8; 8192];
                    while let Ok(n) = c_read.read(&mut buf) {
                        if n == 0 {
                            break;
                        }
                        let chunk = String::from_utf8_lossy(&buf[..n]).into_owned();
                        for line in chunk.lines() {
                            if line.starts_with("GET ") || line.starts_with("POST ") {
                                seen.lock().unwrap().push(line.trim_end_matches(" HTTP/1.1").to_owned());
                            }
                        }
                        if s_write.write_all(&buf[..n]).is_err() {
                            break;
                        }
                    }
                    let _ = s_write.shutdown(std::net::Shutdown::Write);
                });
                std::thread::spawn(move || {
                    let _ = std::io::copy(&mut s_read, &mut c_write);
                    let _ = c_write.shutdown(std::net::Shutdown::Write);
                });
            }
        });
        Proxy { url, requests }
    }

    fn take(&self) -> Vec<String> {
        std::mem::take(&mut *self.requests.lock().unwrap())
    }
}

fn http_get(url: &str, token: &str) -> Value {
    reqwest::blocking::Client::new()
        .get(url)
        .header("Authorization", format!("Token {token}"))
        .send()
        .unwrap()
        .text()
        .map(|t| serde_json::from_str(&t).unwrap())
        .unwrap()
}

#[test]
fn missing_runtime_registry_exits_2_with_filename() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let text = std::fs::read_to_string(&cfg).unwrap();
    std::fs::write(&cfg, format!("runtimes = \"no-such-runtimes.json\"\n{text}")).unwrap();
    let out = Command::new(BIN).args(["serve", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no-such-runtimes.json"), "{err}");

    std::fs::write(&cfg, "store = 3\n").unwrap();
    let out = Command::new(BIN).args(["serve", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let out = Command::new(BIN).args(["serve", "--config", "/nonexistent/arena.toml"]).output().unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn operator_workflow_through_the_api() {
    let dir = tempfile::tempdir().unwrap();
    let srv = Server::start(&config(dir.path(), ""));
    let proxy = Proxy::start(&srv.url);
    let admin = Cli::new(&proxy.url, dir.path(), "admin");
    let alice = Cli::new(&proxy.url, dir.path(), "alice");
    let bot = Cli::new(&proxy.url, dir.path(), "bot");

    let bad = admin.run(&["login", "admin"], Some("wrong"));
    assert_eq!(code(&bad), 1);
    let admin_token = admin.login("admin", "admin-pw");
    let alice_token = alice.login("alice", "alice-pw");
    let bot_token = bot.login("bot", "bot-pw");
    assert_eq!(admin_token.len(), 43);
    assert_eq!(std::fs::metadata(&admin.token_file).unwrap().permissions().mode() & 0o777, 0o600);
    assert_eq!(proxy.take().len(), 4, "one request per login attempt");

    let archive = dir.path().join("fixtures.jsonl");
    std::fs::write(&archive, [record("p1"), record("p2"), record("p3")].join("\n")).unwrap();
    assert_eq!(admin.ok(&["import", archive.to_str().unwrap()]).trim(), "accepted 3, rejected 0");
    assert_eq!(proxy.take(), ["POST /api/import"]);
    let denied = alice.run(&["import", archive.to_str().unwrap()], None);
    assert_eq!(code(&denied), 1, "403 is a client error");
    for pid in ["p1", "p2", "p3"] {
        assert!(admin.ok(&["filter", pid]).contains("keep"));
    }

    // Structured output equals the API response.
    let listed = alice.structured(&["problems"]);
    let api = http_get(&format!("{}/api/problem/?limit=1000", srv.url), &alice_token);
    assert_eq!(Value::Array(listed), api);
    let detail = alice.structured(&["problem", "p1"]);
    assert_eq!(detail, [http_get(&format!("{}/api/problem/p1/", srv.url), &alice_token)]);

    let sol = dir.path().join("sol.py");
    std::fs::write(&sol, SUM).unwrap();
    let submitted = alice.structured(&["submit", "p1", sol.to_str().unwrap()]);
    let sid = submitted[0]["submission_id"].as_str().unwrap().to_owned();
    let shown = alice.ok(&["submission", &sid, "--wait"]);
    assert!(shown.contains("Accepted"), "{shown}");
    let wrong = dir.path().join("wrong.py");
    std::fs::write(&wrong, "print(0)\n").unwrap();
    alice.ok(&["submit", "p2", wrong.to_str().unwrap(), "--wait"]);

    assert!(bot.ok(&["submit", "p1", sol.to_str().unwrap()]).starts_with("submitted "));
    let again = bot.run(&["submit", "p1", sol.to_str().unwrap()], None);
    assert_eq!(code(&again), 3, "{}", String::from_utf8_lossy(&again.stderr));
    assert!(String::from_utf8_lossy(&again.stderr).contains("attempt"));
    let unknown = bot.run(&["submission", "nope"], None);
    assert_eq!(code(&unknown), 1);
    let sids = bot.structured(&["submissions", "--user", "bot"]);
    bot.ok(&["submission", sids[0]["submission_id"].as_str().unwrap(), "--wait"]);

    let ranking = alice.structured(&["ranking"]);
    assert_eq!(Value::Array(ranking.clone()), http_get(&format!("{}/api/ranking?limit=1000", srv.url), &bot_token));
    assert_eq!(ranking.len(), 2);
    let human = alice.ok(&["ranking"]);
    assert!(human.starts_with("RANK") && human.contains("alice"), "{human}");

    let cp = admin.structured(&["checkpoint", "create"]);
    assert_eq!(cp[0]["audit_matched"], true);
    let id = cp[0]["checkpoint_id"].as_str().unwrap();
    assert_eq!(admin.structured(&["checkpoint", "show", id]), cp);
    assert_eq!(admin.structured(&["checkpoint", "list"]).len(), 1);

    let export = admin.ok(&["export", "p1"]);
    let line: Value = serde_json::from_str(export.trim()).unwrap();
    assert_eq!(line["pid"], "p1");
    assert_eq!(line["submissions"].as_array().unwrap().len(), 2);

    assert!(admin.ok(&["retire", "p3"]).contains("retired"));
    let out = admin.run(&["user", "add", "carol", "--group", "reader"], Some("carol-pw"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(admin.structured(&["user", "list"]).len(), 4);
    let schema = alice.structured(&["schema"]);
    assert_eq!(schema[0]["version"], 1);

    // Every command went over HTTP.
    let recorded = proxy.take();
    for expected in [
        "GET /api/problem/?limit=1000",
        "POST /api/submission",
        "GET /api/ranking?limit=1000",
        "POST /api/checkpoint",
        "GET /api/problem/p1/export",
        "POST /api/problem/p3/status",
        "POST /api/user/",
    ] {
        assert!(recorded.iter().any(|r| r == expected), "{expected} not in {recorded:?}");
    }

    // Unreachable server.
    let down = Cli::new("http://127.0.0.1:9", dir.path(), "admin");
    assert_eq!(code(&down.run(&["problems"], None)), 2);

    // Tokens never appear in CLI output or server logs.
    let mut outputs = String::new();
    for (cli, args) in [(&admin, vec!["login", "admin"]), (&alice, vec!["--output", "structured", "login", "alice"])] {
        let pw = if cli.token_file.ends_with("admin.token") { "admin-pw" } else { "alice-pw" };
        let out = cli.run(&args, Some(pw));
        outputs.push_str(&String::from_utf8_lossy(&out.stdout));
        outputs.push_str(&String::from_utf8_lossy(&out.stderr));
    }
    let fresh = std::fs::read_to_string(&admin.token_file).unwrap();
    let log = srv.log.lock().unwrap().clone();
    for token in [&admin_token, &alice_token, &bot_token, &fresh] {
        assert!(!outputs.contains(token.as_str()));
        assert!(!log.contains(token.as_str()));
    }
}

fn wait_all_terminal(cli: &Cli, n: usize, within: Duration) -> Vec<Value> {
    let deadline = Instant::now() + within;
    loop {
        let subs = cli.structured(&["submissions"]);
        if subs.len() == n && subs.iter().all(|s| !matches!(s["verdict"].as_str(), Some("Queued" | "Judging"))) {
            return subs;
        }
        assert!(Instant::now() < deadline, "submissions not judged: {subs:?}");
        std::thread::sleep(Duration::from_millis(200));
    }
}

fn restart_scenario(signal: &str) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let mut srv = Server::start(&cfg);
    let admin = Cli::new(&srv.url, dir.path(), "admin");
    let alice = Cli::new(&srv.url, dir.path(), "alice");
    admin.login("admin", "admin-pw");
    alice.login("alice", "alice-pw");
    let archive = dir.path().join("fixtures.jsonl");
    std::fs::write(&archive, record("p1")).unwrap();
    admin.ok(&["import", archive.to_str().unwrap()]);
    admin.ok(&["filter", "p1"]);
    let sol = dir.path().join("slow.py");
    std::fs::write(&sol, SLOW_SUM).unwrap();
    const N: usize = 6;
    for _ in 0..N {
        alice.ok(&["submit", "p1", sol.to_str().unwrap()]);
    }
    // Let judging start, then stop the server with work still queued.
    std::thread::sleep(Duration::from_millis(600));
    srv.signal(signal);
    let status = srv.wait_exit(Duration::from_secs(30));
    if signal == "-TERM" {
        assert!(status.success(), "{status:?}: {}", srv.log.lock().unwrap());
    }
    drop(srv);

    let srv = Server::start(&cfg);
    let alice = Cli::new(&srv.url, dir.path(), "alice");
    let subs = wait_all_terminal(&alice, N, Duration::from_secs(120));
    for s in &subs {
        assert_eq!(s["verdict"], "Accepted", "{s}");
    }
}

#[test]
fn graceful_shutdown_persists_queue_and_resumes() {
    restart_scenario("-TERM");
}

#[test]
fn killed_server_resumes_interrupted_work() {
    restart_scenario("-KILL");
}

#[test]
fn commands_without_login_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cli = Cli::new("http://127.0.0.1:9", dir.path(), "nobody");
    let out = cli.run(&["problems"], None);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("login"));
}
