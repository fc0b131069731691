//! A live server on an ephemeral port plus a small blocking client.

#![allow(dead_code)]

use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use arena_api::AppState;
use arena_core::judge::BackendRegistry;
use arena_core::model::{GeneratorKind, UserGroup};
use arena_core::sandbox::{default_registry, Sandbox, SandboxConfig};
use arena_core::store::Store;
use arena_core::{Arena, ArenaOptions};
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde_json::{json, Value};
use tokio::sync::oneshot;

pub struct Server {
    pub base: String,
    pub arena: Arc<Arena>,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl Server {
    pub fn start(store: Arc<Store>, backends: BackendRegistry) -> Server {
        let sandbox = Arc::new(Sandbox::new(SandboxConfig::default(), default_registry()).unwrap());
        let arena = Arc::new(Arena::start(store, sandbox, backends, ArenaOptions::default()).unwrap());
        let state = AppState::new(arena.clone());
        let (stop, stopped) = oneshot::channel::<()>();
        let (ready_tx, ready_rx) = std::sync::mpsc::channel();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                ready_tx.send(listener.local_addr().unwrap()).unwrap();
                arena_api::serve(listener, state, async {
                    let _ = stopped.await;
                })
                .await
                .unwrap();
            });
        });
        let addr = ready_rx.recv().unwrap();
        Server {
            base: format!("http://{addr}"),
            arena,
            stop: Some(stop),
            thread: Some(thread),
        }
    }

    pub fn in_memory() -> Server {
        Server::start(Arc::new(Store::in_memory()), BackendRegistry::new())
    }

    pub fn store(&self) -> &Store {
        self.arena.store()
    }

    /// Creates a user directly in the store and logs them in over HTTP.
    pub fn user(&self, name: &str, group: UserGroup, kind: GeneratorKind) -> Client {
        self.store().create_user(name, "pw", group, kind, None).unwrap();
        self.login(name, "pw")
    }

    pub fn curator(&self, name: &str) -> Client {
        self.user(name, UserGroup::Curator, GeneratorKind::None)
    }

    pub fn login(&self, name: &str, password: &str) -> Client {
        let mut c = Client::anonymous(&self.base);
        let (status, body) = c.post("/api/authentication/", &json!({"username": name, "password": password}));
        assert_eq!(status, 200, "{body}");
        c.token = Some(body["token"].as_str().unwrap().to_owned());
        c.uid = body["uid"].as_str().unwrap().to_owned();
        c
    }

    pub fn wait_idle(&self) {
        assert!(self.arena.wait_idle(Duration::from_secs(300)), "judge queue did not drain");
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
        self.arena.shutdown(Duration::from_secs(10));
    }
}

pub struct Client {
    http: reqwest::blocking::Client,
    pub base: String,
    pub token: Option<String>,
    pub uid: String,
}

impl Client {
    pub fn anonymous(base: &str) -> Client {
        Client {
            http: reqwest::blocking::Client::builder().timeout(Duration::from_secs(60)).build().unwrap(),
            base: base.to_owned(),
            token: None,
            uid: String::new(),
        }
    }

    pub fn with_token(&self, token: &str) -> Client {
        let mut c = Client::anonymous(&self.base);
        c.token = Some(token.to_owned());
        c
    }

    fn send(&self, rb: reqwest::blocking::RequestBuilder) -> (u16, String) {
        let rb = match &self.token {
            Some(t) => rb.header("Authorization", format!("Token {t}")),
            None => rb,
        };
        let resp = rb.send().unwrap();
        let status = resp.status().as_u16();
        (status, resp.text().unwrap())
    }

    pub fn get_raw(&self, path: &str) -> (u16, String) {
        self.send(self.http.get(format!("{}{path}", self.base)))
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        let (s, text) = self.get_raw(path);
        (s, parse(&text))
    }

    pub fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        self.post_raw(path, body.to_string())
    }

    pub fn post_raw(&self, path: &str, body: String) -> (u16, Value) {
        let (s, text) = self.send(
            self.http
                .post(format!("{}{path}", self.base))
                .header("Content-Type", "application/json")
                .body(body),
        );
        (s, parse(&text))
    }

    pub fn submit(&self, pid: &str, source: &str) -> (u16, Value) {
        self.post("/api/submission", &json!({"pid": pid, "language": "python3", "source": source}))
    }

    pub fn submission(&self, sid: &str) -> Value {
        let (s, body) = self.get(&format!("/api/submission/{sid}"));
        assert_eq!(s, 200, "{body}");
        body
    }
}

fn parse(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_owned()))
}

pub const SUM: &str = "a, b = map(int, input().split())\nprint(a + b)\n";

/// A problem record with python3 canonical solutions and explicit cases.
pub fn record(pid: &str, canon: &[&str], cases: &[(&str, &str)]) -> Value {
    json!({
        "pid": pid,
        "title": format!("problem {pid}"),
        "statement": "read the input, print the answer",
        "bps": 5,
        "cpu_limit_ms": 2000,
        "memory_limit_kib": 131072,
        "canonical_solutions": canon.iter().map(|s| json!({"language": "python3", "source": s})).collect::<Vec<_>>(),
        "test_cases": cases.iter().map(|(i, o)| json!({"input": STANDARD.encode(i), "output": STANDARD.encode(o)})).collect::<Vec<_>>(),
    })
}

/// Imports `records` and runs the consistency filter on each, returning the decisions.
pub fn import_and_filter(curator: &Client, records: &[Value]) -> Vec<String> {
    let archive = records.iter().map(Value::to_string).collect::<Vec<_>>().join("\n");
    let (s, report) = curator.post_raw("/api/import", archive);
    assert_eq!(s, 200, "{report}");
    assert_eq!(report["accepted"], records.len(), "{report}");
    records
        .iter()
        .map(|r| {
            let pid = r["pid"].as_str().unwrap();
            let (s, body) = curator.post(&format!("/api/problem/{pid}/filter"), &json!({"sample_size": 5}));
            assert_eq!(s, 200, "{body}");
            body["decision"].as_str().unwrap().to_owned()
        })
        .collect()
}
