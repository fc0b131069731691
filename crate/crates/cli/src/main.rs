mod client;
mod config;
mod serve;

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use client::{field, s, table, Api, OutputMode, Printer};

#[derive(Parser)]
#[command(name = "arena", version, about = "Operate an arena judge server")]
struct Cli {
    /// Server base URL.
    #[arg(long, global = true, env = "ARENA_SERVER", default_value = "http://127.0.0.1:8080")]
    server: String,
    /// File holding the API token. Written by `login`.
    #[arg(long, global = true, env = "ARENA_TOKEN_FILE")]
    token_file: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "human")]
    output: OutputMode,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the judge and API server.
    Serve {
        #[arg(long, short)]
        config: PathBuf,
    },
    /// Obtain a token. The password is read from ARENA_PASSWORD or stdin.
    Login { user: String },
    /// Import a line-delimited problem archive.
    Import { file: PathBuf },
    /// List problems.
    Problems,
    /// Show one problem.
    Problem { pid: String },
    /// Add one explicit test case from two files.
    AddCase {
        pid: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Generate test cases with a generator program.
    GenCases {
        pid: String,
        generator: PathBuf,
        #[arg(long, short, default_value_t = 20)]
        n: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        language: Option<String>,
    },
    /// Run the consistency filter; kept drafts become active.
    Filter {
        pid: String,
        #[arg(long)]
        sample_size: Option<u64>,
        #[arg(long)]
        generator: Option<PathBuf>,
        #[arg(long)]
        language: Option<String>,
    },
    /// Submit a solution file, or a prompt with --prompt.
    Submit {
        pid: String,
        file: Option<PathBuf>,
        #[arg(long, conflicts_with = "file")]
        prompt: Option<String>,
        #[arg(long)]
        language: Option<String>,
        /// Poll until the verdict is final.
        #[arg(long)]
        wait: bool,
    },
    /// Show one submission.
    Submission {
        sid: String,
        #[arg(long)]
        wait: bool,
    },
    /// List submissions.
    Submissions {
        #[arg(long)]
        pid: Option<String>,
        #[arg(long)]
        user: Option<String>,
        #[arg(long)]
        verdict: Option<String>,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Show the current ranking.
    Ranking {
        /// Repeat every N seconds (10 when no value is given).
        #[arg(long, num_args = 0..=1, default_missing_value = "10", value_name = "SECS")]
        watch: Option<u64>,
    },
    #[command(subcommand)]
    Checkpoint(CheckpointCmd),
    /// Print a problem with all its submissions as one JSON line.
    Export { pid: String },
    /// Retire a problem; it stops counting towards scores.
    Retire { pid: String },
    /// Set a problem's status.
    Status { pid: String, status: String },
    #[command(subcommand)]
    User(UserCmd),
    /// Print the API description document.
    Schema,
}

#[derive(Subcommand)]
enum CheckpointCmd {
    /// Take a checkpoint now.
    Create,
    List {
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
    },
    Show { id: String },
}

#[derive(Subcommand)]
enum UserCmd {
    /// Create a user. The password is read from ARENA_PASSWORD or stdin.
    Add {
        name: String,
        #[arg(long)]
        group: String,
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        backend: Option<String>,
    },
    List,
}

fn default_token_file() -> PathBuf {
    let home = std::env::var_os("HOME").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
    home.join(".config").join("arena").join("token")
}

fn read_password() -> Result<String> {
    if let Ok(p) = std::env::var("ARENA_PASSWORD") {
        return Ok(p);
    }
    let mut line = String::new();
    std::io::stdin().lock().read_line(&mut line).context("reading password from stdin")?;
    let p = line.trim_end_matches(['\r', '\n']).to_owned();
    if p.is_empty() {
        bail!("no password given; set ARENA_PASSWORD or pipe it on stdin");
    }
    Ok(p)
}

fn save_token(path: &Path, token: &str) -> Result<()> {
    use std::os::unix::fs::OpenOptionsExt;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::OpenOptions::new()
        .write(true)
        .create(true)
        .truncate(true)
        .mode(0o600)
        .open(path)
        .with_context(|| format!("writing token file {}", path.display()))?;
    f.write_all(token.as_bytes())?;
    Ok(())
}

fn language_for(path: &Path, explicit: Option<String>) -> Result<String> {
    if let Some(l) = explicit {
        return Ok(l);
    }
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    Ok(match ext {
        "py" => "python3",
        "c" => "c",
        "cc" | "cpp" | "cxx" => "cpp",
        "go" => "go",
        "hs" => "haskell",
        _ => bail!("cannot infer language from {}; pass --language", path.display()),
    }
    .to_owned())
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn program(path: &Path, language: Option<String>) -> Result<Value> {
    Ok(json!({"language": language_for(path, language)?, "source": read_file(path)?}))
}

fn is_terminal(verdict: &str) -> bool {
    !matches!(verdict, "Queued" | "Judging")
}

fn wait_for(api: &Api, sid: &str) -> Result<Value> {
    let mut delay = Duration::from_millis(200);
    loop {
        let sub = api.get(&format!("/api/submission/{sid}"))?;
        if is_terminal(s(&sub, "verdict")) {
            return Ok(sub);
        }
        std::thread::sleep(delay);
        delay = (delay * 2).min(Duration::from_secs(2));
    }
}

fn show_problem(p: &Value) -> String {
    let mut out = format!(
        "{}  {}\nstatus {}  difficulty {}  bps {}  cpu {} ms  memory {} KiB  cases {}\nsolved {}/{}  acceptance {}\n\n{}",
        s(p, "pid"),
        s(p, "title"),
        s(p, "status"),
        s(p, "difficulty"),
        s(p, "bps"),
        field(p, "cpu_limit_ms"),
        field(p, "memory_limit_kib"),
        field(p, "case_count"),
        field(&p["stats"], "solved"),
        field(&p["stats"], "total"),
        p["stats"]["ac"].as_str().map_or("-".to_owned(), |a| format!("{a}%")),
        s(p, "statement"),
    );
    if let Some(sols) = p["canonical_solutions"].as_array() {
        out.push_str(&format!("\n\n{} canonical solution(s)", sols.len()));
    }
    out
}

fn show_submission(v: &Value) -> String {
    let mut out = format!(
        "{}  {}  {} by {}  {}  cpu {} ms  peak {} KiB",
        s(v, "submission_id"),
        s(v, "verdict"),
        s(v, "pid"),
        s(v, "user"),
        s(v, "language"),
        field(v, "total_cpu_ms"),
        field(v, "peak_memory_kib"),
    );
    if let Some(d) = v["detail"].as_str() {
        out.push_str(&format!("\n{d}"));
    }
    let rows = v["case_results"]
        .as_array()
        .map(|cases| {
            cases
                .iter()
                .map(|c| vec![s(c, "case_id").to_owned(), s(c, "outcome").to_owned(), field(c, "cpu_ms"), field(c, "memory_kib")])
                .collect::<Vec<_>>()
        })
        .unwrap_or_default();
    if !rows.is_empty() {
        out.push('\n');
        out.push_str(&table(&["CASE", "OUTCOME", "CPU_MS", "MEM_KIB"], rows));
    }
    out
}

fn submission_rows(list: &Value) -> String {
    let rows = list
        .as_array()
        .into_iter()
        .flatten()
        .map(|v| {
            vec![
                s(v, "submission_id").to_owned(),
                s(v, "pid").to_owned(),
                s(v, "uid").to_owned(),
                s(v, "verdict").to_owned(),
                field(v, "total_cpu_ms"),
                s(v, "submitted_at").to_owned(),
            ]
        })
        .collect();
    table(&["SID", "PID", "UID", "VERDICT", "CPU_MS", "SUBMITTED"], rows)
}

fn ranking_rows(list: &Value) -> String {
    let rows = list
        .as_array()
        .into_iter()
        .flatten()
        .map(|r| {
            vec![
                field(r, "rank"),
                s(r, "user").to_owned(),
                s(r, "dp").to_owned(),
                format!("{}%", s(r, "pass")),
                field(r, "solved"),
            ]
        })
        .collect();
    table(&["RANK", "USER", "DP", "PASS", "SOLVED"], rows)
}

fn checkpoint_summary(c: &Value) -> String {
    format!(
        "{}  {}  audit {}",
        s(c, "checkpoint_id"),
        s(c, "taken_at"),
        if c["audit_matched"] == true { "matched" } else { "MISMATCH" }
    )
}

fn encode(v: &str) -> String {
    let mut out = String::new();
    for b in v.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' | b':' => out.push(b as char),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

fn query(pairs: &[(&str, Option<String>)]) -> String {
    let parts: Vec<String> = pairs
        .iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| format!("{k}={}", encode(v))))
        .collect();
    if parts.is_empty() {
        String::new()
    } else {
        format!("?{}", parts.join("&"))
    }
}

fn run(cli: Cli) -> Result<()> {
    let out = Printer { mode: cli.output };
    let token_file = cli.token_file.clone().unwrap_or_else(default_token_file);
    let token = std::env::var("ARENA_TOKEN")
        .ok()
        .or_else(|| std::fs::read_to_string(&token_file).ok().map(|t| t.trim().to_owned()));

    if let Command::Serve { config } = &cli.command {
        return serve::run(config);
    }
    if let Command::Login { user } = &cli.command {
        let api = Api::new(&cli.server, None)?;
        let password = read_password()?;
        let doc = api.post("/api/authentication/", &json!({"username": user, "password": password}))?;
        save_token(&token_file, s(&doc, "token"))?;
        // The token itself is never printed.
        let shown = json!({"uid": doc["uid"], "group": doc["group"], "token_file": token_file});
        out.emit(&shown, |_| {
            format!("logged in as {user} ({}); token saved to {}", s(&doc, "group"), token_file.display())
        });
        return Ok(());
    }

    if token.is_none() {
        bail!("not logged in; run `arena login <user>` or pass --token-file");
    }
    let api = Api::new(&cli.server, token)?;
    match cli.command {
        Command::Serve { .. } | Command::Login { .. } => unreachable!(),
        Command::Import { file } => {
            let report = api.post_text("/api/import", read_file(&file)?)?;
            out.emit(&report, |r| {
                let rejected = r["rejected"].as_array().cloned().unwrap_or_default();
                let mut text = format!("accepted {}, rejected {}", field(r, "accepted"), rejected.len());
                for rej in &rejected {
                    text.push_str(&format!("\n  line {}: {} {}", field(rej, "line"), field(rej, "pid"), s(rej, "reason")));
                }
                text
            });
        }
        Command::Problems => {
            let list = api.get("/api/problem/?limit=1000")?;
            out.emit(&list, |l| {
                let rows = l
                    .as_array()
                    .into_iter()
                    .flatten()
                    .map(|p| {
                        vec![
                            s(p, "pid").to_owned(),
                            s(p, "status").to_owned(),
                            s(p, "difficulty").to_owned(),
                            s(p, "title").to_owned(),
                        ]
                    })
                    .collect();
                table(&["PID", "STATUS", "DIFFICULTY", "TITLE"], rows)
            });
        }
        Command::Problem { pid } => {
            let p = api.get(&format!("/api/problem/{}/", encode(&pid)))?;
            out.emit(&p, show_problem);
        }
        Command::AddCase { pid, input, output } => {
            let body = json!({"input": read_file(&input)?, "output": read_file(&output)?});
            let ids = api.post(&format!("/api/problem/{}/case", encode(&pid)), &body)?;
            out.emit(&ids, |v| format!("added case {}", field(&v["case_ids"], "0")));
        }
        Command::GenCases {
            pid,
            generator,
            n,
            seed,
            language,
        } => {
            let body = json!({"generator": program(&generator, language)?, "n": n, "seed0": seed});
            let ids = api.post(&format!("/api/problem/{}/case", encode(&pid)), &body)?;
            out.emit(&ids, |v| {
                format!("generated {} case(s) for {pid}", v["case_ids"].as_array().map_or(0, Vec::len))
            });
        }
        Command::Filter {
            pid,
            sample_size,
            generator,
            language,
        } => {
            let mut body = json!({});
            if let Some(n) = sample_size {
                body["sample_size"] = json!(n);
            }
            if let Some(g) = generator {
                body["generator"] = program(&g, language)?;
            }
            let r = api.post(&format!("/api/problem/{}/filter", encode(&pid)), &body)?;
            out.emit(&r, |r| format!("{}: {} (status {})", s(r, "pid"), s(r, "decision"), s(r, "status")));
        }
        Command::Submit {
            pid,
            file,
            prompt,
            language,
            wait,
        } => {
            let body = match (file, prompt) {
                (Some(f), None) => {
                    json!({"pid": pid, "language": language_for(&f, language)?, "mode": "code", "source": read_file(&f)?})
                }
                (None, Some(p)) => {
                    let Some(language) = language else {
                        bail!("--prompt needs --language");
                    };
                    json!({"pid": pid, "language": language, "mode": "prompt", "source": p})
                }
                _ => bail!("give a solution file or --prompt"),
            };
            let r = api.post("/api/submission", &body)?;
            let sid = s(&r, "submission_id").to_owned();
            if wait {
                let sub = wait_for(&api, &sid)?;
                out.emit(&sub, show_submission);
            } else {
                out.emit(&r, |_| format!("submitted {sid}"));
            }
        }
        Command::Submission { sid, wait } => {
            let sub = if wait {
                wait_for(&api, &sid)?
            } else {
                api.get(&format!("/api/submission/{}", encode(&sid)))?
            };
            out.emit(&sub, show_submission);
        }
        Command::Submissions {
            pid,
            user,
            verdict,
            limit,
        } => {
            let q = query(&[
                ("pid", pid),
                ("user", user),
                ("verdict", verdict),
                ("limit", limit.map(|l| l.to_string())),
            ]);
            let list = api.get(&format!("/api/submission/{q}"))?;
            out.emit(&list, submission_rows);
        }
        Command::Ranking { watch } => loop {
            let list = api.get("/api/ranking?limit=1000")?;
            out.emit(&list, ranking_rows);
            match watch {
                Some(secs) => {
                    std::io::stdout().flush()?;
                    std::thread::sleep(Duration::from_secs(secs.max(1)));
                    if out.mode == OutputMode::Human {
                        println!();
                    }
                }
                None => break,
            }
        },
        Command::Checkpoint(cmd) => match cmd {
            CheckpointCmd::Create => {
                let cp = api.post("/api/checkpoint", &json!({}))?;
                out.emit(&cp, |c| format!("{}\n{}", checkpoint_summary(c), ranking_rows(&c["entries"])));
            }
            CheckpointCmd::List { from, to } => {
                let list = api.get(&format!("/api/checkpoint/{}", query(&[("from", from), ("to", to)])))?;
                out.emit(&list, |l| {
                    l.as_array()
                        .into_iter()
                        .flatten()
                        .map(|c| format!("{}  users {}", checkpoint_summary(c), field(c, "users")))
                        .collect::<Vec<_>>()
                        .join("\n")
                });
            }
            CheckpointCmd::Show { id } => {
                let cp = api.get(&format!("/api/checkpoint/{}", encode(&id)))?;
                out.emit(&cp, |c| format!("{}\n{}", checkpoint_summary(c), ranking_rows(&c["entries"])));
            }
        },
        Command::Export { pid } => {
            let text = api.get_text(&format!("/api/problem/{}/export", encode(&pid)))?;
            print!("{text}");
        }
        Command::Retire { pid } => set_status(&api, &out, &pid, "retired")?,
        Command::Status { pid, status } => set_status(&api, &out, &pid, &status)?,
        Command::User(cmd) => match cmd {
            UserCmd::Add {
                name,
                group,
                kind,
                backend,
            } => {
                let password = read_password()?;
                let mut body = json!({"name": name, "password": password, "group": group});
                if let Some(k) = kind {
                    body["kind"] = json!(k);
                }
                if let Some(b) = backend {
                    body["backend"] = json!(b);
                }
                let u = api.post("/api/user/", &body)?;
                out.emit(&u, |u| format!("created {} {} ({})", s(u, "group"), s(u, "name"), s(u, "uid")));
            }
            UserCmd::List => {
                let list = api.get("/api/user/?limit=1000")?;
                out.emit(&list, |l| {
                    let rows = l
                        .as_array()
                        .into_iter()
                        .flatten()
                        .map(|u| {
                            vec![
                                s(u, "uid").to_owned(),
                                s(u, "name").to_owned(),
                                s(u, "group").to_owned(),
                                s(u, "kind").to_owned(),
                                s(u, "attempt_policy").to_owned(),
                                field(u, "backend"),
                            ]
                        })
                        .collect();
                    table(&["UID", "NAME", "GROUP", "KIND", "ATTEMPTS", "BACKEND"], rows)
                });
            }
        },
        Command::Schema => {
            let doc = api.get("/api/schema")?;
            out.emit(&doc, |d| serde_json::to_string_pretty(d).unwrap_or_default());
        }
    }
    Ok(())
}

fn set_status(api: &Api, out: &Printer, pid: &str, status: &str) -> Result<()> {
    let p = api.post(&format!("/api/problem/{}/status", encode(pid)), &json!({"status": status}))?;
    out.emit(&p, |p| format!("{} is now {}", s(p, "pid"), s(p, "status")));
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(client::exit_code(&e))
        }
    }
}
