//! Blocking HTTP client for the arena API and output rendering.

use std::time::Duration;

use reqwest::blocking::{Client, RequestBuilder};
use serde_json::Value;

use arena_api::ErrorDoc;

/// A non-2xx response.
#[derive(Debug, thiserror::Error)]
#[error("server returned {status} {}: {}", doc.error, doc.message)]
pub struct HttpFailure {
    pub status: u16,
    pub doc: ErrorDoc,
}

#[derive(Debug, thiserror::Error)]
#[error("cannot reach {url}: {message}")]
pub struct Unreachable {
    pub url: String,
    pub message: String,
}

/// 1 client error, 2 server or configuration error, 3 policy violation.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(f) = err.downcast_ref::<HttpFailure>() {
        return match f.status {
            409 => 3,
            500.. => 2,
            _ => 1,
        };
    }
    if err.downcast_ref::<Unreachable>().is_some() || err.downcast_ref::<crate::config::ConfigError>().is_some() {
        return 2;
    }
    1
}

pub struct Api {
    http: Client,
    base: String,
    token: Option<String>,
}

impl Api {
    pub fn new(base: &str, token: Option<String>) -> anyhow::Result<Self> {
        Ok(Api {
            http: Client::builder().timeout(Duration::from_secs(120)).build()?,
            base: base.trim_end_matches('/').to_owned(),
            token,
        })
    }

    fn send(&self, rb: RequestBuilder, url: &str) -> anyhow::Result<String> {
        let rb = match &self.token {
            Some(t) => rb.header("Authorization", format!("Token {t}")),
            None => rb,
        };
        let resp = rb.send().map_err(|e| Unreachable {
            url: url.to_owned(),
            // reqwest errors can carry the URL but never headers.
            message: e.to_string(),
        })?;
        let status = resp.status().as_u16();
        let text = resp.text()?;
        if (200..300).contains(&status) {
            return Ok(text);
        }
        let doc = serde_json::from_str(&text).unwrap_or_else(|_| ErrorDoc {
            error: "http".into(),
            message: text.trim().to_owned(),
        });
        Err(HttpFailure { status, doc }.into())
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub fn get_text(&self, path: &str) -> anyhow::Result<String> {
        let url = self.url(path);
        self.send(self.http.get(&url), &url)
    }

    pub fn get(&self, path: &str) -> anyhow::Result<Value> {
        Ok(serde_json::from_str(&self.get_text(path)?)?)
    }

    pub fn post(&self, path: &str, body: &Value) -> anyhow::Result<Value> {
        self.post_text(path, body.to_string())
    }

    pub fn post_text(&self, path: &str, body: String) -> anyhow::Result<Value> {
        let url = self.url(path);
        let text = self.send(
            self.http.post(&url).header("Content-Type", "application/json").body(body),
            &url,
        )?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputMode {
    Human,
    /// One JSON document per line; list responses emit one line per element.
    Structured,
}

pub struct Printer {
    pub mode: OutputMode,
}

impl Printer {
    pub fn emit(&self, value: &Value, human: impl FnOnce(&Value) -> String) {
        match self.mode {
            OutputMode::Structured => match value {
                Value::Array(items) => {
                    for item in items {
                        println!("{item}");
                    }
                }
                other => println!("{other}"),
            },
            OutputMode::Human => {
                let text = human(value);
                if !text.is_empty() {
                    println!("{}", text.trim_end());
                }
            }
        }
    }
}

pub fn s<'a>(v: &'a Value, key: &str) -> &'a str {
    v[key].as_str().unwrap_or("")
}

pub fn field(v: &Value, key: &str) -> String {
    match &v[key] {
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        other => other.to_string(),
    }
}

/// Left-aligned columns sized to their widest cell.
pub fn table(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<String>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_owned()
    };
    let mut out = vec![line(header.iter().map(|h| h.to_string()).collect())];
    out.extend(rows.into_iter().map(line));
    out.join("\n")
}
