//! Plain-HTTP header collection.
//!
//! Each domain in a list is requested once at `http://<domain>/` and the
//! response headers are written to a snapshot CSV that the ingest stage can
//! read with the layout `url=url,header=headers`. Failed requests are kept as
//! rows with an `error:*` status and an empty header blob.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::redirect::{Attempt, Policy};
use thiserror::Error;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);
pub const DEFAULT_USER_AGENT: &str = concat!("adoption-trace/", env!("CARGO_PKG_VERSION"));
pub const MAX_REDIRECTS: usize = 5;

/// Column headers of a collected snapshot.
pub const SNAPSHOT_COLUMNS: [&str; 5] = ["url", "domain", "status", "headers", "fetched_at"];

#[derive(Debug, Error)]
pub enum CollectError {
    #[error("domain list is empty")]
    NoDomains,
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot build HTTP client: {0}")]
    Client(#[from] reqwest::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone)]
pub struct CollectOptions {
    pub timeout: Duration,
    pub max_parallel: usize,
    pub user_agent: String,
    /// Pause taken by a worker before each request.
    pub delay: Duration,
}

impl Default for CollectOptions {
    fn default() -> Self {
        CollectOptions {
            timeout: DEFAULT_TIMEOUT,
            max_parallel: 8,
            user_agent: DEFAULT_USER_AGENT.to_string(),
            delay: Duration::ZERO,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchStatus {
    Http(u16),
    /// Transport failure, e.g. `error:connect`.
    Error(String),
}

impl std::fmt::Display for FetchStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FetchStatus::Http(code) => write!(f, "{code}"),
            FetchStatus::Error(tag) => f.write_str(tag),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchResult {
    pub domain: String,
    pub url: String,
    pub status: FetchStatus,
    pub headers: Vec<(String, String)>,
    pub fetched_at: String,
}

impl FetchResult {
    /// Headers as `Name: value` lines joined with CRLF.
    pub fn header_blob(&self) -> String {
        self.headers
            .iter()
            .map(|(k, v)| format!("{k}: {v}"))
            .collect::<Vec<_>>()
            .join("\r\n")
    }
}

/// Parses a domain list: one per line, blank lines and `#` comments ignored,
/// repeated domains kept once.
pub fn parse_domain_list(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let d = line.to_ascii_lowercase();
        if !out.contains(&d) {
            out.push(d);
        }
    }
    out
}

fn redirect_policy() -> Policy {
    Policy::custom(|attempt: Attempt| {
        if attempt.previous().len() > MAX_REDIRECTS {
            attempt.error("too many redirects")
        } else if attempt.url().scheme() != "http" {
            attempt.stop()
        } else {
            attempt.follow()
        }
    })
}

fn build_client(opts: &CollectOptions) -> Result<Client, CollectError> {
    Ok(Client::builder()
        .timeout(opts.timeout)
        .user_agent(opts.user_agent.clone())
        .redirect(redirect_policy())
        .build()?)
}

fn error_tag(e: &reqwest::Error) -> String {
    let kind = if e.is_timeout() {
        "timeout"
    } else if e.is_redirect() {
        "redirect"
    } else if e.is_connect() {
        "connect"
    } else if e.is_builder() {
        "invalid-domain"
    } else {
        "request"
    };
    format!("error:{kind}")
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn fetch_one(client: &Client, domain: &str) -> FetchResult {
    let url = format!("http://{domain}/");
    let (status, headers) = match client.get(&url).send() {
        Ok(resp) => {
            let headers = resp
                .headers()
                .iter()
                .map(|(k, v)| {
                    (
                        k.as_str().to_string(),
                        String::from_utf8_lossy(v.as_bytes()).into_owned(),
                    )
                })
                .collect();
            (FetchStatus::Http(resp.status().as_u16()), headers)
        }
        Err(e) => {
            log::debug!("{url}: {e}");
            (FetchStatus::Error(error_tag(&e)), Vec::new())
        }
    };
    FetchResult {
        domain: domain.to_string(),
        url,
        status,
        headers,
        fetched_at: now(),
    }
}

/// Requests every domain once with at most `max_parallel` requests in
/// flight. Results come back sorted by domain.
pub fn fetch_all(
    domains: &[String],
    opts: &CollectOptions,
) -> Result<Vec<FetchResult>, CollectError> {
    if domains.is_empty() {
        return Err(CollectError::NoDomains);
    }
    let client = build_client(opts)?;
    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::with_capacity(domains.len()));
    let workers = opts.max_parallel.clamp(1, domains.len());
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(domain) = domains.get(i) else { break };
                if !opts.delay.is_zero() {
                    thread::sleep(opts.delay);
                }
                let r = fetch_one(&client, domain);
                results.lock().expect("result lock poisoned").push(r);
            });
        }
    });
    let mut results = results.into_inner().expect("result lock poisoned");
    results.sort_by(|a, b| a.domain.cmp(&b.domain));
    Ok(results)
}

pub fn write_snapshot<W: Write>(out: W, results: &[FetchResult]) -> Result<(), CollectError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SNAPSHOT_COLUMNS)?;
    for r in results {
        w.write_record([
            r.url.as_str(),
            r.domain.as_str(),
            &r.status.to_string(),
            &r.header_blob(),
            r.fetched_at.as_str(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Fetches `domains` and writes the snapshot to `out`. The output file is
/// created before any request goes out.
pub fn collect(
    domains: &[String],
    opts: &CollectOptions,
    out: &Path,
) -> Result<Vec<FetchResult>, CollectError> {
    if domains.is_empty() {
        return Err(CollectError::NoDomains);
    }
    let file = File::create(out).map_err(|source| CollectError::Output {
        path: out.to_path_buf(),
        source,
    })?;
    let results = fetch_all(domains, opts)?;
    write_snapshot(BufWriter::new(file), &results)?;
    Ok(results)
}
