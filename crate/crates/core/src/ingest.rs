//! Labeled snippet collection from a paginated JSON search API.
//!
//! Each label is used as the search keyword. A page request looks like
//!
//! ```text
//! GET {base_url}?{query_field_name}={label}&{start_param}={offset}&{limit_param}={n}[&{key_param}={api_key}]
//! ```
//!
//! and the response body is JSON; `results_pointer` locates the array of
//! records and `text_pointer` the snippet inside each record.

use std::collections::HashSet;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::{DomainTag, JsonRecord, LabelSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub key_param: String,
    pub query_field_name: String,
    pub start_param: String,
    pub limit_param: String,
    pub per_request_limit: usize,
    pub max_records_per_label: usize,
    pub min_interval_ms: u64,
    pub timeout_ms: u64,
    pub results_pointer: String,
    pub text_pointer: String,
    /// Give up on a label after this many failed pages in a row.
    pub max_consecutive_failures: usize,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            base_url: String::new(),
            api_key: None,
            key_param: "key".into(),
            query_field_name: "q".into(),
            start_param: "start".into(),
            limit_param: "limit".into(),
            per_request_limit: 25,
            max_records_per_label: 1000,
            min_interval_ms: 1000,
            timeout_ms: 10_000,
            results_pointer: "/results".into(),
            text_pointer: "/snippet".into(),
            max_consecutive_failures: 3,
        }
    }
}

impl IngestConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return bad("base_url must be an http(s) URL");
        }
        if self.per_request_limit == 0 {
            return bad("per_request_limit must be positive");
        }
        if self.max_consecutive_failures == 0 {
            return bad("max_consecutive_failures must be positive");
        }
        if self.timeout_ms == 0 {
            return bad("timeout_ms must be positive");
        }
        for p in [&self.results_pointer, &self.text_pointer] {
            if !(p.is_empty() || p.starts_with('/')) {
                return bad("JSON pointers must be empty or start with '/'");
            }
        }
        Ok(())
    }
}

/// Time source for request spacing.
pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

pub struct SystemClock {
    start: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock { start: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.start.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

struct RateLimiter<'a> {
    clock: &'a dyn Clock,
    interval: Duration,
    last: Option<Duration>,
}

impl RateLimiter<'_> {
    fn wait(&mut self) {
        if let Some(last) = self.last {
            let elapsed = self.clock.now().saturating_sub(last);
            if elapsed < self.interval {
                self.clock.sleep(self.interval - elapsed);
            }
        }
        self.last = Some(self.clock.now());
    }
}

fn agent(config: &IngestConfig) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
        .http_status_as_error(false)
        .build()
        .into()
}

fn fetch_page(agent: &ureq::Agent, config: &IngestConfig, label: &str, start: usize) -> Result<Vec<String>> {
    let mut req = agent
        .get(&config.base_url)
        .query(&config.query_field_name, label)
        .query(&config.start_param, start.to_string())
        .query(&config.limit_param, config.per_request_limit.to_string());
    if let Some(key) = &config.api_key {
        req = req.query(&config.key_param, key);
    }
    let mut resp = req.call().map_err(|e| match e {
        ureq::Error::Timeout(_) => Error::Timeout,
        ureq::Error::StatusCode(s) => Error::Http(s),
        other => Error::Network(other.to_string()),
    })?;
    let status = resp.status().as_u16();
    if !(200..300).contains(&status) {
        return Err(Error::Http(status));
    }
    let body = resp.body_mut().read_to_string().map_err(|e| match e {
        ureq::Error::Timeout(_) => Error::Timeout,
        other => Error::Network(other.to_string()),
    })?;
    let json: Value = serde_json::from_str(&body).map_err(|_| Error::MalformedResponse("<body>".into()))?;
    let results = json
        .pointer(&config.results_pointer)
        .and_then(Value::as_array)
        .ok_or_else(|| Error::MalformedResponse(config.results_pointer.clone()))?;
    let mut texts = Vec::with_capacity(results.len());
    for record in results {
        match record.pointer(&config.text_pointer).and_then(Value::as_str) {
            Some(t) if !t.trim().is_empty() => texts.push(t.to_string()),
            Some(_) => {}
            None => log::warn!("record without text at {}", config.text_pointer),
        }
    }
    Ok(texts)
}

/// Collects up to `max_records_per_label` distinct snippets for one label,
/// pacing requests with the wall clock.
pub fn fetch_snippets(config: &IngestConfig, label: &str) -> Result<Vec<JsonRecord>> {
    fetch_snippets_with(config, label, &SystemClock::default())
}

pub fn fetch_snippets_with(config: &IngestConfig, label: &str, clock: &dyn Clock) -> Result<Vec<JsonRecord>> {
    config.validate()?;
    if label.trim().is_empty() {
        return Err(Error::InvalidConfig("empty label".into()));
    }
    let agent = agent(config);
    let mut limiter = RateLimiter {
        clock,
        interval: Duration::from_millis(config.min_interval_ms),
        last: None,
    };
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut failures = 0;
    let mut start = 0;
    while out.len() < config.max_records_per_label {
        limiter.wait();
        match fetch_page(&agent, config, label, start) {
            Ok(texts) => {
                failures = 0;
                let full_page = texts.len() >= config.per_request_limit;
                let mut fresh = 0;
                for text in texts {
                    if out.len() >= config.max_records_per_label {
                        break;
                    }
                    if seen.insert(text.clone()) {
                        fresh += 1;
                        out.push(JsonRecord {
                            id: Some(format!("{label}-{}", out.len())),
                            label: label.to_string(),
                            text,
                            domain: Some(DomainTag::Source),
                        });
                    }
                }
                if !full_page || fresh == 0 {
                    break;
                }
            }
            Err(e) => {
                failures += 1;
                log::warn!("{label}: page at offset {start} skipped: {e}");
                if failures >= config.max_consecutive_failures {
                    log::warn!("{label}: giving up after {failures} failed pages");
                    break;
                }
            }
        }
        start += config.per_request_limit;
    }
    log::info!("{label}: {} records", out.len());
    Ok(out)
}

/// Fetches every label concurrently, each with its own request pacing.
/// Records come back grouped by label in label-set order.
pub fn fetch_all(config: &IngestConfig, labels: &LabelSet, clock: &dyn Clock) -> Result<Vec<JsonRecord>> {
    config.validate()?;
    let failed = Mutex::new(Vec::new());
    let per_label: Vec<Vec<JsonRecord>> = labels
        .names()
        .par_iter()
        .map(|l| {
            fetch_snippets_with(config, l, clock).unwrap_or_else(|e| {
                failed.lock().expect("not poisoned").push(format!("{l}: {e}"));
                Vec::new()
            })
        })
        .collect();
    for f in failed.into_inner().expect("not poisoned") {
        log::warn!("{f}");
    }
    Ok(per_label.into_iter().flatten().collect())
}

pub fn records_to_jsonl(records: &[JsonRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_records(records: &[JsonRecord], path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_atomic(path.as_ref(), records_to_jsonl(records)?.as_bytes())
}
