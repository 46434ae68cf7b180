//! Paged JSON fetches with an on-disk cache.
//!
//! Each page URL is hashed with SHA-256 and its items are stored one JSON
//! object per line in `<cache_dir>/<hash>.jsonl`. A cached page is never
//! fetched again, so a rerun against a warm cache needs no network and
//! yields the same records.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{parse_conductor, CurveRecord, Ingested, Source, Torsion};
use crate::error::{Error, Result};

/// Environment variable naming the cache directory.
pub const CACHE_ENV: &str = "CAMPANA_CENSUS_CACHE";

pub fn default_cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(".campana-cache"))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    /// URL with `{offset}` and `{limit}` placeholders.
    pub endpoint: String,
    pub page_size: usize,
    /// Minimum time between two network requests.
    pub min_interval_ms: u64,
    pub max_retries: u32,
    /// First retry delay; doubled on each further attempt.
    pub backoff_ms: u64,
    pub timeout_secs: u64,
    /// Key of the item array in each response; `None` when the response is
    /// the array itself.
    pub data_key: Option<String>,
    pub label_field: String,
    pub conductor_field: String,
    pub torsion_field: String,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: "https://www.lmfdb.org/api/ec_curvedata/?_format=json\
                       &_fields=lmfdb_label,conductor,torsion_structure&_offset={offset}&_limit={limit}"
                .to_string(),
            page_size: 100,
            min_interval_ms: 1000,
            max_retries: 3,
            backoff_ms: 500,
            timeout_secs: 30,
            data_key: Some("data".to_string()),
            label_field: "lmfdb_label".to_string(),
            conductor_field: "conductor".to_string(),
            torsion_field: "torsion_structure".to_string(),
        }
    }
}

impl RemoteConfig {
    pub fn page_url(&self, offset: usize) -> String {
        self.endpoint
            .replace("{offset}", &offset.to_string())
            .replace("{limit}", &self.page_size.to_string())
    }
}

pub fn cache_path(dir: &Path, url: &str) -> PathBuf {
    let digest = Sha256::digest(url.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    dir.join(format!("{hex}.jsonl"))
}

struct Fetcher<'a> {
    config: &'a RemoteConfig,
    cache_dir: &'a Path,
    agent: ureq::Agent,
    last_request: Option<Instant>,
    network_requests: usize,
}

impl Fetcher<'_> {
    fn page(&mut self, url: &str) -> Result<Vec<Value>> {
        let path = cache_path(self.cache_dir, url);
        if path.exists() {
            return read_cache(&path);
        }
        let items = self.download(url).map_err(|e| {
            Error::Network(format!(
                "{url}: {e}; no cached copy at {} (set {CACHE_ENV} to a warm cache to run offline)",
                path.display()
            ))
        })?;
        write_cache(&path, &items)?;
        Ok(items)
    }

    fn download(&mut self, url: &str) -> std::result::Result<Vec<Value>, String> {
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut last_error = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                thread::sleep(delay);
                delay *= 2;
            }
            if let Some(t) = self.last_request {
                let gap = Duration::from_millis(self.config.min_interval_ms);
                let since = t.elapsed();
                if since < gap {
                    thread::sleep(gap - since);
                }
            }
            self.last_request = Some(Instant::now());
            self.network_requests += 1;
            match self.agent.get(url).call() {
                Ok(mut resp) => {
                    let body = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
                    return self.items(&body);
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(last_error)
    }

    fn items(&self, body: &str) -> std::result::Result<Vec<Value>, String> {
        let v: Value = serde_json::from_str(body).map_err(|e| format!("bad JSON: {e}"))?;
        let list = match &self.config.data_key {
            Some(k) => v.get(k).cloned().ok_or_else(|| format!("response has no {k:?} field"))?,
            None => v,
        };
        match list {
            Value::Array(items) => Ok(items),
            _ => Err("response items are not an array".to_string()),
        }
    }
}

fn read_cache(path: &Path) -> Result<Vec<Value>> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Write through a temporary file and rename, so a cache entry is either
/// complete or absent.
fn write_cache(path: &Path, items: &[Value]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = path.with_extension("jsonl.tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        for item in items {
            writeln!(f, "{}", serde_json::to_string(item)?)?;
        }
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn field_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Array(items) => {
            let parts: Option<Vec<String>> = items.iter().map(|x| x.as_u64().map(|n| n.to_string())).collect();
            Some(format!("[{}]", parts?.join(",")))
        }
        _ => None,
    }
}

fn parse_item(config: &RemoteConfig, item: &Value) -> Result<CurveRecord> {
    let get = |name: &str| {
        item.get(name)
            .and_then(field_text)
            .ok_or_else(|| Error::parse(format!("missing or malformed field {name:?}")))
    };
    Ok(CurveRecord {
        label: get(&config.label_field)?,
        conductor: parse_conductor(&get(&config.conductor_field)?)?,
        torsion: get(&config.torsion_field)?.parse::<Torsion>()?,
        source: Source::RemoteApi,
    })
}

/// Outcome of a paged fetch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fetched {
    pub ingested: Ingested,
    pub pages: usize,
    pub network_requests: usize,
}

/// Fetch up to `limit` records page by page, serving pages from
/// `cache_dir` when present.
pub fn fetch(config: &RemoteConfig, limit: usize, cache_dir: &Path) -> Result<Fetched> {
    if config.page_size == 0 {
        return Err(Error::parse("page size must be positive"));
    }
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
        .build()
        .into();
    let mut fetcher = Fetcher {
        config,
        cache_dir,
        agent,
        last_request: None,
        network_requests: 0,
    };
    let mut out = Ingested::default();
    let mut pages = 0;
    let mut offset = 0;
    while out.records.len() < limit {
        let items = fetcher.page(&config.page_url(offset))?;
        pages += 1;
        for (k, item) in items.iter().enumerate() {
            if out.records.len() == limit {
                break;
            }
            match parse_item(config, item) {
                Ok(r) => out.records.push(r),
                Err(e) => out.skip(format!("item {}: {e}", offset + k)),
            }
        }
        if items.len() < config.page_size {
            break;
        }
        offset += config.page_size;
    }
    Ok(Fetched {
        ingested: out,
        pages,
        network_requests: fetcher.network_requests,
    })
}
