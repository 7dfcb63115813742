//! Output directories, run records and shared loaders.

use std::fs;
use std::path::Path;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use phee_core::corpus::{load_dataset, Dataset, Instance, Split};
use phee_core::llm::{CacheMode, ChatClient, HttpTransport, ResponseCache, RetryPolicy, Transport};
use serde::Serialize;

use crate::config::RunConfig;

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_lines<'a>(path: &Path, lines: impl IntoIterator<Item = &'a str>) -> Result<()> {
    let mut text = String::new();
    for l in lines {
        text.push_str(l);
        text.push('\n');
    }
    write_text(path, &text)
}

#[derive(Serialize)]
struct RunRecord<'a, A: Serialize> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    arguments: &'a A,
    config: &'a RunConfig,
}

/// Writes `run_config.json`: the resolved configuration, the command's
/// arguments and the tool version.
pub fn write_run_config<A: Serialize>(dir: &Path, command: &str, args: &A, cfg: &RunConfig) -> Result<()> {
    write_json(
        &dir.join("run_config.json"),
        &RunRecord { tool: TOOL, version: VERSION, command, arguments: args, config: cfg },
    )
}

pub fn split_file(data_dir: &Path, split: Split) -> std::path::PathBuf {
    data_dir.join(format!("{}.jsonl", split.name()))
}

pub fn load_split(data_dir: &Path, split: Split) -> Result<Dataset> {
    let path = split_file(data_dir, split);
    load_dataset(&path).with_context(|| format!("loading {}", path.display()))
}

pub fn parse_split(name: &str) -> Result<Split> {
    name.parse::<Split>().map_err(anyhow::Error::msg)
}

/// First `limit` instances by id, or all of them.
pub fn take_sorted(ds: &Dataset, limit: Option<usize>) -> Vec<&Instance> {
    let mut v: Vec<&Instance> = ds.instances.iter().collect();
    v.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(n) = limit {
        v.truncate(n);
    }
    v
}

pub fn chat_client(cfg: &RunConfig) -> Result<ChatClient> {
    let llm = &cfg.llm;
    let cache = match &llm.cache_dir {
        Some(dir) => Some(ResponseCache::open(dir)?),
        None => None,
    };
    if llm.cache_only {
        let Some(cache) = cache else {
            bail!("llm.cache_dir: required when running cache-only");
        };
        return Ok(ChatClient::cache_only(cache));
    }
    let transport: Option<Box<dyn Transport>> = match &llm.endpoint {
        Some(url) => Some(Box::new(HttpTransport::new(
            url,
            llm.api_key.clone(),
            Duration::from_secs(llm.timeout_secs),
        )?)),
        None => None,
    };
    if transport.is_none() && cache.is_none() {
        bail!("llm.endpoint: no endpoint configured (set it in the config file or {})", crate::config::ENV_ENDPOINT);
    }
    let retry = RetryPolicy {
        max_attempts: llm.max_attempts,
        base_delay: Duration::from_millis(llm.base_delay_ms),
        factor: 2.0,
    };
    Ok(ChatClient::new(transport, cache, CacheMode::ReadWrite).with_retry(retry))
}

/// clap value parser for enums that only implement `Deserialize`.
pub fn parse_serde<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}
