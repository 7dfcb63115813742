use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::LlmError;
use crate::prompting::ChatRequest;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    #[serde(default)]
    pub prompt_tokens: u64,
    #[serde(default)]
    pub completion_tokens: u64,
    #[serde(default)]
    pub total_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    #[serde(default)]
    pub finish_reason: Option<String>,
    #[serde(default)]
    pub usage: Usage,
    #[serde(skip)]
    pub from_cache: bool,
}

/// Failure classes a transport reports; the client decides what to retry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    RateLimited(String),
    Transient(String),
    Auth(String),
    Fatal(String),
}

pub trait Transport: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError>;
}

/// OpenAI-compatible chat-completions endpoint.
pub struct HttpTransport {
    base_url: String,
    api_key: Option<String>,
    http: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration) -> Result<Self, LlmError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(HttpTransport { base_url: base_url.trim_end_matches('/').to_string(), api_key, http })
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, TransportError> {
        let mut req = self.http.post(format!("{}/{path}", self.base_url)).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| TransportError::Transient(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| TransportError::Transient(e.to_string()))?;
        match status.as_u16() {
            200..=299 => serde_json::from_str(&text)
                .map_err(|e| TransportError::Fatal(format!("malformed response body: {e}"))),
            429 => Err(TransportError::RateLimited(text)),
            401 | 403 => Err(TransportError::Auth(format!("{status}: {text}"))),
            500..=599 | 408 => Err(TransportError::Transient(format!("{status}: {text}"))),
            _ => Err(TransportError::Fatal(format!("{status}: {text}"))),
        }
    }

    /// Sentence vectors from an `/embeddings` endpoint.
    pub fn embed(&self, model: &str, inputs: &[String]) -> Result<Vec<Vec<f64>>, TransportError> {
        let body = self.post("embeddings", &json!({ "model": model, "input": inputs }))?;
        let data = body["data"]
            .as_array()
            .ok_or_else(|| TransportError::Fatal("response has no data array".into()))?;
        data.iter()
            .map(|d| {
                d["embedding"]
                    .as_array()
                    .and_then(|v| v.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
                    .ok_or_else(|| TransportError::Fatal("embedding is not a number array".into()))
            })
            .collect()
    }
}

impl Transport for HttpTransport {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        let body = json!({
            "model": request.model,
            "temperature": request.temperature,
            "messages": request.messages,
        });
        let value = self.post("chat/completions", &body)?;
        let choice = &value["choices"][0];
        let content = choice["message"]["content"]
            .as_str()
            .ok_or_else(|| TransportError::Fatal("response has no choices[0].message.content".into()))?
            .to_string();
        Ok(ChatResponse {
            content,
            finish_reason: choice["finish_reason"].as_str().map(str::to_string),
            usage: serde_json::from_value(value["usage"].clone()).unwrap_or_default(),
            from_cache: false,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    cache_key: String,
    request: ChatRequest,
    response: ChatResponse,
}

/// On-disk responses, one JSON file per request digest. Entries are never
/// overwritten.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: &Path) -> Result<Self, LlmError> {
        fs::create_dir_all(dir).map_err(|e| LlmError::io(dir, e))?;
        Ok(ResponseCache { dir: dir.to_path_buf() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<ChatResponse>, LlmError> {
        let path = self.path(key);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(LlmError::io(&path, e)),
        };
        let entry: CacheEntry = serde_json::from_str(&text)
            .map_err(|e| LlmError::CacheFormat { path: path.clone(), message: e.to_string() })?;
        let mut response = entry.response;
        response.from_cache = true;
        Ok(Some(response))
    }

    /// Stores a response unless the key is already present.
    pub fn put(&self, request: &ChatRequest, response: &ChatResponse) -> Result<(), LlmError> {
        let path = self.path(&request.cache_key);
        if path.exists() {
            return Ok(());
        }
        let entry = CacheEntry {
            cache_key: request.cache_key.clone(),
            request: request.clone(),
            response: response.clone(),
        };
        let text = serde_json::to_string_pretty(&entry).expect("cache entries always serialize");
        let tmp = self.dir.join(format!(".{}.{}.tmp", request.cache_key, std::process::id()));
        let write = || -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(text.as_bytes())?;
            f.write_all(b"\n")?;
            f.sync_all()?;
            if path.exists() {
                fs::remove_file(&tmp)
            } else {
                fs::rename(&tmp, &path)
            }
        };
        write().map_err(|e| LlmError::io(&path, e))
    }

    pub fn len(&self) -> usize {
        fs::read_dir(&self.dir)
            .map(|rd| {
                rd.filter_map(Result::ok)
                    .filter(|e| e.file_name().to_string_lossy().ends_with(".json"))
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 5, base_delay: Duration::from_secs(1), factor: 2.0 }
    }
}

impl RetryPolicy {
    /// Wait before attempt `attempt + 1`, for `attempt` ≥ 1.
    pub fn delay(&self, attempt: u32) -> Duration {
        self.base_delay.mul_f64(self.factor.powi(attempt as i32 - 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheMode {
    /// Read the cache, call the endpoint on a miss and store the result.
    ReadWrite,
    /// Never touch the network; a miss is an error.
    CacheOnly,
}

/// Chat client with a response cache and retry on transient failures.
/// Safe to share across threads.
pub struct ChatClient {
    transport: Option<Box<dyn Transport>>,
    cache: Option<ResponseCache>,
    mode: CacheMode,
    retry: RetryPolicy,
    network_calls: AtomicUsize,
    attempts: AtomicUsize,
}

impl ChatClient {
    pub fn new(transport: Option<Box<dyn Transport>>, cache: Option<ResponseCache>, mode: CacheMode) -> Self {
        ChatClient {
            transport,
            cache,
            mode,
            retry: RetryPolicy::default(),
            network_calls: AtomicUsize::new(0),
            attempts: AtomicUsize::new(0),
        }
    }

    pub fn cache_only(cache: ResponseCache) -> Self {
        ChatClient::new(None, Some(cache), CacheMode::CacheOnly)
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Completed requests that went to the transport.
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    /// Transport attempts, retries included.
    pub fn attempts(&self) -> usize {
        self.attempts.load(Ordering::SeqCst)
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(&request.cache_key)? {
                return Ok(hit);
            }
        }
        if self.mode == CacheMode::CacheOnly {
            return Err(LlmError::CacheMiss(request.cache_key.clone()));
        }
        let transport = self.transport.as_ref().ok_or(LlmError::NoEndpoint)?;
        let mut attempt = 0;
        let response = loop {
            attempt += 1;
            self.attempts.fetch_add(1, Ordering::SeqCst);
            match transport.send(request) {
                Ok(r) => break r,
                Err(TransportError::Auth(m)) => return Err(LlmError::Auth(m)),
                Err(TransportError::Fatal(m)) => return Err(LlmError::Network { attempts: attempt, message: m }),
                Err(TransportError::RateLimited(m)) | Err(TransportError::Transient(m)) => {
                    if attempt >= self.retry.max_attempts {
                        return Err(LlmError::Network { attempts: attempt, message: m });
                    }
                    let wait = self.retry.delay(attempt);
                    log::warn!("request {} failed (attempt {attempt}): {m}; retrying in {wait:?}", &request.cache_key[..12]);
                    std::thread::sleep(wait);
                }
            }
        };
        self.network_calls.fetch_add(1, Ordering::SeqCst);
        if let Some(cache) = &self.cache {
            cache.put(request, &response)?;
        }
        Ok(response)
    }
}
