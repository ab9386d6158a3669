//! Client abstraction over an external generative engine: wire types,
//! pacing with exponential backoff, a disk-backed response cache, and the
//! pluggable transports (HTTP and the deterministic mock).

pub mod http;
pub mod mock;
pub mod templates;

use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use templates::Task;

/// Environment variable holding the live-engine credential.
pub const API_KEY_ENV: &str = "GEO_ENGINE_API_KEY";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("transport failure: {0}")]
    Failed(String),
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("engine failed after {attempts} attempts: {last}")]
    Exhausted {
        attempts: u32,
        #[source]
        last: TransportError,
    },
    #[error("response cache: {0}")]
    Cache(#[from] std::io::Error),
    #[error("invalid engine config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Chat-completion-style request body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub endpoint: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_attempts: u32,
    pub pacing_interval_ms: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            endpoint: "https://api.example.com/v1/chat/completions".to_string(),
            model_name: "llama-3.3-70b-instruct".to_string(),
            temperature: 0.9,
            max_attempts: 3,
            pacing_interval_ms: 1000,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.temperature < 0.0 {
            return Err(EngineError::InvalidConfig("temperature must be >= 0"));
        }
        if self.max_attempts == 0 {
            return Err(EngineError::InvalidConfig("max_attempts must be >= 1"));
        }
        Ok(())
    }
}

/// One call to whatever sits behind the client: the HTTP endpoint, the
/// mock, or a test double. `cache_salt` distinguishes response spaces
/// (e.g. different mock seeds) in the shared cache.
pub trait EngineTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError>;
    fn cache_salt(&self) -> String;
}

/// Counters exposed for tests and run telemetry.
#[derive(Debug, Default)]
struct Counters {
    cache_hits: AtomicU64,
    cache_misses: AtomicU64,
    transport_calls: AtomicU64,
    retries: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EngineStats {
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub transport_calls: u64,
    pub retries: u64,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    request: ChatRequest,
    response: String,
}

/// Blocking request/response client with per-endpoint pacing, retry with
/// exponential backoff on rate-limit signals, and an optional
/// digest-keyed disk cache.
pub struct EngineClient {
    transport: Box<dyn EngineTransport>,
    config: EngineConfig,
    cache_dir: Option<PathBuf>,
    last_dispatch: Mutex<Option<Instant>>,
    counters: Counters,
}

impl EngineClient {
    pub fn new(transport: Box<dyn EngineTransport>, config: EngineConfig) -> Self {
        EngineClient {
            transport,
            config,
            cache_dir: None,
            last_dispatch: Mutex::new(None),
            counters: Counters::default(),
        }
    }

    /// Cache responses under `dir`, one file per request digest.
    pub fn with_cache_dir(mut self, dir: PathBuf) -> Self {
        self.cache_dir = Some(dir);
        self
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn stats(&self) -> EngineStats {
        EngineStats {
            cache_hits: self.counters.cache_hits.load(Ordering::Relaxed),
            cache_misses: self.counters.cache_misses.load(Ordering::Relaxed),
            transport_calls: self.counters.transport_calls.load(Ordering::Relaxed),
            retries: self.counters.retries.load(Ordering::Relaxed),
        }
    }

    /// Build a request from the configured model/temperature and dispatch
    /// it through cache, pacing and retries.
    pub fn request(&self, messages: Vec<ChatMessage>) -> Result<String, EngineError> {
        let request = ChatRequest {
            model: self.config.model_name.clone(),
            messages,
            temperature: self.config.temperature,
        };
        self.paced_call(&request)
    }

    /// Guarantee at least the configured interval between consecutive
    /// dispatches; retry with exponential backoff up to `max_attempts`.
    pub fn paced_call(&self, request: &ChatRequest) -> Result<String, EngineError> {
        let digest = self.request_digest(request);
        if let Some(response) = self.cache_get(&digest)? {
            self.counters.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(response);
        }
        self.counters.cache_misses.fetch_add(1, Ordering::Relaxed);
        let mut attempt = 0u32;
        let mut backoff = Duration::from_millis(self.config.pacing_interval_ms.max(50));
        loop {
            attempt += 1;
            self.wait_for_pace();
            self.counters.transport_calls.fetch_add(1, Ordering::Relaxed);
            match self.transport.complete(request) {
                Ok(response) => {
                    self.cache_put(&digest, request, &response)?;
                    return Ok(response);
                }
                Err(err) if attempt < self.config.max_attempts => {
                    self.counters.retries.fetch_add(1, Ordering::Relaxed);
                    if matches!(err, TransportError::RateLimited(_)) {
                        std::thread::sleep(backoff);
                        backoff *= 2;
                    }
                    log::warn!("engine attempt {attempt} failed: {err}");
                }
                Err(err) => {
                    return Err(EngineError::Exhausted {
                        attempts: attempt,
                        last: err,
                    });
                }
            }
        }
    }

    fn wait_for_pace(&self) {
        let interval = Duration::from_millis(self.config.pacing_interval_ms);
        let mut last = self.last_dispatch.lock().unwrap();
        if let Some(previous) = *last {
            let elapsed = previous.elapsed();
            if elapsed < interval {
                std::thread::sleep(interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn request_digest(&self, request: &ChatRequest) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.transport.cache_salt().as_bytes());
        hasher.update(b"\0");
        hasher.update(serde_json::to_vec(request).expect("request serialises"));
        hex_digest(hasher)
    }

    fn cache_get(&self, digest: &str) -> Result<Option<String>, EngineError> {
        let Some(dir) = &self.cache_dir else {
            return Ok(None);
        };
        let path = dir.join(format!("{digest}.json"));
        if !path.exists() {
            return Ok(None);
        }
        let raw = fs::read_to_string(path)?;
        let entry: CacheEntry = serde_json::from_str(&raw)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Ok(Some(entry.response))
    }

    fn cache_put(
        &self,
        digest: &str,
        request: &ChatRequest,
        response: &str,
    ) -> Result<(), EngineError> {
        let Some(dir) = &self.cache_dir else {
            return Ok(());
        };
        fs::create_dir_all(dir)?;
        let entry = CacheEntry {
            request: request.clone(),
            response: response.to_string(),
        };
        fs::write(
            dir.join(format!("{digest}.json")),
            serde_json::to_vec_pretty(&entry).expect("entry serialises"),
        )?;
        Ok(())
    }
}

pub fn hex_digest(hasher: Sha256) -> String {
    let bytes = hasher.finalize();
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Digest of arbitrary bytes, used for artifact identities.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex_digest(hasher)
}
