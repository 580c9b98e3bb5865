//! Chat backends.
//!
//! Everything that talks to a language model goes through [`ChatBackend`].
//! Two implementations ship: [`ScriptedBackend`] replays a JSONL script keyed
//! by `(tag, ordinal)` and is fully deterministic; [`LiveBackend`] speaks the
//! OpenAI-compatible chat-completions wire format with bounded retries.
//!
//! No other module performs network I/O.

mod delta;
mod live;
mod mock;

use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use delta::{format_delta_reply, parse_delta_reply, DeltaParseError, DeltaReply};
pub use live::{LiveBackend, LiveConfig, RetryPolicy, ENV_API_BASE, ENV_API_KEY, ENV_MODEL};
pub use mock::{ScriptEntry, BUNDLED_SCRIPT_JSONL, ScriptedBackend, ScriptedCall};

/// Dimension of the hashed bag-of-words embedding.
pub const EMBEDDING_DIM: usize = 64;

/// Upper bound on concurrent live requests.
pub const MAX_IN_FLIGHT: usize = 4;

/// Sampling temperature for free-text generation (dialogue, enrichment).
pub const TEMPERATURE_CREATIVE: f64 = 0.7;
/// Sampling temperature for anything that gets parsed into a score or delta.
pub const TEMPERATURE_SCORING: f64 = 0.0;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend configuration error: {0}")]
    Config(String),
    #[error("authentication rejected (HTTP {status}): {body}")]
    Auth { status: u16, body: String },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted {
        attempts: u32,
        last: Box<GatewayError>,
    },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("script has no reply for tag {tag:?} at ordinal {ordinal}")]
    ScriptMiss { tag: String, ordinal: u64 },
    #[error("script line {line}: {message}")]
    Script { line: usize, message: String },
    #[error("scripted failure for tag {tag:?} at ordinal {ordinal}: {message}")]
    Scripted {
        tag: String,
        ordinal: u64,
        message: String,
    },
}

impl GatewayError {
    /// Whether the live client should retry after this error.
    pub fn is_transient(&self) -> bool {
        match self {
            GatewayError::Transport(_) => true,
            GatewayError::Http { status, .. } => *status == 429 || (500..=599).contains(status),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_text: String,
    pub user_text: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Call-site label; the scripted backend dispatches on it.
    pub tag: String,
    /// Named values a scripted reply may reference as `{key}`. Ignored by the
    /// live backend.
    #[serde(default)]
    pub bindings: BTreeMap<String, String>,
}

impl ChatRequest {
    pub fn new(tag: impl Into<String>, system_text: impl Into<String>, user_text: impl Into<String>) -> Self {
        Self {
            system_text: system_text.into(),
            user_text: user_text.into(),
            temperature: TEMPERATURE_SCORING,
            max_tokens: 512,
            tag: tag.into(),
            bindings: BTreeMap::new(),
        }
    }

    pub fn temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn max_tokens(mut self, n: u32) -> Self {
        self.max_tokens = n;
        self
    }

    pub fn bind(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.bindings.insert(key.into(), value.into());
        self
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.tag.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("tag must be non-empty".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatReply {
    pub text: String,
    pub backend_id: String,
    pub latency_ms: u64,
}

/// A chat/completion backend. Implementations are shared read-only handles.
pub trait ChatBackend: Send + Sync {
    fn backend_id(&self) -> &str;

    fn send(&self, req: &ChatRequest) -> Result<ChatReply, GatewayError>;

    /// Text embedding used for memory retrieval. The default is the
    /// deterministic hashed bag-of-words vector.
    fn embed(&self, text: &str) -> Vec<f64> {
        hashed_embedding(text, EMBEDDING_DIM)
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for &T {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }

    fn send(&self, req: &ChatRequest) -> Result<ChatReply, GatewayError> {
        (**self).send(req)
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        (**self).embed(text)
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for Box<T> {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }

    fn send(&self, req: &ChatRequest) -> Result<ChatReply, GatewayError> {
        (**self).send(req)
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        (**self).embed(text)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Signed feature hashing over lowercase alphanumeric tokens, L2-normalized.
/// Empty text maps to the zero vector.
pub fn hashed_embedding(text: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    if dim == 0 {
        return v;
    }
    for token in text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
    {
        let token = token.to_lowercase();
        let h = fnv1a(token.as_bytes());
        let slot = (h % dim as u64) as usize;
        let sign = if (h >> 63) & 1 == 0 { 1.0 } else { -1.0 };
        v[slot] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
pub struct InFlightLimiter {
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

impl InFlightLimiter {
    pub fn new(limit: usize) -> Self {
        Self {
            limit: limit.max(1),
            active: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn acquire(&self) -> InFlightPermit<'_> {
        let mut active = self.active.lock().unwrap_or_else(|e| e.into_inner());
        while *active >= self.limit {
            active = self.freed.wait(active).unwrap_or_else(|e| e.into_inner());
        }
        *active += 1;
        InFlightPermit { limiter: self }
    }

    pub fn in_flight(&self) -> usize {
        *self.active.lock().unwrap_or_else(|e| e.into_inner())
    }
}

pub struct InFlightPermit<'a> {
    limiter: &'a InFlightLimiter,
}

impl Drop for InFlightPermit<'_> {
    fn drop(&mut self) {
        let mut active = self.limiter.active.lock().unwrap_or_else(|e| e.into_inner());
        *active -= 1;
        self.limiter.freed.notify_one();
    }
}
