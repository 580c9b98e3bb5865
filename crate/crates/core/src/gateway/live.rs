use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::{ChatBackend, ChatReply, ChatRequest, GatewayError, InFlightLimiter, MAX_IN_FLIGHT};

pub const ENV_API_KEY: &str = "SENTIPOLIS_API_KEY";
pub const ENV_API_BASE: &str = "SENTIPOLIS_API_BASE";
pub const ENV_MODEL: &str = "SENTIPOLIS_MODEL";

const DEFAULT_API_BASE: &str = "https://api.openai.com/v1";
const DEFAULT_MODEL: &str = "gpt-4o-mini";

/// Retries after the first attempt, with delay `base_delay * 2^i` before
/// retry `i`. Defaults give 1 s, 2 s, 4 s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn delay_before_retry(&self, retry: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(retry)
    }
}

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub api_base: String,
    pub api_key: String,
    pub model: String,
    pub retry: RetryPolicy,
    pub timeout: Duration,
}

impl LiveConfig {
    /// Reads `SENTIPOLIS_API_KEY` (required), `SENTIPOLIS_API_BASE` and
    /// `SENTIPOLIS_MODEL`.
    pub fn from_env() -> Result<Self, GatewayError> {
        let api_key = std::env::var(ENV_API_KEY)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| GatewayError::Config(format!("{ENV_API_KEY} is not set")))?;
        Ok(Self {
            api_base: std::env::var(ENV_API_BASE).unwrap_or_else(|_| DEFAULT_API_BASE.to_string()),
            api_key,
            model: std::env::var(ENV_MODEL).unwrap_or_else(|_| DEFAULT_MODEL.to_string()),
            retry: RetryPolicy::default(),
            timeout: Duration::from_secs(120),
        })
    }
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    #[serde(default)]
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Debug, Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

/// OpenAI-compatible chat-completions client.
pub struct LiveBackend {
    id: String,
    config: LiveConfig,
    agent: ureq::Agent,
    limiter: InFlightLimiter,
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Self {
        let agent_config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.timeout))
            .build();
        Self {
            id: format!("live:{}", config.model),
            agent: ureq::Agent::new_with_config(agent_config),
            config,
            limiter: InFlightLimiter::new(MAX_IN_FLIGHT),
        }
    }

    pub fn from_env() -> Result<Self, GatewayError> {
        LiveConfig::from_env().map(Self::new)
    }

    /// Same endpoint and key, different model.
    pub fn with_model(&self, model: impl Into<String>) -> Self {
        let mut config = self.config.clone();
        config.model = model.into();
        Self::new(config)
    }

    pub fn config(&self) -> &LiveConfig {
        &self.config
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.api_base.trim_end_matches('/'))
    }

    fn attempt(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        let body = json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": req.system_text},
                {"role": "user", "content": req.user_text},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let mut response = self
            .agent
            .post(&self.endpoint())
            .header("Authorization", &format!("Bearer {}", self.config.api_key))
            .send_json(&body)
            .map_err(classify_transport)?;
        let status = response.status().as_u16();
        if status == 200 {
            let parsed: CompletionResponse = response
                .body_mut()
                .read_json()
                .map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
            return parsed
                .choices
                .into_iter()
                .next()
                .and_then(|c| c.message.content)
                .ok_or_else(|| GatewayError::MalformedResponse("no choices[0].message.content".into()));
        }
        let text = response.body_mut().read_to_string().unwrap_or_default();
        if status == 401 || status == 403 {
            Err(GatewayError::Auth { status, body: text })
        } else {
            Err(GatewayError::Http { status, body: text })
        }
    }
}

fn classify_transport(err: ureq::Error) -> GatewayError {
    match err {
        ureq::Error::Timeout(_)
        | ureq::Error::Io(_)
        | ureq::Error::ConnectionFailed
        | ureq::Error::HostNotFound
        | ureq::Error::Protocol(_) => GatewayError::Transport(err.to_string()),
        ureq::Error::BadUri(uri) => GatewayError::Config(format!("bad endpoint URI {uri}")),
        other => GatewayError::MalformedResponse(other.to_string()),
    }
}

impl ChatBackend for LiveBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn send(&self, req: &ChatRequest) -> Result<ChatReply, GatewayError> {
        req.validate()?;
        let _permit = self.limiter.acquire();
        let started = Instant::now();
        let policy = self.config.retry;
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(req) {
                Ok(text) => {
                    return Ok(ChatReply {
                        text,
                        backend_id: self.id.clone(),
                        latency_ms: started.elapsed().as_millis() as u64,
                    })
                }
                Err(err) if err.is_transient() && attempts <= policy.max_retries => {
                    let delay = policy.delay_before_retry(attempts - 1);
                    log::warn!(
                        "{}: transient failure on tag {:?} ({err}); retrying in {:?}",
                        self.id,
                        req.tag,
                        delay
                    );
                    std::thread::sleep(delay);
                }
                Err(err) if err.is_transient() => {
                    return Err(GatewayError::RetriesExhausted {
                        attempts,
                        last: Box::new(err),
                    })
                }
                Err(err) => return Err(err),
            }
        }
    }
}
