use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatReply, ChatRequest, GatewayError};

/// Default offline script: seeded per-ordinal replies plus per-tag fallbacks.
pub const BUNDLED_SCRIPT_JSONL: &str = include_str!("../../data/mock_script.jsonl");

/// One line of a mock script.
///
/// An entry without `ordinal` is the fallback reply for its tag, used when no
/// ordinal-specific entry exists. An entry with `error` makes that call fail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordinal: Option<u64>,
    #[serde(default)]
    pub reply_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ScriptEntry {
    pub fn reply(tag: impl Into<String>, ordinal: u64, text: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            ordinal: Some(ordinal),
            reply_text: text.into(),
            error: None,
        }
    }

    pub fn fallback(tag: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            ordinal: None,
            reply_text: text.into(),
            error: None,
        }
    }

    pub fn failure(tag: impl Into<String>, ordinal: u64, message: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            ordinal: Some(ordinal),
            reply_text: String::new(),
            error: Some(message.into()),
        }
    }
}

/// A call the scripted backend has answered, in call order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedCall {
    pub tag: String,
    pub ordinal: u64,
    pub reply_text: String,
}

#[derive(Debug, Default)]
struct MockState {
    counters: HashMap<String, u64>,
    calls: Vec<ScriptedCall>,
}

/// Deterministic backend replaying replies by `(tag, call ordinal)`.
///
/// Ordinals count calls per tag from zero. Replies may reference request
/// bindings as `{key}`. Calls are serialized so ordinals are stable.
#[derive(Debug)]
pub struct ScriptedBackend {
    id: String,
    exact: HashMap<(String, u64), ScriptEntry>,
    fallback: HashMap<String, ScriptEntry>,
    state: Mutex<MockState>,
}

impl ScriptedBackend {
    pub fn new(entries: impl IntoIterator<Item = ScriptEntry>) -> Self {
        let mut exact = HashMap::new();
        let mut fallback = HashMap::new();
        for entry in entries {
            match entry.ordinal {
                Some(ord) => {
                    exact.insert((entry.tag.clone(), ord), entry);
                }
                None => {
                    fallback.insert(entry.tag.clone(), entry);
                }
            }
        }
        Self {
            id: "mock".to_string(),
            exact,
            fallback,
            state: Mutex::new(MockState::default()),
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// The script shipped with the crate, covering every tag the step loop uses.
    pub fn bundled() -> Self {
        Self::from_jsonl(BUNDLED_SCRIPT_JSONL).expect("bundled script is valid")
    }

    pub fn from_jsonl(text: &str) -> Result<Self, GatewayError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("//") {
                continue;
            }
            let entry: ScriptEntry = serde_json::from_str(line).map_err(|e| GatewayError::Script {
                line: i + 1,
                message: e.to_string(),
            })?;
            if entry.tag.trim().is_empty() {
                return Err(GatewayError::Script {
                    line: i + 1,
                    message: "empty tag".into(),
                });
            }
            entries.push(entry);
        }
        Ok(Self::new(entries))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("cannot read script {}: {e}", path.display())))?;
        Self::from_jsonl(&text)
    }

    /// Every answered call so far, in order.
    pub fn calls(&self) -> Vec<ScriptedCall> {
        self.lock().calls.clone()
    }

    /// Number of calls made per tag.
    pub fn call_counts(&self) -> BTreeMap<String, u64> {
        self.lock().counters.iter().map(|(k, v)| (k.clone(), *v)).collect()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, MockState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }
}

fn substitute(template: &str, bindings: &BTreeMap<String, String>) -> String {
    if bindings.is_empty() || !template.contains('{') {
        return template.to_string();
    }
    let mut out = template.to_string();
    for (key, value) in bindings {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    out
}

impl ChatBackend for ScriptedBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn send(&self, req: &ChatRequest) -> Result<ChatReply, GatewayError> {
        req.validate()?;
        let mut state = self.lock();
        let counter = state.counters.entry(req.tag.clone()).or_insert(0);
        let ordinal = *counter;
        *counter += 1;

        let entry = self
            .exact
            .get(&(req.tag.clone(), ordinal))
            .or_else(|| self.fallback.get(&req.tag))
            .ok_or_else(|| GatewayError::ScriptMiss {
                tag: req.tag.clone(),
                ordinal,
            })?;
        if let Some(message) = &entry.error {
            return Err(GatewayError::Scripted {
                tag: req.tag.clone(),
                ordinal,
                message: message.clone(),
            });
        }
        let text = substitute(&entry.reply_text, &req.bindings);
        state.calls.push(ScriptedCall {
            tag: req.tag.clone(),
            ordinal,
            reply_text: text.clone(),
        });
        Ok(ChatReply {
            text,
            backend_id: self.id.clone(),
            latency_ms: 0,
        })
    }
}
