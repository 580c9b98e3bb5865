use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::emotion::PadState;

/// The bundled 25-agent roster.
pub const DEFAULT_PERSONAS_JSONL: &str = include_str!("../../data/personas.jsonl");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub id: String,
    pub name: String,
    /// Innate traits, occupation and relationships, as free text.
    pub persona_text: String,
    pub home_location: String,
    /// Starting affect; neutral when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_pad: Option<PadState>,
}

pub fn parse_personas(text: &str) -> Result<Vec<AgentProfile>, SimError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |m: String| SimError::Config(format!("personas line {}: {m}", i + 1));
        let profile: AgentProfile = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        if profile.id.trim().is_empty() {
            return Err(bad("empty id".into()));
        }
        if profile.persona_text.trim().is_empty() {
            return Err(bad(format!("persona_text for {:?} is empty", profile.id)));
        }
        if !seen.insert(profile.id.clone()) {
            return Err(bad(format!("duplicate id {:?}", profile.id)));
        }
        if let Some(pad) = profile.initial_pad {
            if pad.as_array().iter().any(|v| !(-1.0..=1.0).contains(v)) {
                return Err(bad(format!("initial_pad for {:?} outside [-1, 1]", profile.id)));
            }
        }
        out.push(profile);
    }
    Ok(out)
}

pub fn load_personas(path: impl AsRef<Path>) -> Result<Vec<AgentProfile>, SimError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| SimError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_personas(&text)
}

pub fn default_personas() -> Vec<AgentProfile> {
    parse_personas(DEFAULT_PERSONAS_JSONL).expect("bundled personas are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_roster_has_the_named_agents() {
        let roster = default_personas();
        assert_eq!(roster.len(), 25);
        for name in ["Tom Moreno", "John Lin", "Sam Moore"] {
            assert!(roster.iter().any(|p| p.name == name), "missing {name}");
        }
    }

    #[test]
    fn rejects_duplicates_and_empty_personas() {
        let a = r#"{"id":"a","name":"A","persona_text":"x","home_location":"Hobbs Cafe"}"#;
        assert!(parse_personas(&format!("{a}\n{a}\n")).is_err());
        let empty = r#"{"id":"b","name":"B","persona_text":" ","home_location":"Hobbs Cafe"}"#;
        assert!(parse_personas(empty).is_err());
        let pad = r#"{"id":"c","name":"C","persona_text":"x","home_location":"H","initial_pad":{"p":2.0,"a":0,"d":0}}"#;
        assert!(parse_personas(pad).is_err());
    }
}
