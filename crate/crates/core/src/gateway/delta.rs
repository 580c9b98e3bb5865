//! Emotion-delta reply grammar.
//!
//! One triple per participant, `<Name>: (<dp>, <da>, <dd>)`, usually one per
//! line. Separators between entries are free-form so `Tom (+0.10, +0.05,
//! -0.05); John (...)` parses as well.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emotion::{clamp_delta, PadDelta};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeltaParseError {
    #[error("no emotion-delta triple found in reply")]
    NoTriples,
}

/// Per-participant deltas, in the order the participants were given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReply {
    pub deltas: Vec<(String, PadDelta)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl DeltaReply {
    /// All participants at zero; used when a round is treated as affect-neutral.
    pub fn neutral(participants: &[&str]) -> Self {
        Self {
            deltas: participants
                .iter()
                .map(|p| (p.to_string(), PadDelta::ZERO))
                .collect(),
            warnings: Vec::new(),
        }
    }

    pub fn get(&self, participant: &str) -> Option<PadDelta> {
        self.deltas
            .iter()
            .find(|(name, _)| name == participant)
            .map(|(_, d)| *d)
    }
}

fn triple_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let num = r"([+-]?(?:\d+\.?\d*|\.\d+))";
        Regex::new(&format!(
            r"([\p{{L}}][\p{{L}}\p{{N}}_ .'-]*?)\s*:?\s*\(\s*{num}\s*,\s*{num}\s*,\s*{num}\s*\)"
        ))
        .expect("valid delta regex")
    })
}

fn names_match(written: &str, participant: &str) -> bool {
    let written = written.trim();
    let participant = participant.trim();
    if written.eq_ignore_ascii_case(participant) {
        return true;
    }
    let first = |s: &str| s.split_whitespace().next().unwrap_or("").to_lowercase();
    !written.contains(' ') && written.to_lowercase() == first(participant)
}

/// Tries the written name, then each shorter word suffix, so leading prose
/// such as `Update for Tom` still resolves.
fn match_participant(written: &str, participants: &[&str]) -> Option<usize> {
    let words: Vec<&str> = written.split_whitespace().collect();
    (0..words.len()).find_map(|skip| {
        let candidate = words[skip..].join(" ");
        participants.iter().position(|p| names_match(&candidate, p))
    })
}

/// Extracts one delta per participant. Participants missing from the reply
/// get a zero delta and a warning; values are clipped to `cap`.
pub fn parse_delta_reply(text: &str, participants: &[&str], cap: f64) -> Result<DeltaReply, DeltaParseError> {
    let mut found: Vec<Option<PadDelta>> = vec![None; participants.len()];
    let mut warnings = Vec::new();
    let mut any = false;

    for caps in triple_pattern().captures_iter(text) {
        any = true;
        let name = caps[1].trim();
        let nums: Vec<f64> = (2..=4).map(|i| caps[i].parse::<f64>().unwrap_or(f64::NAN)).collect();
        let Some(slot) = match_participant(name, participants) else {
            warnings.push(format!("ignoring delta for non-participant {name:?}"));
            continue;
        };
        if found[slot].is_some() {
            warnings.push(format!("duplicate delta for {name:?}; keeping the first"));
            continue;
        }
        let raw = (nums[0], nums[1], nums[2]);
        match clamp_delta(raw, cap) {
            Ok(delta) => {
                if delta.as_array() != [raw.0, raw.1, raw.2] {
                    warnings.push(format!("delta for {name:?} clipped to cap {cap}"));
                }
                found[slot] = Some(delta);
            }
            Err(e) => warnings.push(format!("rejected delta for {name:?}: {e}")),
        }
    }
    if !any {
        return Err(DeltaParseError::NoTriples);
    }

    let deltas = participants
        .iter()
        .zip(found)
        .map(|(p, d)| {
            let d = d.unwrap_or_else(|| {
                warnings.push(format!("no delta for participant {p:?}; using zero"));
                PadDelta::ZERO
            });
            (p.to_string(), d)
        })
        .collect();
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(DeltaReply { deltas, warnings })
}

/// Renders a reply in the wire grammar, one participant per line.
pub fn format_delta_reply(reply: &DeltaReply) -> String {
    reply
        .deltas
        .iter()
        .map(|(name, d)| format!("{name}: ({:+}, {:+}, {:+})", d.dp, d.da, d.dd))
        .collect::<Vec<_>>()
        .join("\n")
}
