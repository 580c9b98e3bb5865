use std::path::Path;

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::SimError;
use crate::emotion::{DecayConfig, DEFAULT_DELTA_CAP};
use crate::memory::{RetrievalWeights, DEFAULT_FOCUS_QUESTION_CAP, DEFAULT_REFLECTION_THRESHOLD, DEFAULT_RETRIEVAL_LIMIT};

pub const START_TIME_FORMAT: &str = "%Y-%m-%d %H:%M";

/// Default town map; persona home locations not listed here are appended.
pub const DEFAULT_LOCATIONS: [&str; 8] = [
    "The Willows Market and Pharmacy",
    "Hobbs Cafe",
    "Oak Hill College",
    "Johnson Park",
    "The Rose and Crown Pub",
    "Harvey Oak Supply Store",
    "Town Hall",
    "Willow Street Apartments",
];

fn default_start() -> NaiveDateTime {
    NaiveDateTime::parse_from_str("2025-02-13 08:00", START_TIME_FORMAT).expect("valid default start")
}

fn ser_time<S: Serializer>(t: &NaiveDateTime, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&t.format(START_TIME_FORMAT).to_string())
}

fn de_time<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDateTime, D::Error> {
    let s = String::deserialize(d)?;
    NaiveDateTime::parse_from_str(&s, START_TIME_FORMAT)
        .map_err(|e| serde::de::Error::custom(format!("start_time {s:?}: {e} (expected YYYY-MM-DD HH:MM)")))
}

/// Simulation parameters. The TOML form uses these field names verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_agents: usize,
    pub n_steps: u32,
    pub step_minutes: f64,
    #[serde(serialize_with = "ser_time", deserialize_with = "de_time")]
    pub start_time: NaiveDateTime,
    pub decay: DecayConfig,
    pub conversation_rounds_max: usize,
    pub probe_delta_cap: f64,
    pub snapshot_every_steps: u32,
    pub rng_seed: u64,

    pub delta_cap: f64,
    pub reflection_threshold: u32,
    pub focus_question_cap: usize,
    pub retrieval_limit: usize,
    /// Memories pulled into each utterance and enrichment prompt.
    pub conversation_memory_limit: usize,
    pub retrieval: RetrievalWeights,
    pub locations: Vec<String>,
    /// Chance per step that an agent walks to a uniformly drawn location.
    pub move_probability: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_agents: 25,
            n_steps: 36,
            step_minutes: 20.0,
            start_time: default_start(),
            decay: DecayConfig::default(),
            conversation_rounds_max: 4,
            probe_delta_cap: 0.3,
            snapshot_every_steps: 1,
            rng_seed: 42,
            delta_cap: DEFAULT_DELTA_CAP,
            reflection_threshold: DEFAULT_REFLECTION_THRESHOLD,
            focus_question_cap: DEFAULT_FOCUS_QUESTION_CAP,
            retrieval_limit: DEFAULT_RETRIEVAL_LIMIT,
            conversation_memory_limit: 5,
            retrieval: RetrievalWeights::default(),
            locations: DEFAULT_LOCATIONS.iter().map(|s| s.to_string()).collect(),
            move_probability: 0.5,
        }
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |m: String| Err(SimError::Config(m));
        if !(self.step_minutes.is_finite() && self.step_minutes > 0.0) {
            return fail(format!("step_minutes must be positive, got {}", self.step_minutes));
        }
        self.decay.validate().map_err(|e| SimError::Config(e.to_string()))?;
        if (self.decay.step_minutes - self.step_minutes).abs() > 1e-9 {
            return fail(format!(
                "decay.step_minutes ({}) must equal step_minutes ({})",
                self.decay.step_minutes, self.step_minutes
            ));
        }
        if self.conversation_rounds_max == 0 {
            return fail("conversation_rounds_max must be at least 1".into());
        }
        if !(self.probe_delta_cap > 0.0 && self.delta_cap > 0.0) {
            return fail("probe_delta_cap and delta_cap must be positive".into());
        }
        if self.snapshot_every_steps == 0 {
            return fail("snapshot_every_steps must be at least 1".into());
        }
        if self.reflection_threshold == 0 || self.retrieval_limit == 0 || self.focus_question_cap == 0 {
            return fail("reflection_threshold, retrieval_limit and focus_question_cap must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.move_probability) {
            return fail(format!("move_probability must be in [0, 1], got {}", self.move_probability));
        }
        Ok(())
    }

    /// Wall-clock time at the start of step `t`.
    pub fn time_at(&self, t: u32) -> NaiveDateTime {
        self.start_time + Duration::milliseconds((f64::from(t) * self.step_minutes * 60_000.0).round() as i64)
    }

    /// Time after the final step.
    pub fn end_time(&self) -> NaiveDateTime {
        self.time_at(self.n_steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_cover_twelve_hours() {
        let cfg = SimConfig::default();
        assert_eq!(cfg.n_agents, 25);
        assert_eq!(cfg.n_steps, 36);
        assert_eq!(f64::from(cfg.n_steps) * cfg.step_minutes, 720.0);
        assert_eq!(cfg.end_time() - cfg.start_time, Duration::minutes(720));
        assert_eq!(cfg.end_time().format(START_TIME_FORMAT).to_string(), "2025-02-13 20:00");
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let cfg = SimConfig::default();
        assert_eq!(SimConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        let partial = SimConfig::from_toml("n_agents = 2\nrng_seed = 7\nstart_time = \"2025-02-13 08:20\"\n").unwrap();
        assert_eq!(partial.n_agents, 2);
        assert_eq!(partial.rng_seed, 7);
        assert_eq!(partial.n_steps, 36);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(SimConfig::from_toml("unknown_key = 1").is_err());
        assert!(SimConfig::from_toml("start_time = \"yesterday\"").is_err());
        assert!(SimConfig::from_toml("step_minutes = 30").is_err());
        assert!(SimConfig::from_toml("move_probability = 1.5").is_err());
        assert!(SimConfig::from_toml("conversation_rounds_max = 0").is_err());
    }
}
