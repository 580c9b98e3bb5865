//! Discrete-time orchestrator.
//!
//! A [`World`] owns the agent population, their affect and memory, and the
//! directed relationship graph. Each call to [`World::step`] runs decay,
//! movement, conversation initiation, conversations with per-round affect
//! updates, relationship probes, reflections and snapshot emission, in that
//! order.

mod config;
mod persona;
mod prompts;
mod snapshot;
mod world;

use thiserror::Error;

pub use config::{SimConfig, DEFAULT_LOCATIONS, START_TIME_FORMAT};
pub use persona::{default_personas, load_personas, parse_personas, AgentProfile, DEFAULT_PERSONAS_JSONL};
pub use snapshot::{
    check_monotone, read_snapshots, write_snapshot_line, RelationshipSnapshot, SnapshotEdge,
};
pub use world::{
    parse_probe_delta, Agent, ConversationRecord, Round, RunSummary, StepReport, Utterance, World,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("simulation already ran all {0} steps")]
    Finished(u32),
    #[error("I/O error writing {what}: {source}")]
    Io {
        what: &'static str,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed snapshot log at line {line}: {message}")]
    Snapshot { line: usize, message: String },
}
