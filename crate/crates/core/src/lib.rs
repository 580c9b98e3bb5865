//! Emotionally stateful multi-agent social simulation.
//!
//! Agents carry a persistent Pleasure-Arousal-Dominance state that is nudged
//! after every conversation round, revised during memory reflection, and
//! relaxes toward neutral between steps. The crate also ships the network
//! diagnostics used to study the relationship graphs such runs produce, and
//! an LLM-judge harness with inter-judge agreement checks.

pub mod emotion;
pub mod enrichment;
pub mod eval;
pub mod gateway;
pub mod memory;
pub mod network;
pub mod sim;

pub use emotion::{apply_delta, clamp_delta, decay, DecayConfig, PadDelta, PadState};
