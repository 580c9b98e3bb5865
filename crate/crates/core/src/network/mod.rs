//! Relationship-graph diagnostics.
//!
//! Snapshots are thresholded (`w >= tau`), reciprocity is measured on the
//! directed graph, and the graph is symmetrized by summing both directions
//! before Louvain community detection and modularity. Consecutive snapshots
//! are compared with NMI and strength-weighted drift.

mod analysis;
mod graph;
mod louvain;
mod metrics;
pub mod synthetic;

use thiserror::Error;

pub use analysis::{
    analyze, analyze_snapshot, read_metrics_csv, write_metrics_csv, AnalysisConfig, MetricsRow, SnapshotAnalysis,
    METRICS_HEADER,
};
pub use graph::{symmetrize, threshold, DirectedGraph, UndirectedGraph, DEFAULT_TAU};
pub use louvain::{louvain, DEFAULT_RESOLUTION, DEFAULT_SEED};
pub use metrics::{
    match_communities, modularity, modularity_with_resolution, nmi, reciprocity, weighted_drift, Partition,
    Reciprocity, DRIFT_MATCH_MIN_JACCARD,
};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("self-loop on node {0:?}")]
    SelfLoop(String),
    #[error("non-finite edge weight {0}")]
    NonFiniteWeight(f64),
    #[error("negative edge weight {0}; threshold the graph first")]
    NegativeWeight(f64),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("node {0:?} has edges but no community")]
    MissingFromPartition(String),
    #[error("partitions share no nodes")]
    NoCommonNodes,
    #[error("metrics CSV: {0}")]
    MetricsFormat(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
