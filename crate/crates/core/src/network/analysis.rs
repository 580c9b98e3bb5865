use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::graph::{symmetrize, threshold, DirectedGraph, UndirectedGraph, DEFAULT_TAU};
use super::louvain::{louvain, DEFAULT_RESOLUTION, DEFAULT_SEED};
use super::metrics::{modularity_with_resolution, nmi, reciprocity, weighted_drift, Partition};
use super::NetworkError;
use crate::sim::RelationshipSnapshot;

pub const METRICS_HEADER: [&str; 6] = ["step", "q", "r", "r_w", "nmi_prev", "drift_prev"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig {
    pub tau: f64,
    pub resolution: f64,
    pub seed: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            resolution: DEFAULT_RESOLUTION,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u32,
    pub q: f64,
    pub r: f64,
    pub r_w: f64,
    pub nmi_prev: Option<f64>,
    pub drift_prev: Option<f64>,
}

/// Per-snapshot intermediate results, exposed for inspection and tests.
#[derive(Debug, Clone)]
pub struct SnapshotAnalysis {
    pub step: u32,
    pub undirected: UndirectedGraph,
    pub partition: Partition,
    pub row: MetricsRow,
    pub no_reciprocal_pairs: bool,
}

/// Threshold, then reciprocity on the directed graph and Louvain plus
/// modularity on its symmetrized form. Isolated nodes are left out of the
/// partition, so they never enter NMI or drift.
pub fn analyze_snapshot(snap: &RelationshipSnapshot, cfg: &AnalysisConfig) -> Result<SnapshotAnalysis, NetworkError> {
    let directed = threshold(&DirectedGraph::from_snapshot(snap)?, cfg.tau);
    let rec = reciprocity(&directed);
    let undirected = symmetrize(&directed);
    let full = louvain(&undirected, cfg.resolution, cfg.seed)?;
    let q = modularity_with_resolution(&undirected, &full, cfg.resolution)?;
    let partition = full.restrict(&undirected.non_isolated());
    Ok(SnapshotAnalysis {
        step: snap.step,
        undirected,
        partition,
        row: MetricsRow {
            step: snap.step,
            q,
            r: rec.r,
            r_w: rec.r_w,
            nmi_prev: None,
            drift_prev: None,
        },
        no_reciprocal_pairs: rec.no_reciprocal_pairs,
    })
}

/// One row per snapshot in log order; adjacent-pair columns are absent on
/// the first row and whenever the two partitions share no nodes.
pub fn analyze(log: &[RelationshipSnapshot], cfg: &AnalysisConfig) -> Result<Vec<MetricsRow>, NetworkError> {
    let mut rows = Vec::with_capacity(log.len());
    let mut prev: Option<SnapshotAnalysis> = None;
    for snap in log {
        let mut cur = analyze_snapshot(snap, cfg)?;
        if let Some(p) = &prev {
            match nmi(&p.partition, &cur.partition) {
                Ok(v) => {
                    cur.row.nmi_prev = Some(v);
                    cur.row.drift_prev = Some(weighted_drift(&p.partition, &cur.partition, &p.undirected)?);
                }
                Err(NetworkError::NoCommonNodes) => {
                    log::debug!("step {}: no nodes in common with previous snapshot", snap.step);
                }
                Err(e) => return Err(e),
            }
        }
        rows.push(cur.row.clone());
        prev = Some(cur);
    }
    Ok(rows)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn write_metrics_csv<W: Write>(out: W, rows: &[MetricsRow]) -> Result<(), NetworkError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record([
            r.step.to_string(),
            cell(Some(r.q)),
            cell(Some(r.r)),
            cell(Some(r.r_w)),
            cell(r.nmi_prev),
            cell(r.drift_prev),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a metrics CSV, requiring the exact header.
pub fn read_metrics_csv<R: Read>(input: R) -> Result<Vec<MetricsRow>, NetworkError> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != METRICS_HEADER {
        return Err(NetworkError::MetricsFormat(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let bad = |m: String| NetworkError::MetricsFormat(format!("row {}: {m}", i + 1));
        let num = |k: usize| -> Result<Option<f64>, NetworkError> {
            let s = rec.get(k).unwrap_or("").trim();
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|_| bad(format!("bad number {s:?} in {}", METRICS_HEADER[k])))
        };
        let required = |k: usize| num(k)?.ok_or_else(|| bad(format!("{} is required", METRICS_HEADER[k])));
        rows.push(MetricsRow {
            step: rec.get(0).unwrap_or("").trim().parse().map_err(|_| bad("bad step".into()))?,
            q: required(1)?,
            r: required(2)?,
            r_w: required(3)?,
            nmi_prev: num(4)?,
            drift_prev: num(5)?,
        });
    }
    Ok(rows)
}
