use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::Deserialize;

use super::SimError;

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotEdge {
    pub src: String,
    pub dst: String,
    pub weight: f64,
}

/// The directed weighted relationship graph at one step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RelationshipSnapshot {
    pub step: u32,
    /// Sorted by `(src, dst)`, at most one edge per ordered pair.
    pub edges: Vec<SnapshotEdge>,
}

#[derive(Deserialize)]
struct RawSnapshot {
    step: u32,
    edges: Vec<(String, String, f64)>,
}

fn fixed6(w: f64) -> String {
    let s = format!("{w:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

impl RelationshipSnapshot {
    /// One JSON object, no trailing newline. Weights carry six decimals.
    pub fn to_json_line(&self) -> String {
        let edges: Vec<String> = self
            .edges
            .iter()
            .map(|e| {
                format!(
                    "[{},{},{}]",
                    serde_json::to_string(&e.src).expect("string serializes"),
                    serde_json::to_string(&e.dst).expect("string serializes"),
                    fixed6(e.weight)
                )
            })
            .collect();
        format!("{{\"step\":{},\"edges\":[{}]}}", self.step, edges.join(","))
    }

    pub fn edge_set(&self) -> BTreeSet<(&str, &str)> {
        self.edges.iter().map(|e| (e.src.as_str(), e.dst.as_str())).collect()
    }
}

pub fn write_snapshot_line<W: Write>(out: &mut W, snap: &RelationshipSnapshot) -> std::io::Result<()> {
    writeln!(out, "{}", snap.to_json_line())
}

/// Reads a snapshot log, validating weights, pair uniqueness and step order.
pub fn read_snapshots<R: BufRead>(input: R) -> Result<Vec<RelationshipSnapshot>, SimError> {
    let mut out: Vec<RelationshipSnapshot> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let n = i + 1;
        let bad = |message: String| SimError::Snapshot { line: n, message };
        let line = line.map_err(|e| bad(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawSnapshot = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        if let Some(prev) = out.last() {
            if raw.step <= prev.step {
                return Err(bad(format!("step {} does not follow step {}", raw.step, prev.step)));
            }
        }
        let mut seen = BTreeSet::new();
        let mut edges = Vec::with_capacity(raw.edges.len());
        for (src, dst, weight) in raw.edges {
            if !weight.is_finite() || !(-1.0..=1.0).contains(&weight) {
                return Err(bad(format!("weight {weight} for {src}->{dst} outside [-1, 1]")));
            }
            if src == dst {
                return Err(bad(format!("self-loop on {src}")));
            }
            if !seen.insert((src.clone(), dst.clone())) {
                return Err(bad(format!("duplicate edge {src}->{dst}")));
            }
            edges.push(SnapshotEdge { src, dst, weight });
        }
        edges.sort_by(|a, b| (&a.src, &a.dst).cmp(&(&b.src, &b.dst)));
        out.push(RelationshipSnapshot { step: raw.step, edges });
    }
    Ok(out)
}

/// Checks the cumulative-tie property. On failure returns the later step
/// and the ordered pair that disappeared.
pub fn check_monotone(log: &[RelationshipSnapshot]) -> Result<(), (u32, String, String)> {
    for pair in log.windows(2) {
        let later = pair[1].edge_set();
        for (src, dst) in pair[0].edge_set() {
            if !later.contains(&(src, dst)) {
                return Err((pair[1].step, src.to_string(), dst.to_string()));
            }
        }
    }
    Ok(())
}
