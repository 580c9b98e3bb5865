//! Synthetic snapshot logs with known community structure.
//!
//! Construction: 25 agents `agent_00`..`agent_24` split into three planted
//! communities of sizes 8, 8 and 9. Every ordered pair inside a community
//! carries a weight drawn uniformly from `[0.4, 0.6]`, redrawn each step.
//! Each agent also holds two weak ties (weight 0.1, below the default
//! threshold) to agents outside its community. Ten snapshots are emitted.
//!
//! The rewiring log uses the same construction for steps 0 to 4, then at
//! step 5 reassigns agents to communities by a seeded random permutation.
//! Ties from the old structure persist with weight 0.05 so edge sets stay
//! cumulative.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sim::{RelationshipSnapshot, SnapshotEdge};

pub const SYNTHETIC_AGENTS: usize = 25;
pub const COMMUNITY_SIZES: [usize; 3] = [8, 8, 9];
pub const SYNTHETIC_STEPS: u32 = 10;
pub const REWIRE_STEP: u32 = 5;
const WEAK_TIE: f64 = 0.1;
const STALE_TIE: f64 = 0.05;
const WEAK_TIES_PER_AGENT: usize = 2;

pub fn agent_id(i: usize) -> String {
    format!("agent_{i:02}")
}

/// Community index of every agent under the planted split.
pub fn planted_assignment() -> Vec<usize> {
    COMMUNITY_SIZES
        .iter()
        .enumerate()
        .flat_map(|(c, &size)| std::iter::repeat_n(c, size))
        .collect()
}

/// The planted split applied to a seeded random ordering of the agents.
pub fn shuffled_assignment(rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..SYNTHETIC_AGENTS).collect();
    order.shuffle(rng);
    let planted = planted_assignment();
    let mut out = vec![0; SYNTHETIC_AGENTS];
    for (slot, &agent) in order.iter().enumerate() {
        out[agent] = planted[slot];
    }
    out
}

fn weak_ties(assign: &[usize], rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut ties = Vec::new();
    for a in 0..assign.len() {
        let outside: Vec<usize> = (0..assign.len()).filter(|&b| assign[b] != assign[a]).collect();
        for &b in outside.choose_multiple(rng, WEAK_TIES_PER_AGENT) {
            ties.push((a, b));
        }
    }
    ties
}

fn emit(step: u32, edges: &BTreeMap<(usize, usize), f64>) -> RelationshipSnapshot {
    RelationshipSnapshot {
        step,
        edges: edges
            .iter()
            .map(|(&(a, b), &w)| SnapshotEdge { src: agent_id(a), dst: agent_id(b), weight: w })
            .collect(),
    }
}

fn structure(assign: &[usize], weak: &[(usize, usize)], rng: &mut ChaCha8Rng) -> BTreeMap<(usize, usize), f64> {
    let mut edges = BTreeMap::new();
    for &(a, b) in weak {
        edges.insert((a, b), WEAK_TIE);
    }
    for a in 0..assign.len() {
        for b in 0..assign.len() {
            if a != b && assign[a] == assign[b] {
                edges.insert((a, b), rng.random_range(0.4..=0.6));
            }
        }
    }
    edges
}

/// Ten snapshots of the fixed planted communities.
pub fn stable_log(seed: u64) -> Vec<RelationshipSnapshot> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let assign = planted_assignment();
    let weak = weak_ties(&assign, &mut rng);
    (0..SYNTHETIC_STEPS)
        .map(|t| emit(t, &structure(&assign, &weak, &mut rng)))
        .collect()
}

/// Planted communities until [`REWIRE_STEP`], then a random reassignment.
pub fn rewiring_log(seed: u64) -> Vec<RelationshipSnapshot> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let before = planted_assignment();
    let weak_before = weak_ties(&before, &mut rng);
    let after = shuffled_assignment(&mut rng);
    let weak_after = weak_ties(&after, &mut rng);

    let mut log = Vec::new();
    let mut seen: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for t in 0..SYNTHETIC_STEPS {
        let (assign, weak) = if t < REWIRE_STEP { (&before, &weak_before) } else { (&after, &weak_after) };
        let current = structure(assign, weak, &mut rng);
        for w in seen.values_mut() {
            *w = STALE_TIE;
        }
        seen.extend(current);
        log.push(emit(t, &seen));
    }
    log
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::check_monotone;

    #[test]
    fn logs_are_cumulative_and_sized() {
        let stable = stable_log(42);
        assert_eq!(stable.len(), 10);
        assert!(check_monotone(&stable).is_ok());
        let rewired = rewiring_log(42);
        assert_eq!(rewired.len(), 10);
        assert!(check_monotone(&rewired).is_ok());
        assert!(rewired[5].edges.len() > rewired[4].edges.len());
    }
}
