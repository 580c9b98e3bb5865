use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::UndirectedGraph;
use super::metrics::Partition;
use super::NetworkError;

pub const DEFAULT_RESOLUTION: f64 = 1.0;
pub const DEFAULT_SEED: u64 = 42;

/// Gains at or below this are treated as no improvement.
const MIN_GAIN: f64 = 1e-12;

/// Symmetric weight matrix in sparse form; `self_loops[i]` holds the
/// diagonal entry `A_ii` as it appears in the double sum.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    self_loops: Vec<f64>,
}

impl Level {
    fn strength(&self, i: usize) -> f64 {
        self.self_loops[i] + self.adj[i].iter().map(|(_, w)| w).sum::<f64>()
    }
}

/// Louvain community detection: repeated local moves over a seeded shuffle
/// of the id-sorted nodes, then aggregation, until no node moves.
/// Isolated nodes stay in singleton communities.
pub fn louvain(g: &UndirectedGraph, resolution: f64, seed: u64) -> Result<Partition, NetworkError> {
    if let Some((_, _, w)) = g.edges().find(|(_, _, w)| *w < 0.0) {
        return Err(NetworkError::NegativeWeight(w));
    }
    let n = g.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut membership: Vec<usize> = (0..n).collect();
    let mut level = Level {
        adj: g.adjacency(),
        self_loops: vec![0.0; n],
    };
    let two_m: f64 = 2.0 * g.total_weight();

    if two_m > 0.0 {
        loop {
            let (comm, moved) = local_moves(&level, resolution, two_m, &mut rng);
            let (comm, k) = relabel(&comm);
            for m in &mut membership {
                *m = comm[*m];
            }
            if !moved {
                break;
            }
            level = aggregate(&level, &comm, k);
        }
    }
    Ok(Partition::new(
        g.nodes().iter().cloned().zip(membership),
    ))
}

fn local_moves(level: &Level, gamma: f64, two_m: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
    let n = level.adj.len();
    let k: Vec<f64> = (0..n).map(|i| level.strength(i)).collect();
    let mut comm: Vec<usize> = (0..n).collect();
    let mut tot = k.clone();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut any_move = false;
    let mut links = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    loop {
        let mut moved = false;
        for &i in &order {
            if level.adj[i].is_empty() {
                continue;
            }
            let own = comm[i];
            for &c in &touched {
                links[c] = 0.0;
            }
            touched.clear();
            for &(j, w) in &level.adj[i] {
                let c = comm[j];
                if links[c] == 0.0 && !touched.contains(&c) {
                    touched.push(c);
                }
                links[c] += w;
            }
            tot[own] -= k[i];
            let gain = |c: usize, links_c: f64| links_c - gamma * tot[c] * k[i] / two_m;
            let stay = gain(own, if touched.contains(&own) { links[own] } else { 0.0 });
            let mut best = own;
            let mut best_gain = stay;
            touched.sort_unstable();
            for &c in &touched {
                let g = gain(c, links[c]);
                if g > best_gain + MIN_GAIN {
                    best = c;
                    best_gain = g;
                }
            }
            tot[best] += k[i];
            if best != own {
                comm[i] = best;
                moved = true;
                any_move = true;
            }
        }
        if !moved {
            break;
        }
    }
    (comm, any_move)
}

/// Renumbers communities by first appearance in node order.
fn relabel(comm: &[usize]) -> (Vec<usize>, usize) {
    let mut map = vec![usize::MAX; comm.len()];
    let mut next = 0;
    let out = comm
        .iter()
        .map(|&c| {
            if map[c] == usize::MAX {
                map[c] = next;
                next += 1;
            }
            map[c]
        })
        .collect();
    (out, next)
}

fn aggregate(level: &Level, comm: &[usize], k: usize) -> Level {
    let mut self_loops = vec![0.0; k];
    let mut maps: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); k];
    for (i, list) in level.adj.iter().enumerate() {
        let ci = comm[i];
        self_loops[ci] += level.self_loops[i];
        for &(j, w) in list {
            let cj = comm[j];
            if ci == cj {
                self_loops[ci] += w;
            } else {
                *maps[ci].entry(cj).or_insert(0.0) += w;
            }
        }
    }
    Level {
        adj: maps.into_iter().map(|m| m.into_iter().collect()).collect(),
        self_loops,
    }
}
