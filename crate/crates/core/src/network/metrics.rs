use std::collections::{BTreeMap, BTreeSet};

use super::graph::{DirectedGraph, UndirectedGraph};
use super::NetworkError;

/// Minimum Jaccard overlap for two communities in consecutive partitions to
/// count as the same community.
pub const DRIFT_MATCH_MIN_JACCARD: f64 = 0.5;

/// Node-to-community assignment. Community ids are canonical: numbered in
/// order of first appearance when nodes are visited in sorted id order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Partition {
    assignment: BTreeMap<String, usize>,
}

impl Partition {
    pub fn new<K: Into<String>>(assignment: impl IntoIterator<Item = (K, usize)>) -> Self {
        let raw: BTreeMap<String, usize> = assignment.into_iter().map(|(k, c)| (k.into(), c)).collect();
        let mut relabel: BTreeMap<usize, usize> = BTreeMap::new();
        let assignment = raw
            .into_iter()
            .map(|(node, c)| {
                let next = relabel.len();
                (node, *relabel.entry(c).or_insert(next))
            })
            .collect();
        Self { assignment }
    }

    /// Builds a partition from explicit groups; later groups win on overlap.
    pub fn from_groups<S: AsRef<str>>(groups: &[Vec<S>]) -> Self {
        Self::new(
            groups
                .iter()
                .enumerate()
                .flat_map(|(c, g)| g.iter().map(move |n| (n.as_ref().to_string(), c))),
        )
    }

    pub fn community_of(&self, node: &str) -> Option<usize> {
        self.assignment.get(node).copied()
    }

    pub fn assignment(&self) -> &BTreeMap<String, usize> {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn community_count(&self) -> usize {
        self.assignment.values().collect::<BTreeSet<_>>().len()
    }

    /// Members of each community, indexed by community id.
    pub fn communities(&self) -> Vec<Vec<String>> {
        let mut out = vec![Vec::new(); self.community_count()];
        for (node, &c) in &self.assignment {
            out[c].push(node.clone());
        }
        out
    }

    /// The partition restricted to `nodes`, relabeled canonically.
    pub fn restrict(&self, nodes: &BTreeSet<String>) -> Partition {
        Partition::new(
            self.assignment
                .iter()
                .filter(|(n, _)| nodes.contains(*n))
                .map(|(n, c)| (n.clone(), *c)),
        )
    }
}

/// `Q = (1/2W) Σ_ij [w_ij − γ s_i s_j / 2W] δ(c_i, c_j)` over the symmetric
/// weight matrix. Isolated nodes may be absent from the partition. An
/// edgeless graph has `Q = 0`.
pub fn modularity_with_resolution(g: &UndirectedGraph, p: &Partition, gamma: f64) -> Result<f64, NetworkError> {
    let nodes = g.nodes();
    let strengths = g.strengths();
    let mut comm = vec![None; nodes.len()];
    for (i, id) in nodes.iter().enumerate() {
        comm[i] = p.community_of(id);
        if comm[i].is_none() && strengths[i] > 0.0 {
            return Err(NetworkError::MissingFromPartition(id.clone()));
        }
    }
    let two_w = 2.0 * g.total_weight();
    if two_w == 0.0 {
        return Ok(0.0);
    }
    let mut internal: BTreeMap<usize, f64> = BTreeMap::new();
    let mut total: BTreeMap<usize, f64> = BTreeMap::new();
    for (i, j, w) in g.edges() {
        if comm[i] == comm[j] {
            *internal.entry(comm[i].expect("non-isolated")).or_insert(0.0) += 2.0 * w;
        }
    }
    for (i, s) in strengths.iter().enumerate() {
        if let Some(c) = comm[i] {
            *total.entry(c).or_insert(0.0) += s;
        }
    }
    let q = total
        .iter()
        .map(|(c, tot)| internal.get(c).copied().unwrap_or(0.0) / two_w - gamma * (tot / two_w).powi(2))
        .sum();
    Ok(q)
}

pub fn modularity(g: &UndirectedGraph, p: &Partition) -> Result<f64, NetworkError> {
    modularity_with_resolution(g, p, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reciprocity {
    /// Mutual unordered pairs over connected unordered pairs; 0 on an empty graph.
    pub r: f64,
    /// Mean symmetry `1 − |w_uv − w_vu| / (w_uv + w_vu)` over mutual pairs.
    pub r_w: f64,
    /// Set when there are no mutual pairs, in which case `r_w` is 0.
    pub no_reciprocal_pairs: bool,
}

/// Binary and weighted reciprocity over unordered pairs. Expects
/// non-negative (thresholded) weights.
pub fn reciprocity(g: &DirectedGraph) -> Reciprocity {
    let mut connected = 0usize;
    let mut mutual = 0usize;
    let mut symmetry = 0.0;
    for ((src, dst), &w) in g.edges() {
        match g.weight(dst, src) {
            Some(back) => {
                if src < dst {
                    connected += 1;
                    mutual += 1;
                    let sum = w + back;
                    symmetry += if sum > 0.0 { 1.0 - (w - back).abs() / sum } else { 1.0 };
                }
            }
            None => connected += 1,
        }
    }
    let r = if connected == 0 { 0.0 } else { mutual as f64 / connected as f64 };
    if mutual == 0 {
        return Reciprocity { r, r_w: 0.0, no_reciprocal_pairs: true };
    }
    Reciprocity { r, r_w: symmetry / mutual as f64, no_reciprocal_pairs: false }
}

fn entropy(counts: &mut [usize], n: f64) -> f64 {
    counts.sort_unstable();
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let q = c as f64 / n;
            -q * q.ln()
        })
        .sum()
}

/// `2 I(C1; C2) / (H(C1) + H(C2))` over nodes present in both partitions,
/// natural log. Defined as 1 when both entropies vanish.
pub fn nmi(p1: &Partition, p2: &Partition) -> Result<f64, NetworkError> {
    let common: Vec<&String> = p1.assignment.keys().filter(|n| p2.assignment.contains_key(*n)).collect();
    if common.is_empty() {
        return Err(NetworkError::NoCommonNodes);
    }
    let n = common.len() as f64;
    let mut a: BTreeMap<usize, usize> = BTreeMap::new();
    let mut b: BTreeMap<usize, usize> = BTreeMap::new();
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for node in common {
        let (x, y) = (p1.assignment[node], p2.assignment[node]);
        *a.entry(x).or_insert(0) += 1;
        *b.entry(y).or_insert(0) += 1;
        *joint.entry((x, y)).or_insert(0) += 1;
    }
    let h1 = entropy(&mut a.into_values().collect::<Vec<_>>(), n);
    let h2 = entropy(&mut b.into_values().collect::<Vec<_>>(), n);
    if h1 + h2 == 0.0 {
        log::debug!("nmi: both partitions are a single community; defined as 1");
        return Ok(1.0);
    }
    let h12 = entropy(&mut joint.into_values().collect::<Vec<_>>(), n);
    let mi = h1 + h2 - h12;
    Ok((2.0 * mi / (h1 + h2)).clamp(0.0, 1.0))
}

/// Greedy one-to-one matching of communities by descending Jaccard overlap,
/// keeping pairs with overlap of at least [`DRIFT_MATCH_MIN_JACCARD`].
/// Returns the matched community of `p2` for each community of `p1`.
pub fn match_communities(p1: &Partition, p2: &Partition) -> BTreeMap<usize, usize> {
    let c1 = p1.communities();
    let c2 = p2.communities();
    let sets2: Vec<BTreeSet<&String>> = c2.iter().map(|c| c.iter().collect()).collect();
    let mut candidates = Vec::new();
    for (i, a) in c1.iter().enumerate() {
        let a: BTreeSet<&String> = a.iter().collect();
        for (j, b) in sets2.iter().enumerate() {
            let inter = a.intersection(b).count();
            if inter == 0 {
                continue;
            }
            let union = a.len() + b.len() - inter;
            let jaccard = inter as f64 / union as f64;
            if jaccard >= DRIFT_MATCH_MIN_JACCARD {
                candidates.push((jaccard, i, j));
            }
        }
    }
    candidates.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut matched = BTreeMap::new();
    let mut used = BTreeSet::new();
    for (_, i, j) in candidates {
        if !matched.contains_key(&i) && !used.contains(&j) {
            matched.insert(i, j);
            used.insert(j);
        }
    }
    matched
}

/// Strength-weighted share of common nodes whose community changed between
/// `p1` and `p2`. Strengths come from `g1`, the earlier graph; community
/// identity is established by [`match_communities`]. Returns 0 when the
/// common nodes carry no strength.
pub fn weighted_drift(p1: &Partition, p2: &Partition, g1: &UndirectedGraph) -> Result<f64, NetworkError> {
    let common: BTreeSet<String> = p1
        .assignment
        .keys()
        .filter(|n| p2.assignment.contains_key(*n))
        .cloned()
        .collect();
    if common.is_empty() {
        return Err(NetworkError::NoCommonNodes);
    }
    let q1 = p1.restrict(&common);
    let q2 = p2.restrict(&common);
    let matched = match_communities(&q1, &q2);
    let strengths = g1.strengths();
    let mut total = 0.0;
    let mut changed = 0.0;
    for node in &common {
        let s = g1.index_of(node).map(|i| strengths[i]).unwrap_or(0.0);
        total += s;
        let before = q1.assignment[node];
        if matched.get(&before) != Some(&q2.assignment[node]) {
            changed += s;
        }
    }
    if total == 0.0 {
        log::debug!("weighted drift: common nodes have zero strength; defined as 0");
        return Ok(0.0);
    }
    Ok(changed / total)
}
