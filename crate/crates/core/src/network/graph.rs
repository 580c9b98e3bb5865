use std::collections::{BTreeMap, BTreeSet};

use super::NetworkError;
use crate::sim::RelationshipSnapshot;

/// Default edge threshold: weaker and negative ties are dropped.
pub const DEFAULT_TAU: f64 = 0.2;

/// Directed weighted graph over string node ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DirectedGraph {
    nodes: BTreeSet<String>,
    edges: BTreeMap<(String, String), f64>,
}

impl DirectedGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// All snapshot endpoints become nodes, even those whose edges are later
    /// thresholded away.
    pub fn from_snapshot(snap: &RelationshipSnapshot) -> Result<Self, NetworkError> {
        let mut g = Self::new();
        for e in &snap.edges {
            g.add_edge(&e.src, &e.dst, e.weight)?;
        }
        Ok(g)
    }

    pub fn add_node(&mut self, id: impl Into<String>) {
        self.nodes.insert(id.into());
    }

    /// Inserts or replaces the edge `src -> dst`.
    pub fn add_edge(&mut self, src: &str, dst: &str, weight: f64) -> Result<(), NetworkError> {
        if src == dst {
            return Err(NetworkError::SelfLoop(src.to_string()));
        }
        if !weight.is_finite() {
            return Err(NetworkError::NonFiniteWeight(weight));
        }
        self.nodes.insert(src.to_string());
        self.nodes.insert(dst.to_string());
        self.edges.insert((src.to_string(), dst.to_string()), weight);
        Ok(())
    }

    pub fn nodes(&self) -> &BTreeSet<String> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeMap<(String, String), f64> {
        &self.edges
    }

    pub fn weight(&self, src: &str, dst: &str) -> Option<f64> {
        self.edges.get(&(src.to_string(), dst.to_string())).copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
}

/// Keeps exactly the edges with `weight >= tau`. The node set is unchanged.
pub fn threshold(g: &DirectedGraph, tau: f64) -> DirectedGraph {
    DirectedGraph {
        nodes: g.nodes.clone(),
        edges: g
            .edges
            .iter()
            .filter(|(_, w)| **w >= tau)
            .map(|(k, w)| (k.clone(), *w))
            .collect(),
    }
}

/// Undirected weighted graph with nodes stored in sorted id order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UndirectedGraph {
    nodes: Vec<String>,
    /// Keyed by node index pair `(i, j)` with `i < j`.
    edges: BTreeMap<(usize, usize), f64>,
}

impl UndirectedGraph {
    pub fn new(nodes: impl IntoIterator<Item = String>) -> Self {
        let set: BTreeSet<String> = nodes.into_iter().collect();
        Self {
            nodes: set.into_iter().collect(),
            edges: BTreeMap::new(),
        }
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.as_str().cmp(id)).ok()
    }

    /// Adds `weight` to the edge `{a, b}`, creating it if needed. Both nodes
    /// must already exist.
    pub fn add_weight(&mut self, a: &str, b: &str, weight: f64) -> Result<(), NetworkError> {
        if a == b {
            return Err(NetworkError::SelfLoop(a.to_string()));
        }
        if !weight.is_finite() {
            return Err(NetworkError::NonFiniteWeight(weight));
        }
        let i = self.index_of(a).ok_or_else(|| NetworkError::UnknownNode(a.to_string()))?;
        let j = self.index_of(b).ok_or_else(|| NetworkError::UnknownNode(b.to_string()))?;
        *self.edges.entry((i.min(j), i.max(j))).or_insert(0.0) += weight;
        Ok(())
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.edges.iter().map(|(&(i, j), &w)| (i, j, w))
    }

    pub fn weight(&self, a: &str, b: &str) -> f64 {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.edges.get(&(i.min(j), i.max(j))).copied().unwrap_or(0.0),
            _ => 0.0,
        }
    }

    /// Total edge weight `W`, each undirected edge counted once.
    pub fn total_weight(&self) -> f64 {
        self.edges.values().sum()
    }

    /// Weighted degree `s_i` of every node, in node order.
    pub fn strengths(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.nodes.len()];
        for (&(i, j), &w) in &self.edges {
            s[i] += w;
            s[j] += w;
        }
        s
    }

    pub fn strength(&self, id: &str) -> f64 {
        self.index_of(id).map(|i| self.strengths()[i]).unwrap_or(0.0)
    }

    /// Nodes touching at least one edge.
    pub fn non_isolated(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for &(i, j) in self.edges.keys() {
            out.insert(self.nodes[i].clone());
            out.insert(self.nodes[j].clone());
        }
        out
    }

    /// Adjacency lists in node order, each sorted by neighbor index.
    pub(crate) fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (&(i, j), &w) in &self.edges {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        for list in &mut adj {
            list.sort_by_key(|&(k, _)| k);
        }
        adj
    }
}

/// Sums the two directions of every pair: `w{u,v} = w(u->v) + w(v->u)`.
/// Expects an already thresholded graph.
pub fn symmetrize(g: &DirectedGraph) -> UndirectedGraph {
    let mut u = UndirectedGraph::new(g.nodes.iter().cloned());
    for ((src, dst), w) in &g.edges {
        u.add_weight(src, dst, *w).expect("directed graph has no self-loops and known nodes");
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(edges: &[(&str, &str, f64)]) -> DirectedGraph {
        let mut g = DirectedGraph::new();
        for (s, d, w) in edges {
            g.add_edge(s, d, *w).unwrap();
        }
        g
    }

    #[test]
    fn threshold_is_inclusive_and_drops_negatives() {
        let g = graph(&[("a", "b", 0.2), ("b", "a", 0.19), ("a", "c", -0.5)]);
        let t = threshold(&g, DEFAULT_TAU);
        assert_eq!(t.edge_count(), 1);
        assert_eq!(t.weight("a", "b"), Some(0.2));
        assert_eq!(t.nodes().len(), 3);
    }

    #[test]
    fn symmetrize_sums_directions() {
        let u = symmetrize(&graph(&[("a", "b", 0.5), ("b", "a", 0.3), ("a", "c", 0.5)]));
        assert!((u.weight("a", "b") - 0.8).abs() < 1e-15);
        assert_eq!(u.weight("c", "a"), 0.5);
        assert!((u.total_weight() - 1.3).abs() < 1e-15);
        assert!(symmetrize(&DirectedGraph::new()).edges().next().is_none());
    }

    #[test]
    fn rejects_self_loops() {
        assert!(matches!(DirectedGraph::new().add_edge("a", "a", 0.1), Err(NetworkError::SelfLoop(_))));
    }
}
