//! Graph data model and permutation actions.
//!
//! An [`AttributedGraph`] is an adjacency matrix plus a node feature matrix.
//! Nodes are dense indices `0..n`. Permutations act on both by relabeling:
//! node `i` of the input becomes node `p(i)` of the output.

mod generators;
pub mod io;
mod orbits;

pub use generators::*;
pub use orbits::*;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seeds::Rng;

/// Adjacency plus node features.
///
/// The adjacency holds the binary (or weighted) edge channel. Extra edge-feature
/// channels can be attached with [`AttributedGraph::with_edge_channels`]; they are
/// carried through permutations and automorphism checks but the samplers only read
/// the main channel.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    adjacency: DMatrix<f64>,
    features: DMatrix<f64>,
    edge_channels: Vec<DMatrix<f64>>,
    directed: bool,
    out_neighbors: Vec<Vec<usize>>,
    in_neighbors: Vec<Vec<usize>>,
}

impl AttributedGraph {
    /// Builds a graph, checking shape, finiteness, the zero diagonal, and symmetry
    /// for undirected graphs. Missing features default to a single all-ones column.
    pub fn new(
        adjacency: DMatrix<f64>,
        features: Option<DMatrix<f64>>,
        directed: bool,
    ) -> Result<Self> {
        let n = adjacency.nrows();
        if n == 0 {
            return Err(Error::invalid("graph must have at least one node"));
        }
        if adjacency.ncols() != n {
            return Err(Error::invalid(format!(
                "adjacency must be square, got {}x{}",
                n,
                adjacency.ncols()
            )));
        }
        let features = features.unwrap_or_else(|| DMatrix::from_element(n, 1, 1.0));
        if features.nrows() != n || features.ncols() == 0 {
            return Err(Error::invalid(format!(
                "node features must be {n}xk with k >= 1, got {}x{}",
                features.nrows(),
                features.ncols()
            )));
        }
        if adjacency.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::invalid("adjacency entries must be finite and nonnegative"));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("node features must be finite"));
        }
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::invalid(format!("self-loop on node {i}")));
            }
        }
        if !directed {
            for i in 0..n {
                for j in (i + 1)..n {
                    if adjacency[(i, j)] != adjacency[(j, i)] {
                        return Err(Error::invalid(format!(
                            "undirected graph has asymmetric entry ({i},{j})"
                        )));
                    }
                }
            }
        }
        let mut out_neighbors = vec![Vec::new(); n];
        let mut in_neighbors = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                if adjacency[(i, j)] != 0.0 {
                    out_neighbors[i].push(j);
                    in_neighbors[j].push(i);
                }
            }
        }
        Ok(Self {
            adjacency,
            features,
            edge_channels: Vec::new(),
            directed,
            out_neighbors,
            in_neighbors,
        })
    }

    /// Unweighted graph from an edge list. Undirected edges are stored both ways.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], directed: bool) -> Result<Self> {
        let weighted: Vec<_> = edges.iter().map(|&(u, v)| (u, v, 1.0)).collect();
        Self::from_weighted_edges(n, &weighted, directed)
    }

    pub fn from_weighted_edges(
        n: usize,
        edges: &[(usize, usize, f64)],
        directed: bool,
    ) -> Result<Self> {
        let mut adjacency = DMatrix::zeros(n, n);
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::invalid(format!("edge ({u},{v}) out of range for n={n}")));
            }
            if u == v {
                return Err(Error::invalid(format!("self-loop on node {u}")));
            }
            adjacency[(u, v)] = w;
            if !directed {
                adjacency[(v, u)] = w;
            }
        }
        Self::new(adjacency, None, directed)
    }

    pub fn with_features(self, features: DMatrix<f64>) -> Result<Self> {
        let mut g = Self::new(self.adjacency, Some(features), self.directed)?;
        g.edge_channels = self.edge_channels;
        Ok(g)
    }

    pub fn with_edge_channels(mut self, channels: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = self.n();
        for c in &channels {
            if c.nrows() != n || c.ncols() != n || c.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid("edge channels must be finite n x n matrices"));
            }
        }
        self.edge_channels = channels;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn edge_channels(&self) -> &[DMatrix<f64>] {
        &self.edge_channels
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[(u, v)] != 0.0
    }

    /// Nodes `v` with `A[u][v] != 0`, ascending.
    pub fn out_neighbors(&self, u: usize) -> &[usize] {
        &self.out_neighbors[u]
    }

    /// Nodes `v` with `A[v][u] != 0`, ascending.
    pub fn in_neighbors(&self, u: usize) -> &[usize] {
        &self.in_neighbors[u]
    }

    pub fn out_degree(&self, u: usize) -> usize {
        self.out_neighbors[u].len()
    }

    pub fn in_degree(&self, u: usize) -> usize {
        self.in_neighbors[u].len()
    }

    /// Number of stored nonzero adjacency entries (each undirected edge counts twice).
    pub fn nnz(&self) -> usize {
        self.out_neighbors.iter().map(Vec::len).sum()
    }

    /// Undirected view: `A ∨ Aᵀ` for unweighted graphs, `max(A, Aᵀ)` entrywise otherwise.
    pub fn symmetrized(&self) -> AttributedGraph {
        if !self.directed {
            return self.clone();
        }
        let n = self.n();
        let adj = DMatrix::from_fn(n, n, |i, j| self.adjacency[(i, j)].max(self.adjacency[(j, i)]));
        let mut g = AttributedGraph::new(adj, Some(self.features.clone()), false)
            .expect("symmetrizing a valid graph yields a valid graph");
        g.edge_channels = self
            .edge_channels
            .iter()
            .map(|c| DMatrix::from_fn(n, n, |i, j| c[(i, j)].max(c[(j, i)])))
            .collect();
        g
    }

    /// Undirected edge pairs `(u, v)` with `u < v` of the symmetrized graph, lexicographic.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if self.has_edge(u, v) || self.has_edge(v, u) {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Copy with the given undirected pairs removed in both directions.
    pub fn without_edges(&self, pairs: &[(usize, usize)]) -> AttributedGraph {
        let mut adj = self.adjacency.clone();
        for &(u, v) in pairs {
            adj[(u, v)] = 0.0;
            adj[(v, u)] = 0.0;
        }
        let mut g = AttributedGraph::new(adj, Some(self.features.clone()), self.directed)
            .expect("removing edges keeps a valid graph");
        g.edge_channels = self.edge_channels.clone();
        g
    }
}

/// A bijection on `0..n`; `apply(i)` is the image of `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &m in &mapping {
            if m >= n || seen[m] {
                return Err(Error::invalid(format!(
                    "mapping {mapping:?} is not a bijection on 0..{n}"
                )));
            }
            seen[m] = true;
        }
        Ok(Self { mapping })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mapping: (0..n).collect(),
        }
    }

    /// Uniformly random permutation (Fisher-Yates).
    pub fn random(n: usize, rng: &mut Rng) -> Self {
        let mut mapping: Vec<usize> = (0..n).collect();
        mapping.shuffle(rng);
        Self { mapping }
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.mapping[i]
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn is_identity(&self) -> bool {
        self.mapping.iter().enumerate().all(|(i, &m)| i == m)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.mapping.len()];
        for (i, &m) in self.mapping.iter().enumerate() {
            inv[m] = i;
        }
        Self { mapping: inv }
    }

    /// `self ∘ other`: first `other`, then `self`.
    pub fn compose(&self, other: &Permutation) -> Self {
        Self {
            mapping: other.mapping.iter().map(|&i| self.mapping[i]).collect(),
        }
    }

    /// Row permutation of a matrix: output row `p(i)` is input row `i`.
    pub fn permute_rows(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            out.row_mut(self.mapping[i]).copy_from(&m.row(i));
        }
        out
    }

    fn permute_square(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = m.nrows();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(self.mapping[i], self.mapping[j])] = m[(i, j)];
            }
        }
        out
    }
}

/// Relabels every node `i` of `g` as `p(i)`.
pub fn apply_permutation(g: &AttributedGraph, p: &Permutation) -> Result<AttributedGraph> {
    if p.len() != g.n() {
        return Err(Error::invalid(format!(
            "permutation of length {} applied to graph with {} nodes",
            p.len(),
            g.n()
        )));
    }
    let adjacency = p.permute_square(&g.adjacency);
    let features = p.permute_rows(&g.features);
    let mut out = AttributedGraph::new(adjacency, Some(features), g.directed)?;
    out.edge_channels = g.edge_channels.iter().map(|c| p.permute_square(c)).collect();
    Ok(out)
}

/// A nonempty set of distinct nodes stored in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexSubset {
    nodes: Vec<usize>,
}

impl VertexSubset {
    /// Sorts the nodes; rejects duplicates, empty sets and out-of-range ids.
    pub fn new(mut nodes: Vec<usize>, n: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::invalid("vertex subset must be nonempty"));
        }
        nodes.sort_unstable();
        if nodes.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("duplicate node in subset {nodes:?}")));
        }
        if let Some(&bad) = nodes.iter().find(|&&v| v >= n) {
            return Err(Error::invalid(format!("node {bad} out of range for n={n}")));
        }
        Ok(Self { nodes })
    }

    pub fn single(v: usize) -> Self {
        Self { nodes: vec![v] }
    }

    pub fn pair(u: usize, v: usize) -> Self {
        assert_ne!(u, v, "pair of identical nodes");
        Self {
            nodes: vec![u.min(v), u.max(v)],
        }
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Image under a permutation, re-sorted.
    pub fn permuted(&self, p: &Permutation) -> Self {
        let mut nodes: Vec<usize> = self.nodes.iter().map(|&v| p.apply(v)).collect();
        nodes.sort_unstable();
        Self { nodes }
    }
}

/// Partition of nodes (arity 1) or of k-subsets into automorphism orbits.
///
/// Stored canonically: members of each class sorted, classes sorted by their first
/// member, so two partitions compare equal iff they are the same partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitPartition {
    arity: usize,
    classes: Vec<Vec<VertexSubset>>,
}

impl OrbitPartition {
    pub fn new(arity: usize, mut classes: Vec<Vec<VertexSubset>>) -> Self {
        for c in &mut classes {
            c.sort();
        }
        classes.retain(|c| !c.is_empty());
        classes.sort();
        Self { arity, classes }
    }

    pub fn from_node_classes(classes: Vec<Vec<usize>>) -> Self {
        Self::new(
            1,
            classes
                .into_iter()
                .map(|c| c.into_iter().map(VertexSubset::single).collect())
                .collect(),
        )
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn classes(&self) -> &[Vec<VertexSubset>] {
        &self.classes
    }

    /// Arity-1 classes as plain node lists.
    pub fn node_classes(&self) -> Vec<Vec<usize>> {
        self.classes
            .iter()
            .map(|c| c.iter().flat_map(|s| s.nodes().iter().copied()).collect())
            .collect()
    }

    pub fn class_of(&self, s: &VertexSubset) -> Option<usize> {
        self.classes.iter().position(|c| c.binary_search(s).is_ok())
    }

    pub fn same_class(&self, a: &VertexSubset, b: &VertexSubset) -> bool {
        matches!((self.class_of(a), self.class_of(b)), (Some(x), Some(y)) if x == y)
    }

    /// True when every class of `self` lies inside a single class of `coarser`.
    pub fn refines(&self, coarser: &OrbitPartition) -> bool {
        self.classes.iter().all(|c| {
            let first = coarser.class_of(&c[0]);
            first.is_some() && c.iter().all(|s| coarser.class_of(s) == first)
        })
    }

    /// Pairs of distinct nodes sharing a class (arity 1), `u < v`.
    pub fn node_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for c in self.node_classes() {
            for i in 0..c.len() {
                for j in (i + 1)..c.len() {
                    out.push((c[i], c[j]));
                }
            }
        }
        out
    }

    pub fn permuted(&self, p: &Permutation) -> OrbitPartition {
        OrbitPartition::new(
            self.arity,
            self.classes
                .iter()
                .map(|c| c.iter().map(|s| s.permuted(p)).collect())
                .collect(),
        )
    }
}
