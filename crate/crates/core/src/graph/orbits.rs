//! Exact automorphism, orbit and isomorphism queries for small graphs, plus 1-WL
//! color refinement as a scalable (coarser) stand-in.
//!
//! The exact routines run a backtracking search that assigns images node by node
//! and prunes on features, degrees and adjacency consistency with the nodes already
//! assigned. Full group enumeration is capped at [`ENUMERATION_LIMIT`] nodes because
//! the group itself can have `n!` elements; orbit and isomorphism queries stop at the
//! first witness and are allowed up to [`EXACT_LIMIT`] nodes.

use std::collections::BTreeMap;

use super::{AttributedGraph, OrbitPartition, Permutation, VertexSubset};
use crate::error::{Error, Result};

/// Largest graph for which [`enumerate_automorphisms`] materializes the group.
pub const ENUMERATION_LIMIT: usize = 10;
/// Largest graph for exact orbit and isomorphism queries.
pub const EXACT_LIMIT: usize = 12;

/// How node features are compared when matching nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchOptions {
    /// Max absolute difference per feature entry. `0.0` means exact equality.
    pub feature_tol: f64,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self { feature_tol: 0.0 }
    }
}

struct Matcher<'a> {
    g1: &'a AttributedGraph,
    g2: &'a AttributedGraph,
    tol: f64,
    order: Vec<usize>,
    image: Vec<Option<usize>>,
    used: Vec<bool>,
}

impl<'a> Matcher<'a> {
    fn new(g1: &'a AttributedGraph, g2: &'a AttributedGraph, opts: MatchOptions) -> Self {
        let n = g1.n();
        Self {
            g1,
            g2,
            tol: opts.feature_tol,
            order: search_order(g1),
            image: vec![None; n],
            used: vec![false; n],
        }
    }

    fn features_match(&self, u: usize, x: usize) -> bool {
        let a = self.g1.features().row(u);
        let b = self.g2.features().row(x);
        if self.tol == 0.0 {
            a == b
        } else {
            a.iter().zip(b.iter()).all(|(p, q)| (p - q).abs() <= self.tol)
        }
    }

    fn locally_compatible(&self, u: usize, x: usize) -> bool {
        self.g1.out_degree(u) == self.g2.out_degree(x)
            && self.g1.in_degree(u) == self.g2.in_degree(x)
            && self.features_match(u, x)
            && self
                .g1
                .edge_channels()
                .iter()
                .zip(self.g2.edge_channels())
                .all(|(c1, c2)| c1[(u, u)] == c2[(x, x)])
    }

    fn consistent(&self, u: usize, x: usize) -> bool {
        let a1 = self.g1.adjacency();
        let a2 = self.g2.adjacency();
        for (w, img) in self.image.iter().enumerate() {
            let Some(y) = *img else { continue };
            if a1[(u, w)] != a2[(x, y)] || a1[(w, u)] != a2[(y, x)] {
                return false;
            }
            for (c1, c2) in self.g1.edge_channels().iter().zip(self.g2.edge_channels()) {
                if c1[(u, w)] != c2[(x, y)] || c1[(w, u)] != c2[(y, x)] {
                    return false;
                }
            }
        }
        true
    }

    /// Depth-first search. `visit` returns `false` to stop; the return value is
    /// `false` if the search was stopped early.
    fn run(
        &mut self,
        depth: usize,
        allowed: &dyn Fn(usize, usize) -> bool,
        visit: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        if depth == self.order.len() {
            let mapping: Vec<usize> = self.image.iter().map(|m| m.unwrap()).collect();
            return visit(&mapping);
        }
        let u = self.order[depth];
        for x in 0..self.g2.n() {
            if self.used[x] || !allowed(u, x) || !self.locally_compatible(u, x) {
                continue;
            }
            if !self.consistent(u, x) {
                continue;
            }
            self.image[u] = Some(x);
            self.used[x] = true;
            let keep_going = self.run(depth + 1, allowed, visit);
            self.image[u] = None;
            self.used[x] = false;
            if !keep_going {
                return false;
            }
        }
        true
    }
}

/// Order nodes so each next node has as many edges as possible into the nodes
/// already placed; this makes adjacency consistency prune early.
fn search_order(g: &AttributedGraph) -> Vec<usize> {
    let n = g.n();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let degree = |u: usize| g.out_degree(u) + g.in_degree(u);
    for _ in 0..n {
        let next = (0..n)
            .filter(|&u| !placed[u])
            .max_by_key(|&u| {
                let links = order
                    .iter()
                    .filter(|&&w| g.has_edge(u, w) || g.has_edge(w, u))
                    .count();
                (links, degree(u), std::cmp::Reverse(u))
            })
            .unwrap();
        placed[next] = true;
        order.push(next);
    }
    order
}

fn check_limit(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        Err(Error::SizeLimit { n, limit })
    } else {
        Ok(())
    }
}

fn search_maps(
    g1: &AttributedGraph,
    g2: &AttributedGraph,
    opts: MatchOptions,
    allowed: &dyn Fn(usize, usize) -> bool,
    visit: &mut dyn FnMut(&[usize]) -> bool,
) {
    if g1.n() != g2.n() || g1.feature_dim() != g2.feature_dim() {
        return;
    }
    if g1.edge_channels().len() != g2.edge_channels().len() {
        return;
    }
    Matcher::new(g1, g2, opts).run(0, allowed, visit);
}

fn first_map(
    g1: &AttributedGraph,
    g2: &AttributedGraph,
    opts: MatchOptions,
    allowed: &dyn Fn(usize, usize) -> bool,
) -> Option<Vec<usize>> {
    let mut found = None;
    search_maps(g1, g2, opts, allowed, &mut |m| {
        found = Some(m.to_vec());
        false
    });
    found
}

/// Every permutation `p` with `apply_permutation(g, p) == g`, features included.
/// The identity is always first.
pub fn enumerate_automorphisms(g: &AttributedGraph) -> Result<Vec<Permutation>> {
    enumerate_automorphisms_with(g, MatchOptions::default())
}

pub fn enumerate_automorphisms_with(
    g: &AttributedGraph,
    opts: MatchOptions,
) -> Result<Vec<Permutation>> {
    check_limit(g.n(), ENUMERATION_LIMIT)?;
    let mut out = Vec::new();
    search_maps(g, g, opts, &|_, _| true, &mut |m| {
        out.push(Permutation {
            mapping: m.to_vec(),
        });
        true
    });
    out.sort_by(|a, b| a.mapping.cmp(&b.mapping));
    Ok(out)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }

    fn groups(&mut self) -> Vec<Vec<usize>> {
        let n = self.parent.len();
        let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            let r = self.find(i);
            by_root.entry(r).or_default().push(i);
        }
        by_root.into_values().collect()
    }
}

/// Partition of the nodes into automorphism orbits.
pub fn node_orbits(g: &AttributedGraph) -> Result<OrbitPartition> {
    node_orbits_with(g, MatchOptions::default())
}

pub fn node_orbits_with(g: &AttributedGraph, opts: MatchOptions) -> Result<OrbitPartition> {
    check_limit(g.n(), EXACT_LIMIT)?;
    let n = g.n();
    let mut uf = UnionFind::new(n);
    for u in 0..n {
        for v in (u + 1)..n {
            if uf.find(u) == uf.find(v) {
                continue;
            }
            let allowed = |a: usize, x: usize| a != u || x == v;
            if let Some(m) = first_map(g, g, opts, &allowed) {
                for (i, &j) in m.iter().enumerate() {
                    uf.union(i, j);
                }
            }
        }
    }
    Ok(OrbitPartition::from_node_classes(uf.groups()))
}

fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            if n - v < k - cur.len() {
                break;
            }
            cur.push(v);
            rec(v + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Partition of all `k`-subsets: two subsets share a class iff an automorphism maps
/// one onto the other setwise.
pub fn joint_orbits(g: &AttributedGraph, k: usize) -> Result<OrbitPartition> {
    joint_orbits_with(g, k, MatchOptions::default())
}

pub fn joint_orbits_with(
    g: &AttributedGraph,
    k: usize,
    opts: MatchOptions,
) -> Result<OrbitPartition> {
    let n = g.n();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("subset size k={k} must satisfy 1 <= k < n={n}")));
    }
    check_limit(n, EXACT_LIMIT)?;
    let subsets = k_subsets(n, k);
    let index: BTreeMap<Vec<usize>, usize> = subsets
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    let mut uf = UnionFind::new(subsets.len());
    for a in 0..subsets.len() {
        for b in (a + 1)..subsets.len() {
            if uf.find(a) == uf.find(b) {
                continue;
            }
            let mut in_a = vec![false; n];
            let mut in_b = vec![false; n];
            subsets[a].iter().for_each(|&v| in_a[v] = true);
            subsets[b].iter().for_each(|&v| in_b[v] = true);
            let allowed = |u: usize, x: usize| in_a[u] == in_b[x];
            if let Some(m) = first_map(g, g, opts, &allowed) {
                for (i, s) in subsets.iter().enumerate() {
                    let mut img: Vec<usize> = s.iter().map(|&v| m[v]).collect();
                    img.sort_unstable();
                    uf.union(i, index[&img]);
                }
            }
        }
    }
    let classes = uf
        .groups()
        .into_iter()
        .map(|grp| {
            grp.into_iter()
                .map(|i| VertexSubset {
                    nodes: subsets[i].clone(),
                })
                .collect()
        })
        .collect();
    Ok(OrbitPartition::new(k, classes))
}

/// True iff some relabeling maps `g1` exactly onto `g2` (adjacency, features and
/// edge channels). Graphs of different size are simply not isomorphic.
pub fn is_graph_isomorphic(g1: &AttributedGraph, g2: &AttributedGraph) -> Result<bool> {
    is_graph_isomorphic_with(g1, g2, MatchOptions::default())
}

pub fn is_graph_isomorphic_with(
    g1: &AttributedGraph,
    g2: &AttributedGraph,
    opts: MatchOptions,
) -> Result<bool> {
    check_limit(g1.n(), EXACT_LIMIT)?;
    check_limit(g2.n(), EXACT_LIMIT)?;
    if g1.n() != g2.n() || g1.nnz() != g2.nnz() {
        return Ok(false);
    }
    Ok(first_map(g1, g2, opts, &|_, _| true).is_some())
}

/// 1-WL color refinement. The result is always coarser than or equal to the true
/// node orbit partition: it is an upper bound on orbits, never ground truth.
pub fn wl_refinement(g: &AttributedGraph) -> OrbitPartition {
    let n = g.n();
    let feature_key = |u: usize| -> Vec<u64> {
        g.features().row(u).iter().map(|x| x.to_bits()).collect()
    };
    let mut colors = canonical_ids((0..n).map(|u| (feature_key(u), Vec::new(), Vec::new())).collect());
    let mut classes = count_distinct(&colors);
    loop {
        let signatures = (0..n)
            .map(|u| {
                let mut outs: Vec<(usize, u64)> = g
                    .out_neighbors(u)
                    .iter()
                    .map(|&v| (colors[v], g.adjacency()[(u, v)].to_bits()))
                    .collect();
                outs.sort_unstable();
                let mut ins: Vec<(usize, u64)> = if g.is_directed() {
                    g.in_neighbors(u)
                        .iter()
                        .map(|&v| (colors[v], g.adjacency()[(v, u)].to_bits()))
                        .collect()
                } else {
                    Vec::new()
                };
                ins.sort_unstable();
                (vec![colors[u] as u64], outs, ins)
            })
            .collect();
        let next = canonical_ids(signatures);
        let next_classes = count_distinct(&next);
        colors = next;
        if next_classes == classes {
            break;
        }
        classes = next_classes;
    }
    let mut by_color: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (u, c) in colors.into_iter().enumerate() {
        by_color.entry(c).or_default().push(u);
    }
    OrbitPartition::from_node_classes(by_color.into_values().collect())
}

type Signature = (Vec<u64>, Vec<(usize, u64)>, Vec<(usize, u64)>);

/// Numbers signatures by their sorted order so labels do not depend on node ids.
fn canonical_ids(sigs: Vec<Signature>) -> Vec<usize> {
    let mut sorted: Vec<&Signature> = sigs.iter().collect();
    sorted.sort();
    sorted.dedup();
    sigs.iter()
        .map(|s| sorted.binary_search(&s).unwrap())
        .collect()
}

fn count_distinct(colors: &[usize]) -> usize {
    let mut c = colors.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{apply_permutation, erdos_renyi, preset, twin_graph};
    use crate::seeds;
    use nalgebra::DMatrix;

    fn path3() -> AttributedGraph {
        AttributedGraph::from_edges(3, &[(0, 1), (1, 2)], false).unwrap()
    }

    #[test]
    fn triangle_has_six_automorphisms() {
        let g = preset("triangle").unwrap();
        let auts = enumerate_automorphisms(&g).unwrap();
        assert_eq!(auts.len(), 6);
        assert!(auts[0].is_identity());
    }

    #[test]
    fn directed_path_has_only_identity() {
        let g = AttributedGraph::from_edges(3, &[(0, 1), (1, 2)], true).unwrap();
        let auts = enumerate_automorphisms(&g).unwrap();
        assert_eq!(auts.len(), 1);
        assert!(auts[0].is_identity());
    }

    #[test]
    fn distinct_features_pin_every_node() {
        let g = preset("k4").unwrap();
        let feats = DMatrix::from_fn(4, 1, |i, _| i as f64);
        let g = g.with_features(feats).unwrap();
        assert_eq!(enumerate_automorphisms(&g).unwrap().len(), 1);
    }

    #[test]
    fn enumeration_rejects_large_graphs() {
        let g = AttributedGraph::from_edges(11, &[(0, 1)], false).unwrap();
        assert!(matches!(
            enumerate_automorphisms(&g),
            Err(Error::SizeLimit { n: 11, limit: 10 })
        ));
        let g = AttributedGraph::from_edges(13, &[(0, 1)], false).unwrap();
        assert!(matches!(node_orbits(&g), Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn path_orbits() {
        let orbits = node_orbits(&path3()).unwrap();
        assert_eq!(orbits.node_classes(), vec![vec![0, 2], vec![1]]);
    }

    #[test]
    fn complete_graph_is_one_orbit() {
        let orbits = node_orbits(&preset("k4").unwrap()).unwrap();
        assert_eq!(orbits.node_classes(), vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn twin_of_asymmetric_graph_pairs_copies() {
        let g0 = preset("foodweb").unwrap();
        assert_eq!(node_orbits(&g0).unwrap().classes().len(), 6);
        let twin = twin_graph(&g0);
        let classes = node_orbits(&twin).unwrap().node_classes();
        let expected: Vec<Vec<usize>> = (0..6).map(|i| vec![i, i + 6]).collect();
        assert_eq!(classes, expected);
    }

    #[test]
    fn joint_orbits_arity_one_matches_node_orbits() {
        let g = erdos_renyi(7, 0.3, false, 4).unwrap();
        assert_eq!(joint_orbits(&g, 1).unwrap(), node_orbits(&g).unwrap());
    }

    #[test]
    fn path_pair_orbits() {
        let orbits = joint_orbits(&path3(), 2).unwrap();
        let classes: Vec<Vec<Vec<usize>>> = orbits
            .classes()
            .iter()
            .map(|c| c.iter().map(|s| s.nodes().to_vec()).collect())
            .collect();
        assert_eq!(classes, vec![vec![vec![0, 1], vec![1, 2]], vec![vec![0, 2]]]);
    }

    #[test]
    fn twin_pairs_with_same_coyote_are_not_jointly_isomorphic() {
        use crate::graph::foodweb::{COYOTE, LYNX, ORCA};
        let twin = preset("twin-foodweb").unwrap();
        let orbits = joint_orbits(&twin, 2).unwrap();
        let lc = VertexSubset::pair(LYNX, COYOTE);
        let oc = VertexSubset::pair(ORCA, COYOTE);
        assert!(!orbits.same_class(&lc, &oc));
        let nodes = node_orbits(&twin).unwrap();
        assert!(nodes.same_class(&VertexSubset::single(LYNX), &VertexSubset::single(ORCA)));
    }

    #[test]
    fn isomorphism_checks() {
        let mut rng = seeds::rng(9);
        let g = erdos_renyi(8, 0.35, true, 12).unwrap();
        let p = Permutation::random(8, &mut rng);
        let h = apply_permutation(&g, &p).unwrap();
        assert!(is_graph_isomorphic(&g, &h).unwrap());
        let tri = preset("triangle").unwrap();
        assert!(!is_graph_isomorphic(&tri, &path3()).unwrap());
        let single = AttributedGraph::from_edges(2, &[(0, 1)], false).unwrap();
        assert!(!is_graph_isomorphic(&tri, &single).unwrap());
    }

    #[test]
    fn same_degree_sequence_different_triangles() {
        // 6-cycle vs two triangles: all degrees 2, 0 vs 2 triangles, padded with an
        // isolated node to 7.
        let c6 = AttributedGraph::from_edges(
            7,
            &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)],
            false,
        )
        .unwrap();
        let tt = AttributedGraph::from_edges(
            7,
            &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)],
            false,
        )
        .unwrap();
        assert!(!is_graph_isomorphic(&c6, &tt).unwrap());
    }

    #[test]
    fn tolerance_mode_merges_near_equal_features() {
        let g = path3()
            .with_features(DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 1.0 + 1e-9]))
            .unwrap();
        assert_eq!(node_orbits(&g).unwrap().classes().len(), 3);
        let loose = node_orbits_with(&g, MatchOptions { feature_tol: 1e-6 }).unwrap();
        assert_eq!(loose.node_classes(), vec![vec![0, 2], vec![1]]);
    }

    #[test]
    fn wl_is_coarser_than_orbits_on_regular_graph() {
        // Two triangles vs 6-cycle style: 1-WL cannot split a regular graph.
        let g = AttributedGraph::from_edges(
            6,
            &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)],
            false,
        )
        .unwrap();
        let wl = wl_refinement(&g);
        assert_eq!(wl.classes().len(), 1);
        assert!(node_orbits(&g).unwrap().refines(&wl));
    }
}
