use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{Split, TaskInstance, TaskSet};
use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, VertexSubset};
use crate::seeds::{self, Stream};

/// Cora's public split: 1208 train, 500 val, 1000 test nodes.
pub const CORA_SPLIT: (usize, usize, usize) = (1208, 500, 1000);

/// Cap on triads kept per class; enumeration switches to rejection sampling for
/// graphs whose triple count exceeds it by a wide margin.
pub const MAX_TRIADS_PER_CLASS: usize = 2000;

const FULL_ENUMERATION_TRIPLES: usize = 200_000;
const NEGATIVE_RETRIES_PER_DRAW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

impl SplitFractions {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let f = Self { train, val, test };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|x| !x.is_finite() || *x < 0.0) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "split fractions must be nonnegative and sum to 1, got {parts:?}"
            )));
        }
        Ok(())
    }

    /// Splits `k` items into rounded train/val counts; test takes the remainder.
    pub fn counts(&self, k: usize) -> (usize, usize, usize) {
        let train = ((self.train * k as f64).round() as usize).min(k);
        let val = ((self.val * k as f64).round() as usize).min(k - train);
        (train, val, k - train - val)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitSpec {
    Fractions(SplitFractions),
    /// Exact train/val/test counts over a seeded shuffle; leftovers are dropped.
    Counts(usize, usize, usize),
    /// One split per node, in node order.
    Explicit(Vec<Split>),
}

fn assign(counts: (usize, usize, usize), idx: usize) -> Option<Split> {
    let (tr, va, te) = counts;
    if idx < tr {
        Some(Split::Train)
    } else if idx < tr + va {
        Some(Split::Val)
    } else if idx < tr + va + te {
        Some(Split::Test)
    } else {
        None
    }
}

pub fn build_node_task(g: &AttributedGraph, labels: &[usize], split: &SplitSpec, seed: u64) -> Result<TaskSet> {
    let n = g.n();
    if labels.len() != n {
        return Err(Error::Task(format!("expected {n} node labels, found {}", labels.len())));
    }
    if n == 0 {
        return Err(Error::Task("graph has no nodes".into()));
    }
    let class_count = labels.iter().max().map_or(0, |m| m + 1);
    let splits: Vec<Option<Split>> = match split {
        SplitSpec::Explicit(s) => {
            if s.len() != n {
                return Err(Error::Task(format!("expected {n} explicit splits, found {}", s.len())));
            }
            s.iter().copied().map(Some).collect()
        }
        SplitSpec::Fractions(f) => {
            f.validate()?;
            shuffled_assignment(n, f.counts(n), seed)
        }
        &SplitSpec::Counts(tr, va, te) => {
            if tr + va + te > n {
                return Err(Error::Task(format!("split counts {tr}+{va}+{te} exceed {n} nodes")));
            }
            shuffled_assignment(n, (tr, va, te), seed)
        }
    };
    let instances = (0..n)
        .filter_map(|v| {
            splits[v].map(|split| TaskInstance {
                subset: VertexSubset::single(v),
                label: labels[v],
                split,
            })
        })
        .collect();
    let t = TaskSet {
        instances,
        arity: 1,
        class_count,
        seed,
        scheme: "node".into(),
        removed_edges: vec![],
    };
    t.validate()?;
    Ok(t)
}

fn shuffled_assignment(n: usize, counts: (usize, usize, usize), seed: u64) -> Vec<Option<Split>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeds::rng(seeds::derive(seed, Stream::Task, 0)));
    let mut out = vec![None; n];
    for (pos, &v) in order.iter().enumerate() {
        out[v] = assign(counts, pos);
    }
    out
}

/// Node task on a twin graph whose second component copies the first at offset
/// `half`: node `v` is labeled by its component. Twins share a split, so every
/// evaluated node has its isomorphic copy, with the other label, beside it.
pub fn build_twin_node_task(g: &AttributedGraph, half: usize, fractions: &SplitFractions, seed: u64) -> Result<TaskSet> {
    fractions.validate()?;
    if half == 0 || g.n() != 2 * half {
        return Err(Error::invalid(format!("{} nodes do not form two components of {half}", g.n())));
    }
    let pair_splits = shuffled_assignment(half, fractions.counts(half), seed);
    let mut splits = Vec::with_capacity(g.n());
    for _ in 0..2 {
        for s in &pair_splits {
            splits.push(s.ok_or_else(|| Error::Task("twin pair left without a split".into()))?);
        }
    }
    let labels: Vec<usize> = (0..g.n()).map(|v| usize::from(v >= half)).collect();
    let mut t = build_node_task(g, &labels, &SplitSpec::Explicit(splits), seed)?;
    t.scheme = "node-twin".into();
    Ok(t)
}

/// Balanced edge / non-edge task on the undirected view. Negatives are uniform
/// non-adjacent pairs, distinct across splits. Val and test positives are listed
/// in `removed_edges` so samplers never see them.
pub fn build_link_task(g: &AttributedGraph, fractions: &SplitFractions, seed: u64) -> Result<TaskSet> {
    fractions.validate()?;
    let n = g.n();
    let mut rng = seeds::rng(seeds::derive(seed, Stream::Task, 1));
    let sym = g.symmetrized();
    let draw = |rng: &mut seeds::Rng, taken: &HashSet<(usize, usize)>| -> Option<(usize, usize)> {
        for _ in 0..NEGATIVE_RETRIES_PER_DRAW {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            let pair = (u.min(v), u.max(v));
            if u != v && !sym.has_edge(u, v) && !taken.contains(&pair) {
                return Some(pair);
            }
        }
        None
    };
    link_task(g, fractions, &mut rng, "link-uniform", seed, draw)
}

/// Twin-graph link task: positives are edges (all intra-component), negatives are
/// pairs `(u, v)` with `u < half <= v`, so no negative is ever an edge. Nothing is
/// hidden from samplers: the task probes what joint representations of observed
/// pairs can separate, and removing held-out edges would disconnect the tiny
/// components and erase the labels.
pub fn build_twin_link_task(
    g: &AttributedGraph,
    half: usize,
    fractions: &SplitFractions,
    seed: u64,
) -> Result<TaskSet> {
    fractions.validate()?;
    let n = g.n();
    if half == 0 || half >= n {
        return Err(Error::invalid(format!("component boundary {half} outside 1..{n}")));
    }
    if g.undirected_edges().iter().any(|&(u, v)| u < half && v >= half) {
        return Err(Error::invalid(format!("graph has edges crossing boundary {half}")));
    }
    let mut rng = seeds::rng(seeds::derive(seed, Stream::Task, 2));
    let mut cross: Vec<(usize, usize)> = (0..half).flat_map(|u| (half..n).map(move |v| (u, v))).collect();
    cross.shuffle(&mut rng);
    let draw = move |_: &mut seeds::Rng, taken: &HashSet<(usize, usize)>| {
        while let Some(p) = cross.pop() {
            if !taken.contains(&p) {
                return Some(p);
            }
        }
        None
    };
    let mut t = link_task(g, fractions, &mut rng, "link-twin", seed, draw)?;
    t.removed_edges.clear();
    Ok(t)
}

fn link_task(
    g: &AttributedGraph,
    fractions: &SplitFractions,
    rng: &mut seeds::Rng,
    scheme: &str,
    seed: u64,
    mut negative: impl FnMut(&mut seeds::Rng, &HashSet<(usize, usize)>) -> Option<(usize, usize)>,
) -> Result<TaskSet> {
    let mut edges = g.undirected_edges();
    if edges.is_empty() {
        return Err(Error::Task("graph has no edges".into()));
    }
    edges.shuffle(rng);
    let counts = fractions.counts(edges.len());
    let mut taken: HashSet<(usize, usize)> = HashSet::new();
    let mut instances = Vec::with_capacity(2 * edges.len());
    let mut removed = Vec::new();
    for (i, &(u, v)) in edges.iter().enumerate() {
        let split = assign(counts, i).expect("counts cover every edge");
        instances.push(TaskInstance {
            subset: VertexSubset::pair(u, v),
            label: 1,
            split,
        });
        if split != Split::Train {
            removed.push((u, v));
        }
    }
    for (i, split) in [(counts.0, Split::Train), (counts.1, Split::Val), (counts.2, Split::Test)] {
        for _ in 0..i {
            let pair = negative(rng, &taken).ok_or_else(|| {
                Error::Task(format!(
                    "could not find enough non-edges for the {} split; graph too dense",
                    split.name()
                ))
            })?;
            taken.insert(pair);
            instances.push(TaskInstance {
                subset: VertexSubset::pair(pair.0, pair.1),
                label: 0,
                split,
            });
        }
    }
    removed.sort_unstable();
    let t = TaskSet {
        instances,
        arity: 2,
        class_count: 2,
        seed,
        scheme: scheme.into(),
        removed_edges: removed,
    };
    t.validate()?;
    Ok(t)
}

/// How the observed edge pattern of a triad is corrupted before presentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorruptionScheme {
    /// Draw `c` uniform in `0..=3`, flip `c` distinct slots; flips share `c`.
    Dependent,
    /// Each slot flips independently with probability `p`.
    Independent(f64),
    None,
}

impl CorruptionScheme {
    pub fn name(&self) -> String {
        match self {
            CorruptionScheme::Dependent => "dependent".into(),
            CorruptionScheme::Independent(p) => format!("independent-{p}"),
            CorruptionScheme::None => "none".into(),
        }
    }

    /// Observed pattern for slots `(a,b), (a,c), (b,c)` as a 3-bit mask.
    pub fn corrupt(&self, truth: u8, rng: &mut seeds::Rng) -> u8 {
        match *self {
            CorruptionScheme::Dependent => {
                let c = rng.random_range(0..=3usize);
                let mut slots = [0u8, 1, 2];
                slots.shuffle(rng);
                slots[..c].iter().fold(truth, |m, &s| m ^ (1 << s))
            }
            CorruptionScheme::Independent(p) => (0..3).fold(truth, |m, s| {
                if rng.random::<f64>() < p {
                    m ^ (1 << s)
                } else {
                    m
                }
            }),
            CorruptionScheme::None => truth,
        }
    }
}

fn edge_mask(g: &AttributedGraph, [a, b, c]: [usize; 3]) -> u8 {
    (g.has_edge(a, b) as u8) | ((g.has_edge(a, c) as u8) << 1) | ((g.has_edge(b, c) as u8) << 2)
}

/// Triples labeled by their true edge count, classes balanced to the rarest
/// class (capped at [`MAX_TRIADS_PER_CLASS`]) and split per class so every split
/// is balanced within ±1. Models see only node ids; the corrupted patterns are
/// available from [`build_triad_task_with_patterns`].
pub fn build_triad_task(
    g: &AttributedGraph,
    fractions: &SplitFractions,
    seed: u64,
    scheme: CorruptionScheme,
) -> Result<TaskSet> {
    Ok(build_triad_task_with_patterns(g, fractions, seed, scheme)?.0)
}

/// As [`build_triad_task`], also returning each instance's corrupted edge mask.
pub fn build_triad_task_with_patterns(
    g: &AttributedGraph,
    fractions: &SplitFractions,
    seed: u64,
    scheme: CorruptionScheme,
) -> Result<(TaskSet, Vec<u8>)> {
    fractions.validate()?;
    let n = g.n();
    if n < 3 {
        return Err(Error::Task(format!("triads need at least 3 nodes, graph has {n}")));
    }
    let sym = g.symmetrized();
    let mut rng = seeds::rng(seeds::derive(seed, Stream::Task, 3));
    let mut buckets = triad_candidates(&sym, &mut rng);
    if let Some(t) = (0..4).find(|&t| buckets[t].is_empty()) {
        return Err(Error::Task(format!("no triads with {t} edges; class {t} is starved")));
    }
    let k = buckets.iter().map(Vec::len).min().unwrap().min(MAX_TRIADS_PER_CLASS);
    let counts = fractions.counts(k);
    let mut instances = Vec::with_capacity(4 * k);
    let mut patterns = Vec::with_capacity(4 * k);
    for (t, bucket) in buckets.iter_mut().enumerate() {
        bucket.shuffle(&mut rng);
        for (i, &tri) in bucket.iter().take(k).enumerate() {
            instances.push(TaskInstance {
                subset: VertexSubset::new(tri.to_vec(), n)?,
                label: t,
                split: assign(counts, i).expect("counts cover k"),
            });
            patterns.push(scheme.corrupt(edge_mask(&sym, tri), &mut rng));
        }
    }
    let t = TaskSet {
        instances,
        arity: 3,
        class_count: 4,
        seed,
        scheme: format!("triad-{}", scheme.name()),
        removed_edges: vec![],
    };
    t.validate()?;
    Ok((t, patterns))
}

/// Candidate triples bucketed by edge count. Small graphs are enumerated fully;
/// large ones enumerate triangles and wedges from adjacency lists and sample the
/// sparse classes by rejection.
fn triad_candidates(sym: &AttributedGraph, rng: &mut seeds::Rng) -> [Vec<[usize; 3]>; 4] {
    let n = sym.n();
    let mut buckets: [Vec<[usize; 3]>; 4] = Default::default();
    let total = n * (n - 1) * (n - 2) / 6;
    if total <= FULL_ENUMERATION_TRIPLES {
        for a in 0..n {
            for b in (a + 1)..n {
                for c in (b + 1)..n {
                    let t = edge_mask(sym, [a, b, c]).count_ones() as usize;
                    buckets[t].push([a, b, c]);
                }
            }
        }
        return buckets;
    }
    let cap = 4 * MAX_TRIADS_PER_CLASS;
    let mut seen: HashSet<[usize; 3]> = HashSet::new();
    let mut push = |tri: [usize; 3], buckets: &mut [Vec<[usize; 3]>; 4]| {
        let mut tri = tri;
        tri.sort_unstable();
        let t = edge_mask(sym, tri).count_ones() as usize;
        if buckets[t].len() < cap && seen.insert(tri) {
            buckets[t].push(tri);
        }
    };
    // centers of wedges and triangles
    let mut centers: Vec<usize> = (0..n).collect();
    centers.shuffle(rng);
    for &c in &centers {
        if buckets[2].len() >= cap && buckets[3].len() >= cap {
            break;
        }
        let nb = sym.out_neighbors(c);
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                push([a, b, c], &mut buckets);
            }
        }
    }
    let edges = sym.undirected_edges();
    let budget = 200 * cap;
    for _ in 0..budget {
        if buckets[0].len() >= cap && buckets[1].len() >= cap {
            break;
        }
        let c = rng.random_range(0..n);
        let tri = if buckets[1].len() < cap && !edges.is_empty() && rng.random::<bool>() {
            let (a, b) = edges[rng.random_range(0..edges.len())];
            [a, b, c]
        } else {
            [rng.random_range(0..n), rng.random_range(0..n), c]
        };
        if tri[0] != tri[1] && tri[0] != tri[2] && tri[1] != tri[2] {
            push(tri, &mut buckets);
        }
    }
    for b in &mut buckets {
        b.sort_unstable();
    }
    buckets
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{erdos_renyi, preset};

    fn disjoint(t: &TaskSet) -> bool {
        let mut seen = HashSet::new();
        t.instances.iter().all(|i| seen.insert(i.subset.clone()))
    }

    #[test]
    fn cora_split_sizes() {
        let n = 2708;
        let g = AttributedGraph::from_edges(n, &[], false).unwrap();
        let labels: Vec<usize> = (0..n).map(|i| i % 7).collect();
        let (a, b, c) = CORA_SPLIT;
        let t = build_node_task(&g, &labels, &SplitSpec::Counts(a, b, c), 0).unwrap();
        let count = |s| t.split(s).count();
        assert_eq!((count(Split::Train), count(Split::Val), count(Split::Test)), (1208, 500, 1000));
        assert_eq!(t.class_count, 7);
    }

    #[test]
    fn two_node_all_train() {
        let g = AttributedGraph::from_edges(2, &[(0, 1)], false).unwrap();
        let t = build_node_task(&g, &[0, 1], &SplitSpec::Fractions(SplitFractions::new(1.0, 0.0, 0.0).unwrap()), 4)
            .unwrap();
        assert_eq!(t.instances.len(), 2);
        assert!(t.instances.iter().all(|i| i.split == Split::Train));
    }

    #[test]
    fn missing_labels_rejected() {
        let g = preset("triangle").unwrap();
        assert!(matches!(
            build_node_task(&g, &[0, 1], &SplitSpec::Fractions(SplitFractions::default()), 0),
            Err(Error::Task(_))
        ));
    }

    #[test]
    fn link_task_balanced_and_leak_free() {
        let g = erdos_renyi(20, 0.3, false, 11).unwrap();
        let t = build_link_task(&g, &SplitFractions::default(), 5).unwrap();
        for s in Split::ALL {
            let c = t.class_counts(s);
            assert_eq!(c[0], c[1], "{s:?} unbalanced");
        }
        for i in &t.instances {
            let [u, v] = [i.subset.nodes()[0], i.subset.nodes()[1]];
            assert_eq!(i.label == 1, g.has_edge(u, v));
        }
        let sg = t.sampler_graph(&g);
        for i in t.instances.iter().filter(|i| i.label == 1) {
            let [u, v] = [i.subset.nodes()[0], i.subset.nodes()[1]];
            assert_eq!(sg.has_edge(u, v), i.split == Split::Train);
        }
        assert!(disjoint(&t));
        assert_eq!(t, build_link_task(&g, &SplitFractions::default(), 5).unwrap());
    }

    #[test]
    fn complete_graph_has_no_negatives() {
        let g = preset("k4").unwrap();
        assert!(matches!(build_link_task(&g, &SplitFractions::default(), 0), Err(Error::Task(_))));
    }

    #[test]
    fn twin_link_negatives_cross_components() {
        let g = preset("twin-foodweb").unwrap();
        let t = build_twin_link_task(&g, 6, &SplitFractions::default(), 2).unwrap();
        assert_eq!(t.instances.len(), 28);
        for i in &t.instances {
            let [u, v] = [i.subset.nodes()[0], i.subset.nodes()[1]];
            assert_eq!(i.label == 0, u < 6 && v >= 6);
        }
        for s in Split::ALL {
            let c = t.class_counts(s);
            assert_eq!(c[0], c[1]);
        }
    }

    #[test]
    fn triad_classes_balanced_and_labels_true() {
        let g = preset("planted-2block").unwrap();
        let (t, pats) = build_triad_task_with_patterns(&g, &SplitFractions::default(), 9, CorruptionScheme::Dependent)
            .unwrap();
        assert_eq!(pats.len(), t.instances.len());
        for s in Split::ALL {
            let c = t.class_counts(s);
            let (lo, hi) = (c.iter().min().unwrap(), c.iter().max().unwrap());
            assert!(hi - lo <= 1, "{s:?}: {c:?}");
        }
        for i in &t.instances {
            let v = i.subset.nodes();
            assert_eq!(edge_mask(&g, [v[0], v[1], v[2]]).count_ones() as usize, i.label);
        }
        assert!(disjoint(&t));
    }

    #[test]
    fn triangle_only_graph_starves_other_classes() {
        let g = preset("triangle").unwrap();
        match build_triad_task(&g, &SplitFractions::default(), 0, CorruptionScheme::Dependent) {
            Err(Error::Task(msg)) => assert!(msg.contains("class 0"), "{msg}"),
            other => panic!("expected starvation error, got {other:?}"),
        }
        // the only triple is the triangle itself
        let buckets = triad_candidates(&g, &mut seeds::rng(0));
        assert_eq!(buckets[3], vec![[0, 1, 2]]);
    }

    #[test]
    fn dependent_corruption_flip_count_is_uniform() {
        let mut rng = seeds::rng(1);
        let mut hist = [0usize; 4];
        let m = 40_000;
        for _ in 0..m {
            let flipped = (CorruptionScheme::Dependent.corrupt(0, &mut rng)).count_ones() as usize;
            hist[flipped] += 1;
        }
        for h in hist {
            assert!((h as f64 / m as f64 - 0.25).abs() < 0.01, "{hist:?}");
        }
    }

    #[test]
    fn twin_node_task_keeps_twins_together() {
        let g = preset("twin-foodweb").unwrap();
        let t = build_twin_node_task(&g, 6, &SplitFractions::default(), 4).unwrap();
        assert_eq!(t.instances.len(), 12);
        for v in 0..6 {
            let a = t.instances.iter().find(|i| i.subset.nodes() == [v]).unwrap();
            let b = t.instances.iter().find(|i| i.subset.nodes() == [v + 6]).unwrap();
            assert_eq!((a.split, a.label, b.label), (b.split, 0, 1));
        }
        assert!(t.split(Split::Test).count() >= 2);
        assert!(build_twin_node_task(&g, 5, &SplitFractions::default(), 4).is_err());
    }
}
