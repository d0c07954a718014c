//! Synthetic graphs: named presets, random graphs and the twin construction.

use nalgebra::DMatrix;
use rand::Rng as _;

use super::AttributedGraph;
use crate::error::{Error, Result};
use crate::seeds;

/// Node ids of the `foodweb` and `twin-foodweb` presets.
///
/// The boreal web is a 6-node directed prey → predator graph with no nontrivial
/// automorphism (directed or undirected) and an odd cycle, so its undirected
/// spectrum is not symmetric. The twin copy plays the marine web: node `i + 6`
/// is the counterpart of node `i`.
pub mod foodweb {
    pub const GRASS: usize = 0;
    pub const HARE: usize = 1;
    pub const VOLE: usize = 2;
    pub const LYNX: usize = 3;
    pub const COYOTE: usize = 4;
    pub const OWL: usize = 5;
    pub const SIZE: usize = 6;

    pub const ORCA: usize = LYNX + SIZE;
    pub const SEAL: usize = COYOTE + SIZE;

    pub const EDGES: [(usize, usize); 7] = [
        (GRASS, HARE),
        (GRASS, VOLE),
        (HARE, LYNX),
        (HARE, COYOTE),
        (VOLE, COYOTE),
        (VOLE, OWL),
        (COYOTE, LYNX),
    ];

    pub const NAMES: [&str; 12] = [
        "grass", "hare", "vole", "lynx", "coyote", "owl", "plankton", "krill", "fish", "orca",
        "seal", "penguin",
    ];
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 10] = [
    "triangle",
    "path3",
    "directed-path3",
    "k4",
    "star5",
    "cycle6",
    "twin-chain",
    "foodweb",
    "twin-foodweb",
    "planted-2block",
];

/// Deterministic named graphs used by tests, diagnostics and the CLI.
pub fn preset(name: &str) -> Result<AttributedGraph> {
    match name {
        "triangle" => AttributedGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)], false),
        "path3" => AttributedGraph::from_edges(3, &[(0, 1), (1, 2)], false),
        "directed-path3" => AttributedGraph::from_edges(3, &[(0, 1), (1, 2)], true),
        "k4" => AttributedGraph::from_edges(
            4,
            &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
            false,
        ),
        "star5" => AttributedGraph::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)], false),
        "cycle6" => AttributedGraph::from_edges(
            6,
            &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)],
            false,
        ),
        "twin-chain" => Ok(twin_graph(&preset("directed-path3")?)),
        "foodweb" => AttributedGraph::from_edges(foodweb::SIZE, &foodweb::EDGES, true),
        "twin-foodweb" => Ok(twin_graph(&preset("foodweb")?)),
        "planted-2block" => planted_partition(&[25, 25], 0.5, 0.05, 7),
        other => Err(Error::invalid(format!(
            "unknown preset '{other}', expected one of {PRESETS:?}"
        ))),
    }
}

/// Disjoint union of `g0` with an exact copy; node `i` of the copy is `i + n0`.
pub fn twin_graph(g0: &AttributedGraph) -> AttributedGraph {
    let n0 = g0.n();
    let n = 2 * n0;
    let block = |m: &DMatrix<f64>| {
        let mut out = DMatrix::zeros(n, n);
        out.view_mut((0, 0), (n0, n0)).copy_from(m);
        out.view_mut((n0, n0), (n0, n0)).copy_from(m);
        out
    };
    let k = g0.feature_dim();
    let mut feats = DMatrix::zeros(n, k);
    feats.view_mut((0, 0), (n0, k)).copy_from(g0.features());
    feats.view_mut((n0, 0), (n0, k)).copy_from(g0.features());
    let g = AttributedGraph::new(block(g0.adjacency()), Some(feats), g0.is_directed())
        .expect("disjoint union of a valid graph is valid");
    let channels = g0.edge_channels().iter().map(block).collect();
    g.with_edge_channels(channels).expect("channel shapes match")
}

/// G(n, p) random graph. Directed graphs draw each ordered pair independently.
pub fn erdos_renyi(n: usize, p: f64, directed: bool, seed: u64) -> Result<AttributedGraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("edge probability {p} outside [0, 1]")));
    }
    let mut rng = seeds::rng(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u == v || (!directed && v < u) {
                continue;
            }
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    AttributedGraph::from_edges(n, &edges, directed)
}

/// Undirected stochastic block model with blocks laid out contiguously.
pub fn planted_partition(
    block_sizes: &[usize],
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<AttributedGraph> {
    let n: usize = block_sizes.iter().sum();
    let block: Vec<usize> = block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();
    let mut rng = seeds::rng(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if block[u] == block[v] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    AttributedGraph::from_edges(n, &edges, false)
}
