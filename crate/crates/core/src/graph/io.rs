//! Text graph formats: whitespace edge lists, `.content`-style feature files and
//! `.cites`-style citation files. Node ids are arbitrary tokens remapped to dense
//! indices in first-seen order.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use super::AttributedGraph;
use crate::error::{Error, Result};

/// Dense index ↔ original node id token.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeIdMap {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl NodeIdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Index of `id`, inserting it at the end if unseen.
    pub fn intern(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), i);
        i
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Writes `index original_id` lines.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::from("# index original_id\n");
        for (i, id) in self.ids.iter().enumerate() {
            out.push_str(&format!("{i} {id}\n"));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-comment, non-blank lines with 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            None
        } else {
            Some((i + 1, line.split_whitespace().collect()))
        }
    })
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Reads `src dst [weight]` lines. Self-loops are dropped.
pub fn read_edge_list(path: &Path, directed: bool) -> Result<(AttributedGraph, NodeIdMap)> {
    let text = read_text(path)?;
    let mut map = NodeIdMap::new();
    let mut edges = Vec::new();
    for (line, toks) in data_lines(&text) {
        if toks.len() != 2 && toks.len() != 3 {
            return Err(parse_err(path, line, "expected `src dst [weight]`"));
        }
        let u = map.intern(toks[0]);
        let v = map.intern(toks[1]);
        let w = match toks.get(2) {
            Some(t) => t
                .parse::<f64>()
                .map_err(|_| parse_err(path, line, format!("bad weight '{t}'")))?,
            None => 1.0,
        };
        if u != v {
            edges.push((u, v, w));
        }
    }
    if map.is_empty() {
        return Err(parse_err(path, 0, "edge list has no edges"));
    }
    let g = AttributedGraph::from_weighted_edges(map.len(), &edges, directed)?;
    Ok((g, map))
}

/// Writes the stored adjacency as `src dst weight` lines (each undirected edge once).
pub fn write_edge_list(g: &AttributedGraph, path: &Path) -> Result<()> {
    let mut out = format!("# n={} directed={}\n", g.n(), g.is_directed());
    for u in 0..g.n() {
        for &v in g.out_neighbors(u) {
            if g.is_directed() || u < v {
                out.push_str(&format!("{u} {v} {}\n", g.adjacency()[(u, v)]));
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Labeled feature table from a `.content` file.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub ids: NodeIdMap,
    pub features: DMatrix<f64>,
    /// Class index per node, indices into `class_names`.
    pub labels: Vec<usize>,
    /// Sorted label strings.
    pub class_names: Vec<String>,
}

/// Reads `node_id f1 ... fk label` lines. Every row must have the same width and
/// node ids must be unique.
pub fn read_feature_table(path: &Path) -> Result<FeatureTable> {
    let text = read_text(path)?;
    let mut ids = NodeIdMap::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut width = None;
    for (line, toks) in data_lines(&text) {
        if toks.len() < 3 {
            return Err(parse_err(path, line, "expected `node_id f1 ... fk label`"));
        }
        let k = toks.len() - 2;
        if *width.get_or_insert(k) != k {
            return Err(parse_err(path, line, format!("expected {} features, found {k}", width.unwrap())));
        }
        if ids.get(toks[0]).is_some() {
            return Err(parse_err(path, line, format!("duplicate node row '{}'", toks[0])));
        }
        ids.intern(toks[0]);
        let row = toks[1..=k]
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| parse_err(path, line, format!("bad feature value '{t}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
        raw_labels.push(toks[k + 1].to_string());
    }
    let Some(k) = width else {
        return Err(parse_err(path, 0, "feature file has no rows"));
    };
    let class_names: Vec<String> = raw_labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let labels = raw_labels
        .iter()
        .map(|l| class_names.binary_search(l).unwrap())
        .collect();
    let features = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
    Ok(FeatureTable {
        ids,
        features,
        labels,
        class_names,
    })
}

/// A citation network: undirected graph, bag-of-words features and class labels.
#[derive(Debug, Clone)]
pub struct CitationDataset {
    pub graph: AttributedGraph,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub ids: NodeIdMap,
}

/// Loads a `.content` / `.cites` pair. Nodes are indexed in `.content` order; every
/// id in the cites file must appear in the content file. Citations are symmetrized
/// and self-citations dropped.
pub fn load_citation_dataset(content: &Path, cites: &Path) -> Result<CitationDataset> {
    let table = read_feature_table(content)?;
    let text = read_text(cites)?;
    let mut edges = Vec::new();
    for (line, toks) in data_lines(&text) {
        if toks.len() != 2 {
            return Err(parse_err(cites, line, "expected `citing cited`"));
        }
        let mut idx = [0usize; 2];
        for (slot, tok) in idx.iter_mut().zip(&toks) {
            *slot = table
                .ids
                .get(tok)
                .ok_or_else(|| parse_err(cites, line, format!("unknown node id '{tok}'")))?;
        }
        if idx[0] != idx[1] {
            edges.push((idx[0], idx[1]));
        }
    }
    let graph = AttributedGraph::from_edges(table.ids.len(), &edges, false)?
        .with_features(table.features)?;
    Ok(CitationDataset {
        graph,
        labels: table.labels,
        class_names: table.class_names,
        ids: table.ids,
    })
}

/// Writes `index label` lines for a per-node label vector.
pub fn write_labels(labels: &[usize], path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = String::from("# index label\n");
    for (i, l) in labels.iter().enumerate() {
        out.push_str(&format!("{i} {l}\n"));
    }
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads `index label` lines written by [`write_labels`].
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (line, toks) in data_lines(&text) {
        let (Some(i), Some(l)) = (toks.first(), toks.get(1)) else {
            return Err(parse_err(path, line, "expected `index label`"));
        };
        let i: usize = i.parse().map_err(|_| parse_err(path, line, "bad index"))?;
        let l: usize = l.parse().map_err(|_| parse_err(path, line, "bad label"))?;
        if i != out.len() {
            return Err(parse_err(path, line, format!("expected index {}, found {i}", out.len())));
        }
        out.push(l);
    }
    Ok(out)
}
