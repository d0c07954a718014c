//! Downstream tasks over node subsets: node classification, balanced link
//! prediction and triad edge-count prediction.

mod build;
mod metrics;

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, VertexSubset};

pub use build::{
    build_link_task, build_node_task, build_triad_task, build_triad_task_with_patterns, build_twin_node_task, build_twin_link_task, CorruptionScheme,
    SplitFractions, SplitSpec, CORA_SPLIT, MAX_TRIADS_PER_CLASS,
};
pub use metrics::{accuracy, micro_f1, random_guess_micro_f1, roc_auc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid(format!("unknown split '{other}'"))),
        }
    }
}

/// Reads one split name per line (blank lines skipped), in node order.
pub fn read_split_file(path: &Path) -> Result<Vec<Split>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            Split::from_name(l.trim()).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

pub fn write_split_file(splits: &[Split], path: &Path) -> Result<()> {
    let text: String = splits.iter().map(|s| format!("{}\n", s.name())).collect();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskInstance {
    pub subset: VertexSubset,
    pub label: usize,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSet {
    pub instances: Vec<TaskInstance>,
    pub arity: usize,
    pub class_count: usize,
    pub seed: u64,
    /// Generator name (`node`, `link-uniform`, `link-twin`, `triad-<scheme>`).
    pub scheme: String,
    /// Undirected edges hidden from samplers (held-out link positives).
    pub removed_edges: Vec<(usize, usize)>,
}

impl TaskSet {
    /// Checks uniform arity, label range and split disjointness.
    pub fn validate(&self) -> Result<()> {
        if self.instances.is_empty() {
            return Err(Error::Task("task has no instances".into()));
        }
        let mut seen: HashSet<&[usize]> = HashSet::new();
        for inst in &self.instances {
            if inst.subset.len() != self.arity {
                return Err(Error::Task(format!(
                    "instance {:?} has arity {}, task arity is {}",
                    inst.subset.nodes(),
                    inst.subset.len(),
                    self.arity
                )));
            }
            if inst.label >= self.class_count {
                return Err(Error::Task(format!(
                    "label {} out of range for {} classes",
                    inst.label, self.class_count
                )));
            }
            if !seen.insert(inst.subset.nodes()) {
                return Err(Error::Task(format!("subset {:?} appears twice", inst.subset.nodes())));
            }
        }
        Ok(())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &TaskInstance> {
        self.instances.iter().filter(move |i| i.split == split)
    }

    pub fn class_counts(&self, split: Split) -> Vec<usize> {
        let mut c = vec![0; self.class_count];
        for i in self.split(split) {
            c[i.label] += 1;
        }
        c
    }

    /// `g` with the held-out positives removed: the graph samplers may see.
    pub fn sampler_graph(&self, g: &AttributedGraph) -> AttributedGraph {
        if self.removed_edges.is_empty() {
            g.clone()
        } else {
            g.without_edges(&self.removed_edges)
        }
    }

    /// Relabels every subset through `p` (used to test relabeling invariance).
    pub fn permuted(&self, p: &crate::graph::Permutation) -> TaskSet {
        let mut t = self.clone();
        for i in &mut t.instances {
            i.subset = i.subset.permuted(p);
        }
        t.removed_edges = self
            .removed_edges
            .iter()
            .map(|&(u, v)| {
                let (a, b) = (p.apply(u), p.apply(v));
                (a.min(b), a.max(b))
            })
            .collect();
        t
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# seed: {}\n", self.seed));
        out.push_str(&format!("# scheme: {}\n", self.scheme));
        out.push_str(&format!("# arity: {}\n", self.arity));
        out.push_str(&format!("# class_count: {}\n", self.class_count));
        let removed: Vec<String> = self.removed_edges.iter().map(|(u, v)| format!("{u}-{v}")).collect();
        out.push_str(&format!("# removed_edges: {}\n", removed.join(" ")));
        let cols: Vec<String> = (1..=self.arity).map(|i| format!("v{i}")).collect();
        out.push_str(&format!("split,label,{}\n", cols.join(",")));
        for i in &self.instances {
            let nodes: Vec<String> = i.subset.nodes().iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("{},{},{}\n", i.split.name(), i.label, nodes.join(",")));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut meta = std::collections::HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest
                    .split_once(':')
                    .ok_or_else(|| err(i + 1, "expected `# key: value`".into()))?;
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let get = |k: &str| meta.get(k).ok_or_else(|| err(0, format!("missing metadata '{k}'")));
        let num = |k: &str| -> Result<u64> {
            let v = get(k)?;
            v.parse().map_err(|_| err(0, format!("bad {k} '{v}'")))
        };
        let arity = num("arity")? as usize;
        let removed_edges = get("removed_edges")?
            .split_whitespace()
            .map(|t| {
                let (a, b) = t.split_once('-').ok_or_else(|| err(0, format!("bad edge '{t}'")))?;
                Ok((
                    a.parse().map_err(|_| err(0, format!("bad edge '{t}'")))?,
                    b.parse().map_err(|_| err(0, format!("bad edge '{t}'")))?,
                ))
            })
            .collect::<Result<Vec<(usize, usize)>>>()?;

        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut instances = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            if rec.len() != 2 + arity {
                return Err(err(line, format!("expected {} fields, found {}", 2 + arity, rec.len())));
            }
            let split = Split::from_name(&rec[0]).map_err(|e| err(line, e.to_string()))?;
            let label = rec[1].parse().map_err(|_| err(line, format!("bad label '{}'", &rec[1])))?;
            let nodes = rec
                .iter()
                .skip(2)
                .map(|t| t.parse::<usize>().map_err(|_| err(line, format!("bad node '{t}'"))))
                .collect::<Result<Vec<_>>>()?;
            let subset = VertexSubset::new(nodes, usize::MAX).map_err(|e| err(line, e.to_string()))?;
            instances.push(TaskInstance { subset, label, split });
        }
        let t = TaskSet {
            instances,
            arity,
            class_count: num("class_count")? as usize,
            seed: num("seed")?,
            scheme: get("scheme")?.clone(),
            removed_edges,
        };
        t.validate()?;
        Ok(t)
    }
}
