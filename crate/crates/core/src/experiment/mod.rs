//! Config-driven end-to-end runs: load a graph, optionally train a CGNN, build a
//! task, train a readout and score it at every configured `m_test`, repeated over
//! independent seed streams.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

pub use config::{
    CgnnConfig, DiagnosticsConfig, EvalConfig, GraphConfig, ReadoutConfig, RunConfig, SamplerConfig, TaskConfig,
};

use crate::diagnostics::{equivariance_report, node_convergence, pair_convergence, ConvergenceCurve, EquivarianceReport};
use crate::error::{Error, Result, StageContext};
use crate::graph::{io, preset, AttributedGraph};
use crate::samplers::{cgnn_train, CgnnParams, CgnnSampler, EmbeddingSampler, McSvdSampler};
use crate::seeds::{self, Stream};
use crate::structural::{draw_eval_samples, evaluate, train_readout, ReadoutModel};
use crate::tasks::{
    build_link_task, build_node_task, build_triad_task, build_twin_link_task, build_twin_node_task, Split, TaskSet,
};

/// A loaded graph with optional per-node labels.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: AttributedGraph,
    pub labels: Option<Vec<usize>>,
}

impl LoadedGraph {
    /// The graph samplers and tasks run on.
    pub fn view(&self, undirected: bool) -> AttributedGraph {
        if undirected {
            self.graph.symmetrized()
        } else {
            self.graph.clone()
        }
    }
}

pub fn load_graph(cfg: &GraphConfig) -> Result<LoadedGraph> {
    let (graph, mut labels) = match (&cfg.content, &cfg.cites, &cfg.edges) {
        (Some(content), Some(cites), _) => {
            let d = io::load_citation_dataset(content, cites)?;
            (d.graph, Some(d.labels))
        }
        (_, _, Some(edges)) => (io::read_edge_list(edges, cfg.directed)?.0, None),
        _ => (preset(&cfg.preset)?, None),
    };
    if let Some(path) = &cfg.labels {
        labels = Some(io::read_labels(path)?);
    }
    if let Some(l) = &labels {
        if l.len() != graph.n() {
            return Err(Error::Config(format!("{} labels for {} nodes", l.len(), graph.n())));
        }
    }
    Ok(LoadedGraph { graph, labels })
}

fn twin_half(g: &AttributedGraph) -> Result<usize> {
    if !g.n().is_multiple_of(2) {
        return Err(Error::Config(format!("twin tasks need an even node count, graph has {}", g.n())));
    }
    Ok(g.n() / 2)
}

/// Builds the configured task on `g`; `None` when the task kind is `none`.
pub fn build_task(cfg: &TaskConfig, g: &LoadedGraph, view: &AttributedGraph, seed: u64) -> Result<Option<TaskSet>> {
    let t = match cfg.kind.as_str() {
        "none" => return Ok(None),
        "node" => {
            let labels = g
                .labels
                .as_ref()
                .ok_or_else(|| Error::Config("node task needs labels (graph.labels or a citation dataset)".into()))?;
            build_node_task(view, labels, &cfg.node_split()?, seed)?
        }
        "node-twin" => build_twin_node_task(view, twin_half(view)?, &cfg.fractions()?, seed)?,
        "link" => build_link_task(view, &cfg.fractions()?, seed)?,
        "link-twin" => build_twin_link_task(view, twin_half(view)?, &cfg.fractions()?, seed)?,
        "triad" => build_triad_task(view, &cfg.fractions()?, seed, cfg.corruption()?)?,
        other => return Err(Error::Config(format!("unknown task kind '{other}'"))),
    };
    Ok(Some(t))
}

/// A ready sampler plus the CGNN parameters behind it, if any.
#[derive(Clone)]
pub struct BuiltSampler {
    pub sampler: Arc<dyn EmbeddingSampler>,
    pub cgnn: Option<Arc<CgnnParams>>,
}

/// The configured sampler on `g`. A CGNN is trained first, on `g` only.
pub fn build_sampler(cfg: &RunConfig, g: &AttributedGraph, seed: u64) -> Result<BuiltSampler> {
    match cfg.sampler.kind.as_str() {
        "mc-svd" => Ok(BuiltSampler {
            sampler: Arc::new(McSvdSampler::new(cfg.sampler.d, cfg.sampler.svd_mode()?)),
            cgnn: None,
        }),
        "cgnn" => {
            let params = Arc::new(cgnn_train(g, &cfg.cgnn_hyper(seeds::derive(seed, Stream::Cgnn, 0)))?);
            Ok(BuiltSampler {
                sampler: Arc::new(CgnnSampler {
                    params: params.clone(),
                    sweeps: cfg.sampler.sweeps,
                }),
                cgnn: Some(params),
            })
        }
        other => Err(Error::Config(format!("unknown sampler '{other}'"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub run: usize,
    pub seed: u64,
    pub m_test: usize,
    pub split: Split,
    pub micro_f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub m_test: usize,
    pub split: Split,
    pub runs: usize,
    pub mean: f64,
    /// Sample standard deviation over runs; 0 for a single run.
    pub std: f64,
}

/// Artifacts of one run, kept in memory for callers that inspect them.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub run: usize,
    pub seed: u64,
    pub task: TaskSet,
    pub model: ReadoutModel,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    pub runs: Vec<RunArtifacts>,
    pub curves: Option<ConvergenceCurve>,
    pub equivariance: Option<EquivarianceReport>,
}

impl ExperimentResult {
    pub fn summary_for(&self, m_test: usize, split: Split) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.m_test == m_test && r.split == split)
    }
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut s = String::from("run,seed,m_test,split,micro_f1\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.run, r.seed, r.m_test, r.split.name(), r.micro_f1);
    }
    s
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            msg,
        };
        let num = |j: usize| rec.get(j).ok_or_else(|| err(format!("missing column {j}")));
        rows.push(ResultRow {
            run: num(0)?.parse().map_err(|_| err("bad run".into()))?,
            seed: num(1)?.parse().map_err(|_| err("bad seed".into()))?,
            m_test: num(2)?.parse().map_err(|_| err("bad m_test".into()))?,
            split: Split::from_name(num(3)?).map_err(|e| err(e.to_string()))?,
            micro_f1: num(4)?.parse().map_err(|_| err("bad micro_f1".into()))?,
        });
    }
    Ok(rows)
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("m_test,split,runs,mean,std\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.m_test, r.split.name(), r.runs, r.mean, r.std);
    }
    s
}

/// Mean and sample standard deviation per `(m_test, split)`, summed in run order.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(usize, Split)> = rows.iter().map(|r| (r.m_test, r.split)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(m_test, split)| {
            let mut mine: Vec<&ResultRow> = rows.iter().filter(|r| r.m_test == m_test && r.split == split).collect();
            mine.sort_by_key(|r| r.run);
            let k = mine.len() as f64;
            let mean = mine.iter().map(|r| r.micro_f1).sum::<f64>() / k;
            let std = if mine.len() > 1 {
                (mine.iter().map(|r| (r.micro_f1 - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                m_test,
                split,
                runs: mine.len(),
                mean,
                std,
            }
        })
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

struct RunOutput {
    rows: Vec<ResultRow>,
    artifacts: RunArtifacts,
    sampler_checkpoint: Option<crate::neural::Checkpoint>,
}

fn one_run(cfg: &RunConfig, g: &LoadedGraph, view: &AttributedGraph, run: usize) -> Result<Option<RunOutput>> {
    let seed = seeds::derive(cfg.seed, Stream::Run, run as u64);
    let Some(task) = build_task(&cfg.task, g, view, seed).stage("make-task")? else {
        return Ok(None);
    };
    let sampler_graph = task.sampler_graph(view);
    let built = build_sampler(cfg, &sampler_graph, seed).stage("train-cgnn")?;
    let sampler = &built.sampler;
    let model = train_readout(&task, sampler.as_ref(), &sampler_graph, &cfg.readout.hyper(seed)).stage("train-readout")?;
    let m_max = *cfg.eval.m_test.iter().max().expect("validated non-empty");
    let mut rows = Vec::new();
    for name in &cfg.eval.splits {
        let split = Split::from_name(name)?;
        if task.split(split).next().is_none() {
            continue;
        }
        let samples = draw_eval_samples(sampler.as_ref(), &sampler_graph, m_max, seed, split).stage("eval")?;
        for &m in &cfg.eval.m_test {
            rows.push(ResultRow {
                run,
                seed,
                m_test: m,
                split,
                micro_f1: evaluate(&model, &samples[..m], &task, split).stage("eval")?,
            });
        }
    }
    let sampler_checkpoint = built.cgnn.as_ref().map(|p| p.to_checkpoint());
    Ok(Some(RunOutput {
        rows,
        artifacts: RunArtifacts { run, seed, task, model },
        sampler_checkpoint,
    }))
}

/// Diagnostics on the full (view) graph with a sampler seeded from the base seed.
pub fn run_diagnostics(cfg: &RunConfig, view: &AttributedGraph) -> Result<(ConvergenceCurve, Option<EquivarianceReport>)> {
    let d = &cfg.diagnostics;
    let n = view.n();
    let ids = std::iter::once(&d.node_pair).chain(&d.pairs).flatten();
    if let Some(&v) = ids.clone().find(|&&v| v >= n) {
        return Err(Error::Config(format!(
            "diagnostics reference node {v} but the graph has {n} nodes; set diagnostics.enabled = false or choose other nodes"
        )));
    }
    let sampler = build_sampler(cfg, view, cfg.seed)?.sampler;
    let [u, v] = d.node_pair;
    let mut curve = node_convergence(view, sampler.as_ref(), (u, v), d.node_m, cfg.seed)?;
    if !d.pairs.is_empty() {
        let pairs: Vec<(usize, usize)> = d.pairs.iter().map(|&[a, b]| (a, b)).collect();
        curve.extend(pair_convergence(view, sampler.as_ref(), &pairs, d.pair_m, cfg.seed)?);
    }
    let report = if d.equivariance_samples > 0 {
        Some(equivariance_report(view, sampler.as_ref(), d.equivariance_samples, cfg.seed)?)
    } else {
        None
    };
    Ok((curve, report))
}

/// Runs everything the config asks for and writes every artifact under
/// `cfg.out`. Rows are sorted by `(run, m_test, split)`, so the files do not
/// depend on scheduling.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let g = load_graph(&cfg.graph).stage("load-graph")?;
    let view = g.view(cfg.graph.undirected);
    let (curves, equivariance) = if cfg.diagnostics.enabled {
        let (c, e) = run_diagnostics(cfg, &view).stage("diagnose")?;
        (Some(c), e)
    } else {
        (None, None)
    };
    let outputs: Vec<Option<RunOutput>> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| one_run(cfg, &g, &view, r))
        .collect::<Result<_>>()?;
    let outputs: Vec<RunOutput> = outputs.into_iter().flatten().collect();
    let mut rows: Vec<ResultRow> = outputs.iter().flat_map(|o| o.rows.iter().cloned()).collect();
    rows.sort_by_key(|r| (r.run, r.m_test, r.split));
    let summary = summarize(&rows);

    let out = &cfg.out;
    let write = || -> Result<()> {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        write_text(&out.join("config.toml"), &cfg.to_toml())?;
        if let Some(c) = &curves {
            c.write(&out.join("curves.csv"))?;
        }
        if let Some(e) = &equivariance {
            e.write(&out.join("equivariance.csv"))?;
        }
        if !outputs.is_empty() {
            write_text(&out.join("results.csv"), &results_csv(&rows))?;
            write_text(&out.join("summary.csv"), &summary_csv(&summary))?;
        }
        for o in &outputs {
            let dir = out.join(format!("run-{:02}", o.artifacts.run));
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            o.artifacts.task.write(&dir.join("task.csv"))?;
            o.artifacts.model.to_checkpoint().write(&dir.join("readout.ckpt"))?;
            if let Some(c) = &o.sampler_checkpoint {
                c.write(&dir.join("cgnn.ckpt"))?;
            }
        }
        Ok(())
    };
    write().stage("write")?;
    Ok(ExperimentResult {
        rows,
        summary,
        runs: outputs.into_iter().map(|o| o.artifacts).collect(),
        curves,
        equivariance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(out: &Path) -> RunConfig {
        let mut c = RunConfig::default();
        c.out = out.to_path_buf();
        c.runs = 3;
        c.readout.hidden = 8;
        c.readout.epochs = 5;
        c.diagnostics.node_m = 10;
        c.diagnostics.pair_m = 10;
        c
    }

    #[test]
    fn rows_per_cell_match_runs() {
        let dir = tempfile::tempdir().unwrap();
        let r = run_experiment(&quick(dir.path())).unwrap();
        assert_eq!(r.rows.len(), 3 * 3 * 2);
        for s in &r.summary {
            assert_eq!(s.runs, 3);
        }
        for f in ["results.csv", "summary.csv", "curves.csv", "config.toml", "run-00/task.csv", "run-02/readout.ckpt"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert_eq!(read_results(&dir.path().join("results.csv")).unwrap(), r.rows);
    }

    #[test]
    fn summary_matches_hand_computation() {
        let rows: Vec<ResultRow> = [0.5, 1.0, 0.75]
            .iter()
            .enumerate()
            .map(|(run, &f)| ResultRow { run, seed: 0, m_test: 1, split: Split::Test, micro_f1: f })
            .collect();
        let s = summarize(&rows);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].mean, 0.75);
        assert!((s[0].std - 0.25).abs() < 1e-15);
    }

    #[test]
    fn stage_tag_names_the_failing_step() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = quick(dir.path());
        c.diagnostics.enabled = false;
        c.graph.preset = "triangle".into();
        c.task.kind = "link".into();
        let e = run_experiment(&c).unwrap_err();
        assert!(matches!(e, Error::Stage { stage: "make-task", .. }), "{e}");
    }

    #[test]
    fn out_of_range_diagnostics_are_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = quick(dir.path());
        c.graph.preset = "triangle".into();
        c.task.kind = "none".into();
        let e = run_experiment(&c).unwrap_err();
        assert!(e.to_string().contains("diagnostics"), "{e}");
    }
}
