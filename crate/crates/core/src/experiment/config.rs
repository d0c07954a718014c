use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::foodweb;
use crate::neural::DEFAULT_HIDDEN;
use crate::samplers::{CgnnHyper, SvdMode};
use crate::structural::ReadoutHyper;
use crate::tasks::{CorruptionScheme, SplitFractions, SplitSpec};

/// Everything a run needs. Every field has a default; the defaults run the
/// twin food-web diagnostics plus a twin link task with converged MC-SVD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub runs: usize,
    pub out: PathBuf,
    pub graph: GraphConfig,
    pub sampler: SamplerConfig,
    pub cgnn: CgnnConfig,
    pub task: TaskConfig,
    pub readout: ReadoutConfig,
    pub eval: EvalConfig,
    pub diagnostics: DiagnosticsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            runs: 12,
            out: PathBuf::from("mcstruct-out"),
            graph: GraphConfig::default(),
            sampler: SamplerConfig::default(),
            cgnn: CgnnConfig::default(),
            task: TaskConfig::default(),
            readout: ReadoutConfig::default(),
            eval: EvalConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
        }
    }
}

/// Graph source. A citation pair (`content` + `cites`) wins over `edges`, which
/// wins over `preset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    pub preset: String,
    pub edges: Option<PathBuf>,
    pub directed: bool,
    pub content: Option<PathBuf>,
    pub cites: Option<PathBuf>,
    /// One class index per line, in node order.
    pub labels: Option<PathBuf>,
    /// Run samplers and tasks on the symmetrized graph.
    pub undirected: bool,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            preset: "twin-foodweb".into(),
            edges: None,
            directed: false,
            content: None,
            cites: None,
            labels: None,
            undirected: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// `mc-svd` or `cgnn`.
    pub kind: String,
    pub d: usize,
    /// MC-SVD only: `single-step` or `converged`.
    pub mode: String,
    /// CGNN only: Gibbs sweeps per sample.
    pub sweeps: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            kind: "mc-svd".into(),
            d: 4,
            mode: "converged".into(),
            sweeps: 3,
        }
    }
}

impl SamplerConfig {
    pub fn svd_mode(&self) -> Result<SvdMode> {
        SvdMode::from_name(&self.mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CgnnConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub neg_ratio: usize,
    pub feature_reconstruction: bool,
}

impl Default for CgnnConfig {
    fn default() -> Self {
        let h = CgnnHyper::default();
        Self {
            hidden: h.hidden,
            epochs: h.epochs,
            lr: h.lr,
            neg_ratio: h.neg_ratio,
            feature_reconstruction: h.feature_reconstruction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    /// `none`, `node`, `node-twin`, `link`, `link-twin` or `triad`.
    pub kind: String,
    pub train: f64,
    pub val: f64,
    pub test: f64,
    /// Node tasks: exact train/val/test counts instead of fractions.
    pub counts: Option<[usize; 3]>,
    /// Node tasks: one split name per line, in node order.
    pub split_file: Option<PathBuf>,
    /// Triad tasks: `dependent`, `independent` or `none`.
    pub corruption: String,
    /// Triad tasks with `independent` corruption.
    pub flip_prob: f64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        let f = SplitFractions::default();
        Self {
            kind: "link-twin".into(),
            train: f.train,
            val: f.val,
            test: f.test,
            counts: None,
            split_file: None,
            corruption: "dependent".into(),
            flip_prob: 0.5,
        }
    }
}

impl TaskConfig {
    pub fn fractions(&self) -> Result<SplitFractions> {
        SplitFractions::new(self.train, self.val, self.test)
    }

    pub fn corruption(&self) -> Result<CorruptionScheme> {
        match self.corruption.as_str() {
            "dependent" => Ok(CorruptionScheme::Dependent),
            "independent" => Ok(CorruptionScheme::Independent(self.flip_prob)),
            "none" => Ok(CorruptionScheme::None),
            other => Err(Error::Config(format!("unknown corruption scheme '{other}'"))),
        }
    }

    /// Node-task split; reads `split_file` when set.
    pub fn node_split(&self) -> Result<SplitSpec> {
        if let Some(path) = &self.split_file {
            return crate::tasks::read_split_file(path).map(SplitSpec::Explicit);
        }
        Ok(match self.counts {
            Some([a, b, c]) => SplitSpec::Counts(a, b, c),
            None => SplitSpec::Fractions(self.fractions()?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadoutConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub m_train: usize,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        let h = ReadoutHyper::default();
        Self {
            hidden: DEFAULT_HIDDEN,
            epochs: h.epochs,
            lr: h.lr,
            batch_size: h.batch_size,
            m_train: h.m_train,
        }
    }
}

impl ReadoutConfig {
    pub fn hyper(&self, seed: u64) -> ReadoutHyper {
        ReadoutHyper {
            hidden: self.hidden,
            epochs: self.epochs,
            lr: self.lr,
            batch_size: self.batch_size,
            m_train: self.m_train,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub m_test: Vec<usize>,
    /// Splits scored for every `m_test`.
    pub splits: Vec<String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            m_test: vec![1, 5, 20],
            splits: vec!["val".into(), "test".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub enabled: bool,
    /// Node gap `‖μ̂(u) − μ̂(v)‖` is tracked for this pair.
    pub node_pair: [usize; 2],
    pub node_m: usize,
    /// Pair statistics `μ̂(u, v)` tracked jointly.
    pub pairs: Vec<[usize; 2]>,
    pub pair_m: usize,
    /// Samples per node for the equivariance report; 0 skips it. Only graphs
    /// small enough for exact orbits are accepted.
    pub equivariance_samples: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        use foodweb::{COYOTE, LYNX, ORCA};
        Self {
            enabled: true,
            node_pair: [LYNX, ORCA],
            node_m: 200,
            pairs: vec![[LYNX, COYOTE], [ORCA, COYOTE], [ORCA, LYNX]],
            pair_m: 400,
            equivariance_samples: 0,
        }
    }
}

fn check_path(p: &Option<PathBuf>, key: &str) -> Result<()> {
    match p {
        Some(p) if !p.exists() => Err(Error::Config(format!("{key}: {} does not exist", p.display()))),
        _ => Ok(()),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Reads and validates a config file; referenced paths are resolved relative
    /// to the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c: RunConfig = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            c.rebase(base);
        }
        c.validate()?;
        Ok(c)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(q) = p.as_mut() {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        fix(&mut self.graph.edges);
        fix(&mut self.graph.content);
        fix(&mut self.graph.cites);
        fix(&mut self.graph.labels);
        fix(&mut self.task.split_file);
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config fields are all serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.graph.content.is_some() != self.graph.cites.is_some() {
            return bad("graph.content and graph.cites must be given together".into());
        }
        check_path(&self.graph.edges, "graph.edges")?;
        check_path(&self.graph.content, "graph.content")?;
        check_path(&self.graph.cites, "graph.cites")?;
        check_path(&self.graph.labels, "graph.labels")?;
        check_path(&self.task.split_file, "task.split_file")?;
        if !["mc-svd", "cgnn"].contains(&self.sampler.kind.as_str()) {
            return bad(format!("unknown sampler '{}'", self.sampler.kind));
        }
        if self.sampler.d == 0 {
            return bad("sampler.d must be at least 1".into());
        }
        self.sampler.svd_mode().map_err(|e| Error::Config(e.to_string()))?;
        if !["none", "node", "node-twin", "link", "link-twin", "triad"].contains(&self.task.kind.as_str()) {
            return bad(format!("unknown task kind '{}'", self.task.kind));
        }
        self.task.fractions().map_err(|e| Error::Config(e.to_string()))?;
        self.task.corruption()?;
        if self.readout.m_train == 0 {
            return bad("readout.m_train must be at least 1".into());
        }
        if self.eval.m_test.is_empty() || self.eval.m_test.contains(&0) {
            return bad("eval.m_test must list values of at least 1".into());
        }
        for s in &self.eval.splits {
            crate::tasks::Split::from_name(s).map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.diagnostics.enabled && (self.diagnostics.node_m == 0 || self.diagnostics.pair_m == 0) {
            return bad("diagnostics sample counts must be at least 1".into());
        }
        Ok(())
    }

    pub fn cgnn_hyper(&self, seed: u64) -> CgnnHyper {
        CgnnHyper {
            d: self.sampler.d,
            hidden: self.cgnn.hidden,
            sweeps: self.sampler.sweeps,
            epochs: self.cgnn.epochs,
            lr: self.cgnn.lr,
            neg_ratio: self.cgnn.neg_ratio,
            feature_reconstruction: self.cgnn.feature_reconstruction,
            seed,
        }
    }
}
