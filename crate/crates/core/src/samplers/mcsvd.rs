use rand::RngCore;

use super::{EmbeddingSample, EmbeddingSampler, Provenance};
use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, Permutation};
use crate::linalg::{randomized_svd, svd_converged, AdjacencyOperator};
use crate::seeds;

/// Subspace-change tolerance of the converged mode.
pub const CONVERGED_TOL: f64 = 1e-10;
/// Power-step budget of the converged mode.
pub const CONVERGED_MAX_STEPS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvdMode {
    /// One power step.
    SingleStep,
    /// Power steps until the subspace settles.
    Converged,
}

impl SvdMode {
    pub fn name(self) -> &'static str {
        match self {
            SvdMode::SingleStep => "single_step",
            SvdMode::Converged => "converged",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "single_step" | "single-step" => Ok(SvdMode::SingleStep),
            "converged" => Ok(SvdMode::Converged),
            other => Err(Error::invalid(format!("unknown SVD mode '{other}'"))),
        }
    }
}

/// Left singular vectors of the randomly relabeled adjacency, rows mapped back to
/// the original node ids.
pub fn mc_svd_sample(g: &AttributedGraph, d: usize, mode: SvdMode, seed: u64) -> Result<EmbeddingSample> {
    if d > g.n() {
        return Err(Error::invalid(format!("d={d} exceeds node count {}", g.n())));
    }
    let mut rng = seeds::rng(seed);
    let p = Permutation::random(g.n(), &mut rng);
    let svd_seed = rng.next_u64();
    let op = AdjacencyOperator::from_graph(g, Some(&p));
    let r = match mode {
        SvdMode::SingleStep => randomized_svd(&op, d, 1, svd_seed)?,
        SvdMode::Converged => svd_converged(&op, d, CONVERGED_TOL, CONVERGED_MAX_STEPS, svd_seed)?,
    };
    // row i of the permuted problem is node p⁻¹(i)
    let z = p.inverse().permute_rows(&r.left_vectors);
    EmbeddingSample::new(
        z,
        Provenance {
            sampler: "mc-svd".into(),
            mode: mode.name().into(),
            seed,
            d,
            steps: r.iterations_run,
            converged: Some(r.converged),
            input_permutation: p,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McSvdSampler {
    pub d: usize,
    pub mode: SvdMode,
}

impl McSvdSampler {
    pub fn new(d: usize, mode: SvdMode) -> Self {
        Self { d, mode }
    }
}

impl EmbeddingSampler for McSvdSampler {
    fn id(&self) -> String {
        format!("mc-svd({}, d={})", self.mode.name(), self.d)
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn sample(&self, g: &AttributedGraph, seed: u64) -> Result<EmbeddingSample> {
        mc_svd_sample(g, self.d, self.mode, seed)
    }
}
