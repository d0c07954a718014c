//! Deliberately degenerate samplers for testing the diagnostics.

use nalgebra::DMatrix;

use super::{EmbeddingSample, EmbeddingSampler, Provenance};
use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, Permutation};

/// Wraps a sampler and adds `scale · node_id` to every coordinate of each row.
/// Breaks equivariance on purpose.
pub struct NodeIdShift<S> {
    pub base: S,
    pub scale: f64,
}

impl<S: EmbeddingSampler> EmbeddingSampler for NodeIdShift<S> {
    fn id(&self) -> String {
        format!("node-id-shift({})", self.base.id())
    }

    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn sample(&self, g: &AttributedGraph, seed: u64) -> Result<EmbeddingSample> {
        let mut s = self.base.sample(g, seed)?;
        for (i, mut row) in s.z.row_iter_mut().enumerate() {
            row.add_scalar_mut(self.scale * i as f64);
        }
        s.provenance.sampler = "node-id-shift".into();
        Ok(s)
    }
}

/// Returns the same matrix for every seed.
#[derive(Debug, Clone)]
pub struct FixedSampler {
    pub z: DMatrix<f64>,
}

impl EmbeddingSampler for FixedSampler {
    fn id(&self) -> String {
        "fixed".into()
    }

    fn dim(&self) -> usize {
        self.z.ncols()
    }

    fn sample(&self, g: &AttributedGraph, seed: u64) -> Result<EmbeddingSample> {
        if g.n() != self.z.nrows() {
            return Err(Error::invalid(format!(
                "fixed sampler has {} rows, graph has {} nodes",
                self.z.nrows(),
                g.n()
            )));
        }
        EmbeddingSample::new(
            self.z.clone(),
            Provenance {
                sampler: "fixed".into(),
                mode: "fixed".into(),
                seed,
                d: self.z.ncols(),
                steps: 0,
                converged: None,
                input_permutation: Permutation::identity(g.n()),
            },
        )
    }
}
