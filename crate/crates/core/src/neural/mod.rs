//! Small dense networks with hand-written reverse mode.
//!
//! Every trainable model exposes its parameters as an ordered list of flat slices
//! through [`ParamSet`]. Gradients are stored in a zeroed clone of the model, so
//! parameters and gradients line up slice for slice.

mod adam;
mod checkpoint;
mod dense;
pub mod gradcheck;
mod loss;
mod set_encoder;

pub use adam::{adam_step, AdamConfig, AdamState, LR_GRID};
pub use checkpoint::Checkpoint;
pub use dense::{Activation, DenseLayer, DenseNet, ForwardCache};
pub use loss::{bce_with_logits, softmax, softmax_cross_entropy};
pub use set_encoder::{SetBatchCache, SetEncoder};

/// Default hidden width of every MLP.
pub const DEFAULT_HIDDEN: usize = 256;

/// Ordered flat views of a model's parameters.
pub trait ParamSet {
    fn param_slices(&self) -> Vec<&[f64]>;
    fn param_slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    fn is_finite(&self) -> bool {
        self.param_slices().iter().all(|s| s.iter().all(|x| x.is_finite()))
    }

    fn fill_zero(&mut self) {
        for s in self.param_slices_mut() {
            s.fill(0.0);
        }
    }

    /// `self += other`, slice by slice. Panics on a layout mismatch.
    fn add_assign_params(&mut self, other: &Self)
    where
        Self: Sized,
    {
        for (a, b) in self.param_slices_mut().into_iter().zip(other.param_slices()) {
            assert_eq!(a.len(), b.len(), "parameter layout mismatch");
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    fn scale_params(&mut self, factor: f64) {
        for s in self.param_slices_mut() {
            for x in s {
                *x *= factor;
            }
        }
    }
}
