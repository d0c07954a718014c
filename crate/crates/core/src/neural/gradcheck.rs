//! Central finite-difference verification of analytic gradients.

use nalgebra::DMatrix;
use rand::Rng as _;

use super::{DenseNet, ParamSet};
use crate::seeds::Rng;

/// Finite-difference step.
pub const STEP: f64 = 1e-4;

/// Step for losses with many kinks, such as an unrolled sampling chain.
pub const FINE_STEP: f64 = 1e-5;

/// Acceptance threshold on [`relative_error`].
pub const TOLERANCE: f64 = 1e-4;

/// `|a − b| / max(|a|, |b|, 1e-6)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Central difference of `loss` with respect to every parameter of `params`.
pub fn numeric_gradient<P, F>(params: &P, loss: F) -> Vec<Vec<f64>>
where
    P: ParamSet + Clone,
    F: Fn(&P) -> f64,
{
    numeric_gradient_at(params, STEP, loss)
}

/// [`numeric_gradient`] with an explicit step.
pub fn numeric_gradient_at<P, F>(params: &P, step: f64, loss: F) -> Vec<Vec<f64>>
where
    P: ParamSet + Clone,
    F: Fn(&P) -> f64,
{
    let mut probe = params.clone();
    let shape: Vec<usize> = params.param_slices().iter().map(|s| s.len()).collect();
    let mut out = Vec::with_capacity(shape.len());
    for (k, &len) in shape.iter().enumerate() {
        let mut g = vec![0.0; len];
        for (i, gi) in g.iter_mut().enumerate() {
            let orig = probe.param_slices()[k][i];
            probe.param_slices_mut()[k][i] = orig + step;
            let plus = loss(&probe);
            probe.param_slices_mut()[k][i] = orig - step;
            let minus = loss(&probe);
            probe.param_slices_mut()[k][i] = orig;
            *gi = (plus - minus) / (2.0 * step);
        }
        out.push(g);
    }
    out
}

/// Largest [`relative_error`] between `analytic` and the numeric gradient.
pub fn max_relative_error<P, F>(params: &P, analytic: &P, loss: F) -> f64
where
    P: ParamSet + Clone,
    F: Fn(&P) -> f64,
{
    max_relative_error_at(params, analytic, STEP, loss)
}

/// [`max_relative_error`] with an explicit step. Losses with many piecewise-linear
/// pieces need a smaller step so no kink falls inside `±step`.
pub fn max_relative_error_at<P, F>(params: &P, analytic: &P, step: f64, loss: F) -> f64
where
    P: ParamSet + Clone,
    F: Fn(&P) -> f64,
{
    let numeric = numeric_gradient_at(params, step, loss);
    analytic
        .param_slices()
        .iter()
        .zip(&numeric)
        .flat_map(|(a, n)| a.iter().zip(n).map(|(&x, &y)| relative_error(x, y)))
        .fold(0.0, f64::max)
}

/// Replaces every bias with a uniform draw so no unit sits exactly on a relu kink,
/// where central differences are one-sided.
pub fn jitter_biases(net: &mut DenseNet, rng: &mut Rng) {
    for l in net.layers_mut() {
        l.bias.apply(|b| *b = rng.random_range(-0.5..0.5));
    }
}

/// Random weighting that turns a matrix output into a scalar loss `Σ probe ⊙ out`.
pub fn random_probe(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}
