use super::ParamSet;
use crate::error::{Error, Result};

/// Learning rates exposed for tuning.
pub const LR_GRID: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

/// First and second moment estimates, laid out like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<P: ParamSet + ?Sized>(params: &P) -> Self {
        let zeros: Vec<Vec<f64>> = params.param_slices().iter().map(|s| vec![0.0; s.len()]).collect();
        Self {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam update. Non-finite gradients leave everything untouched
/// and return an error.
pub fn adam_step<P, G>(params: &mut P, grads: &G, state: &mut AdamState, cfg: &AdamConfig) -> Result<()>
where
    P: ParamSet + ?Sized,
    G: ParamSet + ?Sized,
{
    let gs = grads.param_slices();
    let mut ps = params.param_slices_mut();
    if gs.len() != ps.len()
        || state.m.len() != ps.len()
        || ps.iter().zip(&gs).zip(&state.m).any(|((p, g), m)| p.len() != g.len() || p.len() != m.len())
    {
        return Err(Error::invalid("Adam: parameter, gradient and state layouts differ"));
    }
    if gs.iter().any(|g| g.iter().any(|x| !x.is_finite())) {
        return Err(Error::NonFinite("Adam gradient".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (k, p) in ps.iter_mut().enumerate() {
        let (m, v, g) = (&mut state.m[k], &mut state.v[k], gs[k]);
        for i in 0..p.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
