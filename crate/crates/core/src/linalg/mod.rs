//! Randomized SVD by subspace iteration.
//!
//! A Gaussian test matrix is pushed through `power_steps` rounds of
//! `Q ← orth(M · orth(Mᵀ Q))`; the projected problem `Qᵀ M` is then factored exactly
//! with a one-sided Jacobi SVD. With `power_steps = 1` this is the single
//! optimization step used by MC-SVD; [`svd_converged`] keeps iterating until the
//! subspace stops moving.

mod jacobi;
mod operator;

pub use jacobi::{dense_singular_values, jacobi_svd, symmetric_eigen_jacobi};
pub use operator::{AdjacencyOperator, LinearOperator};

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::seeds;

/// Columns of `left_vectors` and `right_vectors` are paired with `singular_values`,
/// which are sorted nonincreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    pub left_vectors: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub right_vectors: DMatrix<f64>,
    pub iterations_run: usize,
    pub converged: bool,
}

/// Residual tolerance (relative to σ₁) for a triplet to count as converged.
pub const RESIDUAL_TOL: f64 = 1e-6;
/// Orthonormality tolerance for converged left vectors.
pub const ORTHO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SvdOptions {
    /// Flip each singular pair so the largest-magnitude entry of the left vector is
    /// positive. Off by default: the sign freedom is part of the sampling randomness.
    pub canonicalize_signs: bool,
}

fn orth(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

fn validate(m: &dyn LinearOperator, d: usize) -> Result<()> {
    let k = m.nrows().min(m.ncols());
    if d == 0 || d > k {
        return Err(Error::invalid(format!(
            "rank d={d} must satisfy 1 <= d <= {k} for a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    Ok(())
}

fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = seeds::rng(seed);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

/// `‖Q_new − Q Qᵀ Q_new‖_F / √d`: zero iff the two column spaces coincide.
fn subspace_change(q: &DMatrix<f64>, q_new: &DMatrix<f64>) -> f64 {
    let proj = q * (q.transpose() * q_new);
    (q_new - proj).norm() / (q.ncols() as f64).sqrt()
}

fn power_step(m: &dyn LinearOperator, q: &DMatrix<f64>) -> DMatrix<f64> {
    let w = orth(m.apply_transpose(q));
    orth(m.apply(&w))
}

/// Exact SVD of the projected problem `Qᵀ M`, lifted back through `Q`.
fn finalize(
    m: &dyn LinearOperator,
    q: &DMatrix<f64>,
    iterations_run: usize,
    require_residual: bool,
    opts: SvdOptions,
) -> SvdResult {
    // Bᵀ = Mᵀ Q  (ncols × d). Bᵀ = Q₂ R, R = U_r Σ V_rᵀ  ⇒  B = V_r Σ (Q₂ U_r)ᵀ.
    let bt = m.apply_transpose(q);
    let qr = bt.qr();
    let (q2, r) = (qr.q(), qr.r());
    let (u_r, sigma, v_r) = jacobi_svd(&r);
    let mut left = q * v_r;
    let mut right = q2 * u_r;
    if opts.canonicalize_signs {
        for j in 0..left.ncols() {
            let col = left.column(j);
            let (imax, _) = col
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |acc, (i, x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc });
            if left[(imax, j)] < 0.0 {
                left.column_mut(j).neg_mut();
                right.column_mut(j).neg_mut();
            }
        }
    }
    let mut result = SvdResult {
        left_vectors: left,
        singular_values: sigma,
        right_vectors: right,
        iterations_run,
        converged: false,
    };
    result.converged = require_residual && residual_ok(m, &result);
    result
}

/// Orthonormal left vectors and `‖M vᵢ − σᵢ uᵢ‖ ≤ 1e-6 σ₁` for every triplet.
pub fn residual_ok(m: &dyn LinearOperator, r: &SvdResult) -> bool {
    let d = r.left_vectors.ncols();
    let gram = r.left_vectors.transpose() * &r.left_vectors;
    if (gram - DMatrix::<f64>::identity(d, d)).amax() > ORTHO_TOL {
        return false;
    }
    let sigma1 = r.singular_values.first().copied().unwrap_or(0.0);
    let mv = m.apply(&r.right_vectors);
    (0..d).all(|i| {
        let resid = (mv.column(i) - r.left_vectors.column(i) * r.singular_values[i]).norm();
        resid <= RESIDUAL_TOL * sigma1
    })
}

/// Rank-`d` randomized SVD with a fixed number of power steps.
///
/// `power_steps = 0` factors the projection onto the orthonormalized random range
/// `orth(M Ω)`. Deterministic in `(M, d, power_steps, seed)`. `converged` reports
/// whether the residual criterion happens to hold.
pub fn randomized_svd(
    m: &dyn LinearOperator,
    d: usize,
    power_steps: usize,
    seed: u64,
) -> Result<SvdResult> {
    randomized_svd_with(m, d, power_steps, seed, SvdOptions::default())
}

pub fn randomized_svd_with(
    m: &dyn LinearOperator,
    d: usize,
    power_steps: usize,
    seed: u64,
    opts: SvdOptions,
) -> Result<SvdResult> {
    validate(m, d)?;
    let omega = gaussian(m.ncols(), d, seed);
    let mut q = orth(m.apply(&omega));
    for _ in 0..power_steps {
        q = power_step(m, &q);
    }
    Ok(finalize(m, &q, power_steps, true, opts))
}

/// Subspace iteration until the relative subspace change drops below `tol` or
/// `max_steps` power steps have run. Running out of steps is not an error: the
/// result carries `converged = false`.
pub fn svd_converged(
    m: &dyn LinearOperator,
    d: usize,
    tol: f64,
    max_steps: usize,
    seed: u64,
) -> Result<SvdResult> {
    svd_converged_with(m, d, tol, max_steps, seed, SvdOptions::default())
}

pub fn svd_converged_with(
    m: &dyn LinearOperator,
    d: usize,
    tol: f64,
    max_steps: usize,
    seed: u64,
    opts: SvdOptions,
) -> Result<SvdResult> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    validate(m, d)?;
    let omega = gaussian(m.ncols(), d, seed);
    let mut q = orth(m.apply(&omega));
    let mut steps = 0;
    let mut settled = false;
    while steps < max_steps {
        let q_new = power_step(m, &q);
        steps += 1;
        let change = subspace_change(&q, &q_new);
        q = q_new;
        if change < tol {
            settled = true;
            break;
        }
    }
    Ok(finalize(m, &q, steps, settled, opts))
}

/// Writes `# rows cols` followed by one comma-separated row per line.
pub fn write_matrix_csv(m: &DMatrix<f64>, path: &Path) -> Result<()> {
    let mut out = format!("# {} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|x| format!("{x:?}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, msg: &str| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.to_string(),
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad(1, "missing `# rows cols` header"))?;
    let dims: Vec<usize> = header
        .trim_start_matches('#')
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad(1, "bad header")))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(bad(1, "header must be `# rows cols`"));
    };
    let mut data = Vec::with_capacity(rows * cols);
    for (i, line) in lines.enumerate().take(rows) {
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse().map_err(|_| bad(i + 2, "bad number")))
            .collect::<Result<_>>()?;
        if vals.len() != cols {
            return Err(bad(i + 2, "wrong column count"));
        }
        data.extend(vals);
    }
    if data.len() != rows * cols {
        return Err(bad(rows + 1, "too few rows"));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}
