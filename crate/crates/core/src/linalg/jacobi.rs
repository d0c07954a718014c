//! Jacobi rotations: a one-sided (Hestenes) SVD for the small projected problem and a
//! two-sided symmetric eigensolver used as the dense reference in tests.

use nalgebra::DMatrix;

const MAX_SWEEPS: usize = 100;

/// One-sided Jacobi SVD of an `m × n` matrix with `m >= n`.
///
/// Returns `(U, σ, V)` with `A = U diag(σ) Vᵀ`, `U` being `m × n` with orthonormal
/// columns (columns for zero singular values are completed to an orthonormal set)
/// and σ sorted nonincreasing.
pub fn jacobi_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    assert!(m >= n, "jacobi_svd expects a tall or square matrix");
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut w, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]).then(i.cmp(&j)));
    let scale = sigma.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut u = DMatrix::zeros(m, n);
    let mut v_sorted = DMatrix::zeros(n, n);
    let mut zero_cols = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        v_sorted.set_column(k, &v.column(j));
        if sigma[j] > scale * 1e-14 {
            u.set_column(k, &(w.column(j) / sigma[j]));
        } else {
            zero_cols.push(k);
        }
    }
    sigma = order.iter().map(|&j| sigma[j]).collect();
    complete_orthonormal(&mut u, &zero_cols);
    (u, sigma, v_sorted)
}

fn rotate_columns(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let a = m[(i, p)];
        let b = m[(i, q)];
        m[(i, p)] = c * a - s * b;
        m[(i, q)] = s * a + c * b;
    }
}

/// Fills the listed (zero) columns with unit vectors orthogonal to the rest, by
/// Gram-Schmidt over the standard basis.
fn complete_orthonormal(u: &mut DMatrix<f64>, cols: &[usize]) {
    let m = u.nrows();
    let mut basis = 0;
    for &k in cols {
        while basis < m {
            let mut e = nalgebra::DVector::<f64>::zeros(m);
            e[basis] = 1.0;
            basis += 1;
            for j in 0..u.ncols() {
                if j == k {
                    continue;
                }
                let proj = u.column(j).dot(&e);
                e -= u.column(j) * proj;
            }
            let norm = e.norm();
            if norm > 1e-8 {
                u.set_column(k, &(e / norm));
                break;
            }
        }
    }
}

/// Cyclic two-sided Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues sorted nonincreasing and the matching eigenvector columns.
pub fn symmetric_eigen_jacobi(s: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = s.nrows();
    assert_eq!(n, s.ncols(), "symmetric_eigen_jacobi expects a square matrix");
    let mut a = s.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off <= 1e-30 * a.norm_squared().max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                rotate_columns(&mut v, p, q, c, sn);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let vals = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &v.column(i));
    }
    (vals, vecs)
}

/// All `min(r, c)` singular values of `m`, nonincreasing, from the Jacobi
/// eigendecomposition of the symmetric dilation `[[0, M], [Mᵀ, 0]]`, whose
/// eigenvalues are `±σᵢ`. Dense reference only; intended for `r + c <= 128`.
pub fn dense_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    let mut dil = DMatrix::zeros(r + c, r + c);
    dil.view_mut((0, r), (r, c)).copy_from(m);
    dil.view_mut((r, 0), (c, r)).copy_from(&m.transpose());
    let (vals, _) = symmetric_eigen_jacobi(&dil);
    vals.into_iter().take(r.min(c)).map(|x| x.max(0.0)).collect()
}
