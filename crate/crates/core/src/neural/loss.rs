use nalgebra::{DMatrix, DVector};

/// Numerically stable softmax of one score vector.
pub fn softmax(scores: &DVector<f64>) -> DVector<f64> {
    let max = scores.max();
    let e = scores.map(|s| (s - max).exp());
    let z = e.sum();
    e / z
}

/// Mean cross-entropy of column-wise logits against class labels, and its gradient
/// with respect to the logits.
pub fn softmax_cross_entropy(logits: &DMatrix<f64>, labels: &[usize]) -> (f64, DMatrix<f64>) {
    assert_eq!(logits.ncols(), labels.len(), "one label per logit column");
    let b = labels.len() as f64;
    let mut grad = DMatrix::zeros(logits.nrows(), logits.ncols());
    let mut loss = 0.0;
    for (j, &y) in labels.iter().enumerate() {
        assert!(y < logits.nrows(), "label {y} out of range");
        let col = logits.column(j);
        let max = col.max();
        let lse = max + col.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        loss += lse - col[y];
        for i in 0..logits.nrows() {
            let p = (col[i] - lse).exp();
            grad[(i, j)] = (p - if i == y { 1.0 } else { 0.0 }) / b;
        }
    }
    (loss / b, grad)
}

/// Mean binary cross-entropy of `sigmoid(logit)` against 0/1 targets, and its
/// gradient with respect to the logits.
pub fn bce_with_logits(logits: &[f64], targets: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(logits.len(), targets.len(), "one target per logit");
    let b = logits.len() as f64;
    let mut loss = 0.0;
    let grad = logits
        .iter()
        .zip(targets)
        .map(|(&x, &t)| {
            // log(1 + e^x) − t·x, stable for either sign of x
            loss += x.max(0.0) - t * x + (-x.abs()).exp().ln_1p();
            (1.0 / (1.0 + (-x).exp()) - t) / b
        })
        .collect();
    (loss / b, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_class_count() {
        let (l, g) = softmax_cross_entropy(&DMatrix::zeros(4, 1), &[2]);
        assert!((l - 4f64.ln()).abs() < 1e-12);
        assert!((g[(2, 0)] + 0.75).abs() < 1e-12);
        assert!((g.sum()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let logits = DMatrix::from_row_slice(3, 2, &[0.2, -1.0, 1.5, 0.3, -0.7, 2.0]);
        let labels = [1, 2];
        let (_, g) = softmax_cross_entropy(&logits, &labels);
        let h = 1e-5;
        for i in 0..3 {
            for j in 0..2 {
                let mut p = logits.clone();
                p[(i, j)] += h;
                let mut m = logits.clone();
                m[(i, j)] -= h;
                let fd = (softmax_cross_entropy(&p, &labels).0 - softmax_cross_entropy(&m, &labels).0) / (2.0 * h);
                assert!((fd - g[(i, j)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn bce_is_stable_for_large_logits() {
        let (l, g) = bce_with_logits(&[800.0, -800.0], &[1.0, 0.0]);
        assert!(l.abs() < 1e-12);
        assert!(g.iter().all(|x| x.abs() < 1e-12));
        let (l, _) = bce_with_logits(&[800.0], &[0.0]);
        assert!((l - 800.0).abs() < 1e-9);
    }

    #[test]
    fn bce_at_zero_logit() {
        let (l, g) = bce_with_logits(&[0.0, 0.0], &[1.0, 0.0]);
        assert!((l - 2f64.ln()).abs() < 1e-12);
        assert!((g[0] + 0.25).abs() < 1e-12 && (g[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&DVector::from_vec(vec![1000.0, 999.0, -5.0]));
        assert!((p.sum() - 1.0).abs() < 1e-12);
        assert!(p[0] > p[1] && p[1] > p[2]);
    }
}
