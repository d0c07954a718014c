use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use super::dense::{Activation, DenseNet, ForwardCache};
use super::ParamSet;
use crate::error::{Error, Result};
use crate::seeds::Rng;

/// `outer(Σ_x inner(x))`.
///
/// Elements of each set are summed in a canonical order (lexicographic on their
/// values), so the output is bit-identical under any reordering of the input.
#[derive(Debug, Clone, PartialEq)]
pub struct SetEncoder {
    pub inner: DenseNet,
    pub outer: DenseNet,
}

/// Intermediates of [`SetEncoder::forward_sets`].
#[derive(Debug, Clone)]
pub struct SetBatchCache {
    /// `order[j]` is the input column placed at sorted position `j`.
    order: Vec<usize>,
    /// Set index of each sorted column.
    owner: Vec<usize>,
    inner: ForwardCache,
    outer: ForwardCache,
}

impl SetBatchCache {
    /// One column per set.
    pub fn output(&self) -> &DMatrix<f64> {
        self.outer.output()
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

impl SetEncoder {
    pub fn new(inner: DenseNet, outer: DenseNet) -> Result<Self> {
        if inner.output_dim() != outer.input_dim() {
            return Err(Error::invalid(format!(
                "inner net outputs {} but outer net expects {}",
                inner.output_dim(),
                outer.input_dim()
            )));
        }
        Ok(Self { inner, outer })
    }

    /// Inner `input → hidden → hidden` (relu), outer `hidden → output` with `out_act`.
    pub fn mlp(input: usize, hidden: usize, output: usize, out_act: Activation, rng: &mut Rng) -> Self {
        let inner = DenseNet::mlp(&[input, hidden, hidden], Activation::Relu, Activation::Relu, rng);
        let outer = DenseNet::mlp(&[hidden, output], Activation::Relu, out_act, rng);
        Self { inner, outer }
    }

    /// Identity inner and outer maps: the encoder returns the plain sum.
    pub fn sum(dim: usize) -> Self {
        Self {
            inner: DenseNet::identity(dim),
            outer: DenseNet::identity(dim),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.outer.output_dim()
    }

    pub fn encode_set(&self, elements: &[DVector<f64>]) -> Result<DVector<f64>> {
        if elements.is_empty() {
            return Err(Error::invalid("encode_set needs at least one element"));
        }
        let d = self.input_dim();
        if let Some(bad) = elements.iter().find(|e| e.len() != d) {
            return Err(Error::invalid(format!(
                "set element has dimension {}, encoder expects {d}",
                bad.len()
            )));
        }
        let x = DMatrix::from_columns(elements);
        Ok(self.forward_sets(&x, &[elements.len()]).output().column(0).into_owned())
    }

    /// Encodes consecutive groups of columns of `elements`; `sizes[s]` columns belong
    /// to set `s`. Empty sets pool to the zero vector.
    pub fn forward_sets(&self, elements: &DMatrix<f64>, sizes: &[usize]) -> SetBatchCache {
        assert_eq!(elements.nrows(), self.input_dim(), "element dimension mismatch");
        assert_eq!(sizes.iter().sum::<usize>(), elements.ncols(), "set sizes do not cover the batch");
        let mut order = Vec::with_capacity(elements.ncols());
        let mut owner = Vec::with_capacity(elements.ncols());
        let mut start = 0;
        for (s, &len) in sizes.iter().enumerate() {
            let mut idx: Vec<usize> = (start..start + len).collect();
            idx.sort_by(|&a, &b| lexicographic(elements.column(a).as_slice(), elements.column(b).as_slice()));
            order.extend(idx);
            owner.extend(std::iter::repeat_n(s, len));
            start += len;
        }
        let sorted = elements.select_columns(&order);
        let inner = self.inner.forward_cached(&sorted);
        let h = inner.output();
        let mut pooled = DMatrix::zeros(h.nrows(), sizes.len());
        for (j, &s) in owner.iter().enumerate() {
            let mut col = pooled.column_mut(s);
            col += h.column(j);
        }
        let outer = self.outer.forward_cached(&pooled);
        SetBatchCache { order, owner, inner, outer }
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient with
    /// respect to `elements`, in the caller's column order.
    pub fn backward_sets(
        &self,
        cache: &SetBatchCache,
        upstream: &DMatrix<f64>,
        grads: &mut SetEncoder,
    ) -> DMatrix<f64> {
        let d_pooled = self.outer.backward(&cache.outer, upstream, &mut grads.outer);
        let mut d_h = DMatrix::zeros(d_pooled.nrows(), cache.owner.len());
        for (j, &s) in cache.owner.iter().enumerate() {
            d_h.set_column(j, &d_pooled.column(s));
        }
        let d_sorted = self.inner.backward(&cache.inner, &d_h, &mut grads.inner);
        let mut d_x = DMatrix::zeros(d_sorted.nrows(), d_sorted.ncols());
        for (j, &col) in cache.order.iter().enumerate() {
            d_x.set_column(col, &d_sorted.column(j));
        }
        d_x
    }

    pub fn zeros_like(&self) -> SetEncoder {
        SetEncoder {
            inner: self.inner.zeros_like(),
            outer: self.outer.zeros_like(),
        }
    }
}

impl ParamSet for SetEncoder {
    fn param_slices(&self) -> Vec<&[f64]> {
        let mut v = self.inner.param_slices();
        v.extend(self.outer.param_slices());
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.inner.param_slices_mut();
        v.extend(self.outer.param_slices_mut());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradcheck::{jitter_biases, max_relative_error, random_probe, TOLERANCE};
    use crate::seeds;
    use rand::Rng as _;

    fn random_vecs(k: usize, d: usize, rng: &mut Rng) -> Vec<DVector<f64>> {
        (0..k)
            .map(|_| DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0)))
            .collect()
    }

    #[test]
    fn single_element_identity_encoder() {
        let e = DVector::from_vec(vec![0.5, -1.25, 3.0]);
        assert_eq!(SetEncoder::sum(3).encode_set(std::slice::from_ref(&e)).unwrap(), e);
    }

    #[test]
    fn empty_set_rejected() {
        assert!(SetEncoder::sum(2).encode_set(&[]).is_err());
    }

    #[test]
    fn order_is_irrelevant_bitwise() {
        let mut rng = seeds::rng(11);
        let enc = SetEncoder::mlp(3, 8, 4, Activation::Identity, &mut rng);
        let v = random_vecs(2, 3, &mut rng);
        let a = enc.encode_set(&[v[0].clone(), v[1].clone()]).unwrap();
        let b = enc.encode_set(&[v[1].clone(), v[0].clone()]).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn three_vectors_match_straight_line_evaluation() {
        let mut rng = seeds::rng(5);
        let enc = SetEncoder::mlp(2, 5, 3, Activation::Tanh, &mut rng);
        let v = random_vecs(3, 2, &mut rng);
        let relu = |x: f64| x.max(0.0);
        let layer = |net: &DenseNet, i: usize, x: &DVector<f64>, f: &dyn Fn(f64) -> f64| {
            let l = &net.layers()[i];
            (&l.weight * x + &l.bias).map(f)
        };
        let mut pooled = DVector::zeros(5);
        for x in &v {
            let h1 = layer(&enc.inner, 0, x, &relu);
            pooled += layer(&enc.inner, 1, &h1, &relu);
        }
        let want = layer(&enc.outer, 0, &pooled, &f64::tanh);
        let got = enc.encode_set(&v).unwrap();
        for i in 0..3 {
            assert!((got[i] - want[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_matches_individual_sets() {
        let mut rng = seeds::rng(8);
        let enc = SetEncoder::mlp(3, 6, 2, Activation::Identity, &mut rng);
        let sets = [random_vecs(2, 3, &mut rng), random_vecs(3, 3, &mut rng)];
        let all: Vec<DVector<f64>> = sets.iter().flatten().cloned().collect();
        let cache = enc.forward_sets(&DMatrix::from_columns(&all), &[2, 3]);
        for (s, set) in sets.iter().enumerate() {
            let one = enc.encode_set(set).unwrap();
            for i in 0..2 {
                assert!((cache.output()[(i, s)] - one[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_group_pools_to_zero() {
        let mut rng = seeds::rng(2);
        let enc = SetEncoder::mlp(2, 4, 3, Activation::Identity, &mut rng);
        let cache = enc.forward_sets(&DMatrix::zeros(2, 0), &[0]);
        let want = enc.outer.forward(&DVector::zeros(4)).unwrap();
        assert_eq!(cache.output().column(0), want.column(0));
    }

    #[test]
    fn finite_difference_check() {
        for seed in 0..20u64 {
            let mut rng = seeds::rng(100 + seed);
            let mut enc = SetEncoder::mlp(3, 5, 2, Activation::Tanh, &mut rng);
            jitter_biases(&mut enc.inner, &mut rng);
            jitter_biases(&mut enc.outer, &mut rng);
            let elems = DMatrix::from_columns(&random_vecs(5, 3, &mut rng));
            let sizes = [2, 3];
            let probe = random_probe(2, 2, &mut rng);
            let loss = |e: &SetEncoder| e.forward_sets(&elems, &sizes).output().component_mul(&probe).sum();
            let mut g = enc.zeros_like();
            let d_x = enc.backward_sets(&enc.forward_sets(&elems, &sizes), &probe, &mut g);
            let err = max_relative_error(&enc, &g, loss);
            assert!(err < TOLERANCE, "seed {seed}: {err}");
            // element gradient
            let h = 1e-4;
            for i in 0..3 {
                for j in 0..5 {
                    let mut p = elems.clone();
                    p[(i, j)] += h;
                    let mut m = elems.clone();
                    m[(i, j)] -= h;
                    let fd = (enc.forward_sets(&p, &sizes).output().component_mul(&probe).sum()
                        - enc.forward_sets(&m, &sizes).output().component_mul(&probe).sum())
                        / (2.0 * h);
                    let a = d_x[(i, j)];
                    assert!((a - fd).abs() / a.abs().max(fd.abs()).max(1e-6) < TOLERANCE);
                }
            }
        }
    }
}
