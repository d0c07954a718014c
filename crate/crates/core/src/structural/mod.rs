//! Structural representations of node subsets as Monte Carlo averages of
//! permutation-invariant functions over embedding samples, and supervised
//! readouts trained on them.

mod readout;

use std::fs;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::graph::VertexSubset;
use crate::neural::SetEncoder;
use crate::samplers::EmbeddingSample;

pub use readout::{
    draw_eval_samples, evaluate, predict, predict_with_sampler, train_readout, ReadoutHyper, ReadoutModel,
};

/// A function of a multiset of embedding rows that ignores their order.
pub trait SetFunction: Sync {
    fn input_dim(&self) -> Option<usize>;
    fn output_dim(&self, input_dim: usize, set_size: usize) -> usize;
    fn eval(&self, elements: &[DVector<f64>]) -> Result<DVector<f64>>;
}

impl SetFunction for SetEncoder {
    fn input_dim(&self) -> Option<usize> {
        Some(SetEncoder::input_dim(self))
    }

    fn output_dim(&self, _: usize, _: usize) -> usize {
        SetEncoder::output_dim(self)
    }

    fn eval(&self, elements: &[DVector<f64>]) -> Result<DVector<f64>> {
        self.encode_set(elements)
    }
}

/// Coordinatewise mean of the elements; for a single node, the row itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct ElementMean;

impl SetFunction for ElementMean {
    fn input_dim(&self) -> Option<usize> {
        None
    }

    fn output_dim(&self, input_dim: usize, _: usize) -> usize {
        input_dim
    }

    fn eval(&self, elements: &[DVector<f64>]) -> Result<DVector<f64>> {
        let first = elements.first().ok_or_else(|| Error::invalid("empty set"))?;
        let mut acc = DVector::zeros(first.len());
        for e in elements {
            acc += e;
        }
        Ok(acc / elements.len() as f64)
    }
}

/// All pairwise Euclidean distances, sorted ascending. Invariant to element order
/// and to any orthogonal transform of the embedding space.
#[derive(Debug, Clone, Copy, Default)]
pub struct SortedPairwiseDistances;

impl SetFunction for SortedPairwiseDistances {
    fn input_dim(&self) -> Option<usize> {
        None
    }

    fn output_dim(&self, _: usize, k: usize) -> usize {
        k * k.saturating_sub(1) / 2
    }

    fn eval(&self, elements: &[DVector<f64>]) -> Result<DVector<f64>> {
        if elements.len() < 2 {
            return Err(Error::invalid("pairwise distances need at least two elements"));
        }
        let mut out = Vec::new();
        for (i, a) in elements.iter().enumerate() {
            for b in &elements[i + 1..] {
                out.push((a - b).norm());
            }
        }
        out.sort_by(f64::total_cmp);
        Ok(DVector::from_vec(out))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralEstimate {
    pub subset: VertexSubset,
    pub value: DVector<f64>,
    pub m: usize,
    pub sampler: String,
}

fn check_samples(samples: &[EmbeddingSample]) -> Result<(usize, usize)> {
    let first = samples.first().ok_or_else(|| Error::invalid("need at least one sample"))?;
    let (n, d) = (first.n(), first.d());
    if let Some(bad) = samples.iter().find(|s| s.n() != n || s.d() != d) {
        return Err(Error::invalid(format!(
            "mixed samples: {}x{} and {}x{}",
            n,
            d,
            bad.n(),
            bad.d()
        )));
    }
    Ok((n, d))
}

fn rows(sample: &EmbeddingSample, nodes: &[usize]) -> Vec<DVector<f64>> {
    nodes.iter().map(|&v| sample.z.row(v).transpose()).collect()
}

/// `(1/m) Σ_i f(rows of sample i restricted to S)`, summed in ascending sample order.
pub fn estimate_structural(
    samples: &[EmbeddingSample],
    s: &VertexSubset,
    f: &dyn SetFunction,
) -> Result<StructuralEstimate> {
    let (n, d) = check_samples(samples)?;
    if let Some(&bad) = s.nodes().iter().find(|&&v| v >= n) {
        return Err(Error::invalid(format!("node {bad} out of range for n={n}")));
    }
    if let Some(want) = f.input_dim() {
        if want != d {
            return Err(Error::invalid(format!("set function expects dimension {want}, samples have {d}")));
        }
    }
    let mut acc = DVector::zeros(f.output_dim(d, s.len()));
    for sample in samples {
        let v = f.eval(&rows(sample, s.nodes()))?;
        if v.len() != acc.len() {
            return Err(Error::invalid("set function output dimension changed between samples"));
        }
        acc += v;
    }
    let value = acc / samples.len() as f64;
    if value.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("structural estimate of {:?}", s.nodes())));
    }
    Ok(StructuralEstimate {
        subset: s.clone(),
        value,
        m: samples.len(),
        sampler: samples[0].provenance.sampler.clone(),
    })
}

/// Sample mean of row `v`.
pub fn mu_node(v: usize, samples: &[EmbeddingSample]) -> Result<DVector<f64>> {
    Ok(estimate_structural(samples, &VertexSubset::single(v), &ElementMean)?.value)
}

/// Mean Euclidean distance between rows `u` and `v`; `u == v` is rejected.
pub fn mu_pair(u: usize, v: usize, samples: &[EmbeddingSample]) -> Result<f64> {
    if u == v {
        return Err(Error::invalid(format!("mu_pair needs distinct nodes, got {u} twice")));
    }
    Ok(estimate_structural(samples, &VertexSubset::pair(u, v), &SortedPairwiseDistances)?.value[0])
}

/// Writes `subset,m,value_0,...`; subset nodes are space-separated.
pub fn write_estimates(estimates: &[StructuralEstimate], path: &Path) -> Result<()> {
    let width = estimates.iter().map(|e| e.value.len()).max().unwrap_or(0);
    let mut out = String::from("subset,m");
    for j in 0..width {
        out.push_str(&format!(",value_{j}"));
    }
    out.push('\n');
    for e in estimates {
        let nodes: Vec<String> = e.subset.nodes().iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("{},{}", nodes.join(" "), e.m));
        for x in e.value.iter() {
            out.push_str(&format!(",{x:?}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads rows written by [`write_estimates`] as `(subset, m, value)`.
pub fn read_estimates(path: &Path) -> Result<Vec<(VertexSubset, usize, DVector<f64>)>> {
    let mut r = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let err = |msg: String| Error::Parse {
            path: path.into(),
            line,
            msg,
        };
        let nodes = rec
            .get(0)
            .unwrap_or("")
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| err(format!("bad node '{t}'"))))
            .collect::<Result<Vec<_>>>()?;
        let subset = VertexSubset::new(nodes, usize::MAX).map_err(|e| err(e.to_string()))?;
        let m = rec.get(1).unwrap_or("").parse().map_err(|_| err("bad m".into()))?;
        let value = rec
            .iter()
            .skip(2)
            .map(|t| t.parse::<f64>().map_err(|_| err(format!("bad value '{t}'"))))
            .collect::<Result<Vec<_>>>()?;
        out.push((subset, m, DVector::from_vec(value)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{foodweb, preset};
    use crate::neural::{Activation, DenseNet};
    use crate::samplers::{mc_svd_sample, SvdMode};
    use crate::seeds;
    use proptest::prelude::*;

    fn draws(preset_name: &str, d: usize, seeds: std::ops::Range<u64>) -> Vec<EmbeddingSample> {
        let g = preset(preset_name).unwrap();
        seeds.map(|s| mc_svd_sample(&g, d, SvdMode::Converged, s).unwrap()).collect()
    }

    #[test]
    fn single_sample_is_one_encoding() {
        let s = draws("twin-chain", 2, 0..1);
        let f = SetEncoder::mlp(2, 8, 3, Activation::Identity, &mut seeds::rng(1));
        let sub = VertexSubset::pair(1, 4);
        let e = estimate_structural(&s, &sub, &f).unwrap();
        let want = f.encode_set(&[s[0].z.row(1).transpose(), s[0].z.row(4).transpose()]).unwrap();
        assert_eq!(e.value, want);
        assert_eq!(e.m, 1);
    }

    #[test]
    fn constant_function_gives_constant() {
        // zero weights in the outer net leave only its bias
        let mut f = SetEncoder::mlp(3, 4, 2, Activation::Identity, &mut seeds::rng(0));
        let last = &mut f.outer.layers_mut()[0];
        last.weight.fill(0.0);
        last.bias = DVector::from_vec(vec![1.5, -2.0]);
        let s = draws("twin-foodweb", 3, 0..7);
        let e = estimate_structural(&s, &VertexSubset::new(vec![0, 4, 9], 12).unwrap(), &f).unwrap();
        assert_eq!(e.value, DVector::from_vec(vec![1.5, -2.0]));
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let mut s = draws("twin-chain", 2, 0..2);
        s.extend(draws("twin-chain", 3, 5..6));
        assert!(matches!(mu_node(0, &s), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn mu_node_single_and_identical_samples() {
        let s = draws("foodweb", 2, 3..4);
        assert_eq!(mu_node(2, &s).unwrap(), s[0].z.row(2).transpose());
        let same = vec![s[0].clone(); 5];
        let mu = mu_node(2, &same).unwrap();
        assert!((mu - s[0].z.row(2).transpose()).amax() < 1e-15);
    }

    #[test]
    fn mu_pair_basics() {
        let s = draws("foodweb", 2, 3..4);
        let want = (s[0].z.row(0) - s[0].z.row(3)).norm();
        assert_eq!(mu_pair(0, 3, &s).unwrap(), want);
        assert!(mu_pair(1, 1, &s).is_err());
        let mut flat = s[0].clone();
        flat.z.fill(0.25);
        assert_eq!(mu_pair(0, 5, &[flat]).unwrap(), 0.0);
    }

    #[test]
    fn twin_node_estimates_converge_together() {
        // Mean over 10 seed batches: the twin gap shrinks from m=10 to m=400.
        let g = preset("twin-foodweb").unwrap();
        let (v, t) = (foodweb::LYNX, foodweb::ORCA);
        let mut shrank = 0;
        for batch in 0..10u64 {
            let s: Vec<EmbeddingSample> = (0..400)
                .map(|i| mc_svd_sample(&g, 4, SvdMode::Converged, seeds::derive(batch, seeds::Stream::Diagnostics, i)).unwrap())
                .collect();
            let gap = |m: usize| (mu_node(v, &s[..m]).unwrap() - mu_node(t, &s[..m]).unwrap()).norm();
            if gap(400) < gap(10) {
                shrank += 1;
            }
        }
        assert!(shrank >= 9, "gap shrank in {shrank} of 10 batches");
    }

    #[test]
    fn estimates_csv_round_trip() {
        let s = draws("twin-chain", 2, 0..3);
        let es: Vec<_> = [VertexSubset::single(0), VertexSubset::pair(1, 2)]
            .iter()
            .map(|sub| estimate_structural(&s, sub, &ElementMean).unwrap())
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("est.csv");
        write_estimates(&es, &p).unwrap();
        let back = read_estimates(&p).unwrap();
        for (e, (sub, m, val)) in es.iter().zip(back) {
            assert_eq!((&e.subset, e.m, &e.value), (&sub, m, &val));
        }
    }

    #[test]
    fn encoder_estimate_ignores_subset_order_inside_the_encoder() {
        let f = SetEncoder::new(
            DenseNet::mlp(&[2, 5], Activation::Tanh, Activation::Tanh, &mut seeds::rng(3)),
            DenseNet::identity(5),
        )
        .unwrap();
        let s = draws("cycle6", 2, 0..4);
        let a = estimate_structural(&s, &VertexSubset::new(vec![4, 1, 2], 6).unwrap(), &f).unwrap();
        let b = estimate_structural(&s, &VertexSubset::new(vec![2, 4, 1], 6).unwrap(), &f).unwrap();
        assert_eq!(a.value, b.value);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn halves_average_to_the_whole(half in 1usize..12, base in 0u64..1000, v in 0usize..12) {
            // Floating-point sums are not associative, so "exactly" is read as
            // agreement to a few ulps of the magnitude.
            let s = draws("twin-foodweb", 3, base..base + 2 * half as u64);
            let whole = mu_node(v, &s).unwrap();
            let avg = (mu_node(v, &s[..half]).unwrap() + mu_node(v, &s[half..]).unwrap()) / 2.0;
            prop_assert!((whole - avg).amax() < 1e-14);
        }

        #[test]
        fn distances_ignore_rotations(angle in 0.0f64..6.3, base in 0u64..500) {
            let mut s = draws("cycle6", 2, base..base + 3);
            let r = nalgebra::DMatrix::from_row_slice(2, 2, &[angle.cos(), -angle.sin(), angle.sin(), angle.cos()]);
            let before = estimate_structural(&s, &VertexSubset::new(vec![0, 2, 3], 6).unwrap(), &SortedPairwiseDistances).unwrap();
            for x in &mut s {
                x.z = &x.z * r.transpose();
            }
            let after = estimate_structural(&s, &VertexSubset::new(vec![0, 2, 3], 6).unwrap(), &SortedPairwiseDistances).unwrap();
            prop_assert!((before.value - after.value).amax() < 1e-12);
        }
    }
}
