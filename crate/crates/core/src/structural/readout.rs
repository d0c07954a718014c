use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, VertexSubset};
use crate::neural::{
    adam_step, softmax_cross_entropy, Activation, AdamConfig, AdamState, Checkpoint, DenseNet, ParamSet,
    SetEncoder, DEFAULT_HIDDEN,
};
use crate::samplers::{draw_samples, EmbeddingSample, EmbeddingSampler};
use crate::seeds::{self, Stream};
use crate::tasks::{micro_f1, Split, TaskSet};

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutHyper {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Embedding samples per epoch; the training representation is their average.
    pub m_train: usize,
    pub seed: u64,
}

impl Default for ReadoutHyper {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN,
            epochs: 100,
            lr: 1e-3,
            batch_size: 64,
            m_train: 1,
            seed: 0,
        }
    }
}

/// Sum-pooling set encoder over the subset's embedding rows, then an MLP head to
/// class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutModel {
    pub arity: usize,
    pub class_count: usize,
    pub set_encoder: SetEncoder,
    pub head: DenseNet,
    pub loss_curve: Vec<f64>,
}

impl ParamSet for ReadoutModel {
    fn param_slices(&self) -> Vec<&[f64]> {
        let mut v = self.set_encoder.param_slices();
        v.extend(self.head.param_slices());
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.set_encoder.param_slices_mut();
        v.extend(self.head.param_slices_mut());
        v
    }
}

impl ReadoutModel {
    /// Glorot-initialized encoder and head; the head's last layer starts at zero so
    /// an untrained model scores every class equally.
    pub fn init(d: usize, arity: usize, class_count: usize, hidden: usize, seed: u64) -> Result<Self> {
        if d == 0 || arity == 0 || class_count < 2 || hidden == 0 {
            return Err(Error::invalid(format!(
                "readout needs positive d, arity, hidden and at least 2 classes (d={d}, arity={arity}, classes={class_count}, hidden={hidden})"
            )));
        }
        let mut rng = seeds::rng(seeds::derive(seed, Stream::ModelInit, 1));
        let set_encoder = SetEncoder::mlp(d, hidden, hidden, Activation::Relu, &mut rng);
        let mut head = DenseNet::mlp(&[hidden, class_count], Activation::Identity, Activation::Identity, &mut rng);
        let last = head.layers_mut().last_mut().expect("head has layers");
        last.weight.fill(0.0);
        Ok(Self {
            arity,
            class_count,
            set_encoder,
            head,
            loss_curve: vec![],
        })
    }

    pub fn input_dim(&self) -> usize {
        self.set_encoder.input_dim()
    }

    fn zeros_like(&self) -> ReadoutModel {
        ReadoutModel {
            arity: self.arity,
            class_count: self.class_count,
            set_encoder: self.set_encoder.zeros_like(),
            head: self.head.zeros_like(),
            loss_curve: vec![],
        }
    }

    /// Stacks the rows of every subset as columns, `arity` per subset.
    fn gather(&self, z: &DMatrix<f64>, subsets: &[&VertexSubset]) -> Result<DMatrix<f64>> {
        let d = self.input_dim();
        if z.ncols() != d {
            return Err(Error::invalid(format!("model expects dimension {d}, sample has {}", z.ncols())));
        }
        let mut x = DMatrix::zeros(d, subsets.len() * self.arity);
        let mut col = 0;
        for s in subsets {
            if s.len() != self.arity {
                return Err(Error::invalid(format!("subset arity {} does not match model arity {}", s.len(), self.arity)));
            }
            for &v in s.nodes() {
                if v >= z.nrows() {
                    return Err(Error::invalid(format!("node {v} out of range for n={}", z.nrows())));
                }
                x.set_column(col, &z.row(v).transpose());
                col += 1;
            }
        }
        Ok(x)
    }

    /// Pooled representations, one column per subset.
    pub fn represent(&self, z: &DMatrix<f64>, subsets: &[&VertexSubset]) -> Result<DMatrix<f64>> {
        let x = self.gather(z, subsets)?;
        let sizes = vec![self.arity; subsets.len()];
        Ok(self.set_encoder.forward_sets(&x, &sizes).output().clone())
    }

    /// Softmax cross-entropy of `labels` on one sample and its gradient with
    /// respect to every parameter.
    pub fn loss_and_grad(&self, z: &DMatrix<f64>, subsets: &[&VertexSubset], labels: &[usize]) -> Result<(f64, ReadoutModel)> {
        if labels.len() != subsets.len() {
            return Err(Error::invalid(format!("{} labels for {} subsets", labels.len(), subsets.len())));
        }
        let x = self.gather(z, subsets)?;
        let enc = self.set_encoder.forward_sets(&x, &vec![self.arity; subsets.len()]);
        let head = self.head.forward_cached(enc.output());
        let (loss, d_logits) = softmax_cross_entropy(head.output(), labels);
        let mut grads = self.zeros_like();
        let d_rep = self.head.backward(&head, &d_logits, &mut grads.head);
        self.set_encoder.backward_sets(&enc, &d_rep, &mut grads.set_encoder);
        Ok((loss, grads))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new();
        c.set_meta("model", "readout");
        c.set_meta("arity", self.arity);
        c.set_meta("class_count", self.class_count);
        c.put_set_encoder("encoder", &self.set_encoder);
        c.put_dense("head", &self.head);
        c.push_tensor("loss_curve", DMatrix::from_row_slice(1, self.loss_curve.len(), &self.loss_curve));
        c
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        if c.meta("model")? != "readout" {
            return Err(Error::invalid("checkpoint does not hold a readout model"));
        }
        let m = Self {
            arity: c.meta_parse("arity")?,
            class_count: c.meta_parse("class_count")?,
            set_encoder: c.get_set_encoder("encoder")?,
            head: c.get_dense("head")?,
            loss_curve: c.tensor("loss_curve")?.iter().copied().collect(),
        };
        if m.head.output_dim() != m.class_count || m.head.input_dim() != m.set_encoder.output_dim() {
            return Err(Error::invalid("readout checkpoint has inconsistent shapes"));
        }
        Ok(m)
    }
}

/// Trains on the task's train split. Each epoch draws `m_train` fresh embedding
/// samples from `sampler` on `g` and runs shuffled Adam minibatches over the
/// averaged representation.
pub fn train_readout(
    task: &TaskSet,
    sampler: &dyn EmbeddingSampler,
    g: &AttributedGraph,
    hyper: &ReadoutHyper,
) -> Result<ReadoutModel> {
    let train: Vec<(&VertexSubset, usize)> = task.split(Split::Train).map(|i| (&i.subset, i.label)).collect();
    if train.is_empty() {
        return Err(Error::Task("task has no training instances".into()));
    }
    if hyper.batch_size == 0 {
        return Err(Error::invalid("batch_size must be positive"));
    }
    if hyper.m_train == 0 {
        return Err(Error::invalid("m_train must be at least 1"));
    }
    let mut model = ReadoutModel::init(sampler.dim(), task.arity, task.class_count, hyper.hidden, hyper.seed)?;
    let cfg = AdamConfig::with_lr(hyper.lr);
    let mut state = AdamState::new(&model);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..hyper.epochs {
        let first = (epoch * hyper.m_train) as u64;
        let seeds: Vec<u64> = (first..first + hyper.m_train as u64)
            .map(|i| seeds::derive(hyper.seed, Stream::TrainSamples, i))
            .collect();
        let samples = draw_samples(sampler, g, &seeds)?;
        order.shuffle(&mut seeds::rng(seeds::derive(hyper.seed, Stream::Minibatch, epoch as u64)));
        let mut total = 0.0;
        let scale = 1.0 / hyper.m_train as f64;
        for chunk in order.chunks(hyper.batch_size) {
            let subsets: Vec<&VertexSubset> = chunk.iter().map(|&i| train[i].0).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| train[i].1).collect();
            let sizes = vec![model.arity; subsets.len()];
            let mut encs = Vec::with_capacity(samples.len());
            for sample in &samples {
                let x = model.gather(&sample.z, &subsets)?;
                encs.push(model.set_encoder.forward_sets(&x, &sizes));
            }
            let mut rep = encs[0].output().clone();
            for e in &encs[1..] {
                rep += e.output();
            }
            rep *= scale;
            let head = model.head.forward_cached(&rep);
            let (loss, d_logits) = softmax_cross_entropy(head.output(), &labels);
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    detail: format!("loss {loss}"),
                });
            }
            total += loss * chunk.len() as f64;
            let mut grads = model.zeros_like();
            let d_rep = model.head.backward(&head, &d_logits, &mut grads.head) * scale;
            for enc in &encs {
                model.set_encoder.backward_sets(enc, &d_rep, &mut grads.set_encoder);
            }
            adam_step(&mut model, &grads, &mut state, &cfg).map_err(|e| Error::Divergence {
                epoch,
                detail: e.to_string(),
            })?;
        }
        model.loss_curve.push(total / train.len() as f64);
    }
    Ok(model)
}

/// Class scores (`class_count × subsets`) from the representation averaged over
/// `samples` in ascending order, then passed through the head.
pub fn predict(model: &ReadoutModel, samples: &[EmbeddingSample], subsets: &[&VertexSubset]) -> Result<DMatrix<f64>> {
    if samples.is_empty() {
        return Err(Error::invalid("predict needs at least one sample"));
    }
    if subsets.is_empty() {
        return Ok(DMatrix::zeros(model.class_count, 0));
    }
    let reps: Vec<DMatrix<f64>> = samples
        .par_iter()
        .map(|s| model.represent(&s.z, subsets))
        .collect::<Result<_>>()?;
    let mut acc = DMatrix::zeros(reps[0].nrows(), reps[0].ncols());
    for r in &reps {
        acc += r;
    }
    acc /= samples.len() as f64;
    Ok(model.head.forward_batch(&acc))
}

/// Draws `m` evaluation samples from the stream reserved for `split`; the
/// training stream is never reused.
pub fn draw_eval_samples(
    sampler: &dyn EmbeddingSampler,
    g: &AttributedGraph,
    m: usize,
    seed: u64,
    split: Split,
) -> Result<Vec<EmbeddingSample>> {
    let stream = match split {
        Split::Test => Stream::TestSamples,
        Split::Val => Stream::ValSamples,
        Split::Train => Stream::TrainSamples,
    };
    let seeds: Vec<u64> = (0..m as u64).map(|i| seeds::derive(seed, stream, i)).collect();
    draw_samples(sampler, g, &seeds)
}

pub fn predict_with_sampler(
    model: &ReadoutModel,
    sampler: &dyn EmbeddingSampler,
    g: &AttributedGraph,
    subsets: &[&VertexSubset],
    m_test: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let samples = draw_eval_samples(sampler, g, m_test, seed, Split::Test)?;
    predict(model, &samples, subsets)
}

fn argmax(col: nalgebra::DVectorView<f64>) -> usize {
    col.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}

/// Micro-F1 of argmax predictions on one split.
pub fn evaluate(model: &ReadoutModel, samples: &[EmbeddingSample], task: &TaskSet, split: Split) -> Result<f64> {
    let inst: Vec<_> = task.split(split).collect();
    let subsets: Vec<&VertexSubset> = inst.iter().map(|i| &i.subset).collect();
    let scores = predict(model, samples, &subsets)?;
    let pred: Vec<usize> = scores.column_iter().map(argmax).collect();
    let truth: Vec<usize> = inst.iter().map(|i| i.label).collect();
    micro_f1(&pred, &truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::preset;
    use crate::neural::gradcheck;
    use crate::samplers::{FixedSampler, Provenance};
    use crate::structural::estimate_structural;
    use crate::tasks::{build_node_task, SplitFractions, SplitSpec};
    use rand::Rng as _;
    use rand_distr::{Distribution, Normal};

    /// Rows are one-hot labels plus fresh Gaussian noise per seed.
    struct NoisyLabels {
        labels: Vec<usize>,
        classes: usize,
        noise: f64,
    }

    impl EmbeddingSampler for NoisyLabels {
        fn id(&self) -> String {
            "noisy-labels".into()
        }

        fn dim(&self) -> usize {
            self.classes
        }

        fn sample(&self, g: &AttributedGraph, seed: u64) -> Result<EmbeddingSample> {
            let mut rng = seeds::rng(seed);
            let normal = Normal::new(0.0, self.noise).unwrap();
            let z = DMatrix::from_fn(g.n(), self.classes, |i, j| {
                (self.labels[i] == j) as u8 as f64 + normal.sample(&mut rng)
            });
            FixedSampler { z }.sample(g, seed).map(|mut s| {
                s.provenance = Provenance { sampler: self.id(), ..s.provenance };
                s
            })
        }
    }

    fn toy() -> (AttributedGraph, TaskSet, NoisyLabels) {
        let n = 40;
        let g = AttributedGraph::from_edges(n, &[], false).unwrap();
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let task = build_node_task(&g, &labels, &SplitSpec::Fractions(SplitFractions::default()), 1).unwrap();
        let sampler = NoisyLabels { labels, classes: 2, noise: 0.1 };
        (g, task, sampler)
    }

    #[test]
    fn separable_toy_task_is_learned() {
        let (g, task, sampler) = toy();
        let hyper = ReadoutHyper { hidden: 16, epochs: 50, lr: 1e-2, batch_size: 8, m_train: 1, seed: 3 };
        let model = train_readout(&task, &sampler, &g, &hyper).unwrap();
        assert_eq!(model.loss_curve.len(), 50);
        assert!(model.loss_curve[49] < model.loss_curve[0]);
        let samples = draw_eval_samples(&sampler, &g, 1, 3, Split::Train).unwrap();
        assert!(evaluate(&model, &samples, &task, Split::Train).unwrap() > 0.95);
    }

    #[test]
    fn zero_epochs_is_uniform() {
        let (g, task, sampler) = toy();
        let hyper = ReadoutHyper { hidden: 8, epochs: 0, ..Default::default() };
        let model = train_readout(&task, &sampler, &g, &hyper).unwrap();
        assert!(model.loss_curve.is_empty());
        let s = draw_eval_samples(&sampler, &g, 2, 0, Split::Test).unwrap();
        let subsets: Vec<&VertexSubset> = task.instances.iter().map(|i| &i.subset).collect();
        let scores = predict(&model, &s, &subsets).unwrap();
        for c in scores.column_iter() {
            assert!((c[0] - c[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn single_sample_prediction_matches_estimate_pipeline() {
        let g = preset("twin-foodweb").unwrap();
        let model = ReadoutModel::init(3, 2, 2, 8, 4).unwrap();
        let sampler = crate::samplers::McSvdSampler::new(3, crate::samplers::SvdMode::Converged);
        let samples = draw_eval_samples(&sampler, &g, 1, 9, Split::Test).unwrap();
        let subs = [VertexSubset::pair(0, 3), VertexSubset::pair(4, 10)];
        let refs: Vec<&VertexSubset> = subs.iter().collect();
        let scores = predict(&model, &samples, &refs).unwrap();
        for (j, s) in subs.iter().enumerate() {
            let est = estimate_structural(&samples, s, &model.set_encoder).unwrap();
            let want = model.head.forward(&est.value).unwrap();
            assert!((scores.column(j) - want).amax() < 1e-12);
        }
        assert_eq!(scores, predict_with_sampler(&model, &sampler, &g, &refs, 1, 9).unwrap());
    }

    #[test]
    fn readout_gradient_matches_finite_differences() {
        let mut rng = seeds::rng(11);
        for trial in 0..5u64 {
            let mut model = ReadoutModel::init(3, 2, 3, 6, trial).unwrap();
            gradcheck::jitter_biases(&mut model.set_encoder.inner, &mut rng);
            gradcheck::jitter_biases(&mut model.set_encoder.outer, &mut rng);
            gradcheck::jitter_biases(&mut model.head, &mut rng);
            for l in model.head.layers_mut() {
                l.weight.iter_mut().for_each(|w| *w += rng.random_range(-0.3..0.3));
            }
            let z = gradcheck::random_probe(6, 3, &mut rng);
            let subs = [VertexSubset::pair(0, 1), VertexSubset::pair(2, 5), VertexSubset::pair(3, 4)];
            let refs: Vec<&VertexSubset> = subs.iter().collect();
            let labels = [0usize, 2, 1];
            let loss = |m: &ReadoutModel| {
                let logits = m.head.forward_batch(&m.represent(&z, &refs).unwrap());
                softmax_cross_entropy(&logits, &labels).0
            };
            let (_, grads) = model.loss_and_grad(&z, &refs, &labels).unwrap();
            let err = gradcheck::max_relative_error(&model, &grads, loss);
            assert!(err < gradcheck::TOLERANCE, "trial {trial}: {err}");
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let (g, task, sampler) = toy();
        let hyper = ReadoutHyper { hidden: 4, epochs: 2, ..Default::default() };
        let model = train_readout(&task, &sampler, &g, &hyper).unwrap();
        let text = model.to_checkpoint().to_text();
        let back = ReadoutModel::from_checkpoint(&Checkpoint::parse(&text, std::path::Path::new("m")).unwrap()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn training_is_reproducible() {
        let (g, task, sampler) = toy();
        let hyper = ReadoutHyper { hidden: 8, epochs: 3, ..Default::default() };
        assert_eq!(
            train_readout(&task, &sampler, &g, &hyper).unwrap(),
            train_readout(&task, &sampler, &g, &hyper).unwrap()
        );
    }

    #[test]
    fn duplicate_training_samples_average_to_one() {
        // a sampler that ignores its seed makes every draw identical; only the
        // gradient accumulation order differs
        let (g, task, _) = toy();
        let z = DMatrix::from_fn(g.n(), 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let sampler = FixedSampler { z };
        let one = ReadoutHyper { hidden: 8, epochs: 4, ..Default::default() };
        let two = ReadoutHyper { m_train: 2, ..one.clone() };
        let a = train_readout(&task, &sampler, &g, &one).unwrap();
        let b = train_readout(&task, &sampler, &g, &two).unwrap();
        let pa: Vec<f64> = a.param_slices().concat();
        let pb: Vec<f64> = b.param_slices().concat();
        assert!(pa.iter().zip(&pb).all(|(x, y)| (x - y).abs() < 1e-12));
        assert!(a.loss_curve.iter().zip(&b.loss_curve).all(|(x, y)| (x - y).abs() < 1e-12));
        let zero = ReadoutHyper { m_train: 0, ..one };
        assert!(train_readout(&task, &sampler, &g, &zero).is_err());
    }
}
