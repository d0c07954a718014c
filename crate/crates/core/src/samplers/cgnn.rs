//! Latent-variable graph model sampled by an unrolled Gibbs chain.
//!
//! One sweep visits nodes in ascending index order. Node `u` gets
//! `(μ, log σ²) = update(f({Z_v}), g({X_v}), X_u)` over its out-neighbors `v` and is
//! redrawn as `μ + σ ⊙ ε`. Training backpropagates a Bernoulli edge-reconstruction
//! loss through every sweep via the reparametrization.
//!
//! `f(S) = outer_f(Σ_{z∈S} inner_f(z))`. Each node's `inner_f(Z_v)` is cached and
//! refreshed when `Z_v` changes, so a neighbor sum costs one vector add per
//! neighbor. Neighbor terms are summed in lexicographic order of the neighbor
//! latents, which makes an update a function of the neighbor multiset.

use std::cmp::Ordering;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{EmbeddingSample, EmbeddingSampler, Provenance};
use crate::error::{Error, Result};
use crate::graph::{apply_permutation, AttributedGraph, Permutation};
use crate::neural::{
    adam_step, bce_with_logits, Activation, AdamConfig, AdamState, Checkpoint, DenseNet,
    ForwardCache, ParamSet, SetBatchCache, SetEncoder, DEFAULT_HIDDEN,
};
use crate::seeds::{self, Stream};

/// Clamp range of the predicted log-variance. Outside it the gradient is zero.
pub const LOGVAR_MIN: f64 = -10.0;
pub const LOGVAR_MAX: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Stochastic,
    /// `σ = 0`: every update returns its mean.
    ZeroVariance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgnnHyper {
    pub d: usize,
    pub hidden: usize,
    pub sweeps: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Sampled non-edges per observed edge.
    pub neg_ratio: usize,
    /// Adds a squared-error reconstruction of node features from `Z`.
    pub feature_reconstruction: bool,
    pub seed: u64,
}

impl Default for CgnnHyper {
    fn default() -> Self {
        Self {
            d: 32,
            hidden: DEFAULT_HIDDEN,
            sweeps: 3,
            epochs: 200,
            lr: 1e-3,
            neg_ratio: 1,
            feature_reconstruction: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgnnParams {
    pub d: usize,
    pub feature_dim: usize,
    /// Set encoder over neighbor latents.
    pub f: SetEncoder,
    /// Set encoder over neighbor features.
    pub g: SetEncoder,
    /// `[f out, g out, X_u] → [μ, log σ²]`.
    pub update: DenseNet,
    /// `[Z_u ⊙ Z_v, |Z_u − Z_v|] → edge logit`.
    pub decoder: DenseNet,
    pub feature_decoder: Option<DenseNet>,
    /// Training loss per epoch.
    pub loss_curve: Vec<f64>,
}

impl CgnnParams {
    pub fn init(feature_dim: usize, hyper: &CgnnHyper, seed: u64) -> Self {
        let (d, h) = (hyper.d, hyper.hidden);
        let mut rng = seeds::rng(seed);
        let f = SetEncoder::mlp(d, h, h, Activation::Tanh, &mut rng);
        let g = SetEncoder::mlp(feature_dim, h, h, Activation::Tanh, &mut rng);
        let update = DenseNet::mlp(&[2 * h + feature_dim, h, 2 * d], Activation::Relu, Activation::Identity, &mut rng);
        let decoder = DenseNet::mlp(&[2 * d, h, 1], Activation::Relu, Activation::Identity, &mut rng);
        let feature_decoder = hyper
            .feature_reconstruction
            .then(|| DenseNet::mlp(&[d, h, feature_dim], Activation::Relu, Activation::Identity, &mut rng));
        Self {
            d,
            feature_dim,
            f,
            g,
            update,
            decoder,
            feature_decoder,
            loss_curve: Vec::new(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            d: self.d,
            feature_dim: self.feature_dim,
            f: self.f.zeros_like(),
            g: self.g.zeros_like(),
            update: self.update.zeros_like(),
            decoder: self.decoder.zeros_like(),
            feature_decoder: self.feature_decoder.as_ref().map(DenseNet::zeros_like),
            loss_curve: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (d, k) = (self.d, self.feature_dim);
        let want_in = self.f.output_dim() + self.g.output_dim() + k;
        if self.f.input_dim() != d || self.g.input_dim() != k {
            return Err(Error::invalid("CGNN set encoders do not match (d, feature_dim)"));
        }
        if self.update.input_dim() != want_in || self.update.output_dim() != 2 * d {
            return Err(Error::invalid(format!(
                "CGNN update net must map {want_in} → {}, found {} → {}",
                2 * d,
                self.update.input_dim(),
                self.update.output_dim()
            )));
        }
        if self.decoder.input_dim() != 2 * d || self.decoder.output_dim() != 1 {
            return Err(Error::invalid("CGNN decoder must map 2d → 1"));
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.set_meta("model", "cgnn");
        ck.set_meta("d", self.d);
        ck.set_meta("feature_dim", self.feature_dim);
        ck.put_set_encoder("f", &self.f);
        ck.put_set_encoder("g", &self.g);
        ck.put_dense("update", &self.update);
        ck.put_dense("decoder", &self.decoder);
        if let Some(fd) = &self.feature_decoder {
            ck.put_dense("feature_decoder", fd);
        }
        ck.push_tensor(
            "loss_curve",
            DMatrix::from_row_slice(1, self.loss_curve.len(), &self.loss_curve),
        );
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.meta("model")? != "cgnn" {
            return Err(Error::invalid("checkpoint does not hold CGNN parameters"));
        }
        let feature_decoder = match ck.meta("feature_decoder.layers") {
            Ok(_) => Some(ck.get_dense("feature_decoder")?),
            Err(_) => None,
        };
        let p = Self {
            d: ck.meta_parse("d")?,
            feature_dim: ck.meta_parse("feature_dim")?,
            f: ck.get_set_encoder("f")?,
            g: ck.get_set_encoder("g")?,
            update: ck.get_dense("update")?,
            decoder: ck.get_dense("decoder")?,
            feature_decoder,
            loss_curve: ck.tensor("loss_curve")?.iter().copied().collect(),
        };
        p.validate()?;
        Ok(p)
    }
}

impl ParamSet for CgnnParams {
    fn param_slices(&self) -> Vec<&[f64]> {
        let mut v = self.f.param_slices();
        v.extend(self.g.param_slices());
        v.extend(self.update.param_slices());
        v.extend(self.decoder.param_slices());
        if let Some(fd) = &self.feature_decoder {
            v.extend(fd.param_slices());
        }
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.f.param_slices_mut();
        v.extend(self.g.param_slices_mut());
        v.extend(self.update.param_slices_mut());
        v.extend(self.decoder.param_slices_mut());
        if let Some(fd) = &mut self.feature_decoder {
            v.extend(fd.param_slices_mut());
        }
        v
    }
}

/// `n × d` matrix of i.i.d. standard normals.
pub fn cgnn_init(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = seeds::rng(seed);
    DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn column(x: &DMatrix<f64>, j: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(x.nrows(), 1, x.column(j).as_slice())
}

struct Step {
    u: usize,
    nbrs: Vec<usize>,
    outer: ForwardCache,
    update: ForwardCache,
    eps: DVector<f64>,
    sigma: DVector<f64>,
    /// Log-variance coordinates strictly inside the clamp range.
    active: Vec<bool>,
    inner: ForwardCache,
}

/// Forward state of an unrolled chain; `z` is `d × n` with one column per node.
struct GibbsRun {
    z: DMatrix<f64>,
    visible_cache: SetBatchCache,
    init_inner: Vec<ForwardCache>,
    steps: Vec<Step>,
}

fn run_gibbs(
    g: &AttributedGraph,
    params: &CgnnParams,
    z0: DMatrix<f64>,
    sweep_seeds: &[u64],
    mode: SweepMode,
    record: bool,
) -> Result<GibbsRun> {
    let (n, d) = (g.n(), params.d);
    if g.feature_dim() != params.feature_dim {
        return Err(Error::invalid(format!(
            "graph has {} feature columns, CGNN expects {}",
            g.feature_dim(),
            params.feature_dim
        )));
    }
    assert_eq!(z0.shape(), (d, n), "latent shape");
    let x = g.features().transpose();

    let mut nbr_feats = Vec::new();
    let mut sizes = Vec::with_capacity(n);
    for u in 0..n {
        let nb = g.out_neighbors(u);
        sizes.push(nb.len());
        nbr_feats.extend(nb.iter().map(|&v| x.column(v)));
    }
    let nbr_feats = if nbr_feats.is_empty() {
        DMatrix::zeros(params.feature_dim, 0)
    } else {
        DMatrix::from_columns(&nbr_feats)
    };
    let visible_cache = params.g.forward_sets(&nbr_feats, &sizes);
    let visible = visible_cache.output().clone();

    let mut z = z0;
    let hf = params.f.inner.output_dim();
    let mut h = DMatrix::zeros(hf, n);
    let mut init_inner = Vec::with_capacity(if record { n } else { 0 });
    for v in 0..n {
        let c = params.f.inner.forward_cached(&column(&z, v));
        h.set_column(v, &c.output().column(0));
        if record {
            init_inner.push(c);
        }
    }

    let mut steps = Vec::new();
    for &seed in sweep_seeds {
        let mut rng = seeds::rng(seed);
        for u in 0..n {
            let mut nbrs = g.out_neighbors(u).to_vec();
            nbrs.sort_by(|&a, &b| lexicographic(z.column(a).as_slice(), z.column(b).as_slice()));
            let mut pooled = DMatrix::zeros(hf, 1);
            for &v in &nbrs {
                let mut col = pooled.column_mut(0);
                col += h.column(v);
            }
            let outer = params.f.outer.forward_cached(&pooled);
            let input = DMatrix::from_iterator(
                params.update.input_dim(),
                1,
                outer
                    .output()
                    .iter()
                    .chain(visible.column(u).iter())
                    .chain(x.column(u).iter())
                    .copied(),
            );
            let update = params.update.forward_cached(&input);
            let out = update.output();
            let eps = match mode {
                SweepMode::Stochastic => DVector::from_fn(d, |_, _| rng.sample(StandardNormal)),
                SweepMode::ZeroVariance => DVector::zeros(d),
            };
            let mut sigma = DVector::zeros(d);
            let mut active = vec![false; d];
            if mode == SweepMode::Stochastic {
                for i in 0..d {
                    let raw = out[(d + i, 0)];
                    active[i] = raw > LOGVAR_MIN && raw < LOGVAR_MAX;
                    sigma[i] = (raw.clamp(LOGVAR_MIN, LOGVAR_MAX) / 2.0).exp();
                }
            }
            let z_new: DVector<f64> = DVector::from_fn(d, |i, _| out[(i, 0)] + sigma[i] * eps[i]);
            if z_new.iter().any(|v: &f64| !v.is_finite()) {
                return Err(Error::NonFinite(format!("CGNN latent of node {u}")));
            }
            z.set_column(u, &z_new);
            let inner = params.f.inner.forward_cached(&column(&z, u));
            h.set_column(u, &inner.output().column(0));
            if record {
                steps.push(Step {
                    u,
                    nbrs,
                    outer,
                    update,
                    eps,
                    sigma,
                    active,
                    inner,
                });
            }
        }
    }
    Ok(GibbsRun {
        z,
        visible_cache,
        init_inner,
        steps,
    })
}

impl GibbsRun {
    /// Reverse pass from `gz` (adjoint of the final latents, `d × n`).
    fn backward(&self, params: &CgnnParams, mut gz: DMatrix<f64>, grads: &mut CgnnParams) {
        let d = params.d;
        let n = gz.ncols();
        let hf = params.f.inner.output_dim();
        let hg = params.g.output_dim();
        let mut gh = DMatrix::zeros(hf, n);
        let mut g_vis = DMatrix::zeros(hg, n);
        for s in self.steps.iter().rev() {
            let u = s.u;
            let dz = params.f.inner.backward(&s.inner, &column(&gh, u), &mut grads.f.inner);
            let mut gu = gz.column(u) + dz.column(0);
            gh.column_mut(u).fill(0.0);
            gz.column_mut(u).fill(0.0);
            let mut d_out = DMatrix::zeros(2 * d, 1);
            for i in 0..d {
                d_out[(i, 0)] = gu[i];
                if s.active[i] {
                    d_out[(d + i, 0)] = gu[i] * s.eps[i] * s.sigma[i] / 2.0;
                }
            }
            gu.fill(0.0);
            let d_in = params.update.backward(&s.update, &d_out, &mut grads.update);
            let d_hidden = d_in.rows(0, hf).into_owned();
            {
                let mut col = g_vis.column_mut(u);
                col += d_in.rows(hf, hg).column(0);
            }
            let d_pool = params.f.outer.backward(&s.outer, &d_hidden, &mut grads.f.outer);
            for &v in &s.nbrs {
                let mut col = gh.column_mut(v);
                col += d_pool.column(0);
            }
        }
        for (v, c) in self.init_inner.iter().enumerate() {
            params.f.inner.backward(c, &column(&gh, v), &mut grads.f.inner);
        }
        params.g.backward_sets(&self.visible_cache, &g_vis, &mut grads.g);
    }
}

/// One ascending-order sweep on `g` itself (no relabeling). `z` is `n × d`.
pub fn cgnn_gibbs_sweep(
    g: &AttributedGraph,
    params: &CgnnParams,
    z: &DMatrix<f64>,
    seed: u64,
    mode: SweepMode,
) -> Result<DMatrix<f64>> {
    params.validate()?;
    if z.shape() != (g.n(), params.d) {
        return Err(Error::invalid(format!(
            "latent matrix is {:?}, expected ({}, {})",
            z.shape(),
            g.n(),
            params.d
        )));
    }
    let run = run_gibbs(g, params, z.transpose(), &[seed], mode, false)?;
    Ok(run.z.transpose())
}

/// A chain on the graph relabeled by a permutation drawn from `seed`.
struct Draw {
    perm: Permutation,
    graph: AttributedGraph,
    run: GibbsRun,
}

fn draw(g: &AttributedGraph, params: &CgnnParams, sweeps: usize, seed: u64, record: bool) -> Result<Draw> {
    let perm = Permutation::random(g.n(), &mut seeds::rng(seeds::derive(seed, Stream::Cgnn, 0)));
    let graph = apply_permutation(g, &perm)?;
    let z0 = cgnn_init(g.n(), params.d, seeds::derive(seed, Stream::Cgnn, 1));
    let sweep_seeds: Vec<u64> = (0..sweeps as u64)
        .map(|t| seeds::derive(seed, Stream::Cgnn, 2 + t))
        .collect();
    let run = run_gibbs(&graph, params, z0.transpose(), &sweep_seeds, SweepMode::Stochastic, record)?;
    Ok(Draw { perm, graph, run })
}

/// `cgnn_init` followed by `sweeps` sweeps on a randomly relabeled copy of `g`.
pub fn cgnn_sample(g: &AttributedGraph, params: &CgnnParams, sweeps: usize, seed: u64) -> Result<EmbeddingSample> {
    if sweeps == 0 {
        return Err(Error::invalid("CGNN sampling needs at least one sweep"));
    }
    params.validate()?;
    let dr = draw(g, params, sweeps, seed, false)?;
    let z = dr.perm.inverse().permute_rows(&dr.run.z.transpose());
    EmbeddingSample::new(
        z,
        Provenance {
            sampler: "cgnn".into(),
            mode: "stochastic".into(),
            seed,
            d: params.d,
            steps: sweeps,
            converged: None,
            input_permutation: dr.perm,
        },
    )
}

fn pair_encoding(z: &DMatrix<f64>, pairs: &[(usize, usize)]) -> DMatrix<f64> {
    let d = z.nrows();
    let mut e = DMatrix::zeros(2 * d, pairs.len());
    for (j, &(u, v)) in pairs.iter().enumerate() {
        for i in 0..d {
            let (a, b) = (z[(i, u)], z[(i, v)]);
            e[(i, j)] = a * b;
            e[(d + i, j)] = (a - b).abs();
        }
    }
    e
}

fn pair_encoding_backward(z: &DMatrix<f64>, pairs: &[(usize, usize)], de: &DMatrix<f64>, gz: &mut DMatrix<f64>) {
    let d = z.nrows();
    for (j, &(u, v)) in pairs.iter().enumerate() {
        for i in 0..d {
            let (a, b) = (z[(i, u)], z[(i, v)]);
            let s = (a - b).signum() * if a == b { 0.0 } else { 1.0 };
            gz[(i, u)] += de[(i, j)] * b + de[(d + i, j)] * s;
            gz[(i, v)] += de[(i, j)] * a - de[(d + i, j)] * s;
        }
    }
}

fn edge_logits(params: &CgnnParams, z: &DMatrix<f64>, pairs: &[(usize, usize)]) -> (DMatrix<f64>, ForwardCache) {
    let enc = pair_encoding(z, pairs);
    let cache = params.decoder.forward_cached(&enc);
    (enc, cache)
}

/// Observed undirected edges plus `neg_ratio` uniformly drawn non-adjacent pairs
/// per edge, with 0/1 targets.
fn training_pairs(
    sym: &AttributedGraph,
    positives: &[(usize, usize)],
    neg_ratio: usize,
    seed: u64,
) -> Result<(Vec<(usize, usize)>, Vec<f64>)> {
    let n = sym.n();
    let total = n * (n - 1) / 2;
    let want = if total > positives.len() { neg_ratio * positives.len() } else { 0 };
    let mut pairs = positives.to_vec();
    let mut rng = seeds::rng(seed);
    let mut tries = 0usize;
    let mut found = 0;
    while found < want {
        tries += 1;
        if tries > 1000 * want.max(1) {
            return Err(Error::invalid("could not sample enough non-edges"));
        }
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v && !sym.has_edge(u, v) {
            pairs.push((u.min(v), u.max(v)));
            found += 1;
        }
    }
    let mut targets = vec![1.0; positives.len()];
    targets.resize(pairs.len(), 0.0);
    Ok((pairs, targets))
}

/// Loss and gradient of one Monte Carlo draw. Pairs are in `g`'s node ids.
fn loss_and_grad(
    g: &AttributedGraph,
    params: &CgnnParams,
    pairs: &[(usize, usize)],
    targets: &[f64],
    sweeps: usize,
    seed: u64,
    want_grad: bool,
) -> Result<(f64, Option<CgnnParams>)> {
    let dr = draw(g, params, sweeps, seed, want_grad)?;
    let z = &dr.run.z;
    let pp: Vec<(usize, usize)> = pairs
        .iter()
        .map(|&(u, v)| (dr.perm.apply(u), dr.perm.apply(v)))
        .collect();
    let (_, cache) = edge_logits(params, z, &pp);
    let logits: Vec<f64> = cache.output().iter().copied().collect();
    let (mut loss, dlogit) = bce_with_logits(&logits, targets);

    let mut feat = None;
    if let Some(fd) = &params.feature_decoder {
        let x = dr.graph.features().transpose();
        let c = fd.forward_cached(z);
        let diff = c.output() - &x;
        let scale = 1.0 / diff.len() as f64;
        loss += diff.norm_squared() * scale;
        feat = Some((c, diff * (2.0 * scale)));
    }
    if !want_grad {
        return Ok((loss, None));
    }
    let mut grads = params.zeros_like();
    let up = DMatrix::from_row_slice(1, dlogit.len(), &dlogit);
    let de = params.decoder.backward(&cache, &up, &mut grads.decoder);
    let mut gz = DMatrix::zeros(z.nrows(), z.ncols());
    pair_encoding_backward(z, &pp, &de, &mut gz);
    if let (Some(fd), Some((c, dx))) = (&params.feature_decoder, feat) {
        gz += fd.backward(&c, &dx, grads.feature_decoder.as_mut().unwrap());
    }
    dr.run.backward(params, gz, &mut grads);
    Ok((loss, Some(grads)))
}

/// Training loss of the single draw fixed by `seed`, over every edge of the
/// symmetrized graph and `neg_ratio` sampled non-edges per edge. With the draw
/// fixed the loss is a smooth function of the parameters, so the returned
/// gradient can be checked by finite differences against [`cgnn_draw_loss`].
pub fn cgnn_draw_loss_and_grad(
    g: &AttributedGraph,
    params: &CgnnParams,
    sweeps: usize,
    neg_ratio: usize,
    seed: u64,
) -> Result<(f64, CgnnParams)> {
    let sym = g.symmetrized();
    let (pairs, targets) = training_pairs(&sym, &sym.undirected_edges(), neg_ratio, seed)?;
    let (loss, grads) = loss_and_grad(g, params, &pairs, &targets, sweeps, seed, true)?;
    Ok((loss, grads.expect("gradient requested")))
}

pub fn cgnn_draw_loss(g: &AttributedGraph, params: &CgnnParams, sweeps: usize, neg_ratio: usize, seed: u64) -> Result<f64> {
    let sym = g.symmetrized();
    let (pairs, targets) = training_pairs(&sym, &sym.undirected_edges(), neg_ratio, seed)?;
    Ok(loss_and_grad(g, params, &pairs, &targets, sweeps, seed, false)?.0)
}

fn check_hyper(h: &CgnnHyper) -> Result<()> {
    if h.d == 0 || h.hidden == 0 || h.sweeps == 0 {
        return Err(Error::invalid("CGNN needs d, hidden and sweeps all ≥ 1"));
    }
    if !(h.lr > 0.0) {
        return Err(Error::invalid(format!("learning rate must be positive, got {}", h.lr)));
    }
    Ok(())
}

/// Adam on the edge-reconstruction loss, one fresh chain per epoch. Zero epochs
/// return the initialization.
pub fn cgnn_train(g: &AttributedGraph, hyper: &CgnnHyper) -> Result<CgnnParams> {
    check_hyper(hyper)?;
    let mut params = CgnnParams::init(g.feature_dim(), hyper, seeds::derive(hyper.seed, Stream::ModelInit, 0));
    if hyper.epochs == 0 {
        return Ok(params);
    }
    let sym = g.symmetrized();
    let positives = sym.undirected_edges();
    if positives.is_empty() {
        return Err(Error::invalid("CGNN training needs at least one edge"));
    }
    let mut state = AdamState::new(&params);
    let cfg = AdamConfig::with_lr(hyper.lr);
    for epoch in 0..hyper.epochs {
        let seed = seeds::derive(hyper.seed, Stream::Cgnn, epoch as u64);
        let (pairs, targets) = training_pairs(&sym, &positives, hyper.neg_ratio, seeds::derive(seed, Stream::Minibatch, 0))?;
        let (loss, grads) = loss_and_grad(g, &params, &pairs, &targets, hyper.sweeps, seed, true)
            .map_err(|e| Error::Divergence { epoch, detail: e.to_string() })?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, detail: format!("loss is {loss}") });
        }
        adam_step(&mut params, grads.as_ref().unwrap(), &mut state, &cfg)
            .map_err(|e| Error::Divergence { epoch, detail: e.to_string() })?;
        params.loss_curve.push(loss);
    }
    Ok(params)
}

/// Mean reconstruction loss over `samples` independent draws (fresh negatives each).
pub fn cgnn_eval_loss(
    g: &AttributedGraph,
    params: &CgnnParams,
    sweeps: usize,
    neg_ratio: usize,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let sym = g.symmetrized();
    let positives = sym.undirected_edges();
    let mut total = 0.0;
    for i in 0..samples as u64 {
        let s = seeds::derive(seed, Stream::TestSamples, i);
        let (pairs, targets) = training_pairs(&sym, &positives, neg_ratio, seeds::derive(s, Stream::Minibatch, 0))?;
        total += loss_and_grad(g, params, &pairs, &targets, sweeps, s, false)?.0;
    }
    Ok(total / samples as f64)
}

/// Edge probabilities `σ(decoder)` averaged over `samples` draws on `g`.
pub fn cgnn_edge_scores(
    g: &AttributedGraph,
    params: &CgnnParams,
    sweeps: usize,
    pairs: &[(usize, usize)],
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut scores = vec![0.0; pairs.len()];
    for i in 0..samples as u64 {
        let s = seeds::derive(seed, Stream::TestSamples, i);
        let dr = draw(g, params, sweeps, s, false)?;
        let pp: Vec<(usize, usize)> = pairs
            .iter()
            .map(|&(u, v)| (dr.perm.apply(u), dr.perm.apply(v)))
            .collect();
        let (_, cache) = edge_logits(params, &dr.run.z, &pp);
        for (acc, l) in scores.iter_mut().zip(cache.output().iter()) {
            *acc += 1.0 / (1.0 + (-l).exp());
        }
    }
    for s in &mut scores {
        *s /= samples as f64;
    }
    Ok(scores)
}

/// Draws CGNN samples with fixed trained parameters.
#[derive(Debug, Clone)]
pub struct CgnnSampler {
    pub params: Arc<CgnnParams>,
    pub sweeps: usize,
}

impl EmbeddingSampler for CgnnSampler {
    fn id(&self) -> String {
        format!("cgnn(d={}, sweeps={})", self.params.d, self.sweeps)
    }

    fn dim(&self) -> usize {
        self.params.d
    }

    fn sample(&self, g: &AttributedGraph, seed: u64) -> Result<EmbeddingSample> {
        cgnn_sample(g, &self.params, self.sweeps, seed)
    }
}
