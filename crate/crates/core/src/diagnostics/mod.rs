//! Convergence curves of Monte Carlo structural estimates and statistical
//! equivariance checks for samplers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::graph::{node_orbits, AttributedGraph, ENUMERATION_LIMIT};
use crate::samplers::{draw_samples, EmbeddingSample, EmbeddingSampler};
use crate::seeds::{self, Stream};

/// Sample counts at which curves are reported.
pub const CHECKPOINTS: [usize; 9] = [1, 2, 5, 10, 20, 50, 100, 200, 400];

/// Family-wise significance level of [`equivariance_report`].
pub const EQUIVARIANCE_ALPHA: f64 = 0.01;

pub fn checkpoints(m_max: usize) -> Vec<usize> {
    CHECKPOINTS.iter().copied().filter(|&m| m <= m_max).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub statistic: String,
    pub m: usize,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceCurve {
    pub rows: Vec<CurveRow>,
    /// Free-form `key=value` lines describing how the samples were drawn.
    pub provenance: Vec<String>,
}

impl ConvergenceCurve {
    pub fn statistic(&self, name: &str) -> impl Iterator<Item = &CurveRow> {
        let name = name.to_string();
        self.rows.iter().filter(move |r| r.statistic == name)
    }

    pub fn at(&self, name: &str, m: usize) -> Option<&CurveRow> {
        self.rows.iter().find(|r| r.statistic == name && r.m == m)
    }

    pub fn extend(&mut self, other: ConvergenceCurve) {
        self.rows.extend(other.rows);
        for p in other.provenance {
            if !self.provenance.contains(&p) {
                self.provenance.push(p);
            }
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for p in &self.provenance {
            let _ = writeln!(out, "# provenance: {p}");
        }
        out.push_str("statistic,m,value,stderr\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{:?},{:?}", r.statistic, r.m, r.value, r.stderr);
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let provenance = text
            .lines()
            .filter_map(|l| l.strip_prefix("# provenance: "))
            .map(str::to_string)
            .collect();
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let err = |msg: &str| Error::Parse {
                path: path.into(),
                line,
                msg: msg.into(),
            };
            if rec.len() != 4 {
                return Err(err("expected statistic,m,value,stderr"));
            }
            rows.push(CurveRow {
                statistic: rec[0].to_string(),
                m: rec[1].parse().map_err(|_| err("bad m"))?,
                value: rec[2].parse().map_err(|_| err("bad value"))?,
                stderr: rec[3].parse().map_err(|_| err("bad stderr"))?,
            });
        }
        Ok(Self { rows, provenance })
    }
}

/// Running mean and variance (Welford) of a vector-valued statistic.
#[derive(Debug, Clone)]
struct Running {
    n: usize,
    mean: DVector<f64>,
    m2: DVector<f64>,
}

impl Running {
    fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: DVector::zeros(dim),
            m2: DVector::zeros(dim),
        }
    }

    fn push(&mut self, x: &DVector<f64>) {
        self.n += 1;
        let delta = x - &self.mean;
        self.mean += &delta / self.n as f64;
        let delta2 = x - &self.mean;
        self.m2 += delta.component_mul(&delta2);
    }

    /// Norm of the per-coordinate standard errors; zero with a single sample.
    fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let var = &self.m2 / (self.n as f64 - 1.0);
        (var.sum() / self.n as f64).sqrt()
    }
}

fn diagnostic_samples(
    g: &AttributedGraph,
    sampler: &dyn EmbeddingSampler,
    m: usize,
    seed: u64,
) -> Result<Vec<EmbeddingSample>> {
    let seeds: Vec<u64> = (0..m as u64).map(|i| seeds::derive(seed, Stream::Diagnostics, i)).collect();
    draw_samples(sampler, g, &seeds)
}

fn check_node(g: &AttributedGraph, v: usize) -> Result<()> {
    if v >= g.n() {
        return Err(Error::invalid(format!("node {v} out of range for n={}", g.n())));
    }
    Ok(())
}

fn provenance(sampler: &dyn EmbeddingSampler, g: &AttributedGraph, m_max: usize, seed: u64) -> Vec<String> {
    vec![format!("sampler={} n={} m_max={m_max} seed={seed} stream=diagnostics", sampler.id(), g.n())]
}

/// `‖μ̂(u) − μ̂(v)‖` over the first `m` samples of one seed stream, at every
/// checkpoint up to `m_max`. The stderr is the norm of the per-coordinate
/// standard errors of `Z_u − Z_v`.
pub fn node_convergence(
    g: &AttributedGraph,
    sampler: &dyn EmbeddingSampler,
    (u, v): (usize, usize),
    m_max: usize,
    seed: u64,
) -> Result<ConvergenceCurve> {
    if u == v {
        return Err(Error::invalid(format!("node_convergence needs distinct nodes, got {u} twice")));
    }
    check_node(g, u)?;
    check_node(g, v)?;
    let samples = diagnostic_samples(g, sampler, m_max, seed)?;
    let marks = checkpoints(m_max);
    let name = format!("node-gap:{u}-{v}");
    let mut acc = Running::new(sampler.dim());
    let mut rows = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        acc.push(&(s.z.row(u) - s.z.row(v)).transpose());
        if marks.contains(&(i + 1)) {
            rows.push(CurveRow {
                statistic: name.clone(),
                m: i + 1,
                value: acc.mean.norm(),
                stderr: acc.stderr(),
            });
        }
    }
    Ok(ConvergenceCurve {
        rows,
        provenance: provenance(sampler, g, m_max, seed),
    })
}

/// Running `μ̂(u, v) = mean ‖Z_u − Z_v‖` with its standard error, per pair.
pub fn pair_convergence(
    g: &AttributedGraph,
    sampler: &dyn EmbeddingSampler,
    pairs: &[(usize, usize)],
    m_max: usize,
    seed: u64,
) -> Result<ConvergenceCurve> {
    for &(u, v) in pairs {
        if u == v {
            return Err(Error::invalid(format!("pair ({u}, {v}) repeats a node")));
        }
        check_node(g, u)?;
        check_node(g, v)?;
    }
    let samples = diagnostic_samples(g, sampler, m_max, seed)?;
    let marks = checkpoints(m_max);
    let mut rows = Vec::new();
    for &(u, v) in pairs {
        let name = format!("pair:{u}-{v}");
        let mut acc = Running::new(1);
        for (i, s) in samples.iter().enumerate() {
            acc.push(&DVector::from_element(1, (s.z.row(u) - s.z.row(v)).norm()));
            if marks.contains(&(i + 1)) {
                rows.push(CurveRow {
                    statistic: name.clone(),
                    m: i + 1,
                    value: acc.mean[0],
                    stderr: acc.stderr(),
                });
            }
        }
    }
    Ok(ConvergenceCurve {
        rows,
        provenance: provenance(sampler, g, m_max, seed),
    })
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a − F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at level `alpha`.
pub fn ks_critical(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n * m) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivarianceRow {
    pub u: usize,
    pub v: usize,
    pub ks: f64,
    pub critical: f64,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivarianceReport {
    pub sampler: String,
    pub n_samples: usize,
    pub rows: Vec<EquivarianceRow>,
}

impl EquivarianceReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.violation).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# provenance: sampler={} n_samples={} alpha={EQUIVARIANCE_ALPHA}\nu,v,ks,critical,violation\n",
            self.sampler, self.n_samples
        );
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{:?},{:?},{}", r.u, r.v, r.ks, r.critical, r.violation);
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// For every pair of nodes sharing an automorphism orbit, compares the
/// distributions of `‖Z_u‖` and `‖Z_v‖` with a two-sample KS test. `u` and `v`
/// read disjoint halves of `2 · n_samples` draws so the two samples are
/// independent. Violations are flagged at [`EQUIVARIANCE_ALPHA`] with a
/// Bonferroni correction over the pairs.
pub fn equivariance_report(
    g: &AttributedGraph,
    sampler: &dyn EmbeddingSampler,
    n_samples: usize,
    seed: u64,
) -> Result<EquivarianceReport> {
    if g.n() > ENUMERATION_LIMIT {
        return Err(Error::SizeLimit {
            n: g.n(),
            limit: ENUMERATION_LIMIT,
        });
    }
    if n_samples < 2 {
        return Err(Error::invalid("equivariance_report needs at least 2 samples"));
    }
    let orbits = node_orbits(g)?;
    let pairs = orbits.node_pairs();
    let mut report = EquivarianceReport {
        sampler: sampler.id(),
        n_samples,
        rows: Vec::with_capacity(pairs.len()),
    };
    if pairs.is_empty() {
        return Ok(report);
    }
    let samples = diagnostic_samples(g, sampler, 2 * n_samples, seed)?;
    let (first, second) = samples.split_at(n_samples);
    let norms = |half: &[EmbeddingSample], v: usize| -> Vec<f64> { half.iter().map(|s| s.z.row(v).norm()).collect() };
    let critical = ks_critical(EQUIVARIANCE_ALPHA / pairs.len() as f64, n_samples, n_samples);
    for (u, v) in pairs {
        let ks = ks_statistic(&norms(first, u), &norms(second, v));
        report.rows.push(EquivarianceRow {
            u,
            v,
            ks,
            critical,
            violation: ks > critical,
        });
    }
    Ok(report)
}
