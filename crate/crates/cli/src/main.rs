//! `mcstruct`: every pipeline stage as a subcommand, plus `run` for whole
//! experiments. Exit codes: 0 success, 1 pipeline error, 2 usage error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use mcstruct::experiment::{
    build_sampler, build_task, load_graph, run_diagnostics, run_experiment, BuiltSampler, RunConfig,
};
use mcstruct::graph::{joint_orbits, wl_refinement, OrbitPartition};
use mcstruct::neural::Checkpoint;
use mcstruct::samplers::{cgnn_eval_loss, CgnnParams, CgnnSampler};
use mcstruct::seeds::{self, Stream};
use mcstruct::structural::{draw_eval_samples, evaluate, train_readout, ReadoutModel};
use mcstruct::tasks::{Split, TaskSet};
use mcstruct::{Error, StageContext};

#[derive(Parser, Debug)]
#[command(name = "mcstruct", version, about = "Structural subset representations from Monte Carlo embedding samples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Run config (TOML: `key = value` lines under `[section]` headers).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the config's base seed.
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Uses a built-in graph instead of the config's graph source.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Prints the automorphism orbits of the graph, one class per line.
    Orbits {
        #[command(flatten)]
        common: Common,
        /// Orbits of k-subsets instead of nodes.
        #[arg(long, default_value_t = 1)]
        arity: usize,
        /// Prints the 1-WL color classes (a coarsening of the orbits) instead.
        #[arg(long)]
        wl: bool,
    },
    /// Draws embedding samples and writes each as CSV with a provenance sidecar.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// Trained CGNN parameters; without them a CGNN is trained first.
        #[arg(long, value_name = "PATH")]
        cgnn: Option<PathBuf>,
    },
    /// Trains CGNN parameters on the graph.
    TrainCgnn {
        #[command(flatten)]
        common: Common,
    },
    /// Builds the configured task and writes it as CSV.
    MakeTask {
        #[command(flatten)]
        common: Common,
    },
    /// Trains a readout on a task written by `make-task`.
    TrainReadout {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        task: PathBuf,
        #[arg(long, value_name = "PATH")]
        cgnn: Option<PathBuf>,
    },
    /// Scores a trained readout at each `m_test`.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        task: PathBuf,
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        #[arg(long, value_name = "PATH")]
        cgnn: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', value_name = "M,...")]
        m_test: Option<Vec<usize>>,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Convergence curves and, optionally, the equivariance report.
    Diagnose {
        #[command(flatten)]
        common: Common,
        /// Samples per node for the equivariance report (graphs up to 10 nodes).
        #[arg(long, value_name = "N")]
        equivariance: Option<usize>,
    },
    /// The full experiment: diagnostics, then every run.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', value_name = "M,...")]
        m_test: Option<Vec<usize>>,
        #[arg(long, value_name = "INT")]
        runs: Option<usize>,
    },
}

/// Failures split by exit code.
enum Failure {
    Usage(String),
    Pipeline(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Pipeline(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn load_config(common: &Common) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) if !p.exists() => return Err(Failure::Usage(format!("config file {} does not exist", p.display()))),
        Some(p) => RunConfig::load(p).map_err(|e| Failure::Usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    if let Some(p) = &common.preset {
        cfg.graph.preset = p.clone();
        cfg.graph.edges = None;
        cfg.graph.content = None;
        cfg.graph.cites = None;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> CliResult<&Path> {
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    Ok(&cfg.out)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Failure::Pipeline(Error::io(path, e)))
}

/// The configured sampler; a CGNN comes from `cgnn` when given, else is trained.
fn sampler_for(
    cfg: &RunConfig,
    g: &mcstruct::graph::AttributedGraph,
    cgnn: Option<&Path>,
) -> mcstruct::Result<BuiltSampler> {
    match (cfg.sampler.kind.as_str(), cgnn) {
        ("cgnn", Some(path)) => {
            let params = Arc::new(CgnnParams::from_checkpoint(&Checkpoint::read(path)?)?);
            Ok(BuiltSampler {
                sampler: Arc::new(CgnnSampler {
                    params: params.clone(),
                    sweeps: cfg.sampler.sweeps,
                }),
                cgnn: Some(params),
            })
        }
        _ => build_sampler(cfg, g, cfg.seed),
    }
}

fn format_partition(p: &OrbitPartition) -> String {
    let mut s = String::new();
    for class in p.classes() {
        let members: Vec<String> = class
            .iter()
            .map(|sub| sub.nodes().iter().map(|v| v.to_string()).collect::<Vec<_>>().join("-"))
            .collect();
        let _ = writeln!(s, "{}", members.join(" "));
    }
    s
}

fn orbits(common: &Common, arity: usize, wl: bool) -> CliResult<()> {
    let cfg = load_config(common)?;
    let g = load_graph(&cfg.graph).stage("load-graph")?;
    let view = g.view(cfg.graph.undirected);
    let p = if wl {
        if arity != 1 {
            return Err(Failure::Usage("--wl only applies to node orbits".into()));
        }
        wl_refinement(&view)
    } else {
        joint_orbits(&view, arity).stage("orbits")?
    };
    let text = format_partition(&p);
    print!("{text}");
    if common.out.is_some() {
        write_text(&out_dir(&cfg)?.join("orbits.txt"), &text)?;
    }
    Ok(())
}

fn sample(common: &Common, m: usize, cgnn: Option<&Path>) -> CliResult<()> {
    if m == 0 {
        return Err(Failure::Usage("--m must be at least 1".into()));
    }
    let cfg = load_config(common)?;
    let g = load_graph(&cfg.graph).stage("load-graph")?;
    let view = g.view(cfg.graph.undirected);
    let built = sampler_for(&cfg, &view, cgnn).stage("train-cgnn")?;
    let out = out_dir(&cfg)?;
    for i in 0..m {
        let s = built
            .sampler
            .sample(&view, seeds::derive(cfg.seed, Stream::TestSamples, i as u64))
            .stage("sample")?;
        let path = out.join(format!("sample-{i:03}.csv"));
        s.write(&path).stage("write")?;
        println!("{}", path.display());
    }
    Ok(())
}

fn train_cgnn(common: &Common) -> CliResult<()> {
    let mut cfg = load_config(common)?;
    cfg.sampler.kind = "cgnn".into();
    let g = load_graph(&cfg.graph).stage("load-graph")?;
    let view = g.view(cfg.graph.undirected);
    let built = build_sampler(&cfg, &view, cfg.seed).stage("train-cgnn")?;
    let params = built.cgnn.expect("cgnn sampler carries its parameters");
    let path = out_dir(&cfg)?.join("cgnn.ckpt");
    params.to_checkpoint().write(&path).stage("write")?;
    let loss = cgnn_eval_loss(&view, &params, cfg.sampler.sweeps, cfg.cgnn.neg_ratio, 8, cfg.seed).stage("train-cgnn")?;
    println!("wrote {} (held-in loss {loss:.4})", path.display());
    Ok(())
}

fn make_task(common: &Common) -> CliResult<()> {
    let cfg = load_config(common)?;
    let g = load_graph(&cfg.graph).stage("load-graph")?;
    let view = g.view(cfg.graph.undirected);
    let task = build_task(&cfg.task, &g, &view, cfg.seed)
        .stage("make-task")?
        .ok_or_else(|| Failure::Usage("task.kind is `none`; nothing to build".into()))?;
    let path = out_dir(&cfg)?.join("task.csv");
    task.write(&path).stage("write")?;
    let counts: Vec<String> = Split::ALL
        .iter()
        .map(|&s| format!("{}={}", s.name(), task.split(s).count()))
        .collect();
    println!("wrote {} ({} {})", path.display(), task.scheme, counts.join(" "));
    Ok(())
}

fn train_readout_cmd(common: &Common, task_path: &Path, cgnn: Option<&Path>) -> CliResult<()> {
    let cfg = load_config(common)?;
    let g = load_graph(&cfg.graph).stage("load-graph")?;
    let view = g.view(cfg.graph.undirected);
    let task = TaskSet::read(task_path).stage("load-task")?;
    let sampler_graph = task.sampler_graph(&view);
    let built = sampler_for(&cfg, &sampler_graph, cgnn).stage("train-cgnn")?;
    let model = train_readout(&task, built.sampler.as_ref(), &sampler_graph, &cfg.readout.hyper(cfg.seed))
        .stage("train-readout")?;
    let out = out_dir(&cfg)?;
    let path = out.join("readout.ckpt");
    model.to_checkpoint().write(&path).stage("write")?;
    if let (Some(p), None) = (&built.cgnn, cgnn) {
        p.to_checkpoint().write(&out.join("cgnn.ckpt")).stage("write")?;
    }
    let last = model.loss_curve.last().copied().unwrap_or(f64::NAN);
    println!("wrote {} (final training loss {last:.4})", path.display());
    Ok(())
}

fn eval_cmd(
    common: &Common,
    task_path: &Path,
    model_path: &Path,
    cgnn: Option<&Path>,
    m_test: Option<Vec<usize>>,
    split: &str,
) -> CliResult<()> {
    let mut cfg = load_config(common)?;
    if let Some(m) = m_test {
        cfg.eval.m_test = m;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let split = Split::from_name(split).map_err(|e| Failure::Usage(e.to_string()))?;
    if cfg.sampler.kind == "cgnn" && cgnn.is_none() {
        return Err(Failure::Usage("evaluating a CGNN readout needs --cgnn with the parameters it was trained on".into()));
    }
    let g = load_graph(&cfg.graph).stage("load-graph")?;
    let view = g.view(cfg.graph.undirected);
    let task = TaskSet::read(task_path).stage("load-task")?;
    let model = ReadoutModel::from_checkpoint(&Checkpoint::read(model_path).stage("load-model")?).stage("load-model")?;
    let sampler_graph = task.sampler_graph(&view);
    let built = sampler_for(&cfg, &sampler_graph, cgnn).stage("load-sampler")?;
    let m_max = *cfg.eval.m_test.iter().max().expect("validated non-empty");
    let samples = draw_eval_samples(built.sampler.as_ref(), &sampler_graph, m_max, cfg.seed, split).stage("eval")?;
    let mut csv = String::from("m_test,split,micro_f1\n");
    for &m in &cfg.eval.m_test {
        let f1 = evaluate(&model, &samples[..m], &task, split).stage("eval")?;
        let _ = writeln!(csv, "{m},{},{f1}", split.name());
    }
    print!("{csv}");
    write_text(&out_dir(&cfg)?.join("eval.csv"), &csv)
}

fn diagnose(common: &Common, equivariance: Option<usize>) -> CliResult<()> {
    let mut cfg = load_config(common)?;
    if let Some(n) = equivariance {
        cfg.diagnostics.equivariance_samples = n;
    }
    let g = load_graph(&cfg.graph).stage("load-graph")?;
    let view = g.view(cfg.graph.undirected);
    let (curve, report) = run_diagnostics(&cfg, &view).stage("diagnose")?;
    let out = out_dir(&cfg)?;
    curve.write(&out.join("curves.csv")).stage("write")?;
    let mut names: Vec<&str> = curve.rows.iter().map(|r| r.statistic.as_str()).collect();
    names.dedup();
    for name in names {
        if let Some(last) = curve.statistic(name).last() {
            println!("{name}: m={} value={:.6} stderr={:.6}", last.m, last.value, last.stderr);
        }
    }
    if let Some(r) = report {
        r.write(&out.join("equivariance.csv")).stage("write")?;
        println!("equivariance: {} violations over {} orbit pairs", r.violations(), r.rows.len());
    }
    Ok(())
}

fn run(common: &Common, m_test: Option<Vec<usize>>, runs: Option<usize>) -> CliResult<()> {
    let mut cfg = load_config(common)?;
    if let Some(m) = m_test {
        cfg.eval.m_test = m;
    }
    if let Some(r) = runs {
        cfg.runs = r;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let result = run_experiment(&cfg)?;
    if let Some(c) = &result.curves {
        let mut names: Vec<&str> = c.rows.iter().map(|r| r.statistic.as_str()).collect();
        names.dedup();
        for name in names {
            if let Some(last) = c.statistic(name).last() {
                println!("{name}: m={} value={:.6} stderr={:.6}", last.m, last.value, last.stderr);
            }
        }
    }
    for s in &result.summary {
        println!("m_test={} {}: micro-F1 {:.3} ({:.3}) over {} runs", s.m_test, s.split.name(), s.mean, s.std, s.runs);
    }
    println!("artifacts in {}", cfg.out.display());
    Ok(())
}

fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("MCSTRUCT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("MCSTRUCT_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(format!("cannot size the worker pool: {e}")))
}

fn dispatch(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Orbits { common, arity, wl } => orbits(&common, arity, wl),
        Command::Sample { common, m, cgnn } => sample(&common, m, cgnn.as_deref()),
        Command::TrainCgnn { common } => train_cgnn(&common),
        Command::MakeTask { common } => make_task(&common),
        Command::TrainReadout { common, task, cgnn } => train_readout_cmd(&common, &task, cgnn.as_deref()),
        Command::Eval {
            common,
            task,
            model,
            cgnn,
            m_test,
            split,
        } => eval_cmd(&common, &task, &model, cgnn.as_deref(), m_test, &split),
        Command::Diagnose { common, equivariance } => diagnose(&common, equivariance),
        Command::Run { common, m_test, runs } => run(&common, m_test, runs),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `mcstruct --help` for usage");
            ExitCode::from(2)
        }
        Err(Failure::Pipeline(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
