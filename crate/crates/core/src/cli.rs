//! The `npmle` command line.
//!
//! Exit codes: 0 on success, 2 for input or usage errors, 3 for numerical
//! failures.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::boosting::{fit as fit_boost, FitConfig};
use crate::classify::{split_experiment, GaussianTask, SplitConfig};
use crate::data::{build_dataset, trapezoid_weights};
use crate::error::{Error, Result};
use crate::io::{self, RunManifest};
use crate::learners::{Bandwidth, LearnerSpec};
use crate::model;
use crate::sim::{kl_sweep, DistributionSpec, SweepConfig};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "npmle", version, about = "Boosted nonparametric density estimation")]
pub struct Cli {
    /// Write a JSON run manifest to this path.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    /// Worker threads for sweeps and split experiments.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Fit a density to a one-column CSV and save the model.
    Fit(FitArgs),
    /// Evaluate a saved model on a uniform grid over its support.
    DensityGrid(GridArgs),
    /// Draw samples from a ground-truth distribution.
    Simulate(SimulateArgs),
    /// KL divergence over mixture weights and iteration counts.
    KlSweep(SweepArgs),
    /// Two-class Bayes classifier evaluated over random splits.
    Classify(ClassifyArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerArg {
    Spline,
    Kernel,
    Cart,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LearnerArgs {
    #[arg(long, value_enum, default_value = "spline")]
    pub learner: LearnerArg,
    /// Spline degrees of freedom.
    #[arg(long, default_value_t = 3.0)]
    pub df: f64,
    /// Kernel ridge penalty.
    #[arg(long, default_value_t = 1e4)]
    pub lambda: f64,
    /// Kernel bandwidth, or "auto" for Silverman's rule.
    #[arg(long, default_value = "auto")]
    pub bandwidth: String,
    /// Minimum node size for a tree split.
    #[arg(long, default_value_t = 30)]
    pub minsplit: usize,
}

impl LearnerArgs {
    pub fn spec(&self) -> Result<LearnerSpec> {
        let spec = match self.learner {
            LearnerArg::Spline => LearnerSpec::SmoothSpline { df: self.df },
            LearnerArg::Kernel => {
                let bandwidth = if self.bandwidth == "auto" {
                    Bandwidth::Auto
                } else {
                    Bandwidth::Fixed(self.bandwidth.parse().map_err(|_| {
                        Error::InvalidInput(format!("bad bandwidth {:?}", self.bandwidth))
                    })?)
                };
                LearnerSpec::GaussianKernel {
                    ridge_lambda: self.lambda,
                    bandwidth,
                }
            }
            LearnerArg::Cart => LearnerSpec::Cart {
                minsplit: self.minsplit,
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// CSV with samples in the first column.
    #[arg(long)]
    pub input: PathBuf,
    /// Boosting iterations.
    #[arg(short = 'M', long = "iterations", default_value_t = 100)]
    pub iterations: usize,
    #[command(flatten)]
    pub learner: LearnerArgs,
    /// Model output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-iteration trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 1001)]
    pub points: usize,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistArg {
    Uniform,
    Exponential,
    LaplaceMixture,
    StudentT,
    Gmm,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub dist: DistArg,
    /// Weight of the +2.5 component for the Gaussian mixture.
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    #[arg(short = 'n', long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, env = "NPMLE_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")]
    pub betas: Vec<f64>,
    #[arg(short = 'M', long = "iterations", value_delimiter = ',', default_value = "1,10,100,1000")]
    pub iterations: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pub replicates: usize,
    #[arg(short = 'n', long, default_value_t = 500)]
    pub n: usize,
    #[command(flatten)]
    pub learner: LearnerArgs,
    #[arg(long, env = "NPMLE_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::sim::DEFAULT_KL_GRID)]
    pub grid: usize,
    /// Per-replicate results CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Mean and standard deviation per (beta, M).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ClassifyArgs {
    /// Headed CSV with feature and label columns.
    #[arg(long, conflicts_with = "synthetic")]
    pub input: Option<PathBuf>,
    /// Use a synthetic two-Gaussian task with this many rows.
    #[arg(long)]
    pub synthetic: Option<usize>,
    #[arg(long, default_value = "age")]
    pub feature: String,
    #[arg(long, default_value = "chd")]
    pub label: String,
    #[arg(long, default_value_t = 100)]
    pub splits: usize,
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    #[arg(short = 'M', long = "iterations", default_value_t = 2000)]
    pub iterations: usize,
    #[command(flatten)]
    pub learner: LearnerArgs,
    #[arg(long, env = "NPMLE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Per-split results CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ReplayArgs {
    #[arg(long = "from")]
    pub from: PathBuf,
    /// Replay even if recorded inputs have changed.
    #[arg(long)]
    pub force: bool,
}

struct RunLog {
    seeds: Vec<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

fn create(path: &Path) -> Result<std::io::BufWriter<File>> {
    Ok(std::io::BufWriter::new(File::create(path)?))
}

fn cmd_fit(a: &FitArgs, log: &mut RunLog, out: &mut (dyn Write + Send)) -> Result<()> {
    log.inputs.push(a.input.clone());
    let raw = io::read_samples_file(&a.input)?;
    let ds = build_dataset(&raw)?;
    let qw = trapezoid_weights(&ds)?;
    let cfg = FitConfig {
        learner: a.learner.spec()?,
        iterations: a.iterations,
        record_trace: a.trace.is_some(),
    };
    let (ens, trace) = fit_boost(&ds, &qw, &cfg)?;
    writeln!(out, "samples       {}", ds.sample_count())?;
    writeln!(out, "knots         {}", ds.n())?;
    writeln!(out, "iterations    {}", ens.len())?;
    writeln!(out, "loglik        {}", io::fmt_f64(ens.log_likelihood()?))?;
    writeln!(out, "surrogate     {}", io::fmt_f64(ens.surrogate()?))?;
    writeln!(out, "normalizer    {}", io::fmt_f64(ens.normalizer()))?;
    if let Some(path) = &a.out {
        model::save(&ens, path)?;
        log.outputs.push(path.clone());
    }
    if let Some(path) = &a.trace {
        let mut w = csv::Writer::from_writer(create(path)?);
        w.write_record(["iteration", "loglik", "surrogate", "normalizer", "weight_drift"])?;
        for r in &trace.records {
            w.write_record([
                r.iteration.to_string(),
                io::fmt_f64(r.log_likelihood),
                io::fmt_f64(r.surrogate),
                io::fmt_f64(r.normalizer),
                io::fmt_f64(r.weight_drift),
            ])?;
        }
        w.flush()?;
        log.outputs.push(path.clone());
    }
    Ok(())
}

fn cmd_grid(a: &GridArgs, log: &mut RunLog, out: &mut (dyn Write + Send)) -> Result<()> {
    log.inputs.push(a.model.clone());
    let ens = model::load(&a.model)?;
    let grid = ens.density_grid(a.points)?;
    match &a.out {
        Some(path) => {
            io::write_density_grid(&grid, create(path)?)?;
            log.outputs.push(path.clone());
        }
        None => io::write_density_grid(&grid, out)?,
    }
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs, log: &mut RunLog, out: &mut (dyn Write + Send)) -> Result<()> {
    let spec = match a.dist {
        DistArg::Uniform => DistributionSpec::uniform(),
        DistArg::Exponential => DistributionSpec::exponential(),
        DistArg::LaplaceMixture => DistributionSpec::laplace_mixture(),
        DistArg::StudentT => DistributionSpec::student_t(),
        DistArg::Gmm => DistributionSpec::gmm(a.beta),
    };
    log.seeds.push(a.seed);
    let samples = spec.sample(a.n, a.seed)?;
    match &a.out {
        Some(path) => {
            io::write_samples(&samples, create(path)?)?;
            log.outputs.push(path.clone());
        }
        None => io::write_samples(&samples, out)?,
    }
    Ok(())
}

fn cmd_sweep(a: &SweepArgs, log: &mut RunLog, out: &mut (dyn Write + Send)) -> Result<()> {
    let cfg = SweepConfig {
        betas: a.betas.clone(),
        iterations: a.iterations.clone(),
        replicates: a.replicates,
        sample_size: a.n,
        learner: a.learner.spec()?,
        base_seed: a.seed,
        grid_size: a.grid,
    };
    log.seeds.extend((0..a.replicates).map(|r| cfg.replicate_seed(r)));
    let res = kl_sweep(&cfg)?;
    if let Some(path) = &a.out {
        io::write_sweep_cells(&res, create(path)?)?;
        log.outputs.push(path.clone());
    }
    match &a.summary {
        Some(path) => {
            io::write_sweep_summary(&res, create(path)?)?;
            log.outputs.push(path.clone());
        }
        None => io::write_sweep_summary(&res, out)?,
    }
    Ok(())
}

fn cmd_classify(a: &ClassifyArgs, log: &mut RunLog, out: &mut (dyn Write + Send)) -> Result<()> {
    let data = match (&a.input, a.synthetic) {
        (Some(path), _) => {
            log.inputs.push(path.clone());
            io::read_labeled_file(path, &a.feature, &a.label)?
        }
        (None, Some(n)) => {
            log.seeds.push(a.seed);
            GaussianTask::default().sample(n, a.seed)?
        }
        (None, None) => {
            return Err(Error::InvalidInput(
                "classify needs --input or --synthetic".into(),
            ))
        }
    };
    let mut cfg = SplitConfig::new(
        a.splits,
        a.train_fraction,
        FitConfig::new(a.learner.spec()?, a.iterations),
    );
    cfg.base_seed = a.seed;
    log.seeds.extend((0..a.splits).map(|s| cfg.split_seed(s)));
    let report = split_experiment(&data, &cfg)?;
    let s = report.summary;
    writeln!(out, "splits        {} completed, {} skipped", s.completed, s.skipped)?;
    writeln!(out, "train error   {} (sd {})", io::fmt_f64(s.train_mean), io::fmt_f64(s.train_sd))?;
    writeln!(out, "test error    {} (sd {})", io::fmt_f64(s.test_mean), io::fmt_f64(s.test_sd))?;
    if let Some(path) = &a.out {
        io::write_splits(&report, create(path)?)?;
        log.outputs.push(path.clone());
    }
    Ok(())
}

fn cmd_replay(a: &ReplayArgs, out: &mut (dyn Write + Send)) -> Result<i32> {
    let m = RunManifest::load(&a.from)?;
    let changed = m.changed_inputs()?;
    if !changed.is_empty() && !a.force {
        return Err(Error::InvalidInput(format!(
            "inputs changed since the recorded run: {}",
            changed.join(", ")
        )));
    }
    let args = std::iter::once(OsString::from("npmle")).chain(m.args.iter().map(OsString::from));
    Ok(run_with_output(args, out))
}

fn execute(cli: &Cli, raw_args: Vec<String>, out: &mut (dyn Write + Send)) -> Result<i32> {
    let start = Instant::now();
    let mut log = RunLog {
        seeds: Vec::new(),
        inputs: Vec::new(),
        outputs: Vec::new(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let code = pool.install(|| -> Result<i32> {
        match &cli.command {
            Command::Fit(a) => cmd_fit(a, &mut log, out)?,
            Command::DensityGrid(a) => cmd_grid(a, &mut log, out)?,
            Command::Simulate(a) => cmd_simulate(a, &mut log, out)?,
            Command::KlSweep(a) => cmd_sweep(a, &mut log, out)?,
            Command::Classify(a) => cmd_classify(a, &mut log, out)?,
            Command::Replay(a) => return cmd_replay(a, out),
        }
        Ok(0)
    })?;
    if let Some(path) = &cli.manifest {
        let mut digests = BTreeMap::new();
        for p in &log.inputs {
            digests.insert(p.display().to_string(), io::sha256_file(p)?);
        }
        let command = serde_json::to_value(&cli.command)?;
        let name = command
            .as_object()
            .and_then(|o| o.keys().next().cloned())
            .unwrap_or_default();
        RunManifest {
            command: name,
            args: raw_args,
            config: command,
            seeds: log.seeds,
            version: env!("CARGO_PKG_VERSION").to_string(),
            input_digests: digests,
            outputs: log.outputs.iter().map(|p| p.display().to_string()).collect(),
            duration_secs: start.elapsed().as_secs_f64(),
        }
        .save(path)?;
    }
    Ok(code)
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INPUT
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors are reported on standard error.
pub fn run_with_output<I, T>(args: I, out: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let raw_args = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match execute(&cli, raw_args, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> i32 {
    run_with_output(std::env::args_os(), &mut std::io::stdout())
}
