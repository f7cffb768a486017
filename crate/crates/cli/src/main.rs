//! `tensor-mp`: verification suites, moment tables, Monte Carlo spectra and
//! Marchenko-Pastur tables for sums of rank-one tensor-product matrices.
//!
//! Exit status: 0 on success, 2 for usage errors, 3 for numerical failures,
//! 4 when a verification suite finds a counterexample.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use tensor_mp::moments::{self, MomentError};
use tensor_mp::mplaw::{self, MpLaw};
use tensor_mp::simulation::{self, SimulationError, SpectrumOptions, TrialConfig};
use tensor_mp::verify::{self, Suite, VerifyError};
use thiserror::Error;

use config::{ExperimentConfig, Settings};
use output::OutputSet;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl From<MomentError> for CliError {
    fn from(e: MomentError) -> Self {
        match e {
            MomentError::MissingMoment { .. }
            | MomentError::CoefficientsRequired
            | MomentError::CoefficientCount { .. }
            | MomentError::InvalidRatio(_)
            | MomentError::InvalidDimensions { .. }
            | MomentError::ZeroOrder
            | MomentError::EmptyCoefficients
            | MomentError::Sequence(_) => CliError::Usage(e.to_string()),
        }
    }
}

impl From<SimulationError> for CliError {
    fn from(e: SimulationError) -> Self {
        match e {
            SimulationError::InvalidDimensions { .. }
            | SimulationError::MemoryLimit { .. }
            | SimulationError::DenseTooLarge(_)
            | SimulationError::CoefficientCount { .. }
            | SimulationError::NoTrials => CliError::Usage(e.to_string()),
            SimulationError::Moment(inner) => inner.into(),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<mplaw::MpError> for CliError {
    fn from(e: mplaw::MpError) -> Self {
        match e {
            mplaw::MpError::InvalidRatio(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "tensor-mp", version, about = "Spectra of sums of rank-one tensor-product matrices")]
struct Cli {
    /// TOML file with default settings; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory for output files, named by a hash of the configuration.
    /// Without it, the main result goes to stdout.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads [default: available parallelism]. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an exhaustive identity suite: sequences, graphs, stirling or moments.
    Verify {
        suite: String,
        /// Largest sequence length checked [default: 6].
        #[arg(long)]
        p_max: Option<usize>,
    },
    /// Limiting moments for ratio c and a tau model, optionally against the
    /// exact finite-size mean (give --n, --k, --m).
    Moments(Flags),
    /// Monte Carlo spectra: moments, histograms and KS distances.
    Simulate(Flags),
    /// Marchenko-Pastur density and distribution function on a grid.
    Mplaw(Flags),
}

#[derive(Debug, Args)]
struct Flags {
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    k: Option<u32>,
    /// Number of rank-one terms [default: round(c n^k)].
    #[arg(long)]
    m: Option<usize>,
    /// Ratio m / n^k.
    #[arg(long)]
    c: Option<f64>,
    /// Entry law: phase, rademacher or roots:q [default: phase].
    #[arg(long)]
    dist: Option<String>,
    /// const:v, file:PATH (one coefficient per term) or moments:PATH (m_1, m_2, ..) [default: const:1].
    #[arg(long)]
    tau: Option<String>,
    /// Highest moment order [default: 4].
    #[arg(long)]
    p_max: Option<usize>,
    /// Number of independent trials [default: 1].
    #[arg(long)]
    trials: Option<u64>,
    /// Seed for the ChaCha20 generator; trial t uses stream t [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Histogram bins over the nonzero spectrum [default: 50].
    #[arg(long)]
    bins: Option<usize>,
    /// Compare each trial with the dense n^k x n^k matrix (n^k <= 1024).
    #[arg(long)]
    dense_check: bool,
    /// Memory budget in bytes [default: 3 GiB].
    #[arg(long)]
    memory_limit: Option<u64>,
    /// Relative threshold below which eigenvalues join the zero atom [default: 1e-10].
    #[arg(long)]
    zero_tol: Option<f64>,
    /// Relative residual bound certified for each eigenpair [default: 1e-9].
    #[arg(long)]
    eigen_tol: Option<f64>,
    /// Absolute quadrature tolerance [default: 1e-11].
    #[arg(long)]
    quad_tol: Option<f64>,
    /// Grid start for mplaw [default: 0].
    #[arg(long)]
    lo: Option<f64>,
    /// Grid end for mplaw [default: right support edge].
    #[arg(long)]
    hi: Option<f64>,
    /// Grid size for mplaw [default: 201].
    #[arg(long)]
    points: Option<usize>,
}

impl Flags {
    fn settings(&self) -> Settings {
        Settings {
            n: self.n,
            k: self.k,
            m: self.m,
            c: self.c,
            dist: self.dist.clone(),
            tau: self.tau.clone(),
            p_max: self.p_max,
            trials: self.trials,
            seed: self.seed,
            bins: self.bins,
            dense_check: self.dense_check.then_some(true),
            memory_limit: self.memory_limit,
            zero_tol: self.zero_tol,
            eigen_tol: self.eigen_tol,
            quad_tol: self.quad_tol,
            lo: self.lo,
            hi: self.hi,
            points: self.points,
        }
    }
}

struct Context {
    out: Option<PathBuf>,
    force: bool,
    threads: usize,
}

impl Context {
    /// Writes `files` under the output directory, or prints `stdout` when no
    /// directory was given.
    fn emit(&self, cfg: &ExperimentConfig, files: Vec<(&str, String)>, stdout: String) -> Result<(), CliError> {
        match &self.out {
            Some(dir) => {
                let mut set = OutputSet::new(dir, &cfg.command, &cfg.digest());
                for (suffix, contents) in files {
                    set.add(suffix, contents);
                }
                for path in set.write(self.force)? {
                    println!("{}", path.display());
                }
            }
            None => print!("{stdout}"),
        }
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tensor-mp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    let threads = match cli.threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    // Ignore the error if a pool already exists; it only sets the degree of parallelism.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    let ctx = Context {
        out: cli.out,
        force: cli.force,
        threads,
    };
    match cli.command {
        Command::Verify { suite, p_max } => {
            let settings = file.overlay(Settings {
                p_max,
                ..Default::default()
            });
            cmd_verify(&ctx, &suite, &settings)
        }
        Command::Moments(flags) => cmd_moments(&ctx, &file.overlay(flags.settings())),
        Command::Simulate(flags) => cmd_simulate(&ctx, &file.overlay(flags.settings())),
        Command::Mplaw(flags) => cmd_mplaw(&ctx, &file.overlay(flags.settings())),
    }
}

fn cmd_verify(ctx: &Context, suite: &str, settings: &Settings) -> Result<(), CliError> {
    let cfg = ExperimentConfig::verify(suite, settings)?;
    let parsed: Suite = suite.parse()?;
    let report = verify::run(parsed, cfg.p_max)?;
    let json = output::to_pretty(&json!({ "config": cfg.to_json(), "report": report }));
    ctx.emit(&cfg, vec![(".json", json.clone())], json)?;
    for c in &report.claims {
        eprintln!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.claim, c.detail);
    }
    match report.first_failure() {
        None => Ok(()),
        Some(c) => Err(CliError::Verification(format!(
            "{} ({}){}",
            c.claim,
            c.detail,
            c.counterexample.as_ref().map(|x| format!(", counterexample {x}")).unwrap_or_default()
        ))),
    }
}

fn cmd_moments(ctx: &Context, settings: &Settings) -> Result<(), CliError> {
    let cfg = ExperimentConfig::moments(settings)?;
    let c = cfg.c.expect("validated");
    let tau = cfg.tau.as_ref().expect("validated").model();
    let theory = (1..=cfg.p_max)
        .map(|p| moments::limiting_moment(p, c, &tau))
        .collect::<Result<Vec<_>, _>>()?;
    let exact = match (cfg.n, cfg.k, cfg.m, cfg.dist) {
        (Some(n), Some(k), Some(m), Some(dist)) => Some(
            (1..=cfg.p_max)
                .map(|p| moments::exact_mean_trace_moment(n, k, m, p, &tau, &dist))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        _ => None,
    };
    let csv = output::moments_table(&theory, exact.as_deref());
    let manifest = output::to_pretty(&json!({ "config": cfg.to_json(), "theory": theory, "exact": exact }));
    ctx.emit(&cfg, vec![(".csv", csv.clone()), (".json", manifest)], csv)
}

fn cmd_simulate(ctx: &Context, settings: &Settings) -> Result<(), CliError> {
    let (cfg, warnings) = ExperimentConfig::simulate(settings)?;
    for w in warnings {
        eprintln!("tensor-mp: warning: {w}");
    }
    let (n, k, m) = (cfg.n.expect("validated"), cfg.k.expect("validated"), cfg.m.expect("validated"));
    let mut trial = TrialConfig::new(n, k, m, cfg.dist.expect("validated"));
    trial.c = cfg.c;
    trial.tau = cfg.tau.as_ref().expect("validated").model();
    trial.p_max = cfg.p_max;
    trial.trials = cfg.trials.expect("validated");
    trial.seed = cfg.seed.expect("validated");
    trial.bins = cfg.bins.expect("validated");
    trial.dense_check = cfg.dense_check.expect("validated");
    trial.memory_limit = cfg.memory_limit.expect("validated");
    trial.parallel_trials = ctx.threads;
    trial.options = SpectrumOptions {
        zero_tol: cfg.zero_tol.expect("validated"),
        eigen_tol: cfg.eigen_tol.expect("validated"),
    };

    let start = Instant::now();
    let report = simulation::run_trials(&trial)?;
    // Timing goes to stderr so the files stay reproducible.
    eprintln!("tensor-mp: {} trial(s) in {:.3} s", trial.trials, start.elapsed().as_secs_f64());

    let json = output::to_pretty(&output::simulation_json(cfg.to_json(), &report));
    let mut files = vec![
        (".json", json.clone()),
        ("-moments.csv", output::simulated_moments(&report)),
        ("-trial-moments.csv", output::trial_moments(&report)),
        ("-histogram.csv", output::pooled_histogram(&report)),
        ("-trial-histograms.csv", output::trial_histograms(&report)),
    ];
    if let Some(dense) = output::dense_table(&report) {
        files.push(("-dense.csv", dense));
    }
    ctx.emit(&cfg, files, json)
}

fn cmd_mplaw(ctx: &Context, settings: &Settings) -> Result<(), CliError> {
    let cfg = ExperimentConfig::mplaw(settings)?;
    let c = cfg.c.expect("validated");
    let grid = cfg.grid.expect("validated");
    let law = MpLaw::new(c)?;
    let rows = mplaw::table(c, grid.lo, grid.hi, grid.points, cfg.quad_tol)?;
    let csv = output::mplaw_table(&law, &rows);
    let manifest = output::to_pretty(&json!({ "config": cfg.to_json(), "law": law }));
    ctx.emit(&cfg, vec![(".csv", csv.clone()), (".json", manifest)], csv)
}
