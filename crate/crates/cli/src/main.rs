//! `logdiff`: runs the experiments and certificate checks, writing CSV
//! artifacts. Exit codes: 0 every certificate passes, 2 a certificate fails,
//! 3 infrastructure error (bad configuration, I/O, solver failure).

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use logdiff::harness::{self, ExperimentConfig, Outcome};
use logdiff::io::read_trajectory;

#[derive(Parser)]
#[command(name = "logdiff", version, about = "Ricci flow on the disc as logarithmic fast diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence study against the closed-form solutions.
    ExactSuite,
    /// Exhaustion families and interior area certificates.
    Uniqueness,
    /// Q against its analytic bound over the configured cut-offs.
    QSweep,
    /// Boundary-layer width against time (exploratory).
    BoundaryLayer,
    /// Runs every estimate on two persisted trajectories.
    Verify {
        /// Manifest of the lower trajectory.
        #[arg(long)]
        lower: PathBuf,
        /// Manifest of the upper trajectory.
        #[arg(long)]
        upper: PathBuf,
    },
    /// Runs and persists the exhaustion family.
    Simulate,
}

fn load_config(common: &Common) -> anyhow::Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => harness::parse_config(path).with_context(|| format!("reading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &common.out {
        config.output.dir = out.clone();
    }
    Ok(config)
}

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let config = load_config(&cli.common)?;
    let outcome = match &cli.command {
        Command::ExactSuite => harness::run_exact_solution_suite(&config)?,
        Command::Uniqueness => harness::run_uniqueness_experiment(&config)?,
        Command::QSweep => harness::run_q_sweep(&config)?,
        Command::BoundaryLayer => harness::run_boundary_layer_experiment(&config)?,
        Command::Simulate => harness::run_simulate(&config)?,
        Command::Verify { lower, upper } => {
            let lo = read_trajectory(lower).with_context(|| format!("reading {}", lower.display()))?;
            let hi = read_trajectory(upper).with_context(|| format!("reading {}", upper.display()))?;
            harness::run_verify(&config, &lo, &hi)?
        }
    };
    let paths = outcome
        .write_to(&config.output.dir, &config.hash())
        .with_context(|| format!("writing to {}", config.output.dir.display()))?;
    for line in &outcome.summary {
        println!("{line}");
    }
    for path in paths {
        println!("wrote {}", path.display());
    }
    Ok(outcome)
}

/// A violated estimate precondition (e.g. an unordered pair) is a failed
/// certificate, not an infrastructure problem.
fn is_certificate_failure(err: &anyhow::Error) -> bool {
    matches!(err.downcast_ref::<logdiff::Error>(), Some(logdiff::Error::Precondition(_)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.common.jobs.unwrap_or(0))
        .build()
        .expect("thread pool");
    match pool.install(|| run(&cli)) {
        Ok(outcome) if outcome.passed => ExitCode::SUCCESS,
        Ok(_) => {
            println!("certificate failure");
            ExitCode::from(2)
        }
        Err(err) if is_certificate_failure(&err) => {
            eprintln!("certificate failure: {err:#}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(3)
        }
    }
}
