use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use afdr::commands::{self, MonteCarloOptions, SimulateOptions, UncertainChoice};
use afdr::experiment::{BetaSetting, Experiment, NoisePolicyParam};
use afdr::AppError;
use clap::{Parser, Subcommand, ValueEnum};

/// Robust adaptive FIR disturbance rejection: norms, certificates and simulations.
#[derive(Debug, Parser)]
#[command(name = "afdr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl From<Switch> for bool {
    fn from(s: Switch) -> bool {
        s == Switch::On
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NoisePolicy {
    Fixed,
    PerRun,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certified induced ℓ∞ norm of a system file.
    Norm {
        system: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        rel_tol: f64,
    },
    /// Largest certified FIR gain bound; prints the certificate as JSON.
    BetaStar {
        /// Experiment file (defaults to the built-in benchmark).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the uncertainty level of the experiment.
        #[arg(long)]
        delta: Option<f64>,
        /// Also write certificate.json here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// One closed-loop run; writes trace.csv and summary.json.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// none, paper or random:<seed>.
        #[arg(long, default_value = "none")]
        uncertain: UncertainChoice,
        #[arg(long, value_enum)]
        safety: Option<Switch>,
        /// Noise seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Number, "auto" or "unconstrained".
        #[arg(long)]
        beta: Option<BetaSetting>,
        /// Run even when beta is not certified by the small-gain condition.
        #[arg(long)]
        allow_uncertified: bool,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Batch of runs over random uncertainties; writes runs.csv and aggregate.json.
    MonteCarlo {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of runs.
        #[arg(long)]
        n: Option<usize>,
        /// Base seed; run i draws its uncertainty with seed + i.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (defaults to the number of cores).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, value_enum)]
        safety: Option<Switch>,
        #[arg(long)]
        beta: Option<BetaSetting>,
        /// Overrides the uncertainty level.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        noise_seed: Option<u64>,
        #[arg(long, value_enum)]
        noise_policy: Option<NoisePolicy>,
        #[arg(long)]
        allow_uncertified: bool,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Write every run's trace under <out-dir>/traces.
        #[arg(long)]
        traces: bool,
        /// Write every sampled uncertainty under <out-dir>/deltas.
        #[arg(long)]
        export_deltas: bool,
    },
}

fn experiment(path: Option<&Path>) -> Result<Experiment, AppError> {
    match path {
        Some(p) => Experiment::load(p),
        None => Ok(Experiment::benchmark()),
    }
}

fn run(cli: Cli) -> Result<u8, AppError> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Norm { system, rel_tol } => {
            commands::norm(&system, rel_tol, &mut out)?;
            Ok(0)
        }
        Command::BetaStar { config, delta, out_dir } => {
            let exp = experiment(config.as_deref())?;
            let cert = commands::beta_star(&exp, delta, out_dir.as_deref(), &mut out)?;
            Ok(if cert.feasible { 0 } else { 2 })
        }
        Command::Simulate {
            config,
            uncertain,
            safety,
            seed,
            beta,
            allow_uncertified,
            out_dir,
        } => {
            let exp = experiment(config.as_deref())?;
            let opts = SimulateOptions {
                uncertain,
                safety: safety.map(Into::into),
                seed,
                beta,
                allow_uncertified,
                out_dir,
            };
            let (result, _) = commands::simulate(&exp, &opts, &mut out)?;
            Ok(if result.stable { 0 } else { 3 })
        }
        Command::MonteCarlo {
            config,
            n,
            seed,
            jobs,
            safety,
            beta,
            delta,
            noise_seed,
            noise_policy,
            allow_uncertified,
            out_dir,
            traces,
            export_deltas,
        } => {
            let exp = experiment(config.as_deref())?;
            let opts = MonteCarloOptions {
                runs: n,
                seed,
                jobs,
                safety: safety.map(Into::into),
                beta,
                noise_seed,
                noise_policy: noise_policy.map(|p| match p {
                    NoisePolicy::Fixed => NoisePolicyParam::Fixed,
                    NoisePolicy::PerRun => NoisePolicyParam::PerRun,
                }),
                delta,
                allow_uncertified,
                out_dir,
                traces,
                export_deltas,
            };
            commands::monte_carlo(&exp, &opts, &mut out)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let _ = writeln!(io::stderr(), "error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
