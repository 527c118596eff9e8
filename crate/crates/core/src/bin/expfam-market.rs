use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use expfam_market::equilibrium::{solve, EquilibriumProblem};
use expfam_market::harness::{emit_report, replay, run_simulation_logged, ReportFormat, SimConfig, SEED_ENV};
use expfam_market::scoring::{log_score, moments_from_mean_variance};
use expfam_market::{Error, Family, Market, MarketState, MeanParams, Result};

/// Exponential-family prediction markets.
///
/// Exit codes: 0 success, 2 config error, 3 domain or convergence error,
/// 4 I/O error.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Log score of a reported mean at an outcome.
    Score {
        #[arg(long)]
        family: Family,
        /// Reported mean statistic, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        mean: Vec<f64>,
        /// Gaussian only: give `--mean` as the plain mean and this as the variance.
        #[arg(long)]
        variance: Option<f64>,
        /// Outcome: a 1-based category, a real, or three comma-separated coordinates.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        outcome: Vec<f64>,
    },
    /// Cost of a trade, without executing it.
    Quote {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        delta: Vec<f64>,
    },
    /// Executes a trade and atomically rewrites the state file.
    Trade {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        delta: Vec<f64>,
        #[arg(long, default_value = "cli")]
        trader: String,
        /// Trade log to append to.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Equilibrium of several exponential-utility traders.
    Equilibrium {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        max_rounds: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Runs a seeded simulation and writes its report.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Trade log to append to.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Overrides the config's seed.
        #[arg(long, env = SEED_ENV)]
        seed: Option<u64>,
    },
    /// Re-executes a trade log and prints the final state.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        state0: PathBuf,
        /// Write the state here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(std::io::Error::from)?;
    println!("{text}");
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct QuoteOutput {
    cost: f64,
    prices_before: MeanParams,
    prices_after: MeanParams,
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Score { family, mean, variance, outcome } => {
            let mu = match variance {
                Some(v) if mean.len() == 1 && family == Family::GaussianMoments => {
                    moments_from_mean_variance(mean[0], v)?
                }
                Some(_) => return Err(Error::Config("--variance needs gaussian-moments and a scalar --mean".into())),
                None => MeanParams(mean),
            };
            let x = family.outcome_from_values(&outcome)?;
            println!("{}", log_score(&family, &mu, &x)?);
        }
        Command::Quote { state, delta } => {
            let state = MarketState::load(&state)?;
            let cost = state.quote(&delta)?;
            let mut after = state.clone();
            after.theta = expfam_market::NaturalParams(state.theta_after(&delta)?);
            print_json(&QuoteOutput { cost, prices_before: state.prices()?, prices_after: after.prices()? })?;
        }
        Command::Trade { state: path, delta, trader, log } => {
            let mut market = Market::new(MarketState::load(&path)?)?;
            if let Some(log) = &log {
                market = market.with_log_file(log)?;
            }
            let record = market.execute(&delta, &trader)?;
            market.state().save_atomic(&path)?;
            print_json(&record)?;
        }
        Command::Equilibrium { problem, max_rounds, tol } => {
            let problem: EquilibriumProblem = read_json(&problem)?;
            problem.validate().map_err(|e| Error::Config(e.to_string()))?;
            print_json(&solve(&problem, max_rounds, tol)?)?;
        }
        Command::Simulate { config, out, csv, log, seed } => {
            let mut config = SimConfig::load(&config)?;
            config.seed = seed.or(config.seed);
            let report = run_simulation_logged(&config, log.as_deref())?;
            emit_report(&report, ReportFormat::Json, &out)?;
            if let Some(csv) = csv {
                emit_report(&report, ReportFormat::Csv, &csv)?;
            }
            if !report.valid {
                return Err(Error::Domain(report.error.unwrap_or_default()));
            }
        }
        Command::Replay { log, state0, out } => {
            let state = replay(&log, MarketState::load(&state0)?)?;
            match out {
                Some(path) => state.save_atomic(&path)?,
                None => print_json(&state)?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
