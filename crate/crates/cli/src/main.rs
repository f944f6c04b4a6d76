//! `tets`: simulate censored series, fit and forecast censoring-aware
//! exponential smoothing models, and run the newsvendor study.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tets_core::ModelKind;

use crate::commands::{FitArgs, ForecastArgs};
use crate::config::{Case, ExperimentConfig};
use crate::error::CliResult;

#[derive(Parser)]
#[command(name = "tets", version, about = "Tobit exponential smoothing for censored time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate hourly demand and write censored sales series.
    Simulate(SimulateCmd),
    /// Estimate a model from a series CSV.
    Fit(FitCmd),
    /// Forecast from a fitted model.
    Forecast(ForecastCmd),
    /// Run the closed-loop stocking study.
    Newsvendor(NewsvendorCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum SimCase {
    Saturation,
    DailyCensoring,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Ses,
    Ana,
    Aaa,
}

impl From<Kind> for ModelKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Ses => ModelKind::Ses,
            Kind::Ana => ModelKind::Ana,
            Kind::Aaa => ModelKind::Aaa,
        }
    }
}

#[derive(Args)]
struct SimulateCmd {
    #[arg(long, value_enum, default_value = "saturation")]
    case: SimCase,
    /// JSON experiment config; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of hourly observations.
    #[arg(long)]
    n: Option<usize>,
    /// Censoring level; repeat for several series.
    #[arg(long = "level")]
    levels: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitCmd {
    /// Series CSV as written by `simulate`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "ana")]
    model: Kind,
    /// Season length for seasonal models.
    #[arg(long, default_value_t = 12)]
    m: usize,
    /// Treat values at their censor level as censored.
    #[arg(long)]
    tobit: bool,
    /// Cycle length when the data are within-cycle cumulative sums.
    #[arg(long)]
    aggregate: Option<usize>,
    #[arg(long, default_value_t = 3)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ForecastCmd {
    /// `model.json` written by `fit`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 12)]
    horizon: usize,
    /// Central interval coverage.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Cycle length for the aggregate forecast.
    #[arg(long)]
    aggregate: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct NewsvendorCmd {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Target cycle service level; repeat for a grid.
    #[arg(long = "csl")]
    csls: Vec<f64>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    refit_every: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluated days after warm-up.
    #[arg(long)]
    days: Option<usize>,
    #[arg(long)]
    warmup_days: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn non_empty(v: Vec<f64>) -> Option<Vec<f64>> {
    (!v.is_empty()).then_some(v)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(cmd) => {
            let case = match cmd.case {
                SimCase::Saturation => Case::Saturation,
                SimCase::DailyCensoring => Case::DailyCensoring,
            };
            let flags = ExperimentConfig {
                seed: cmd.seed,
                n: cmd.n,
                censor_levels: non_empty(cmd.levels),
                out: cmd.out,
                ..Default::default()
            };
            let config = ExperimentConfig::load_optional(cmd.config.as_deref())?.overlay(flags);
            for path in commands::simulate(&config, case)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Fit(cmd) => {
            let model = commands::fit_model(&FitArgs {
                data: cmd.data,
                kind: cmd.model.into(),
                m: cmd.m,
                tobit: cmd.tobit,
                aggregate: cmd.aggregate,
                restarts: cmd.restarts,
                seed: cmd.seed,
                out: cmd.out.clone(),
            })?;
            println!(
                "loglik {:.6}, parameters {:?}; wrote {}",
                model.loglik,
                model.params.constrained(),
                cmd.out.join("model.json").display()
            );
        }
        Command::Forecast(cmd) => {
            commands::forecast_model(&ForecastArgs {
                model: cmd.model,
                horizon: cmd.horizon,
                level: cmd.level,
                aggregate: cmd.aggregate,
                out: cmd.out.clone(),
            })?;
            println!("wrote {}", cmd.out.join("forecast.csv").display());
        }
        Command::Newsvendor(cmd) => {
            let flags = ExperimentConfig {
                target_csl: non_empty(cmd.csls),
                replications: cmd.replications,
                refit_every: cmd.refit_every,
                seed: cmd.seed,
                days: cmd.days,
                warmup_days: cmd.warmup_days,
                restarts: cmd.restarts,
                out: cmd.out,
                ..Default::default()
            };
            let config = ExperimentConfig::load_optional(cmd.config.as_deref())?.overlay(flags);
            let resolved = config.resolved(Case::Newsvendor)?;
            eprintln!(
                "running {} replication(s) at CSL {}",
                resolved.replications.unwrap_or(1),
                commands::csl_list(resolved.target_csl.as_deref().unwrap_or_default())
            );
            print!("{}", commands::newsvendor(&config)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
