//! The four subcommands. Each writes plot-ready CSV files into an output
//! directory and a `config.json` holding the effective settings.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use tets_core::aggregation::latent_fitted;
use tets_core::filter::uncensored_view;
use tets_core::inventory::{median_reports, run_replications, ForecasterKind, NewsvendorConfig};
use tets_core::io::{
    forecast_rows, level_label, observations, read_series, report_table, series_rows, write_aggregate,
    write_fitted, write_forecast, write_ledgers, write_reports, write_series_file, FittedRow,
};
use tets_core::simulation::{case_init_state, DailyLevel, HOURS_PER_DAY};
use tets_core::{
    apply_daily_censoring, apply_saturation, fit, forecast, simulate_ets, CumulatorSchedule, FitOptions, FittedModel,
    ModelKind, ModelSpec,
};

use crate::config::{Case, ExperimentConfig};
use crate::error::{file_error, CliError, CliResult};

fn prepare_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(file_error(dir))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(file_error(path))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(file_error(path))
}

fn write_config(dir: &Path, config: &ExperimentConfig) -> CliResult<()> {
    write_text(&dir.join("config.json"), &(serde_json::to_string_pretty(config)? + "\n"))
}

/// Simulated ANA demand plus one censored sales file per level:
/// `series_<level>.csv`. For daily censoring the `sales` and
/// `censor_level` columns hold within-day cumulative values.
pub fn simulate(config: &ExperimentConfig, case: Case) -> CliResult<Vec<PathBuf>> {
    if case == Case::Newsvendor {
        return Err(CliError::Config("the newsvendor case is run by the newsvendor command".into()));
    }
    let c = config.resolved(case)?;
    let spec = c.spec.clone().expect("resolved");
    let x0 = case_init_state(&spec, c.initial_level.expect("resolved"));
    let demand = simulate_ets(&spec, c.n.expect("resolved"), &x0, c.seed.expect("resolved"))?;
    let s = spec.season_length().max(1);
    let dir = c.out_dir();
    prepare_dir(&dir)?;

    let mut written = vec![];
    for &level in c.censor_levels.as_deref().expect("resolved") {
        let observed = match case {
            Case::Saturation => apply_saturation(&demand.values, level),
            _ => apply_daily_censoring(&demand.values, &DailyLevel::Constant(level), s)?.cumulative,
        };
        let path = dir.join(format!("series_{level}.csv"));
        write_series_file(&path, &series_rows(&demand.values, &observed, s))?;
        written.push(path);
    }
    write_config(&dir, &c)?;
    Ok(written)
}

pub struct FitArgs {
    pub data: PathBuf,
    pub kind: ModelKind,
    pub m: usize,
    pub tobit: bool,
    pub aggregate: Option<usize>,
    pub restarts: usize,
    pub seed: u64,
    pub out: PathBuf,
}

fn start_spec(kind: ModelKind, m: usize) -> CliResult<ModelSpec> {
    Ok(match kind {
        ModelKind::Ses => ModelSpec::ses(0.3, 1.0)?,
        ModelKind::Ana => ModelSpec::ana(0.3, 0.3, m, 1.0)?,
        ModelKind::Aaa => ModelSpec::aaa(0.3, 0.3, 0.3, m, 1.0)?,
    })
}

/// Fits a model and writes `model.json` and `fitted.csv`.
pub fn fit_model(args: &FitArgs) -> CliResult<FittedModel> {
    let file = File::open(&args.data).map_err(file_error(&args.data))?;
    let rows = read_series(file)?;
    let mut obs = observations(&rows)?;
    if !args.tobit {
        obs = uncensored_view(&obs);
    }
    let schedule = args.aggregate.map(|s| CumulatorSchedule::new(s, 0)).transpose()?;
    let spec = start_spec(args.kind, args.m)?;
    let opts = FitOptions {
        restarts: args.restarts,
        seed: args.seed,
        ..FitOptions::default()
    };
    let model = fit(&obs, &spec, schedule.as_ref(), &opts)?;
    let result = model.filter(&obs)?;
    let latent = match &schedule {
        Some(_) => latent_fitted(&model.system()?, &model.init_state, &result),
        None => result.fitted.clone(),
    };
    let fitted: Vec<FittedRow> = obs
        .iter()
        .enumerate()
        .map(|(t, o)| FittedRow {
            t: rows[t].t,
            observed: o.value(),
            censor_level: o.censor_level(),
            censored: o.is_censored(),
            fitted: result.fitted[t],
            latent_fitted: latent[t],
        })
        .collect();

    prepare_dir(&args.out)?;
    write_text(&args.out.join("model.json"), &(model.to_json()? + "\n"))?;
    write_fitted(create(&args.out.join("fitted.csv"))?, &fitted)?;
    Ok(model)
}

pub struct ForecastArgs {
    pub model: PathBuf,
    pub horizon: usize,
    pub level: f64,
    pub aggregate: Option<usize>,
    pub out: PathBuf,
}

/// Writes `forecast.csv` and, for aggregated models or with an explicit
/// cycle length, `aggregate.csv`.
pub fn forecast_model(args: &ForecastArgs) -> CliResult<()> {
    let text = fs::read_to_string(&args.model).map_err(file_error(&args.model))?;
    let model = FittedModel::from_json(&text)?;
    let schedule = args.aggregate.map(|s| CumulatorSchedule::new(s, 0)).transpose()?;
    let dist = forecast(&model, args.horizon, schedule.as_ref())?;
    let rows = forecast_rows(&dist, args.level)?;
    prepare_dir(&args.out)?;
    write_forecast(create(&args.out.join("forecast.csv"))?, &rows, args.level)?;
    if schedule.is_some() || model.schedule.is_some() {
        write_aggregate(create(&args.out.join("aggregate.csv"))?, &dist, args.level)?;
    }
    Ok(())
}

/// Runs the closed-loop study over the CSL grid and writes `ledger.csv`,
/// `report.csv` and `report.txt` for the base seed; with several
/// replications also `median_report.csv` and a median table.
pub fn newsvendor(config: &ExperimentConfig) -> CliResult<String> {
    let c = config.resolved(Case::Newsvendor)?;
    let base = NewsvendorConfig {
        days: c.days.expect("resolved"),
        warmup_days: c.warmup_days.expect("resolved"),
        refit_every: c.refit_every.expect("resolved"),
        restarts: c.restarts.expect("resolved"),
        hours_per_day: HOURS_PER_DAY,
        ..NewsvendorConfig::default()
    };
    let seed = c.seed.expect("resolved");
    let reps = c.replications.expect("resolved") as u64;
    let seeds: Vec<u64> = (0..reps).map(|k| seed.wrapping_add(k)).collect();
    let csls = c.target_csl.clone().expect("resolved");
    let outcomes = run_replications(&base, &seeds, &csls, &ForecasterKind::ALL)?;

    let first: Vec<_> = outcomes.iter().filter(|o| o.seed == seed).collect();
    let dir = c.out_dir();
    prepare_dir(&dir)?;
    let ledgers: Vec<_> = first.iter().map(|o| &o.ledger).collect();
    write_ledgers(create(&dir.join("ledger.csv"))?, &ledgers)?;
    let reports: Vec<_> = first.iter().map(|o| o.report.clone()).collect();
    write_reports(create(&dir.join("report.csv"))?, &reports)?;

    let mut text = format!("Seed {seed}, {} evaluated days\n", base.days);
    text += &report_table(&reports);
    if reps > 1 {
        let med = median_reports(&outcomes);
        write_reports(create(&dir.join("median_report.csv"))?, &med)?;
        text += &format!("\nMedian over {reps} seeds ({}..={})\n", seeds[0], seeds[seeds.len() - 1]);
        text += &report_table(&med);
    }
    write_text(&dir.join("report.txt"), &text)?;
    write_config(&dir, &c)?;
    Ok(text)
}

/// Human-readable CSL list, e.g. "80%, 90%".
pub fn csl_list(csls: &[f64]) -> String {
    csls.iter()
        .map(|c| format!("{}%", level_label(*c)))
        .collect::<Vec<_>>()
        .join(", ")
}
