//! Closed-loop newsvendor simulation with lost sales.
//!
//! Every day each forecaster predicts the next day's demand distribution
//! from its own sales history, stock is set at the target cycle-service
//! percentile, the day's demand is realised against that stock and the
//! resulting (possibly censored) sales are appended to the history. The
//! three forecasters differ only in what they see:
//!
//! * `Ets`: daily sales treated as exact demand;
//! * `Tets`: daily sales censored at the day's stock level;
//! * `Tetsc`: hourly within-day cumulative sales censored at the day's
//!   stock level, forecast through the aggregated system.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::CumulatorSchedule;
use crate::error::{domain, Error, Result};
use crate::estimation::{fit, FitOptions, FittedModel};
use crate::filter::CensoredObservation;
use crate::forecast::aggregate_from;
use crate::model::ModelSpec;
use crate::normal::std_normal_quantile;
use crate::simulation::{
    apply_daily_censoring, case_init_state, case_spec, simulate_ets, DailyLevel, DemandSeries, HOURS_PER_DAY,
};

/// Hourly level for the newsvendor demand. The additive models are
/// shift-equivariant, so the level only keeps the 393-day random walk away
/// from negative hourly demand.
pub const NEWSVENDOR_LEVEL: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ForecasterKind {
    #[serde(rename = "ETS")]
    Ets,
    #[serde(rename = "TETS")]
    Tets,
    #[serde(rename = "TETSC")]
    Tetsc,
}

impl ForecasterKind {
    pub const ALL: [ForecasterKind; 3] = [ForecasterKind::Ets, ForecasterKind::Tets, ForecasterKind::Tetsc];

    pub fn name(self) -> &'static str {
        match self {
            ForecasterKind::Ets => "ETS",
            ForecasterKind::Tets => "TETS",
            ForecasterKind::Tetsc => "TETSC",
        }
    }
}

impl std::fmt::Display for ForecasterKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ForecasterKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ETS" => Ok(ForecasterKind::Ets),
            "TETS" => Ok(ForecasterKind::Tets),
            "TETSC" => Ok(ForecasterKind::Tetsc),
            other => Err(domain(format!("unknown forecaster {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewsvendorConfig {
    pub target_csl: f64,
    /// Evaluated days after warm-up.
    pub days: usize,
    /// Leading days with censoring disabled; excluded from the ledger.
    pub warmup_days: usize,
    /// Parameter re-estimation cadence in days; states update daily.
    pub refit_every: usize,
    pub hours_per_day: usize,
    /// Random optimiser restarts per refit.
    pub restarts: usize,
    pub fit_seed: u64,
    /// Stock never binds; forecasts and planned stock are still recorded.
    pub uncensored_world: bool,
}

impl Default for NewsvendorConfig {
    fn default() -> Self {
        Self {
            target_csl: 0.8,
            days: 365,
            warmup_days: 28,
            refit_every: 7,
            hours_per_day: HOURS_PER_DAY,
            restarts: 3,
            fit_seed: 0,
            uncensored_world: false,
        }
    }
}

impl NewsvendorConfig {
    pub fn total_hours(&self) -> usize {
        (self.warmup_days + self.days) * self.hours_per_day
    }

    fn validate(&self, demand_len: usize) -> Result<()> {
        if !(self.target_csl > 0.0 && self.target_csl < 1.0) {
            return Err(domain(format!(
                "target CSL must lie in (0, 1), got {}",
                self.target_csl
            )));
        }
        if self.hours_per_day == 0 || self.refit_every == 0 || self.days == 0 {
            return Err(domain("days, hours_per_day and refit_every must be >= 1"));
        }
        if self.warmup_days < 2 {
            return Err(domain("at least two warm-up days are needed for the first fit"));
        }
        if self.total_hours() > demand_len {
            return Err(domain(format!(
                "{} warm-up + {} evaluated days of {} steps need {} demand values, got {demand_len}",
                self.warmup_days,
                self.days,
                self.hours_per_day,
                self.total_hours()
            )));
        }
        Ok(())
    }
}

/// One evaluated day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    pub day: usize,
    /// Stock available for the day.
    pub y_max: f64,
    /// Stock the policy asked for (differs from `y_max` only in the
    /// uncensored world).
    pub target_stock: f64,
    pub demand: f64,
    pub sales: f64,
    pub lost_sales: f64,
    pub excess_inventory: f64,
    pub stockout: bool,
    pub forecast_mean: f64,
    pub forecast_sd: f64,
}

impl DayRecord {
    /// Realises `demand` against stock `y_max`.
    pub fn settle(day: usize, y_max: f64, demand: f64, forecast_mean: f64, forecast_sd: f64) -> Self {
        Self {
            day,
            y_max,
            target_stock: y_max,
            demand,
            sales: demand.min(y_max),
            lost_sales: (demand - y_max).max(0.0),
            excess_inventory: (y_max - demand).max(0.0),
            stockout: demand > y_max,
            forecast_mean,
            forecast_sd,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InventoryLedger {
    pub model: ForecasterKind,
    pub target_csl: f64,
    pub records: Vec<DayRecord>,
}

impl InventoryLedger {
    pub fn y_max(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.y_max).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub model: ForecasterKind,
    pub target_csl: f64,
    pub days: usize,
    pub rmse: f64,
    /// Mean of forecast minus demand; negative means under-forecasting.
    pub bias: f64,
    pub lost_sales_total: f64,
    pub excess_inventory_total: f64,
    pub achieved_csl: f64,
}

/// Forecast accuracy and inventory totals over the ledger.
pub fn metrics(ledger: &InventoryLedger) -> SimulationReport {
    let n = ledger.records.len().max(1) as f64;
    let err = |r: &DayRecord| r.forecast_mean - r.demand;
    let sse: f64 = ledger.records.iter().map(|r| err(r).powi(2)).sum();
    let bias = ledger.records.iter().map(err).sum::<f64>() / n;
    let no_stockout = ledger.records.iter().filter(|r| !r.stockout).count() as f64;
    SimulationReport {
        model: ledger.model,
        target_csl: ledger.target_csl,
        days: ledger.records.len(),
        rmse: (sse / n).sqrt(),
        bias,
        lost_sales_total: ledger.records.iter().map(|r| r.lost_sales).sum(),
        excess_inventory_total: ledger.records.iter().map(|r| r.excess_inventory).sum(),
        achieved_csl: no_stockout / n,
    }
}

/// A forecaster together with the history it has observed.
struct Forecaster {
    kind: ForecasterKind,
    spec: ModelSpec,
    schedule: Option<CumulatorSchedule>,
    history: Vec<CensoredObservation>,
    model: Option<FittedModel>,
}

impl Forecaster {
    fn new(kind: ForecasterKind, hours_per_day: usize) -> Result<Self> {
        let (spec, schedule) = match kind {
            ForecasterKind::Ets | ForecasterKind::Tets => (ModelSpec::ses(0.3, 1.0)?, None),
            ForecasterKind::Tetsc => (
                ModelSpec::ana(0.3, 0.3, hours_per_day, 1.0)?,
                Some(CumulatorSchedule::new(hours_per_day, 0)?),
            ),
        };
        Ok(Self {
            kind,
            spec,
            schedule,
            history: Vec::new(),
            model: None,
        })
    }

    fn refit(&mut self, restarts: usize, seed: u64) -> Result<()> {
        let initial = self.model.as_ref().map(|m| m.params.constrained());
        let init_state = self.model.as_ref().map(|m| m.init_state.clone());
        let opts = FitOptions {
            restarts,
            seed,
            initial,
            init_state,
            ..FitOptions::default()
        };
        self.model = Some(fit(&self.history, &self.spec, self.schedule.as_ref(), &opts)?);
        Ok(())
    }

    /// Mean and variance of next day's total demand.
    fn forecast(&self, hours_per_day: usize) -> Result<(f64, f64)> {
        let model = self.model.as_ref().ok_or_else(|| domain("forecaster has not been fitted"))?;
        let s = if self.schedule.is_some() { hours_per_day } else { 1 };
        aggregate_from(&model.system()?, model.base_state(), s)
    }

    fn absorb_day(&mut self, hourly_demand: &[f64], y_max: f64) -> Result<()> {
        let total: f64 = hourly_demand.iter().sum();
        let obs = match self.kind {
            ForecasterKind::Ets => vec![CensoredObservation::uncensored(total.min(y_max))],
            ForecasterKind::Tets => vec![CensoredObservation::clipped(total, y_max)],
            ForecasterKind::Tetsc => {
                apply_daily_censoring(hourly_demand, &DailyLevel::Constant(y_max), hourly_demand.len())?.cumulative
            }
        };
        if let Some(m) = self.model.as_mut() {
            m.update(&obs)?;
        }
        self.history.extend(obs);
        Ok(())
    }
}

/// Runs one forecaster through the closed loop on `demand_hourly`.
pub fn run_newsvendor(
    demand_hourly: &[f64],
    kind: ForecasterKind,
    config: &NewsvendorConfig,
) -> Result<(InventoryLedger, SimulationReport)> {
    config.validate(demand_hourly.len())?;
    let s = config.hours_per_day;
    let z = std_normal_quantile(config.target_csl)?;
    let mut fc = Forecaster::new(kind, s)?;
    let days = demand_hourly.chunks_exact(s);

    let mut records = Vec::with_capacity(config.days);
    for (d, hours) in days.take(config.warmup_days + config.days).enumerate() {
        if d < config.warmup_days {
            fc.absorb_day(hours, f64::INFINITY)?;
            continue;
        }
        let day = d - config.warmup_days;
        if day.is_multiple_of(config.refit_every) {
            fc.refit(config.restarts, config.fit_seed.wrapping_add(day as u64))?;
        }
        let (mean, var) = fc.forecast(s)?;
        let sd = var.sqrt();
        let target = mean + z * sd;
        let y_max = if config.uncensored_world { f64::INFINITY } else { target };
        let demand: f64 = hours.iter().sum();
        let mut rec = DayRecord::settle(day, y_max, demand, mean, sd);
        rec.target_stock = target;
        records.push(rec);
        fc.absorb_day(hours, y_max)?;
    }

    let ledger = InventoryLedger {
        model: kind,
        target_csl: config.target_csl,
        records,
    };
    let report = metrics(&ledger);
    Ok((ledger, report))
}

/// ETS and TETS ledgers on the same demand, for comparing stock trajectories.
pub fn spiral_down_trace(
    demand_hourly: &[f64],
    config: &NewsvendorConfig,
) -> Result<(InventoryLedger, InventoryLedger)> {
    let (ets, _) = run_newsvendor(demand_hourly, ForecasterKind::Ets, config)?;
    let (tets, _) = run_newsvendor(demand_hourly, ForecasterKind::Tets, config)?;
    Ok((ets, tets))
}

/// Hourly demand for one newsvendor replication.
pub fn newsvendor_demand(config: &NewsvendorConfig, seed: u64) -> Result<DemandSeries> {
    let spec = case_spec();
    let init = case_init_state(&spec, NEWSVENDOR_LEVEL);
    simulate_ets(&spec, config.total_hours(), &init, seed)
}

/// One cell of a replication study.
#[derive(Clone, Debug)]
pub struct ReplicationOutcome {
    pub seed: u64,
    pub ledger: InventoryLedger,
    pub report: SimulationReport,
}

/// Runs every (seed, CSL, forecaster) combination. Results come back
/// ordered by seed, then CSL, then forecaster regardless of scheduling.
pub fn run_replications(
    base: &NewsvendorConfig,
    seeds: &[u64],
    csls: &[f64],
    models: &[ForecasterKind],
) -> Result<Vec<ReplicationOutcome>> {
    let demands: Vec<(u64, DemandSeries)> = seeds
        .iter()
        .map(|&seed| newsvendor_demand(base, seed).map(|d| (seed, d)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, f64, ForecasterKind)> = (0..demands.len())
        .flat_map(|i| csls.iter().flat_map(move |&c| models.iter().map(move |&m| (i, c, m))))
        .collect();
    jobs.par_iter()
        .map(|&(i, csl, model)| {
            let (seed, demand) = &demands[i];
            let config = NewsvendorConfig {
                target_csl: csl,
                fit_seed: *seed,
                ..base.clone()
            };
            let (ledger, report) = run_newsvendor(&demand.values, model, &config)?;
            Ok(ReplicationOutcome {
                seed: *seed,
                ledger,
                report,
            })
        })
        .collect()
}

/// Median of a non-empty slice (mean of the two middle values for even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Element-wise median of reports sharing a (CSL, forecaster) cell.
pub fn median_reports(outcomes: &[ReplicationOutcome]) -> Vec<SimulationReport> {
    let mut keys: Vec<(u64, ForecasterKind)> = outcomes
        .iter()
        .map(|o| (o.report.target_csl.to_bits(), o.report.model))
        .collect();
    keys.sort_by(|a, b| f64::from_bits(a.0).total_cmp(&f64::from_bits(b.0)).then(a.1.cmp(&b.1)));
    keys.dedup();
    keys.into_iter()
        .map(|(csl_bits, model)| {
            let cell: Vec<&SimulationReport> = outcomes
                .iter()
                .map(|o| &o.report)
                .filter(|r| r.target_csl.to_bits() == csl_bits && r.model == model)
                .collect();
            let med = |f: fn(&SimulationReport) -> f64| median(&cell.iter().map(|r| f(r)).collect::<Vec<_>>());
            SimulationReport {
                model,
                target_csl: f64::from_bits(csl_bits),
                days: cell[0].days,
                rmse: med(|r| r.rmse),
                bias: med(|r| r.bias),
                lost_sales_total: med(|r| r.lost_sales_total),
                excess_inventory_total: med(|r| r.excess_inventory_total),
                achieved_csl: med(|r| r.achieved_csl),
            }
        })
        .collect()
}
