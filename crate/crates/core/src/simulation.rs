//! Synthetic demand and the censoring mechanisms applied to it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{domain, Error, Result};
use crate::filter::CensoredObservation;
use crate::model::ModelSpec;

/// Hourly level used for the saturation and daily-censoring studies.
pub const CASE_LEVEL: f64 = 10.0;
/// Amplitude of the intra-day seasonal shape.
pub const CASE_SEASONAL_AMPLITUDE: f64 = 2.0;
/// Business hours per day.
pub const HOURS_PER_DAY: usize = 12;

/// A simulated latent series together with everything needed to
/// regenerate it.
#[derive(Clone, Debug, PartialEq)]
pub struct DemandSeries {
    pub values: Vec<f64>,
    pub innovations: Vec<f64>,
    pub spec: ModelSpec,
    pub init_state: Vec<f64>,
    pub seed: u64,
}

impl DemandSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// ANA(alpha = 0.99, gamma = 0.006, sigma2 = 0.02) with a 12-hour day.
pub fn case_spec() -> ModelSpec {
    ModelSpec::ana(0.99, 0.006, HOURS_PER_DAY, 0.02).expect("case parameters are admissible")
}

/// Initial state with the given level, zero slope and a smooth intra-day
/// seasonal shape `-A cos(2 pi k / m)` (low at opening, peak mid-day,
/// summing to zero over the cycle).
pub fn case_init_state(spec: &ModelSpec, level: f64) -> Vec<f64> {
    let dim = spec.state_dim();
    let m = spec.season_length();
    let mut x = vec![0.0; dim];
    x[0] = level;
    let offset = dim - m;
    for k in 0..m {
        let phase = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
        x[offset + m - 1 - k] = -CASE_SEASONAL_AMPLITUDE * phase.cos();
    }
    x
}

/// Iterates `x_t = F x_{t-1} + g e_t`, `y_t = w x_{t-1} + e_t` with
/// `e_t ~ N(0, sigma2)` from a seeded ChaCha8 stream. `sigma2 == 0` gives
/// the deterministic trajectory.
pub fn simulate_ets(spec: &ModelSpec, n: usize, init_state: &[f64], seed: u64) -> Result<DemandSeries> {
    spec.validate_structure()?;
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if init_state.len() != spec.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.state_dim(),
            found: init_state.len(),
        });
    }
    let system = spec.with_sigma2(1.0).system()?;
    let noise = Normal::new(0.0, spec.sigma2.sqrt()).map_err(|e| domain(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = init_state.to_vec();
    let mut next = vec![0.0; x.len()];
    let mut values = Vec::with_capacity(n);
    let mut innovations = Vec::with_capacity(n);
    for _ in 0..n {
        let e = noise.sample(&mut rng);
        values.push(system.predict(&x) + e);
        innovations.push(e);
        system.advance_into(&x, e, &mut next);
        std::mem::swap(&mut x, &mut next);
    }
    Ok(DemandSeries {
        values,
        innovations,
        spec: spec.clone(),
        init_state: init_state.to_vec(),
        seed,
    })
}

/// Per-observation saturation: every value is clipped at `level`.
pub fn apply_saturation(demand: &[f64], level: f64) -> Vec<CensoredObservation> {
    demand
        .iter()
        .map(|&y| CensoredObservation::clipped(y, level))
        .collect()
}

/// Daily stock levels.
#[derive(Clone, Debug, PartialEq)]
pub enum DailyLevel {
    Constant(f64),
    PerDay(Vec<f64>),
}

impl DailyLevel {
    fn for_day(&self, day: usize) -> Result<f64> {
        match self {
            DailyLevel::Constant(v) => Ok(*v),
            DailyLevel::PerDay(v) => v
                .get(day)
                .copied()
                .ok_or_else(|| domain(format!("no stock level given for day {day}"))),
        }
    }
}

/// One day of the daily-censoring mechanism.
#[derive(Clone, Debug, PartialEq)]
pub struct DaySummary {
    pub level: f64,
    pub demand: f64,
    pub sales: f64,
    pub lost_sales: f64,
    /// Zero-based hour at which stock ran out.
    pub stockout_hour: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DailyCensoring {
    pub hourly_sales: Vec<f64>,
    /// Within-day cumulative sales, censored at the day's stock level.
    pub cumulative: Vec<CensoredObservation>,
    pub days: Vec<DaySummary>,
}

/// Applies a daily stock constraint to hourly demand. Once cumulative
/// demand reaches the stock level the shelf is empty, so every remaining
/// hour that day records zero sales and a censored cumulative value equal
/// to the level. A trailing partial day is dropped.
pub fn apply_daily_censoring(demand: &[f64], levels: &DailyLevel, s: usize) -> Result<DailyCensoring> {
    if s == 0 {
        return Err(domain("observations per day must be >= 1"));
    }
    let n_days = demand.len() / s;
    let mut out = DailyCensoring {
        hourly_sales: Vec::with_capacity(n_days * s),
        cumulative: Vec::with_capacity(n_days * s),
        days: Vec::with_capacity(n_days),
    };
    for (day, hours) in demand.chunks_exact(s).enumerate() {
        let level = levels.for_day(day)?;
        if level.is_nan() {
            return Err(domain(format!("stock level for day {day} is NaN")));
        }
        let mut cum_demand = 0.0;
        let mut cum_sales = 0.0;
        let mut stockout_hour = None;
        for (h, &d) in hours.iter().enumerate() {
            cum_demand += d;
            let prev = cum_sales;
            let obs = if stockout_hour.is_some() || cum_demand >= level {
                stockout_hour.get_or_insert(h);
                CensoredObservation::new(level, level)?
            } else {
                CensoredObservation::uncensored(cum_demand)
            };
            cum_sales = obs.value();
            out.hourly_sales.push(if h == 0 { cum_sales } else { cum_sales - prev });
            out.cumulative.push(CensoredObservation::new(cum_sales, level)?);
        }
        out.days.push(DaySummary {
            level,
            demand: cum_demand,
            sales: cum_sales,
            lost_sales: cum_demand - cum_sales,
            stockout_hour,
        });
    }
    Ok(out)
}

/// Sums of consecutive blocks of `s` values; a trailing partial block is dropped.
pub fn daily_totals(values: &[f64], s: usize) -> Vec<f64> {
    values.chunks_exact(s).map(|c| c.iter().sum()).collect()
}
