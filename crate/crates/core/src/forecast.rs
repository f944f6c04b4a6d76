//! Gaussian multi-step forecasts and the next-cycle aggregate distribution.

use serde::{Deserialize, Serialize};

use crate::aggregation::{augmented_init, AugmentedSystem, CumulatorSchedule};
use crate::error::{domain, Result};
use crate::estimation::FittedModel;
use crate::filter::StateSpace;
use crate::model::SystemMatrices;
use crate::normal::std_normal_quantile;

/// Per-horizon forecast moments plus the moments of the sum over the next
/// `cycle_length` steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastDistribution {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub cycle_length: usize,
    pub aggregate_mean: f64,
    pub aggregate_variance: f64,
}

impl ForecastDistribution {
    pub fn horizons(&self) -> usize {
        self.mean.len()
    }

    /// Central interval at horizon `h` (1-based).
    pub fn interval(&self, h: usize, level: f64) -> Result<(f64, f64)> {
        if h == 0 || h > self.mean.len() {
            return Err(domain(format!("horizon {h} outside 1..={}", self.mean.len())));
        }
        interval(self.mean[h - 1], self.variance[h - 1], level)
    }

    pub fn aggregate_sd(&self) -> f64 {
        self.aggregate_variance.sqrt()
    }
}

fn check_horizon(h: usize) -> Result<()> {
    if h == 0 {
        Err(domain("forecast horizon must be >= 1"))
    } else {
        Ok(())
    }
}

/// `mean[j] = w F^{j-1} x` for `j = 1..=h`.
pub fn point_forecast_from(system: &SystemMatrices, state: &[f64], h: usize) -> Vec<f64> {
    let mut x = state.to_vec();
    let mut next = vec![0.0; x.len()];
    (0..h)
        .map(|_| {
            let m = system.predict(&x);
            system.advance_into(&x, 0.0, &mut next);
            std::mem::swap(&mut x, &mut next);
            m
        })
        .collect()
}

/// `variance[j] = sigma2 (1 + sum_{i=1}^{j-1} (w F^{i-1} g)^2)`.
pub fn forecast_variance_from(system: &SystemMatrices, h: usize) -> Vec<f64> {
    let mut v = system.g().as_slice().to_vec();
    let mut next = vec![0.0; v.len()];
    let mut acc = 1.0;
    let mut out = Vec::with_capacity(h);
    for _ in 0..h {
        out.push(system.sigma2() * acc);
        let c = system.predict(&v);
        acc += c * c;
        system.advance_into(&v, 0.0, &mut next);
        std::mem::swap(&mut v, &mut next);
    }
    out
}

/// Mean and variance of the sum of the next `s` observations, obtained by
/// running the augmented system with the accumulator reset at the first
/// step.
pub fn aggregate_from(system: &SystemMatrices, state: &[f64], s: usize) -> Result<(f64, f64)> {
    let schedule = CumulatorSchedule::new(s, 0)?;
    let aug = AugmentedSystem::new(system.clone(), schedule);
    let n = aug.dim();
    let last = n - 1;

    let mut x = augmented_init(state);
    let mut next = vec![0.0; n];
    for t in 0..s {
        aug.system_at(t).advance_into(&x, 0.0, &mut next);
        std::mem::swap(&mut x, &mut next);
    }
    let mean = x[last];

    // loading of the innovation at step j on the accumulator after step s
    let g = aug.system_at(0).g().as_slice().to_vec();
    let mut psi2 = 0.0;
    for j in 0..s {
        let mut v = g.clone();
        for t in j + 1..s {
            aug.system_at(t).advance_into(&v, 0.0, &mut next);
            std::mem::swap(&mut v, &mut next);
        }
        psi2 += v[last] * v[last];
    }
    Ok((mean, system.sigma2() * psi2))
}

pub fn point_forecast(fitted: &FittedModel, h: usize) -> Result<Vec<f64>> {
    check_horizon(h)?;
    Ok(point_forecast_from(&fitted.system()?, fitted.base_state(), h))
}

pub fn forecast_variance(fitted: &FittedModel, h: usize) -> Result<Vec<f64>> {
    check_horizon(h)?;
    Ok(forecast_variance_from(&fitted.system()?, h))
}

/// Moments of the sum over the next full cycle. The fitted model is
/// assumed to end at a cycle boundary.
pub fn aggregate_next_cycle(fitted: &FittedModel, schedule: &CumulatorSchedule) -> Result<(f64, f64)> {
    aggregate_from(&fitted.system()?, fitted.base_state(), schedule.s)
}

/// Full forecast distribution for `h` steps; the aggregate covers one
/// cycle of the given schedule, or of the model's own schedule, or a single
/// step when neither exists.
pub fn forecast(
    fitted: &FittedModel,
    h: usize,
    schedule: Option<&CumulatorSchedule>,
) -> Result<ForecastDistribution> {
    check_horizon(h)?;
    let system = fitted.system()?;
    let s = schedule.or(fitted.schedule.as_ref()).map_or(1, |c| c.s);
    let (aggregate_mean, aggregate_variance) = aggregate_from(&system, fitted.base_state(), s)?;
    Ok(ForecastDistribution {
        mean: point_forecast_from(&system, fitted.base_state(), h),
        variance: forecast_variance_from(&system, h),
        cycle_length: s,
        aggregate_mean,
        aggregate_variance,
    })
}

/// Stock level covering the aggregate demand with probability `csl`.
pub fn csl_quantile(dist: &ForecastDistribution, csl: f64) -> Result<f64> {
    let z = std_normal_quantile(csl)
        .map_err(|_| domain(format!("cycle service level must lie in (0, 1), got {csl}")))?;
    Ok(dist.aggregate_mean + z * dist.aggregate_variance.sqrt())
}

/// Central `level` interval of `N(mean, variance)`.
pub fn interval(mean: f64, variance: f64, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(domain(format!("interval level must lie in (0, 1), got {level}")));
    }
    let half = std_normal_quantile(0.5 + 0.5 * level)? * variance.sqrt();
    Ok((mean - half, mean + half))
}
