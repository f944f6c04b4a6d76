//! Temporal aggregation through a cumulator state.
//!
//! The base system is extended with one extra state `y*_A`, the running
//! within-cycle sum of the latent series:
//!
//! ```text
//! [x_t  ]   [F  0  ] [x_{t-1}  ]   [g]
//! [yA_t ] = [w  C_t] [yA_{t-1} ] + [1] e_t,      yA_t observed as min(yA_t*, Ymax)
//! ```
//!
//! with `C_t = 0` at the first step of each cycle and 1 otherwise. The
//! augmented system has time-varying `F_t+` and `w_t+ = [w C_t]` but is
//! otherwise an ordinary innovations system, so the plain Tobit recursion
//! applies unchanged.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::filter::{filter_with, CensoredObservation, FilterResult, StateSpace};
use crate::model::SystemMatrices;

/// Cycle layout: `s` steps per cycle, first cycle starting at `origin`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CumulatorSchedule {
    pub s: usize,
    #[serde(default)]
    pub origin: usize,
}

impl CumulatorSchedule {
    pub fn new(s: usize, origin: usize) -> Result<Self> {
        if s == 0 {
            return Err(domain("cycle length s must be >= 1"));
        }
        Ok(Self { s, origin })
    }

    /// Zero-based position of `t` within its cycle.
    pub fn phase(&self, t: usize) -> usize {
        (t as i64 - self.origin as i64).rem_euclid(self.s as i64) as usize
    }
}

/// `C_t`: 0 at the first step of a cycle, 1 otherwise.
pub fn cumulator(t: usize, schedule: &CumulatorSchedule) -> u8 {
    u8::from(schedule.phase(t) != 0)
}

/// Builds `(F_t+, w_t+, g+)` for a given cumulator value, returned as a
/// system of dimension `n + 1` sharing the base variance.
pub fn augment(base: &SystemMatrices, c: u8) -> SystemMatrices {
    let n = base.dim();
    let c = f64::from(c);
    let mut f = DMatrix::zeros(n + 1, n + 1);
    f.view_mut((0, 0), (n, n)).copy_from(base.f());
    for j in 0..n {
        f[(n, j)] = base.w()[j];
    }
    f[(n, n)] = c;
    let mut w = DVector::zeros(n + 1);
    w.rows_mut(0, n).copy_from(base.w());
    w[n] = c;
    let mut g = DVector::zeros(n + 1);
    g.rows_mut(0, n).copy_from(base.g());
    g[n] = 1.0;
    SystemMatrices::new(f, w, g, base.sigma2()).expect("augmented dimensions are consistent")
}

/// The time-varying augmented system. Only `C_t` changes with `t`, so the
/// two possible matrix sets are built once.
#[derive(Clone, Debug)]
pub struct AugmentedSystem {
    base: SystemMatrices,
    schedule: CumulatorSchedule,
    reset: SystemMatrices,
    accumulate: SystemMatrices,
}

impl AugmentedSystem {
    pub fn new(base: SystemMatrices, schedule: CumulatorSchedule) -> Self {
        let reset = augment(&base, 0);
        let accumulate = augment(&base, 1);
        Self {
            base,
            schedule,
            reset,
            accumulate,
        }
    }

    pub fn base(&self) -> &SystemMatrices {
        &self.base
    }

    pub fn schedule(&self) -> &CumulatorSchedule {
        &self.schedule
    }
}

impl StateSpace for AugmentedSystem {
    fn dim(&self) -> usize {
        self.base.dim() + 1
    }

    #[inline]
    fn system_at(&self, t: usize) -> &SystemMatrices {
        if cumulator(t, &self.schedule) == 0 {
            &self.reset
        } else {
            &self.accumulate
        }
    }
}

/// Base initial state extended with a zero accumulator.
pub fn augmented_init(init_base: &[f64]) -> Vec<f64> {
    let mut x = init_base.to_vec();
    x.push(0.0);
    x
}

/// Filters within-cycle cumulative observations through the augmented
/// system. `init_base` is the state of the base model.
pub fn filter_aggregated(
    cumulative_obs: &[CensoredObservation],
    base: &SystemMatrices,
    schedule: &CumulatorSchedule,
    init_base: &[f64],
) -> Result<FilterResult> {
    let system = AugmentedSystem::new(base.clone(), *schedule);
    filter_with(cumulative_obs, &system, &augmented_init(init_base))
}

/// Latent per-step predictions `w x_{t-1}` recovered from an aggregated
/// filter pass (the `fitted` field there predicts the cumulative value).
pub fn latent_fitted(base: &SystemMatrices, init_base: &[f64], result: &FilterResult) -> Vec<f64> {
    let n = base.dim();
    std::iter::once(init_base)
        .chain(result.states.iter().map(|x| &x[..n]))
        .take(result.len())
        .map(|x| base.predict(x))
        .collect()
}

/// Running within-cycle sums of `values`.
pub fn cumulate(values: &[f64], schedule: &CumulatorSchedule) -> Vec<f64> {
    let mut acc = 0.0;
    values
        .iter()
        .enumerate()
        .map(|(t, v)| {
            acc = if cumulator(t, schedule) == 0 { *v } else { acc + v };
            acc
        })
        .collect()
}

/// Inverse of [`cumulate`]: per-step increments of within-cycle sums.
pub fn decumulate(cumulative: &[f64], schedule: &CumulatorSchedule) -> Vec<f64> {
    cumulative
        .iter()
        .enumerate()
        .map(|(t, v)| {
            if t == 0 || cumulator(t, schedule) == 0 {
                *v
            } else {
                v - cumulative[t - 1]
            }
        })
        .collect()
}
