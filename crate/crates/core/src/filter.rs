//! Tobit innovations recursion.
//!
//! For each observation the filter predicts `y_hat = w x`, then
//!
//! * uncensored (`value < censor_level`): `e = value - y_hat`, contribution
//!   `ln N(e; 0, sigma2)`;
//! * censored (`value == censor_level`): `e = E[e* | e* > c - y_hat]`
//!   `= sigma * lambda((c - y_hat) / sigma)` with `lambda` the inverse Mills
//!   ratio, contribution `ln(1 - Phi((c - y_hat) / sigma))`;
//!
//! and advances `x <- F x + g e`. The innovation variance stays `sigma2`
//! at every step: in the single-source-of-error form there is no state
//! covariance to propagate.

use crate::error::{Error, Result};
use crate::estimation::ParameterVector;
use crate::model::{ModelSpec, SystemMatrices};
use crate::normal::{inverse_mills, log_normal_density, log_survival};

/// An observed value together with the level at which it would have been
/// clipped. `censor_level == +inf` means the observation is exact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CensoredObservation {
    value: f64,
    censor_level: f64,
}

impl CensoredObservation {
    pub fn new(value: f64, censor_level: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::InvalidObservation {
                index: 0,
                reason: format!("value must be finite, got {value}"),
            });
        }
        if censor_level.is_nan() || value > censor_level {
            return Err(Error::InvalidObservation {
                index: 0,
                reason: format!("value {value} exceeds censor level {censor_level}"),
            });
        }
        Ok(Self {
            value,
            censor_level,
        })
    }

    /// An exact observation (censor level `+inf`).
    pub fn uncensored(value: f64) -> Self {
        Self {
            value,
            censor_level: f64::INFINITY,
        }
    }

    /// Clips `latent` at `level`, marking it censored when it reaches the level.
    pub fn clipped(latent: f64, level: f64) -> Self {
        Self {
            value: latent.min(level),
            censor_level: level,
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn censor_level(&self) -> f64 {
        self.censor_level
    }

    pub fn is_censored(&self) -> bool {
        self.value == self.censor_level
    }
}

/// Drops censoring information, as a censoring-blind model would.
pub fn uncensored_view(obs: &[CensoredObservation]) -> Vec<CensoredObservation> {
    obs.iter()
        .map(|o| CensoredObservation::uncensored(o.value))
        .collect()
}

/// A possibly time-varying sequence of system matrices.
pub trait StateSpace {
    fn dim(&self) -> usize;
    fn system_at(&self, t: usize) -> &SystemMatrices;
}

impl StateSpace for SystemMatrices {
    fn dim(&self) -> usize {
        SystemMatrices::dim(self)
    }

    fn system_at(&self, _t: usize) -> &SystemMatrices {
        self
    }
}

/// Result of a single recursion step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub state: Vec<f64>,
    pub prediction: f64,
    pub innovation: f64,
    pub loglik: f64,
    pub censored: bool,
}

/// Output of a full filter pass. `states[t]` is the state after absorbing
/// observation `t`; `fitted[t]` is the prediction made before it.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterResult {
    pub states: Vec<Vec<f64>>,
    pub fitted: Vec<f64>,
    pub innovations: Vec<f64>,
    pub loglik: f64,
    pub censored_flags: Vec<bool>,
}

impl FilterResult {
    pub fn len(&self) -> usize {
        self.fitted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fitted.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

#[inline]
fn innovation_and_loglik(obs: &CensoredObservation, prediction: f64, sys: &SystemMatrices) -> (f64, f64, bool) {
    if obs.is_censored() {
        let sigma = sys.sigma();
        let z = (obs.censor_level - prediction) / sigma;
        (sigma * inverse_mills(z), log_survival(z), true)
    } else {
        let e = obs.value - prediction;
        (e, log_normal_density(e, sys.sigma2()), false)
    }
}

/// Advances `state` by one observation.
pub fn step(state: &[f64], obs: &CensoredObservation, matrices: &SystemMatrices) -> Result<StepOutput> {
    check_dim(matrices.dim(), state.len())?;
    let prediction = matrices.predict(state);
    let (innovation, loglik, censored) = innovation_and_loglik(obs, prediction, matrices);
    Ok(StepOutput {
        state: matrices.advance(state, innovation),
        prediction,
        innovation,
        loglik,
        censored,
    })
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Filters a series through a fixed system.
pub fn filter_series(
    obs: &[CensoredObservation],
    matrices: &SystemMatrices,
    init_state: &[f64],
) -> Result<FilterResult> {
    filter_with(obs, matrices, init_state)
}

/// Filters a series through a possibly time-varying system, keeping the
/// full trajectory.
pub fn filter_with<S: StateSpace + ?Sized>(
    obs: &[CensoredObservation],
    system: &S,
    init_state: &[f64],
) -> Result<FilterResult> {
    if obs.is_empty() {
        return Err(Error::EmptyInput);
    }
    check_dim(system.dim(), init_state.len())?;
    let n = obs.len();
    let mut out = FilterResult {
        states: Vec::with_capacity(n),
        fitted: Vec::with_capacity(n),
        innovations: Vec::with_capacity(n),
        loglik: 0.0,
        censored_flags: Vec::with_capacity(n),
    };
    let mut x = init_state.to_vec();
    for (t, o) in obs.iter().enumerate() {
        let sys = system.system_at(t);
        let pred = sys.predict(&x);
        let (e, ll, censored) = innovation_and_loglik(o, pred, sys);
        let next = sys.advance(&x, e);
        out.fitted.push(pred);
        out.innovations.push(e);
        out.loglik += ll;
        out.censored_flags.push(censored);
        out.states.push(next.clone());
        x = next;
    }
    Ok(out)
}

/// Log-likelihood only, without storing the trajectory. The final state is
/// written to `state`, which also supplies the initial state.
pub fn loglik_in_place<S: StateSpace + ?Sized>(
    obs: &[CensoredObservation],
    system: &S,
    state: &mut Vec<f64>,
) -> Result<f64> {
    if obs.is_empty() {
        return Err(Error::EmptyInput);
    }
    check_dim(system.dim(), state.len())?;
    let mut scratch = vec![0.0; state.len()];
    let mut total = 0.0;
    for (t, o) in obs.iter().enumerate() {
        let sys = system.system_at(t);
        let pred = sys.predict(state);
        let (e, ll, _) = innovation_and_loglik(o, pred, sys);
        sys.advance_into(state, e, &mut scratch);
        std::mem::swap(state, &mut scratch);
        total += ll;
    }
    Ok(total)
}

/// Tobit log-likelihood of `data` under `spec` with its parameters taken
/// from `params`. Inadmissible parameters give `-inf`.
pub fn loglik(
    params: &ParameterVector,
    data: &[CensoredObservation],
    spec: &ModelSpec,
    init_state: &[f64],
) -> f64 {
    let Ok(system) = params.system(spec) else {
        return f64::NEG_INFINITY;
    };
    let mut state = init_state.to_vec();
    match loglik_in_place(data, &system, &mut state) {
        Ok(ll) if !ll.is_nan() => ll,
        _ => f64::NEG_INFINITY,
    }
}

/// Pairs of adjacent-phase differences averaged per phase when building a
/// seasonal starting shape.
const INIT_SAMPLES_PER_PHASE: usize = 20;

/// Heuristic starting state built from the first observations.
///
/// Level is the first uncensored value for non-seasonal models. For
/// seasonal models the seasonal increments `s_k - s_{k-1}` are estimated as
/// mean first differences between consecutive uncensored observations
/// (up to [`INIT_SAMPLES_PER_PHASE`] per phase, earliest first), which is
/// insensitive to a wandering level. Increments are forced to sum to zero
/// over a cycle; phases with no usable pair share the remainder. The level
/// is the first cycle's mean of deseasonalised uncensored values. Slope
/// starts at zero.
pub fn default_init_state(spec: &ModelSpec, values: &[f64], censored: &[bool]) -> Vec<f64> {
    let dim = spec.state_dim();
    let mut x = vec![0.0; dim];
    let is_censored = |t: usize| censored.get(t).copied().unwrap_or(false);
    let first = (0..values.len())
        .find(|&t| !is_censored(t))
        .or(if values.is_empty() { None } else { Some(0) });
    x[0] = first.map_or(0.0, |t| values[t]);
    let m = spec.season_length();
    if m == 0 || values.len() < 2 {
        return x;
    }

    let mut sum = vec![0.0; m];
    let mut count = vec![0usize; m];
    for t in 1..values.len() {
        let k = t % m;
        if count[k] < INIT_SAMPLES_PER_PHASE && !is_censored(t) && !is_censored(t - 1) {
            sum[k] += values[t] - values[t - 1];
            count[k] += 1;
        }
    }
    let mut inc: Vec<Option<f64>> = (0..m).map(|k| (count[k] > 0).then(|| sum[k] / count[k] as f64)).collect();
    let present: f64 = inc.iter().flatten().sum();
    let missing = inc.iter().filter(|d| d.is_none()).count();
    if missing == 0 {
        // a common drift would otherwise accumulate around the cycle
        let drift = present / m as f64;
        inc.iter_mut().flatten().for_each(|d| *d -= drift);
    } else {
        let fill = -present / missing as f64;
        inc.iter_mut().filter(|d| d.is_none()).for_each(|d| *d = Some(fill));
    }
    let mut shape = vec![0.0; m];
    for k in 1..m {
        shape[k] = shape[k - 1] + inc[k].unwrap_or(0.0);
    }
    let centre = shape.iter().sum::<f64>() / m as f64;
    shape.iter_mut().for_each(|s| *s -= centre);

    let first_cycle: Vec<f64> = (0..m.min(values.len()))
        .filter(|&t| !is_censored(t))
        .map(|t| values[t] - shape[t])
        .collect();
    if !first_cycle.is_empty() {
        x[0] = first_cycle.iter().sum::<f64>() / first_cycle.len() as f64;
    } else if let Some(t) = first {
        x[0] = values[t] - shape[t % m];
    }
    let offset = dim - m;
    // phase k enters observation k+1, i.e. block position m-1-k
    for (k, s) in shape.into_iter().enumerate() {
        x[offset + m - 1 - k] = s;
    }
    x
}
