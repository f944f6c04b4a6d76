//! Maximum-likelihood estimation under censoring.
//!
//! Parameters are optimised in an unconstrained space: smoothing constants
//! through the logistic map onto (0, 1) and the variance through `exp`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::aggregation::{decumulate, AugmentedSystem, CumulatorSchedule};
use crate::error::{domain, Error, Result};
use crate::filter::{default_init_state, filter_with, loglik_in_place, CensoredObservation};
use crate::model::{ModelKind, ModelSpec, SystemMatrices};
use crate::optimizer::{minimize, NelderMeadOptions};

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// Maps unconstrained values `[a, (b), (g), v]` to `[alpha, (beta), (gamma), sigma2]`.
pub fn transform(kind: ModelKind, unconstrained: &[f64]) -> Vec<f64> {
    let k = kind.n_smoothing();
    unconstrained
        .iter()
        .enumerate()
        .map(|(i, &u)| if i < k { logistic(u) } else { u.exp() })
        .collect()
}

/// Inverse of [`transform`].
pub fn untransform(kind: ModelKind, constrained: &[f64]) -> Result<Vec<f64>> {
    let k = kind.n_smoothing();
    if constrained.len() != k + 1 {
        return Err(Error::DimensionMismatch {
            expected: k + 1,
            found: constrained.len(),
        });
    }
    constrained
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if i < k {
                if c > 0.0 && c < 1.0 {
                    Ok((c / (1.0 - c)).ln())
                } else {
                    Err(domain(format!("smoothing constant {c} outside (0, 1)")))
                }
            } else if c > 0.0 && c.is_finite() {
                Ok(c.ln())
            } else {
                Err(domain(format!("sigma2 {c} must be finite and > 0")))
            }
        })
        .collect()
}

/// Model parameters held in optimiser space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr", into = "ParamsRepr")]
pub struct ParameterVector {
    kind: ModelKind,
    unconstrained: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ParamsRepr {
    kind: ModelKind,
    /// Smoothing constants then variance, for reading.
    values: Vec<f64>,
    /// Exact optimiser coordinates; preferred over `values` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    unconstrained: Option<Vec<f64>>,
}

impl TryFrom<ParamsRepr> for ParameterVector {
    type Error = Error;
    fn try_from(r: ParamsRepr) -> Result<Self> {
        match r.unconstrained {
            Some(u) => Self::from_unconstrained(r.kind, u),
            None => Self::from_constrained(r.kind, &r.values),
        }
    }
}

impl From<ParameterVector> for ParamsRepr {
    fn from(p: ParameterVector) -> Self {
        ParamsRepr {
            kind: p.kind,
            values: p.constrained(),
            unconstrained: Some(p.unconstrained),
        }
    }
}

impl ParameterVector {
    pub fn from_unconstrained(kind: ModelKind, unconstrained: Vec<f64>) -> Result<Self> {
        let want = kind.n_smoothing() + 1;
        if unconstrained.len() != want {
            return Err(Error::DimensionMismatch {
                expected: want,
                found: unconstrained.len(),
            });
        }
        Ok(Self {
            kind,
            unconstrained,
        })
    }

    pub fn from_constrained(kind: ModelKind, constrained: &[f64]) -> Result<Self> {
        Ok(Self {
            kind,
            unconstrained: untransform(kind, constrained)?,
        })
    }

    /// Parameters of an existing spec.
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let mut c = spec.smoothing();
        c.push(spec.sigma2);
        Self::from_constrained(spec.kind, &c)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn unconstrained(&self) -> &[f64] {
        &self.unconstrained
    }

    pub fn constrained(&self) -> Vec<f64> {
        transform(self.kind, &self.unconstrained)
    }

    /// `spec` with these parameters substituted.
    pub fn apply(&self, spec: &ModelSpec) -> Result<ModelSpec> {
        if spec.kind != self.kind {
            return Err(domain(format!(
                "parameters for {} applied to {} spec",
                self.kind, spec.kind
            )));
        }
        spec.with_params(&self.constrained())
    }

    pub fn system(&self, spec: &ModelSpec) -> Result<SystemMatrices> {
        self.apply(spec)?.system()
    }
}

/// Estimation controls.
#[derive(Clone, Debug)]
pub struct FitOptions {
    /// Random restarts in addition to the first start.
    pub restarts: usize,
    pub max_evals: usize,
    pub tol: f64,
    pub seed: u64,
    /// First start in constrained space, replacing the conventional one.
    pub initial: Option<Vec<f64>>,
    /// Base-model initial state; heuristic when absent.
    pub init_state: Option<Vec<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 3,
            max_evals: 2000,
            tol: 1e-6,
            seed: 0,
            initial: None,
            init_state: None,
        }
    }
}

/// Outcome of a single optimiser start.
#[derive(Clone, Debug)]
pub struct RestartTrace {
    pub start_loglik: f64,
    pub final_loglik: f64,
    pub evals: usize,
    pub converged: bool,
}

/// An estimated model and the filter state at the end of its data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub params: ParameterVector,
    pub loglik: f64,
    /// Final filter state; carries the accumulator as its last element when
    /// `schedule` is set.
    pub final_state: Vec<f64>,
    /// Base-model initial state the likelihood was evaluated from.
    pub init_state: Vec<f64>,
    #[serde(default)]
    pub schedule: Option<CumulatorSchedule>,
    /// Observations absorbed so far; fixes the cycle phase of the next step.
    pub n_obs: usize,
}

/// The system the likelihood is evaluated under: plain or augmented.
enum Evaluator {
    Plain(SystemMatrices),
    Aggregated(Box<AugmentedSystem>),
}

impl Evaluator {
    fn new(system: SystemMatrices, schedule: Option<&CumulatorSchedule>) -> Self {
        match schedule {
            Some(s) => Evaluator::Aggregated(Box::new(AugmentedSystem::new(system, *s))),
            None => Evaluator::Plain(system),
        }
    }

    fn init(&self, base: &[f64]) -> Vec<f64> {
        match self {
            Evaluator::Plain(_) => base.to_vec(),
            Evaluator::Aggregated(_) => crate::aggregation::augmented_init(base),
        }
    }

    fn loglik(&self, data: &[CensoredObservation], state: &mut Vec<f64>) -> Result<f64> {
        match self {
            Evaluator::Plain(s) => loglik_in_place(data, s, state),
            Evaluator::Aggregated(s) => loglik_in_place(data, s.as_ref(), state),
        }
    }
}

/// Log-likelihood and final state of `data` under fixed parameters.
pub fn score(
    spec: &ModelSpec,
    data: &[CensoredObservation],
    schedule: Option<&CumulatorSchedule>,
    init_state: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let eval = Evaluator::new(spec.system()?, schedule);
    let mut state = eval.init(init_state);
    let ll = eval.loglik(data, &mut state)?;
    Ok((ll, state))
}

fn base_values(data: &[CensoredObservation], schedule: Option<&CumulatorSchedule>) -> (Vec<f64>, Vec<bool>) {
    let values: Vec<f64> = data.iter().map(CensoredObservation::value).collect();
    let censored = data.iter().map(CensoredObservation::is_censored).collect();
    match schedule {
        Some(s) => (decumulate(&values, s), censored),
        None => (values, censored),
    }
}

fn diff_variance(values: &[f64]) -> f64 {
    let d: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    if d.len() < 2 {
        return 1.0;
    }
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
    if var > 0.0 && var.is_finite() {
        var
    } else {
        1.0
    }
}

/// Conventional starting point: all smoothing constants 0.3 and variance
/// of first differences.
pub fn default_start(spec: &ModelSpec, data: &[CensoredObservation], schedule: Option<&CumulatorSchedule>) -> Vec<f64> {
    let (values, _) = base_values(data, schedule);
    let mut start = vec![0.3; spec.kind.n_smoothing()];
    start.push(diff_variance(&values));
    start
}

/// Heuristic initial state of the base model for `data`.
pub fn heuristic_init_state(
    spec: &ModelSpec,
    data: &[CensoredObservation],
    schedule: Option<&CumulatorSchedule>,
) -> Vec<f64> {
    let (values, censored) = base_values(data, schedule);
    default_init_state(spec, &values, &censored)
}

/// Fits by maximising the Tobit log-likelihood. With `schedule` the data
/// are within-cycle cumulative observations and the augmented system is
/// used.
pub fn fit(
    data: &[CensoredObservation],
    spec: &ModelSpec,
    schedule: Option<&CumulatorSchedule>,
    options: &FitOptions,
) -> Result<FittedModel> {
    fit_traced(data, spec, schedule, options).map(|(m, _)| m)
}

/// [`fit`] that also reports every optimiser start.
pub fn fit_traced(
    data: &[CensoredObservation],
    spec: &ModelSpec,
    schedule: Option<&CumulatorSchedule>,
    options: &FitOptions,
) -> Result<(FittedModel, Vec<RestartTrace>)> {
    spec.validate_structure()?;
    let needed = spec.n_params() + spec.season_length();
    if data.len() <= needed {
        return Err(Error::InsufficientData {
            needed,
            found: data.len(),
        });
    }
    let init_state = match &options.init_state {
        Some(x) if x.len() == spec.state_dim() => x.clone(),
        Some(x) => {
            return Err(Error::DimensionMismatch {
                expected: spec.state_dim(),
                found: x.len(),
            })
        }
        None => heuristic_init_state(spec, data, schedule),
    };

    let kind = spec.kind;
    let objective = |u: &[f64]| -> f64 {
        let c = transform(kind, u);
        let Ok(system) = spec.with_params(&c).and_then(|s| s.system()) else {
            return f64::INFINITY;
        };
        let eval = Evaluator::new(system, schedule);
        let mut state = eval.init(&init_state);
        match eval.loglik(data, &mut state) {
            Ok(ll) if ll.is_finite() => -ll,
            _ => f64::INFINITY,
        }
    };

    let conventional = untransform(kind, &default_start(spec, data, schedule))?;
    let first = match &options.initial {
        Some(c) => untransform(kind, c)?,
        None => conventional.clone(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut starts = vec![first];
    for _ in 0..options.restarts {
        let jitter: Vec<f64> = conventional
            .iter()
            .map(|u| {
                let e: f64 = StandardNormal.sample(&mut rng);
                u + e
            })
            .collect::<Vec<f64>>();
        starts.push(jitter);
    }

    let nm = NelderMeadOptions {
        max_evals: options.max_evals,
        tol: options.tol,
        initial_step: 0.5,
    };
    let mut traces = Vec::with_capacity(starts.len());
    let mut best: Option<(Vec<f64>, f64)> = None;
    for x0 in &starts {
        let start_value = objective(x0);
        let m = minimize(objective, x0, &nm);
        traces.push(RestartTrace {
            start_loglik: -start_value,
            final_loglik: -m.value,
            evals: m.evals,
            converged: m.converged,
        });
        if m.value.is_finite() && best.as_ref().is_none_or(|(_, v)| m.value < *v) {
            best = Some((m.x, m.value));
        }
    }
    let Some((u, _)) = best else {
        return Err(Error::EstimationFailed(
            "log-likelihood is not finite at any starting point".into(),
        ));
    };
    let params = ParameterVector::from_unconstrained(kind, u)?;
    let fitted_spec = params.apply(spec)?;
    let (loglik, final_state) = score(&fitted_spec, data, schedule, &init_state)?;
    Ok((
        FittedModel {
            spec: fitted_spec,
            params,
            loglik,
            final_state,
            init_state,
            schedule: schedule.copied(),
            n_obs: data.len(),
        },
        traces,
    ))
}

impl FittedModel {
    /// Builds a model with fixed, known parameters by filtering `data`.
    pub fn with_known_params(
        spec: &ModelSpec,
        data: &[CensoredObservation],
        schedule: Option<&CumulatorSchedule>,
        init_state: Option<Vec<f64>>,
    ) -> Result<Self> {
        let init_state = init_state.unwrap_or_else(|| heuristic_init_state(spec, data, schedule));
        let (loglik, final_state) = score(spec, data, schedule, &init_state)?;
        Ok(Self {
            spec: spec.clone(),
            params: ParameterVector::from_spec(spec)?,
            loglik,
            final_state,
            init_state,
            schedule: schedule.copied(),
            n_obs: data.len(),
        })
    }

    pub fn system(&self) -> Result<SystemMatrices> {
        self.spec.system()
    }

    /// Final state of the base model (without the accumulator).
    pub fn base_state(&self) -> &[f64] {
        &self.final_state[..self.spec.state_dim()]
    }

    /// Re-evaluates the log-likelihood of `data` from the stored initial state.
    pub fn rescore(&self, data: &[CensoredObservation]) -> Result<f64> {
        score(&self.spec, data, self.schedule.as_ref(), &self.init_state).map(|(ll, _)| ll)
    }

    /// Full filter pass over `data` from the stored initial state.
    pub fn filter(&self, data: &[CensoredObservation]) -> Result<crate::filter::FilterResult> {
        let system = self.system()?;
        match &self.schedule {
            Some(s) => crate::aggregation::filter_aggregated(data, &system, s, &self.init_state),
            None => filter_with(data, &system, &self.init_state),
        }
    }

    /// Absorbs further observations into the final state with the current
    /// parameters. The cycle phase continues from `n_obs`.
    pub fn update(&mut self, new_obs: &[CensoredObservation]) -> Result<()> {
        if new_obs.is_empty() {
            return Ok(());
        }
        let system = self.system()?;
        let ll = match &self.schedule {
            Some(s) => {
                let origin = (s.origin as i64 - self.n_obs as i64).rem_euclid(s.s as i64) as usize;
                let shifted = CumulatorSchedule::new(s.s, origin)?;
                let aug = AugmentedSystem::new(system, shifted);
                loglik_in_place(new_obs, &aug, &mut self.final_state)?
            }
            None => loglik_in_place(new_obs, &system, &mut self.final_state)?,
        };
        self.loglik += ll;
        self.n_obs += new_obs.len();
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        if !m.loglik.is_finite() {
            return Err(Error::EstimationFailed("stored log-likelihood is not finite".into()));
        }
        Ok(m)
    }
}
