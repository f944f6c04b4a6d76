//! Independent reference implementations used as test oracles. None of
//! these call into the filtering or normal-tail code of the library.

#![allow(dead_code)]

use proptest::prelude::*;
use tets_core::{ModelKind, ModelSpec, SystemMatrices};

/// Plain row-major copy of a system, detached from the library types.
#[derive(Clone, Debug)]
pub struct Dense {
    pub f: Vec<Vec<f64>>,
    pub w: Vec<f64>,
    pub g: Vec<f64>,
    pub sigma2: f64,
}

impl Dense {
    pub fn from_system(sys: &SystemMatrices) -> Self {
        let n = sys.dim();
        Self {
            f: (0..n).map(|i| (0..n).map(|j| sys.f()[(i, j)]).collect()).collect(),
            w: sys.w().iter().copied().collect(),
            g: sys.g().iter().copied().collect(),
            sigma2: sys.sigma2(),
        }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn advance(&self, x: &[f64], e: f64) -> Vec<f64> {
        self.f
            .iter()
            .zip(&self.g)
            .map(|(row, gi)| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + gi * e)
            .collect()
    }
}

pub struct PlainRun {
    pub states: Vec<Vec<f64>>,
    pub fitted: Vec<f64>,
    pub innovations: Vec<f64>,
    pub loglik: f64,
}

/// Textbook innovations filter with Gaussian likelihood.
pub fn plain_filter(d: &Dense, x0: &[f64], y: &[f64]) -> PlainRun {
    let mut x = x0.to_vec();
    let mut out = PlainRun {
        states: vec![],
        fitted: vec![],
        innovations: vec![],
        loglik: 0.0,
    };
    for &yt in y {
        let p = d.predict(&x);
        let e = yt - p;
        out.loglik += -0.5 * (2.0 * std::f64::consts::PI * d.sigma2).ln() - 0.5 * e * e / d.sigma2;
        x = d.advance(&x, e);
        out.fitted.push(p);
        out.innovations.push(e);
        out.states.push(x.clone());
    }
    out
}

fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Tobit log-likelihood evaluated directly: Gaussian density for exact
/// observations, log upper-tail probability for censored ones, and the
/// conditional mean of the latent innovation driving the state after a
/// censored step. `obs` holds (value, censor level) pairs. Returns NaN
/// once a tail probability leaves the normal floating-point range.
pub fn tobit_loglik_direct(d: &Dense, x0: &[f64], obs: &[(f64, f64)]) -> f64 {
    let sigma = d.sigma2.sqrt();
    let mut x = x0.to_vec();
    let mut ll = 0.0;
    for &(v, c) in obs {
        let p = d.predict(&x);
        let e = if v == c {
            let z = (c - p) / sigma;
            let q = normal_sf(z);
            if q < f64::MIN_POSITIVE {
                // subnormal tail probabilities have lost their digits
                return f64::NAN;
            }
            ll += q.ln();
            sigma * normal_pdf(z) / q
        } else {
            let e = v - p;
            ll += -0.5 * (2.0 * std::f64::consts::PI * d.sigma2).ln() - 0.5 * e * e / d.sigma2;
            e
        };
        x = d.advance(&x, e);
    }
    ll
}

/// Explicit Holt-Winters style recursion driven by given innovations.
/// `seasonal_history[k]` is the seasonal term `k` steps before the start
/// (index 0 is the most recent). Returns the one-step predictions.
pub fn explicit_recursion(
    kind: ModelKind,
    alpha: f64,
    beta: f64,
    gamma: f64,
    level: f64,
    slope: f64,
    seasonal_history: &[f64],
    innovations: &[f64],
) -> Vec<f64> {
    let m = seasonal_history.len();
    // seasonal values in chronological order
    let mut seas: Vec<f64> = seasonal_history.iter().rev().copied().collect();
    let (mut l, mut b) = (level, slope);
    let mut out = Vec::with_capacity(innovations.len());
    for &e in innovations {
        let s_old = if m > 0 { seas[seas.len() - m] } else { 0.0 };
        let trend = if kind.has_trend() { b } else { 0.0 };
        out.push(l + trend + s_old);
        l = l + trend + alpha * e;
        if kind.has_trend() {
            b += beta * e;
        }
        if m > 0 {
            seas.push(s_old + gamma * e);
        }
    }
    out
}

/// Library state vector equivalent to the explicit recursion's start.
pub fn state_vector(kind: ModelKind, level: f64, slope: f64, seasonal_history: &[f64]) -> Vec<f64> {
    let mut x = vec![level];
    if kind.has_trend() {
        x.push(slope);
    }
    x.extend_from_slice(seasonal_history);
    x
}

/// Property-test settings shared by the integration tests.
pub fn config() -> ProptestConfig {
    ProptestConfig {
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Random admissible model structure with moderate parameters.
pub fn arb_spec() -> impl Strategy<Value = ModelSpec> {
    (0usize..3, 0.05f64..0.95, 0.01f64..0.5, 0.05f64..0.9, 2usize..6, 0.1f64..4.0).prop_map(
        |(k, a, b, g, m, s2)| match k {
            0 => ModelSpec::ses(a, s2).unwrap(),
            1 => ModelSpec::ana(a, g, m, s2).unwrap(),
            _ => ModelSpec::aaa(a, b, g, m, s2).unwrap(),
        },
    )
}

/// Random initial state and series of the given length range for `spec`.
pub fn arb_spec_state_series(len: std::ops::Range<usize>) -> impl Strategy<Value = (ModelSpec, Vec<f64>, Vec<f64>)> {
    arb_spec().prop_flat_map(move |spec| {
        let n = spec.state_dim();
        (
            Just(spec),
            proptest::collection::vec(-5.0f64..5.0, n),
            proptest::collection::vec(-20.0f64..20.0, len.clone()),
        )
    })
}
