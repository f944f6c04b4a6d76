//! Innovations state-space matrices for the additive ETS family.
//!
//! Every model is a quadruple `(F, w, g, sigma2)` driving
//!
//! ```text
//! x_t  = F x_{t-1} + g e_t
//! y*_t = w x_{t-1} + e_t,     e_t ~ N(0, sigma2)
//! ```
//!
//! State layout is fixed: `[level, (slope), s_t, s_{t-1}, ..., s_{t-m+1}]`.
//! The seasonal block is stored most-recent-first, so the seasonal term
//! that enters the next observation is always the last element.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Additive ETS variants supported by the catalog.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// Simple exponential smoothing, local level only.
    #[serde(rename = "SES")]
    Ses,
    /// Additive error, no trend, additive seasonality.
    #[serde(rename = "ANA")]
    Ana,
    /// Additive error, additive trend, additive seasonality (Holt-Winters).
    #[serde(rename = "AAA")]
    Aaa,
}

impl ModelKind {
    pub fn has_trend(self) -> bool {
        matches!(self, ModelKind::Aaa)
    }

    pub fn has_season(self) -> bool {
        matches!(self, ModelKind::Ana | ModelKind::Aaa)
    }

    /// Number of smoothing constants (excluding `sigma2`).
    pub fn n_smoothing(self) -> usize {
        match self {
            ModelKind::Ses => 1,
            ModelKind::Ana => 2,
            ModelKind::Aaa => 3,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Ses => "SES",
            ModelKind::Ana => "ANA",
            ModelKind::Aaa => "AAA",
        })
    }
}

/// A fully parameterised model specification.
///
/// Serialises as `{kind, alpha, beta, gamma, m, sigma2}` with absent
/// components written as `null`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub alpha: f64,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub m: Option<usize>,
    pub sigma2: f64,
}

impl ModelSpec {
    pub fn ses(alpha: f64, sigma2: f64) -> Result<Self> {
        let spec = Self {
            kind: ModelKind::Ses,
            alpha,
            beta: None,
            gamma: None,
            m: None,
            sigma2,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn ana(alpha: f64, gamma: f64, m: usize, sigma2: f64) -> Result<Self> {
        let spec = Self {
            kind: ModelKind::Ana,
            alpha,
            beta: None,
            gamma: Some(gamma),
            m: Some(m),
            sigma2,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn aaa(alpha: f64, beta: f64, gamma: f64, m: usize, sigma2: f64) -> Result<Self> {
        let spec = Self {
            kind: ModelKind::Aaa,
            alpha,
            beta: Some(beta),
            gamma: Some(gamma),
            m: Some(m),
            sigma2,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks that the components present match `kind` and lie in the
    /// admissible region.
    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        positive("sigma2", self.sigma2)
    }

    /// Same as [`validate`](Self::validate) but admits `sigma2 == 0`, which
    /// is meaningful for simulation only.
    pub(crate) fn validate_structure(&self) -> Result<()> {
        open_unit("alpha", self.alpha)?;
        match (self.kind.has_trend(), self.beta) {
            (true, Some(b)) => open_unit("beta", b)?,
            (true, None) => return Err(domain("AAA requires beta")),
            (false, Some(_)) => return Err(domain(format!("{} takes no beta", self.kind))),
            (false, None) => {}
        }
        match (self.kind.has_season(), self.gamma, self.m) {
            (true, Some(g), Some(m)) => {
                open_unit("gamma", g)?;
                if m < 2 {
                    return Err(domain(format!("seasonal period m must be >= 2, got {m}")));
                }
            }
            (true, _, _) => return Err(domain(format!("{} requires gamma and m", self.kind))),
            (false, None, None) => {}
            (false, _, _) => return Err(domain("SES takes no gamma or m")),
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(domain(format!("sigma2 must be finite and >= 0, got {}", self.sigma2)));
        }
        Ok(())
    }

    /// Seasonal period, or 0 for non-seasonal models.
    pub fn season_length(&self) -> usize {
        self.m.unwrap_or(0)
    }

    pub fn state_dim(&self) -> usize {
        1 + usize::from(self.kind.has_trend()) + self.season_length()
    }

    /// Free parameters: smoothing constants plus `sigma2`.
    pub fn n_params(&self) -> usize {
        self.kind.n_smoothing() + 1
    }

    /// Smoothing constants in canonical order `alpha, (beta), (gamma)`.
    pub fn smoothing(&self) -> Vec<f64> {
        let mut out = vec![self.alpha];
        out.extend(self.beta);
        out.extend(self.gamma);
        out
    }

    /// Returns a copy with smoothing constants and variance replaced by
    /// `constrained = [alpha, (beta), (gamma), sigma2]`.
    pub fn with_params(&self, constrained: &[f64]) -> Result<Self> {
        if constrained.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                found: constrained.len(),
            });
        }
        let mut it = constrained.iter().copied();
        let mut spec = self.clone();
        spec.alpha = it.next().unwrap();
        if spec.kind.has_trend() {
            spec.beta = it.next();
        }
        if spec.kind.has_season() {
            spec.gamma = it.next();
        }
        spec.sigma2 = it.next().unwrap();
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_sigma2(&self, sigma2: f64) -> Self {
        Self {
            sigma2,
            ..self.clone()
        }
    }

    /// Builds the system matrices; fails outside the admissible region.
    pub fn system(&self) -> Result<SystemMatrices> {
        self.validate()?;
        match self.kind {
            ModelKind::Ses => build_ses(self.alpha, self.sigma2),
            ModelKind::Ana => build_ana(
                self.alpha,
                self.gamma.unwrap(),
                self.m.unwrap(),
                self.sigma2,
            ),
            ModelKind::Aaa => build_aaa(
                self.alpha,
                self.beta.unwrap(),
                self.gamma.unwrap(),
                self.m.unwrap(),
                self.sigma2,
            ),
        }
    }
}

fn open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} must lie in (0, 1), got {v}")))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name} must be finite and > 0, got {v}")))
    }
}

/// The `(F, w, g, sigma2)` quadruple of an innovations state-space model.
///
/// Alongside the dense matrices a list of nonzero entries is kept; the
/// filters spend nearly all of their time in `F x + g e` and the ETS
/// transition matrices are very sparse.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemMatrices {
    f: DMatrix<f64>,
    w: DVector<f64>,
    g: DVector<f64>,
    sigma2: f64,
    f_nz: Vec<(usize, usize, f64)>,
    w_nz: Vec<(usize, f64)>,
    g_nz: Vec<(usize, f64)>,
}

impl SystemMatrices {
    /// `w` is the observation loading row, passed as a vector of length n.
    pub fn new(f: DMatrix<f64>, w: DVector<f64>, g: DVector<f64>, sigma2: f64) -> Result<Self> {
        let n = f.nrows();
        if f.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: f.ncols(),
            });
        }
        for len in [w.len(), g.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        positive("sigma2", sigma2)?;
        let mut f_nz = Vec::new();
        for r in 0..n {
            for c in 0..n {
                let v = f[(r, c)];
                if v != 0.0 {
                    f_nz.push((r, c, v));
                }
            }
        }
        let nz = |v: &DVector<f64>| {
            v.iter()
                .enumerate()
                .filter(|(_, x)| **x != 0.0)
                .map(|(i, x)| (i, *x))
                .collect::<Vec<_>>()
        };
        let w_nz = nz(&w);
        let g_nz = nz(&g);
        Ok(Self {
            f,
            w,
            g,
            sigma2,
            f_nz,
            w_nz,
            g_nz,
        })
    }

    pub fn dim(&self) -> usize {
        self.f.nrows()
    }

    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    /// Observation loading (conceptually a 1 x n row).
    pub fn w(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn g(&self) -> &DVector<f64> {
        &self.g
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn with_sigma2(&self, sigma2: f64) -> Result<Self> {
        positive("sigma2", sigma2)?;
        Ok(Self {
            sigma2,
            ..self.clone()
        })
    }

    /// One-step prediction `w x`.
    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.w_nz.iter().map(|&(i, v)| v * x[i]).sum()
    }

    /// Writes `F x + g e` into `out`.
    #[inline]
    pub fn advance_into(&self, x: &[f64], innovation: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for &(r, c, v) in &self.f_nz {
            out[r] += v * x[c];
        }
        for &(i, v) in &self.g_nz {
            out[i] += v * innovation;
        }
    }

    /// `F x + g e` as a new vector.
    pub fn advance(&self, x: &[f64], innovation: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.advance_into(x, innovation, &mut out);
        out
    }
}

/// Local level model: `F = [1]`, `w = [1]`, `g = [alpha]`.
pub fn build_ses(alpha: f64, sigma2: f64) -> Result<SystemMatrices> {
    open_unit("alpha", alpha)?;
    positive("sigma2", sigma2)?;
    SystemMatrices::new(
        DMatrix::from_element(1, 1, 1.0),
        DVector::from_element(1, 1.0),
        DVector::from_element(1, alpha),
        sigma2,
    )
}

/// Additive Holt-Winters with level, slope and an `m`-state seasonal block.
pub fn build_aaa(alpha: f64, beta: f64, gamma: f64, m: usize, sigma2: f64) -> Result<SystemMatrices> {
    open_unit("beta", beta)?;
    holt_winters(alpha, Some(beta), gamma, m, sigma2)
}

/// Level plus `m`-state seasonal block, no slope.
pub fn build_ana(alpha: f64, gamma: f64, m: usize, sigma2: f64) -> Result<SystemMatrices> {
    holt_winters(alpha, None, gamma, m, sigma2)
}

fn holt_winters(
    alpha: f64,
    beta: Option<f64>,
    gamma: f64,
    m: usize,
    sigma2: f64,
) -> Result<SystemMatrices> {
    open_unit("alpha", alpha)?;
    open_unit("gamma", gamma)?;
    positive("sigma2", sigma2)?;
    if m < 2 {
        return Err(domain(format!("seasonal period m must be >= 2, got {m}")));
    }
    let k = if beta.is_some() { 2 } else { 1 };
    let n = k + m;
    let mut f = DMatrix::zeros(n, n);
    let mut w = DVector::zeros(n);
    let mut g = DVector::zeros(n);

    f[(0, 0)] = 1.0;
    w[0] = 1.0;
    g[0] = alpha;
    if let Some(beta) = beta {
        f[(0, 1)] = 1.0;
        f[(1, 1)] = 1.0;
        w[1] = 1.0;
        g[1] = beta;
    }
    // s_t = s_{t-m} + gamma e_t enters at the top of the block, the rest shift down.
    f[(k, n - 1)] = 1.0;
    for i in 1..m {
        f[(k + i, k + i - 1)] = 1.0;
    }
    w[n - 1] = 1.0;
    g[k] = gamma;

    SystemMatrices::new(f, w, g, sigma2)
}
