//! Certainty-equivalence control and parameter update laws for first-order
//! plants.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::plants::FirstOrderPlant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateLaw {
    /// `θ̂̇ = γφx`
    Lyapunov,
    /// Lyapunov law plus the filtered-regressor correction `k₃γ(Y − Qθ̂)`.
    FilteredCl,
    /// Lyapunov law plus the collector correction `k₄γ(Z − Wθ̂)`.
    SpectralCl,
}

impl UpdateLaw {
    pub fn as_str(&self) -> &'static str {
        match self {
            UpdateLaw::Lyapunov => "lyapunov",
            UpdateLaw::FilteredCl => "filtered_cl",
            UpdateLaw::SpectralCl => "spectral_cl",
        }
    }
}

impl fmt::Display for UpdateLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UpdateLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lyapunov" => Ok(UpdateLaw::Lyapunov),
            "filtered_cl" => Ok(UpdateLaw::FilteredCl),
            "spectral_cl" => Ok(UpdateLaw::SpectralCl),
            other => Err(Error::domain(
                "law",
                format!("`{other}` is not one of lyapunov, filtered_cl, spectral_cl"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub theta_hat: DVector<f64>,
    pub gamma: f64,
    pub k1: f64,
    /// `k₃` for the filtered law, `k₄` for the spectral law.
    pub law_gain: f64,
}

impl EstimatorState {
    pub fn new(theta_hat: DVector<f64>, gamma: f64, k1: f64, law_gain: f64) -> Result<Self> {
        for (key, v) in [("gamma", gamma), ("k1", k1), ("law_gain", law_gain)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(key, format!("must be positive, got {v}")));
            }
        }
        if theta_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("theta_hat0", "must be finite"));
        }
        Ok(Self {
            theta_hat,
            gamma,
            k1,
            law_gain,
        })
    }

    /// `θ̃ = θ − θ̂`, for diagnostics only.
    pub fn error(&self, theta: &DVector<f64>) -> DVector<f64> {
        theta - &self.theta_hat
    }
}

/// `u = −k₁x − f(x) − φ(x)ᵀθ̂`.
pub fn ce_control(x: &DVector<f64>, est: &EstimatorState, plant: &FirstOrderPlant) -> DVector<f64> {
    -(x * est.k1) - plant.drift(x) - plant.regressor(x).transpose() * &est.theta_hat
}

/// `θ̂̇ = γφ(x)x`.
pub fn lyapunov_update(x: &DVector<f64>, phi: &DMatrix<f64>, est: &EstimatorState) -> DVector<f64> {
    phi * x * est.gamma
}

/// `θ̂̇ = γφx + k₄γ(Z − Wθ̂)`.
pub fn composite_update(
    x: &DVector<f64>,
    phi: &DMatrix<f64>,
    z: &DVector<f64>,
    w: &DMatrix<f64>,
    est: &EstimatorState,
) -> DVector<f64> {
    lyapunov_update(x, phi, est) + (z - w * &est.theta_hat) * (est.law_gain * est.gamma)
}

/// State-space realization of the stable first-order filters used by the
/// filtered composite-learning baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBankState {
    /// Filtered regressor `a/(s+a)[φᵀ]`, `n × p`.
    pub q: DMatrix<f64>,
    /// Low-pass of `x`.
    pub x_f: DVector<f64>,
    /// Low-pass of `f + u`.
    pub g: DVector<f64>,
    pub y: DVector<f64>,
    pub q_gram: DMatrix<f64>,
    pub a: f64,
}

/// Time derivative of every [`FilterBankState`] component.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBankRates {
    pub q: DMatrix<f64>,
    pub x_f: DVector<f64>,
    pub g: DVector<f64>,
    pub y: DVector<f64>,
    pub q_gram: DMatrix<f64>,
}

impl FilterBankState {
    /// Filters start at rest except `x_f(0) = x(0)`, so the high-pass output
    /// has no initial spike.
    pub fn new(x0: &DVector<f64>, p: usize, a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::domain("filter_a", "must be positive"));
        }
        let n = x0.len();
        Ok(Self {
            q: DMatrix::zeros(n, p),
            x_f: x0.clone(),
            g: DVector::zeros(n),
            y: DVector::zeros(p),
            q_gram: DMatrix::zeros(p, p),
            a,
        })
    }

    /// Filtered state output `y = a(x − x_f) − g`.
    pub fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        (x - &self.x_f) * self.a - &self.g
    }
}

pub fn filter_bank_rhs(
    fb: &FilterBankState,
    x: &DVector<f64>,
    phi: &DMatrix<f64>,
    drift_plus_u: &DVector<f64>,
) -> FilterBankRates {
    let a = fb.a;
    let y_out = fb.output(x);
    FilterBankRates {
        q: (phi.transpose() - &fb.q) * a,
        x_f: (x - &fb.x_f) * a,
        g: (drift_plus_u - &fb.g) * a,
        y: fb.q.transpose() * y_out,
        q_gram: fb.q.transpose() * &fb.q,
    }
}

/// `θ̂̇ = γφx + k₃γ(Y − Qθ̂)`.
pub fn filtered_composite_update(
    x: &DVector<f64>,
    phi: &DMatrix<f64>,
    fb: &FilterBankState,
    est: &EstimatorState,
) -> DVector<f64> {
    lyapunov_update(x, phi, est)
        + (&fb.y - &fb.q_gram * &est.theta_hat) * (est.law_gain * est.gamma)
}
