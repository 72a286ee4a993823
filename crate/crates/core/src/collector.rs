//! Excitation collection: the bounded regression pair `Z(t) = W(t)θ`.
//!
//! `W` integrates `φφᵀ` while each eigen-direction whose eigenvalue exceeds
//! `σ_min` is forgotten at its own rate, which keeps every eigenvalue of `W`
//! below `σ_max` without ever discarding a direction that has been excited.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::spectral::{self, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForgettingConfig {
    sigma_min: f64,
    sigma_max: f64,
}

impl ForgettingConfig {
    pub fn new(sigma_min: f64, sigma_max: f64) -> Result<Self> {
        if !(sigma_min > 0.0) {
            return Err(Error::domain("sigma_min", "must be positive"));
        }
        if !(sigma_max > sigma_min) {
            return Err(Error::domain(
                "sigma_max",
                format!("must exceed sigma_min ({sigma_max} <= {sigma_min})"),
            ));
        }
        Ok(Self {
            sigma_min,
            sigma_max,
        })
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    /// Centre of the saturation ramp.
    pub fn mu(&self) -> f64 {
        0.5 * (self.sigma_max + self.sigma_min)
    }

    /// Half-width of the saturation ramp.
    pub fn omega(&self) -> f64 {
        0.5 * (self.sigma_max - self.sigma_min)
    }
}

pub fn saturation(y: f64) -> f64 {
    y.clamp(-1.0, 1.0)
}

/// Per-direction forgetting rate `ρ(λ_i, x)`.
///
/// Zero up to and including `σ_min`; above it the product `ρ·λ_i` ramps from
/// `0` to `λ_max(φφᵀ)` as `λ_i` goes from `σ_min` to `σ_max`.
pub fn forgetting_factor(lambda_i: f64, lambda_max_phi: f64, cfg: &ForgettingConfig) -> f64 {
    if lambda_i <= cfg.sigma_min {
        return 0.0;
    }
    lambda_max_phi / (2.0 * lambda_i) * (saturation((lambda_i - cfg.mu()) / cfg.omega()) + 1.0)
}

/// `λ_max(φφᵀ)`, clamped at zero.
pub fn regressor_strength(phi: &DMatrix<f64>) -> f64 {
    let gram = phi * phi.transpose();
    SymmetricEigen::new(spectral::symmetrize(&gram))
        .eigenvalues
        .max()
        .max(0.0)
}

/// `ϖ = φ (ẋ − drift − u)`.
pub fn varpi(
    phi: &DMatrix<f64>,
    xdot: &DVector<f64>,
    drift: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = phi.ncols();
    for (found, context) in [
        (xdot.len(), "varpi xdot"),
        (drift.len(), "varpi drift"),
        (u.len(), "varpi u"),
    ] {
        if found != n {
            return Err(Error::DimensionMismatch {
                context,
                expected: n,
                found,
            });
        }
    }
    Ok(phi * (xdot - drift - u))
}

/// `Ż` and `Ẇ` given the spectrum of the current `W`.
///
/// Sums run over all clusters; the zero cluster contributes nothing because
/// its forgetting rate is zero.
pub fn collector_derivative(
    z: &DVector<f64>,
    spectrum: &Spectrum,
    phi: &DMatrix<f64>,
    varpi: &DVector<f64>,
    cfg: &ForgettingConfig,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let p = spectrum.dim();
    if phi.nrows() != p || z.len() != p || varpi.len() != p {
        return Err(Error::DimensionMismatch {
            context: "collector_derivative",
            expected: p,
            found: phi.nrows().max(z.len()).max(varpi.len()),
        });
    }
    if let Some(&lowest) = spectrum.distinct_eigenvalues().first() {
        if lowest < 0.0 {
            return Err(Error::PsdViolation {
                eigenvalue: lowest,
                tolerance: spectrum.tol_zero(),
            });
        }
    }
    let strength = regressor_strength(phi);
    let mut zdot = varpi.clone();
    let mut wdot = phi * phi.transpose();
    for (lambda, e) in spectrum.clusters() {
        let rho = forgetting_factor(lambda, strength, cfg);
        if rho != 0.0 {
            zdot -= (e * z) * rho;
            wdot -= e * (rho * lambda);
        }
    }
    Ok((zdot, spectral::symmetrize(&wdot)))
}

/// How `Ż` obtains `ϖ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZMode {
    /// Uses the simulator's exact `ẋ`.
    Derivative,
    /// Derivative-free accumulation from sampled states.
    Substitution,
}

impl ZMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ZMode::Derivative => "derivative",
            ZMode::Substitution => "substitution",
        }
    }
}

/// The pair `(Z, W)` with a cached spectrum of `W`.
#[derive(Debug, Clone)]
pub struct CollectorState {
    pub z: DVector<f64>,
    pub w: DMatrix<f64>,
    spectrum: Spectrum,
    tol_zero: f64,
}

impl CollectorState {
    /// Empty collector: `Z(0) = 0`, `W(0) = 0`.
    pub fn new(p: usize, tol_zero: f64) -> Self {
        let w = DMatrix::zeros(p, p);
        let spectrum =
            spectral::psd_eigensystem(&w, tol_zero).expect("zero matrix has a valid spectrum");
        Self {
            z: DVector::zeros(p),
            w,
            spectrum,
            tol_zero,
        }
    }

    /// Replaces `(Z, W)`, symmetrizing `W` and refreshing the spectrum.
    pub fn set(&mut self, z: DVector<f64>, w: DMatrix<f64>) -> Result<()> {
        let w = spectral::symmetrize(&w);
        self.spectrum = spectral::psd_eigensystem(&w, self.tol_zero)?;
        self.z = z;
        self.w = w;
        Ok(())
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn tol_zero(&self) -> f64 {
        self.tol_zero
    }

    pub fn rank(&self) -> usize {
        self.spectrum.numeric_rank()
    }
}

pub fn collector_rhs(
    state: &CollectorState,
    phi: &DMatrix<f64>,
    varpi_val: &DVector<f64>,
    cfg: &ForgettingConfig,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    collector_derivative(&state.z, &state.spectrum, phi, varpi_val, cfg)
}

/// End point of one substitution step: regressor, state, drift and input.
#[derive(Debug, Clone, Copy)]
pub struct SubstitutionPoint<'a> {
    pub phi: &'a DMatrix<f64>,
    pub x: &'a DVector<f64>,
    pub drift: &'a DVector<f64>,
    pub u: &'a DVector<f64>,
}

/// Advances the derivative-free accumulation of `∫ϖ dτ = ∫φ dx − ∫φ(f + u) dτ`,
/// both integrals by the trapezoid rule.
pub fn z_substitution_step(
    accumulator: &DVector<f64>,
    prev: SubstitutionPoint<'_>,
    next: SubstitutionPoint<'_>,
    dt: f64,
) -> DVector<f64> {
    debug_assert!(dt > 0.0);
    let along_path = (prev.phi + next.phi) * 0.5 * (next.x - prev.x);
    let known = (prev.phi * (prev.drift + prev.u) + next.phi * (next.drift + next.u)) * (0.5 * dt);
    accumulator + along_path - known
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ForgettingConfig {
        ForgettingConfig::new(5.0, 10.0).unwrap()
    }

    #[test]
    fn saturation_regions() {
        assert_eq!(saturation(-2.0), -1.0);
        assert_eq!(saturation(0.3), 0.3);
        assert_eq!(saturation(1.0), 1.0);
    }

    #[test]
    fn forgetting_factor_examples() {
        assert_eq!(forgetting_factor(3.0, 4.0, &cfg()), 0.0);
        assert_eq!(forgetting_factor(5.0, 4.0, &cfg()), 0.0);
        assert!((forgetting_factor(7.5, 6.0, &cfg()) - 0.4).abs() < 1e-15);
        let rho = forgetting_factor(10.0, 6.0, &cfg());
        assert!((rho - 0.6).abs() < 1e-15);
        assert!((rho * 10.0 - 6.0).abs() < 1e-14);
    }

    #[test]
    fn config_rejects_inverted_bounds() {
        assert!(matches!(
            ForgettingConfig::new(5.0, 3.0),
            Err(Error::ConfigDomain { .. })
        ));
        assert!(ForgettingConfig::new(0.0, 3.0).is_err());
        let c = cfg();
        assert_eq!((c.mu(), c.omega()), (7.5, 2.5));
    }

    #[test]
    fn varpi_examples() {
        let plant = crate::plants::first_order_benchmark();
        let x = DVector::from_vec(vec![3.0, 5.0, -3.0]);
        let phi = plant.regressor(&x);
        let u = DVector::zeros(3);
        let drift = plant.drift(&x);
        let xdot = plant.dynamics(&x, &u).unwrap();
        let w = varpi(&phi, &xdot, &drift, &u).unwrap();
        assert!((w - DVector::from_vec(vec![94.0, 98.0, -81.0])).amax() < 1e-12);

        let zero = DMatrix::zeros(3, 3);
        assert_eq!(varpi(&zero, &xdot, &drift, &u).unwrap(), DVector::zeros(3));
        assert_eq!(varpi(&phi, &drift, &drift, &u).unwrap(), DVector::zeros(3));
        assert!(varpi(&phi, &DVector::zeros(2), &drift, &u).is_err());
    }

    #[test]
    fn empty_collector_integrates_raw_excitation() {
        let state = CollectorState::new(3, 1e-8);
        let phi = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 1.0, -1.0, 3.0]);
        let vp = DVector::from_vec(vec![0.5, -0.25, 2.0]);
        let (zdot, wdot) = collector_rhs(&state, &phi, &vp, &cfg()).unwrap();
        assert_eq!(zdot, vp);
        assert!((wdot - &phi * phi.transpose()).amax() < 1e-15);
    }

    #[test]
    fn saturated_direction_has_nonpositive_growth() {
        let mut state = CollectorState::new(3, 1e-8);
        let dir = DVector::from_vec(vec![1.0, 1.0, 0.0]) / 2f64.sqrt();
        let e = &dir * dir.transpose();
        state.set(DVector::zeros(3), &e * 10.0).unwrap();
        let phi = &dir * DMatrix::from_row_slice(1, 2, &[0.7, -1.3]);
        let (_, wdot) = collector_rhs(&state, &phi, &DVector::zeros(3), &cfg()).unwrap();
        let along = &e * &wdot * &e;
        let eig = SymmetricEigen::new(spectral::symmetrize(&along)).eigenvalues;
        assert!(eig.max() <= 1e-12);
    }

    #[test]
    fn forgetting_is_gated_by_current_excitation() {
        let mut state = CollectorState::new(3, 1e-8);
        let w = DMatrix::from_diagonal(&DVector::from_vec(vec![6.0, 0.0, 0.0]));
        state.set(DVector::zeros(3), w).unwrap();
        let (zdot, wdot) =
            collector_rhs(&state, &DMatrix::zeros(3, 2), &DVector::zeros(3), &cfg()).unwrap();
        assert_eq!(wdot, DMatrix::zeros(3, 3));
        assert_eq!(zdot, DVector::zeros(3));
    }

    #[test]
    fn negative_w_is_rejected() {
        let mut state = CollectorState::new(2, 1e-8);
        let bad = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 2.0]));
        assert!(matches!(
            state.set(DVector::zeros(2), bad),
            Err(Error::PsdViolation { .. })
        ));
    }

    #[test]
    fn substitution_step_trivial_cases() {
        let phi = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let acc = DVector::from_vec(vec![0.25, -1.0]);
        let x = DVector::from_vec(vec![1.0, -2.0]);
        let zero = DVector::zeros(2);
        let at = |x| SubstitutionPoint {
            phi: &phi,
            x,
            drift: &zero,
            u: &zero,
        };
        let same = z_substitution_step(&acc, at(&x), at(&x), 1e-3);
        assert_eq!(same, acc);

        let dx = DVector::from_vec(vec![0.5, 0.25]);
        let x2 = &x + &dx;
        let moved = z_substitution_step(&acc, at(&x), at(&x2), 1e-3);
        assert!((moved - (&acc + &phi * &dx)).amax() < 1e-15);
    }
}
