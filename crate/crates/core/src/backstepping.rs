//! Adaptive backstepping with tuning functions for strict-feedback plants,
//! paired with the composite-learning update law.
//!
//! Every virtual control `α_i` is a function of `x_1..x_i`, `θ̂` and the
//! reference derivatives, and `α_i` itself contains first partials of
//! `α_{i-1}`. The recursion is therefore evaluated on [`Jet`]s of order
//! `n - 1` over all of those inputs: each step differentiates the previous
//! virtual control once, so the final control `u` comes out as a plain value
//! and every partial used along the way is exact.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::jet::{dot, Jet, JetSpace};
use crate::plants::StrictFeedbackPlant;

#[derive(Debug, Clone, PartialEq)]
pub struct BacksteppingGains {
    pub c: Vec<f64>,
    pub gamma: f64,
    pub k4: f64,
}

impl BacksteppingGains {
    pub fn new(c: Vec<f64>, gamma: f64, k4: f64) -> Result<Self> {
        if let Some(bad) = c.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::domain(
                "c",
                format!("all gains must be positive, got {bad}"),
            ));
        }
        for (key, v) in [("gamma", gamma), ("k4", k4)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(key, format!("must be positive, got {v}")));
            }
        }
        Ok(Self { c, gamma, k4 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacksteppingEvaluation {
    /// Tracking errors `z_1..z_n`.
    pub z: DVector<f64>,
    /// Virtual controls `α_1..α_{n-1}`.
    pub alpha: Vec<f64>,
    /// Tuning functions `τ_1..τ_n`.
    pub tau: Vec<DVector<f64>>,
    /// Row `i` holds `∂α_{i+1}/∂θ̂`.
    pub dalpha_dtheta: Vec<DVector<f64>>,
    /// Row `i` holds `∂α_{i+1}/∂x_j` for `j = 1..n` (zero beyond `j = i+1`).
    pub dalpha_dx: Vec<DVector<f64>>,
    /// Row `i` holds `∂α_{i+1}/∂x_r^{(k)}` for `k = 0..n-1`.
    pub dalpha_dref: Vec<DVector<f64>>,
    pub u: f64,
}

impl BacksteppingEvaluation {
    pub fn order(&self) -> usize {
        self.z.len()
    }

    /// Final tuning function `τ_n`.
    pub fn tau_n(&self) -> &DVector<f64> {
        self.tau.last().expect("at least one tuning function")
    }

    /// `Σ_{j=2}^{n} z_j ∂α_{j-1}/∂θ̂`.
    pub fn theta_coupling(&self) -> DVector<f64> {
        let p = self.tau_n().len();
        self.dalpha_dtheta
            .iter()
            .enumerate()
            .fold(DVector::zeros(p), |acc, (k, d)| acc + d * self.z[k + 1])
    }
}

fn nonfinite(stage: String) -> Error {
    Error::NonFinite { stage }
}

/// Tracking errors, virtual controls, tuning functions and the control `u`.
///
/// `reference` holds `x_r, ẋ_r, …, x_r^{(n)}`.
pub fn evaluate_backstepping(
    plant: &StrictFeedbackPlant,
    x: &DVector<f64>,
    theta_hat: &DVector<f64>,
    reference: &[f64],
    gains: &BacksteppingGains,
) -> Result<BacksteppingEvaluation> {
    let n = plant.order;
    let p = plant.param_dim;
    if n < 2 {
        return Err(Error::DimensionMismatch {
            context: "evaluate_backstepping order",
            expected: 2,
            found: n,
        });
    }
    for (context, expected, found) in [
        ("evaluate_backstepping x", n, x.len()),
        ("evaluate_backstepping theta_hat", p, theta_hat.len()),
        ("evaluate_backstepping reference", n + 1, reference.len()),
        ("evaluate_backstepping gains", n, gains.c.len()),
    ] {
        if expected != found {
            return Err(Error::DimensionMismatch {
                context,
                expected,
                found,
            });
        }
    }
    let gamma = gains.gamma;

    // Variable layout: x_1..x_n, θ̂_1..θ̂_p, x_r^{(0)}..x_r^{(n-1)}.
    let theta_var = |k: usize| n + k;
    let ref_var = |k: usize| n + p + k;
    let space = JetSpace::get(2 * n + p, n - 1);
    let xs: Vec<Jet> = (0..n).map(|j| Jet::variable(&space, j, x[j])).collect();
    let th: Vec<Jet> = (0..p)
        .map(|k| Jet::variable(&space, theta_var(k), theta_hat[k]))
        .collect();
    let rs: Vec<Jet> = (0..n)
        .map(|k| Jet::variable(&space, ref_var(k), reference[k]))
        .collect();

    let phis: Vec<Vec<Jet>> = (1..=n).map(|i| plant.stage_regressor(i, &xs)).collect();
    let psis: Vec<Jet> = (1..=n).map(|i| plant.stage_known(i, &xs)).collect();

    let z1 = &xs[0] - &rs[0];
    let mut alpha = -(&z1 * gains.c[0]) - dot(&phis[0], &th) - &psis[0];
    if !alpha.is_finite() {
        return Err(nonfinite("alpha_1".into()));
    }
    let mut tau: Vec<Jet> = phis[0].iter().map(|f| f * &z1).collect();

    let values = |v: &[Jet]| DVector::from_iterator(v.len(), v.iter().map(Jet::value));
    let mut z_jets = vec![z1];
    let mut out = BacksteppingEvaluation {
        z: DVector::zeros(n),
        alpha: vec![alpha.value()],
        tau: vec![values(&tau)],
        dalpha_dtheta: Vec::with_capacity(n - 1),
        dalpha_dx: Vec::with_capacity(n - 1),
        dalpha_dref: Vec::with_capacity(n - 1),
        u: 0.0,
    };
    // ∂α_k/∂θ̂ for k = 1..i-1, kept as jets for the cross terms of later steps.
    let mut theta_partials: Vec<Vec<Jet>> = Vec::with_capacity(n - 1);

    for i in 2..=n {
        let prev = &alpha;
        let d_x: Vec<Jet> = (0..i - 1).map(|j| prev.partial(j)).collect();
        let d_th: Vec<Jet> = (0..p).map(|k| prev.partial(theta_var(k))).collect();
        let d_r: Vec<Jet> = (0..i - 1).map(|k| prev.partial(ref_var(k))).collect();

        let mut row_x = DVector::zeros(n);
        for (j, d) in d_x.iter().enumerate() {
            row_x[j] = d.value();
        }
        let mut row_r = DVector::zeros(n);
        for (k, d) in d_r.iter().enumerate() {
            row_r[k] = d.value();
        }
        out.dalpha_dx.push(row_x);
        out.dalpha_dref.push(row_r);
        out.dalpha_dtheta.push(values(&d_th));

        let z_i = &xs[i - 1] - prev - &rs[i - 1];

        // Modified regressor w_i = φ_i − Σ_j ∂α_{i-1}/∂x_j φ_j.
        let w: Vec<Jet> = (0..p)
            .map(|k| {
                d_x.iter()
                    .enumerate()
                    .fold(phis[i - 1][k].clone(), |acc, (j, d)| acc - d * &phis[j][k])
            })
            .collect();
        tau = tau.iter().zip(&w).map(|(t, wk)| t + &(wk * &z_i)).collect();

        let mut next = -&z_jets[i - 2] - &(&z_i * gains.c[i - 1]) - &psis[i - 1];
        for (j, d) in d_x.iter().enumerate() {
            next = next + d * &(&xs[j + 1] + &psis[j]);
        }
        next = next - dot(&w, &th);
        next = next + dot(&d_th, &tau) * gamma;
        if i >= 3 {
            // Σ_{k=2}^{i-1} z_k ∂α_{k-1}/∂θ̂, contracted with w_i.
            let coupling: Vec<Jet> = (0..p)
                .map(|c| {
                    (2..i).fold(z_jets[0].lift(0.0), |acc, k| {
                        acc + &z_jets[k - 1] * &theta_partials[k - 2][c]
                    })
                })
                .collect();
            next = next + dot(&coupling, &w) * gamma;
        }
        for (j, d) in d_r.iter().enumerate() {
            next = next + d * &rs[j + 1];
        }
        if i == n {
            next = next + reference[n];
        }
        if !next.is_finite() {
            let stage = if i == n {
                "u".to_string()
            } else {
                format!("alpha_{i}")
            };
            return Err(nonfinite(stage));
        }

        theta_partials.push(d_th);
        z_jets.push(z_i);
        out.tau.push(values(&tau));
        if i < n {
            out.alpha.push(next.value());
        }
        alpha = next;
    }

    out.z = values(&z_jets);
    out.u = alpha.value();
    Ok(out)
}

/// Composite-learning update:
/// `θ̂̇ = γτ_n + k₄γ[Z − Wθ̂ + γW(Σ_{j≥2} z_j ∂α_{j-1}/∂θ̂)ᵀ]`.
pub fn backstepping_update(
    eval: &BacksteppingEvaluation,
    z: &DVector<f64>,
    w: &DMatrix<f64>,
    theta_hat: &DVector<f64>,
    gains: &BacksteppingGains,
) -> DVector<f64> {
    let g = gains.gamma;
    let correction = z - w * theta_hat + w * eval.theta_coupling() * g;
    eval.tau_n() * g + correction * (gains.k4 * g)
}

/// Classical tuning-function update `θ̂̇ = γτ_n`.
pub fn tuning_function_update(
    eval: &BacksteppingEvaluation,
    gains: &BacksteppingGains,
) -> DVector<f64> {
    eval.tau_n() * gains.gamma
}

/// `½Σz_i² + θ̃ᵀθ̃/(2γ)`.
pub fn tracking_lyapunov(
    eval: &BacksteppingEvaluation,
    theta_tilde: &DVector<f64>,
    gamma: f64,
) -> f64 {
    0.5 * eval.z.norm_squared() + theta_tilde.norm_squared() / (2.0 * gamma)
}
