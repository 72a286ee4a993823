//! Seeded numerical self-checks of the spectral, backstepping and integrator
//! building blocks.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backstepping::{evaluate_backstepping, BacksteppingGains};
use crate::error::Result;
use crate::plants::{second_order_benchmark, third_order_test_plant, StrictFeedbackPlant};
use crate::sim::rk4_step;
use crate::spectral::{self, Spectrum};

/// Random symmetric `p × p` matrix with deliberately repeated eigenvalues
/// about half of the time. With `psd` the spectrum is non-negative and
/// often has a null space.
pub fn random_symmetric(rng: &mut impl Rng, p: usize, psd: bool) -> DMatrix<f64> {
    if !psd && rng.gen_bool(0.5) {
        let a = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
        return (&a + a.transpose()) * 0.5;
    }
    let q = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0))
        .qr()
        .q();
    let distinct = rng.gen_range(1..=p);
    let pool: Vec<f64> = (0..distinct)
        .map(|_| {
            if psd {
                if rng.gen_bool(0.3) {
                    0.0
                } else {
                    rng.gen_range(0.05..5.0)
                }
            } else {
                rng.gen_range(-5.0..5.0)
            }
        })
        .collect();
    let d = DVector::from_fn(p, |i, _| {
        if i < distinct {
            pool[i]
        } else {
            pool[rng.gen_range(0..distinct)]
        }
    });
    let w = &q * DMatrix::from_diagonal(&d) * q.transpose();
    spectral::symmetrize(&w)
}

fn frob(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

/// Largest deviation from the projector identities of one decomposition.
pub fn identity_residual(w: &DMatrix<f64>, s: &Spectrum) -> f64 {
    let p = w.nrows();
    let mut worst = frob(&(s.reconstruct() - w));
    let sum = s
        .projectors()
        .iter()
        .fold(DMatrix::zeros(p, p), |acc, e| acc + e);
    worst = worst.max(frob(&(sum - DMatrix::identity(p, p))));
    for (i, e) in s.projectors().iter().enumerate() {
        worst = worst.max(frob(&(e * e - e)));
        worst = worst.max(frob(&(e - e.transpose())));
        for f in &s.projectors()[i + 1..] {
            worst = worst.max(frob(&(e * f)));
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSuite {
    pub count: usize,
    pub identity_residual: f64,
    /// Largest `λ⁺_min vᵀv − vᵀWv` over test vectors orthogonal to the null space.
    pub lemma_violation: f64,
    /// Largest `‖E₀ W‖`.
    pub complement_residual: f64,
    /// Largest `‖project(project(v)) − project(v)‖∞`.
    pub reprojection_residual: f64,
}

impl SpectralSuite {
    pub fn passed(&self) -> bool {
        self.identity_residual <= 1e-9
            && self.lemma_violation <= 1e-9
            && self.complement_residual <= 1e-9
            && self.reprojection_residual <= 1e-12
    }
}

pub fn spectral_suite(seed: u64, count: usize) -> SpectralSuite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = SpectralSuite {
        count,
        identity_residual: 0.0,
        lemma_violation: f64::NEG_INFINITY,
        complement_residual: 0.0,
        reprojection_residual: 0.0,
    };
    let tol_zero = 1e-9;
    for _ in 0..count {
        let p = rng.gen_range(2..=8);
        let w = random_symmetric(&mut rng, p, false);
        match spectral::eigensystem_scaled(&w, tol_zero) {
            Ok(s) => {
                r.identity_residual = r.identity_residual.max(identity_residual(&w, &s));
                let e0 = s.zero_projector();
                r.complement_residual = r.complement_residual.max(frob(&(&e0 * &w)));
                let v = DVector::from_fn(p, |_, _| rng.gen_range(-1.0..1.0));
                for (_, e) in s.clusters() {
                    let once = spectral::project(&v, e).expect("valid projector");
                    let twice = spectral::project(&once, e).expect("valid projector");
                    r.reprojection_residual = r.reprojection_residual.max((twice - once).amax());
                }
            }
            Err(_) => r.identity_residual = f64::INFINITY,
        }

        let w = random_symmetric(&mut rng, p, true);
        match spectral::psd_eigensystem(&w, tol_zero * 5.0) {
            Ok(s) => {
                let e0 = s.zero_projector();
                r.complement_residual = r.complement_residual.max(frob(&(&e0 * &w)));
                if let Some(lmin) = s.smallest_positive_eigenvalue() {
                    let v = DVector::from_fn(p, |_, _| rng.gen_range(-1.0..1.0));
                    let v = &v - &e0 * &v;
                    let slack = lmin * v.norm_squared() - v.dot(&(&w * &v));
                    r.lemma_violation = r.lemma_violation.max(slack);
                }
            }
            Err(_) => r.lemma_violation = f64::INFINITY,
        }
    }
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialsSuite {
    pub count: usize,
    /// Largest `|forward − central| / max(1, |central|)`.
    pub fd_residual: f64,
    /// Largest deviation from the hand-derived second-order expressions,
    /// scaled by `max(1, |value|)`.
    pub oracle_residual: f64,
}

impl PartialsSuite {
    pub fn passed(&self) -> bool {
        self.fd_residual <= 1e-5 && self.oracle_residual <= 1e-9
    }
}

const FD_STEP: f64 = 1e-6;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Forward-mode partials of every virtual control against central differences.
pub fn finite_difference_residual(
    plant: &StrictFeedbackPlant,
    x: &DVector<f64>,
    theta_hat: &DVector<f64>,
    reference: &[f64],
    gains: &BacksteppingGains,
) -> Result<f64> {
    let n = plant.order;
    let base = evaluate_backstepping(plant, x, theta_hat, reference, gains)?;
    let alphas = |x: &DVector<f64>, th: &DVector<f64>, r: &[f64]| -> Result<Vec<f64>> {
        Ok(evaluate_backstepping(plant, x, th, r, gains)?.alpha)
    };
    let mut worst = 0.0f64;
    let mut record = |plus: Vec<f64>, minus: Vec<f64>, exact: &dyn Fn(usize) -> f64| {
        for i in 0..n - 1 {
            let fd = (plus[i] - minus[i]) / (2.0 * FD_STEP);
            worst = worst.max(rel(exact(i), fd));
        }
    };
    for j in 0..n {
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp[j] += FD_STEP;
        xm[j] -= FD_STEP;
        record(
            alphas(&xp, theta_hat, reference)?,
            alphas(&xm, theta_hat, reference)?,
            &|i| base.dalpha_dx[i][j],
        );
    }
    for k in 0..theta_hat.len() {
        let (mut tp, mut tm) = (theta_hat.clone(), theta_hat.clone());
        tp[k] += FD_STEP;
        tm[k] -= FD_STEP;
        record(
            alphas(x, &tp, reference)?,
            alphas(x, &tm, reference)?,
            &|i| base.dalpha_dtheta[i][k],
        );
    }
    for k in 0..n {
        let (mut rp, mut rm) = (reference.to_vec(), reference.to_vec());
        rp[k] += FD_STEP;
        rm[k] -= FD_STEP;
        record(
            alphas(x, theta_hat, &rp)?,
            alphas(x, theta_hat, &rm)?,
            &|i| base.dalpha_dref[i][k],
        );
    }
    Ok(worst)
}

/// Deviation of the general recursion from the closed-form second-order
/// benchmark expressions.
pub fn second_order_oracle_residual(
    x: &DVector<f64>,
    theta_hat: &DVector<f64>,
    reference: &[f64],
    gains: &BacksteppingGains,
) -> Result<f64> {
    let plant = second_order_benchmark();
    let e = evaluate_backstepping(&plant, x, theta_hat, reference, gains)?;
    let (x1, x2) = (x[0], x[1]);
    let (c1, c2, g) = (gains.c[0], gains.c[1], gains.gamma);
    let th = theta_hat;
    let phi1 = DVector::from_vec(vec![x1, x1 * x1, 0.0]);
    let phi2 = DVector::from_vec(vec![x1 * x2, x2, x2 * x2]);

    let z1 = x1 - reference[0];
    let alpha1 = -c1 * z1 - phi1.dot(th);
    let da_dx1 = -c1 - th[0] - 2.0 * x1 * th[1];
    let da_dth = DVector::from_vec(vec![-x1, -x1 * x1, 0.0]);
    let z2 = x2 - alpha1 - reference[1];
    let w2 = &phi2 - &phi1 * da_dx1;
    let tau1 = &phi1 * z1;
    let tau2 = &tau1 + &w2 * z2;
    let u = -z1 - c2 * z2 + da_dx1 * x2 - w2.dot(th)
        + da_dth.dot(&(&tau2 * g))
        + c1 * reference[1]
        + reference[2];

    let pairs = [
        (e.z[0], z1),
        (e.z[1], z2),
        (e.alpha[0], alpha1),
        (e.dalpha_dx[0][0], da_dx1),
        (e.dalpha_dx[0][1], 0.0),
        (e.dalpha_dref[0][0], c1),
        (e.dalpha_dref[0][1], 0.0),
        (e.u, u),
    ];
    let mut worst = pairs.iter().map(|&(a, b)| rel(a, b)).fold(0.0, f64::max);
    for k in 0..3 {
        worst = worst
            .max(rel(e.dalpha_dtheta[0][k], da_dth[k]))
            .max(rel(e.tau[0][k], tau1[k]))
            .max(rel(e.tau[1][k], tau2[k]));
    }
    Ok(worst)
}

pub fn partials_suite(seed: u64, count: usize) -> Result<PartialsSuite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut out = PartialsSuite {
        count,
        fd_residual: 0.0,
        oracle_residual: 0.0,
    };
    for plant in [second_order_benchmark(), third_order_test_plant()] {
        let n = plant.order;
        let gains = BacksteppingGains::new(vec![8.0; n], 0.01, 8.0)?;
        for _ in 0..count {
            let x = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
            let th = DVector::from_fn(plant.param_dim, |_, _| rng.gen_range(-2.0..2.0));
            let r: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            out.fd_residual = out
                .fd_residual
                .max(finite_difference_residual(&plant, &x, &th, &r, &gains)?);
            if n == 2 {
                out.oracle_residual = out
                    .oracle_residual
                    .max(second_order_oracle_residual(&x, &th, &r, &gains)?);
            }
        }
    }
    Ok(out)
}

/// Terminal-error ratio of `ẏ = −y` on `[0, 1]` for `h = 0.1` versus `h = 0.05`.
pub fn rk4_order_ratio() -> Result<f64> {
    let err = |h: f64| -> Result<f64> {
        let steps = (1.0 / h).round() as usize;
        let mut y = DVector::from_element(1, 1.0);
        for k in 0..steps {
            y = rk4_step(|_, y| Ok(-y), &y, k as f64 * h, h)?;
        }
        Ok((y[0] - (-1.0f64).exp()).abs())
    };
    Ok(err(0.1)? / err(0.05)?)
}
