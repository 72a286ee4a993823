//! Fixed-step simulation of the coupled plant, collector and estimator.
//!
//! The whole closed loop is one flat state vector
//! `x ⊕ θ̂ ⊕ Z ⊕ vec(W) [⊕ filter bank]` advanced by classical RK4, so every
//! sub-system sees the same stage values.

pub mod diagnostic;
pub mod metrics;

use nalgebra::{DMatrix, DVector};

use crate::backstepping::{self, BacksteppingGains};
use crate::collector::{self, ForgettingConfig, SubstitutionPoint, ZMode};
use crate::config::{Plant, ScenarioConfig};
use crate::error::{Error, Result};
use crate::estimators::{self, EstimatorState, FilterBankState, UpdateLaw};
use crate::spectral::{self, Spectrum};

pub use diagnostic::{excitation_diagnostic, ExcitationReport};
pub use metrics::{decompose_error, lyapunov_value, LyapunovKind};

/// States with `|x|` above this abort the run.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// One classical Runge–Kutta step of `ẏ = rhs(t, y)`.
pub fn rk4_step<F>(mut rhs: F, y: &DVector<f64>, t: f64, h: f64) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let k1 = rhs(t, y)?;
    rk4_from_slope(rhs, y, t, h, k1)
}

/// RK4 with the first-stage slope already evaluated.
fn rk4_from_slope<F>(
    mut rhs: F,
    y: &DVector<f64>,
    t: f64,
    h: f64,
    k1: DVector<f64>,
) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    debug_assert!(h > 0.0);
    let check = |k: DVector<f64>, stage: usize| {
        if k.iter().all(|v| v.is_finite()) {
            Ok(k)
        } else {
            Err(Error::NonFinite {
                stage: format!("rk4 stage {stage} at t = {t}"),
            })
        }
    };
    let k1 = check(k1, 1)?;
    let k2 = check(rhs(t + 0.5 * h, &(y + &k1 * (0.5 * h)))?, 2)?;
    let k3 = check(rhs(t + 0.5 * h, &(y + &k2 * (0.5 * h)))?, 3)?;
    let k4 = check(rhs(t + h, &(y + &k3 * h))?, 4)?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankEvent {
    pub t: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub x: DVector<f64>,
    pub theta_hat: DVector<f64>,
    pub theta_tilde: DVector<f64>,
    /// Eigenvalues of `W`, ascending, repeated by multiplicity.
    pub eigenvalues: Vec<f64>,
    pub rank: usize,
    pub excited_norm: f64,
    pub unexcited_norm: f64,
    /// `V_κ` for first-order plants (using the spectrum at `t`), `V_n` for
    /// strict-feedback plants.
    pub v: f64,
    pub u: DVector<f64>,
    /// `|Z − Wθ|`
    pub zw_residual: f64,
    pub reference: Option<f64>,
    /// Largest eigenvalue of the filtered baseline's `Q`.
    pub q_max_eig: Option<f64>,
    /// `|Y − Qθ|` of the filtered baseline; kept in memory only.
    pub yq_residual: Option<f64>,
    /// Regressor fed to the collector (`p × n`); kept in memory only.
    pub phi: DMatrix<f64>,
    /// `θ̂̇` at `t`; kept in memory only.
    pub theta_rate: DVector<f64>,
    /// Tracking errors for strict-feedback plants; kept in memory only.
    pub tracking: Option<DVector<f64>>,
    /// Collector state; kept in memory only.
    pub z: DVector<f64>,
    pub w: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub config: ScenarioConfig,
    pub state_dim: usize,
    pub param_dim: usize,
    pub theta_true: DVector<f64>,
    pub rows: Vec<LogRow>,
    pub rank_events: Vec<RankEvent>,
    pub final_z: DVector<f64>,
    pub final_w: DMatrix<f64>,
}

impl TrajectoryLog {
    pub fn last(&self) -> &LogRow {
        self.rows
            .last()
            .expect("log holds at least the initial row")
    }

    pub fn final_spectrum(&self) -> Result<Spectrum> {
        spectral::psd_eigensystem(&self.final_w, self.config.tol_zero())
    }

    pub fn input_dim(&self) -> usize {
        self.rows.first().map_or(0, |r| r.u.len())
    }
}

/// Vector offsets of each block in the flat state.
#[derive(Debug, Clone, Copy)]
struct Layout {
    n: usize,
    p: usize,
    filters: bool,
}

impl Layout {
    fn theta(&self) -> usize {
        self.n
    }
    fn z(&self) -> usize {
        self.n + self.p
    }
    fn w(&self) -> usize {
        self.n + 2 * self.p
    }
    fn q(&self) -> usize {
        self.w() + self.p * self.p
    }
    fn x_f(&self) -> usize {
        self.q() + self.n * self.p
    }
    fn g(&self) -> usize {
        self.x_f() + self.n
    }
    fn y(&self) -> usize {
        self.g() + self.n
    }
    fn q_gram(&self) -> usize {
        self.y() + self.p
    }
    fn len(&self) -> usize {
        if self.filters {
            self.q_gram() + self.p * self.p
        } else {
            self.q()
        }
    }

    fn vector(&self, y: &DVector<f64>, at: usize, len: usize) -> DVector<f64> {
        y.rows(at, len).into_owned()
    }

    fn matrix(&self, y: &DVector<f64>, at: usize, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(rows, cols, &y.as_slice()[at..at + rows * cols])
    }

    fn put_matrix(&self, y: &mut DVector<f64>, at: usize, m: &DMatrix<f64>) {
        y.as_mut_slice()[at..at + m.len()].copy_from_slice(m.as_slice());
    }

    fn put_vector(&self, y: &mut DVector<f64>, at: usize, v: &DVector<f64>) {
        y.as_mut_slice()[at..at + v.len()].copy_from_slice(v.as_slice());
    }

    fn x(&self, y: &DVector<f64>) -> DVector<f64> {
        self.vector(y, 0, self.n)
    }

    fn filter_bank(&self, y: &DVector<f64>, a: f64) -> FilterBankState {
        FilterBankState {
            q: self.matrix(y, self.q(), self.n, self.p),
            x_f: self.vector(y, self.x_f(), self.n),
            g: self.vector(y, self.g(), self.n),
            y: self.vector(y, self.y(), self.p),
            q_gram: self.matrix(y, self.q_gram(), self.p, self.p),
            a,
        }
    }
}

/// Everything computed from one state sample.
struct Evaluation {
    deriv: DVector<f64>,
    /// Control as applied, for logging.
    u_log: DVector<f64>,
    /// Control as an `n`-vector entering `ẋ = drift + φᵀθ + u`.
    u_full: DVector<f64>,
    drift: DVector<f64>,
    phi: DMatrix<f64>,
    theta_rate: DVector<f64>,
    spectrum: Spectrum,
    tracking: Option<DVector<f64>>,
    reference: Option<f64>,
    q_max_eig: Option<f64>,
    yq_residual: Option<f64>,
}

impl Evaluation {
    fn at<'a>(&'a self, x: &'a DVector<f64>) -> SubstitutionPoint<'a> {
        SubstitutionPoint {
            phi: &self.phi,
            x,
            drift: &self.drift,
            u: &self.u_full,
        }
    }
}

struct Simulator<'a> {
    cfg: &'a ScenarioConfig,
    plant: Plant,
    forgetting: ForgettingConfig,
    layout: Layout,
    bs_gains: Option<BacksteppingGains>,
}

impl<'a> Simulator<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let plant = cfg.resolve_plant()?;
        let bs_gains = match &plant {
            Plant::StrictFeedback(_) => {
                Some(BacksteppingGains::new(cfg.c.clone(), cfg.gamma, cfg.k4)?)
            }
            Plant::FirstOrder(_) => None,
        };
        let layout = Layout {
            n: plant.state_dim(),
            p: plant.param_dim(),
            filters: cfg.law == UpdateLaw::FilteredCl,
        };
        Ok(Self {
            cfg,
            forgetting: cfg.forgetting()?,
            plant,
            layout,
            bs_gains,
        })
    }

    fn theta_true(&self) -> DVector<f64> {
        match &self.plant {
            Plant::FirstOrder(p) => p.true_theta.clone(),
            Plant::StrictFeedback(p) => p.true_theta.clone(),
        }
    }

    fn initial_state(&self) -> DVector<f64> {
        let l = self.layout;
        let mut y = DVector::zeros(l.len());
        let x0 = DVector::from_column_slice(&self.cfg.x0);
        l.put_vector(&mut y, 0, &x0);
        l.put_vector(
            &mut y,
            l.theta(),
            &DVector::from_column_slice(&self.cfg.theta_hat0),
        );
        if l.filters {
            l.put_vector(&mut y, l.x_f(), &x0);
        }
        y
    }

    fn evaluate(&self, t: f64, y: &DVector<f64>) -> Result<Evaluation> {
        let l = self.layout;
        let (n, p) = (l.n, l.p);
        let x = l.x(y);
        let theta_hat = l.vector(y, l.theta(), p);
        let z = l.vector(y, l.z(), p);
        let w = spectral::symmetrize(&l.matrix(y, l.w(), p, p));
        let spectrum = spectral::psd_eigensystem(&w, self.cfg.tol_zero())?;
        let derivative_mode = self.cfg.z_mode == ZMode::Derivative;

        let mut deriv = DVector::zeros(l.len());
        let mut tracking = None;
        let mut reference = None;
        let mut q_max_eig = None;
        let mut yq_residual = None;

        let (xdot, u_log, u_full, drift, phi, theta_rate) = match &self.plant {
            Plant::FirstOrder(plant) => {
                let est = EstimatorState {
                    theta_hat: theta_hat.clone(),
                    gamma: self.cfg.gamma,
                    k1: self.cfg.k1,
                    law_gain: match self.cfg.law {
                        UpdateLaw::FilteredCl => self.cfg.k3,
                        _ => self.cfg.k4,
                    },
                };
                let phi = plant.regressor(&x);
                let drift = plant.drift(&x);
                let u = estimators::ce_control(&x, &est, plant);
                let xdot = plant.dynamics(&x, &u)?;
                let theta_rate = match self.cfg.law {
                    UpdateLaw::Lyapunov => estimators::lyapunov_update(&x, &phi, &est),
                    UpdateLaw::SpectralCl => estimators::composite_update(&x, &phi, &z, &w, &est),
                    UpdateLaw::FilteredCl => {
                        let fb = l.filter_bank(y, self.cfg.filter_a);
                        let rates = estimators::filter_bank_rhs(&fb, &x, &phi, &(&drift + &u));
                        l.put_matrix(&mut deriv, l.q(), &rates.q);
                        l.put_vector(&mut deriv, l.x_f(), &rates.x_f);
                        l.put_vector(&mut deriv, l.g(), &rates.g);
                        l.put_vector(&mut deriv, l.y(), &rates.y);
                        l.put_matrix(&mut deriv, l.q_gram(), &rates.q_gram);
                        yq_residual = Some((&fb.y - &fb.q_gram * &plant.true_theta).norm());
                        q_max_eig = Some(
                            spectral::symmetrize(&fb.q_gram)
                                .symmetric_eigenvalues()
                                .max(),
                        );
                        estimators::filtered_composite_update(&x, &phi, &fb, &est)
                    }
                };
                (xdot, u.clone(), u, drift, phi, theta_rate)
            }
            Plant::StrictFeedback(plant) => {
                let gains = self.bs_gains.as_ref().expect("strict-feedback gains");
                let r = self.cfg.reference.derivatives(t, n);
                let eval = backstepping::evaluate_backstepping(plant, &x, &theta_hat, &r, gains)?;
                let xdot = plant.dynamics(&x, eval.u)?;
                let (drift, phi) = plant.stacked_regressor(&x);
                let mut u_full = DVector::zeros(n);
                u_full[n - 1] = eval.u;
                let theta_rate = match self.cfg.law {
                    UpdateLaw::SpectralCl => {
                        backstepping::backstepping_update(&eval, &z, &w, &theta_hat, gains)
                    }
                    _ => backstepping::tuning_function_update(&eval, gains),
                };
                tracking = Some(eval.z.clone());
                reference = Some(r[0]);
                (
                    xdot,
                    DVector::from_element(1, eval.u),
                    u_full,
                    drift,
                    phi,
                    theta_rate,
                )
            }
        };

        let varpi = if derivative_mode {
            collector::varpi(&phi, &xdot, &drift, &u_full)?
        } else {
            DVector::zeros(p)
        };
        let (zdot, wdot) =
            collector::collector_derivative(&z, &spectrum, &phi, &varpi, &self.forgetting)?;

        l.put_vector(&mut deriv, 0, &xdot);
        l.put_vector(&mut deriv, l.theta(), &theta_rate);
        l.put_vector(&mut deriv, l.z(), &zdot);
        l.put_matrix(&mut deriv, l.w(), &wdot);

        Ok(Evaluation {
            deriv,
            u_log,
            u_full,
            drift,
            phi,
            theta_rate,
            spectrum,
            tracking,
            reference,
            q_max_eig,
            yq_residual,
        })
    }

    fn row(&self, t: f64, y: &DVector<f64>, ev: &Evaluation, theta: &DVector<f64>) -> LogRow {
        let l = self.layout;
        let x = l.x(y);
        let theta_hat = l.vector(y, l.theta(), l.p);
        let theta_tilde = theta - &theta_hat;
        let (excited, unexcited) = decompose_error(&theta_tilde, &ev.spectrum);
        let v = match &ev.tracking {
            Some(z) => lyapunov_value(LyapunovKind::Tracking, z, &theta_tilde, self.cfg.gamma),
            None => lyapunov_value(LyapunovKind::Excited, &x, &excited, self.cfg.gamma),
        };
        let w = l.matrix(y, l.w(), l.p, l.p);
        let z = l.vector(y, l.z(), l.p);
        LogRow {
            t,
            x,
            theta_hat,
            eigenvalues: ev.spectrum.eigenvalues_with_multiplicity(),
            rank: ev.spectrum.numeric_rank(),
            excited_norm: excited.norm(),
            unexcited_norm: unexcited.norm(),
            v,
            u: ev.u_log.clone(),
            zw_residual: (&z - &w * theta).norm(),
            reference: ev.reference,
            q_max_eig: ev.q_max_eig,
            yq_residual: ev.yq_residual,
            phi: ev.phi.clone(),
            theta_rate: ev.theta_rate.clone(),
            tracking: ev.tracking.clone(),
            theta_tilde,
            z,
            w,
        }
    }
}

/// Integrates a scenario over its horizon and returns the trajectory log.
///
/// Rows are logged at `t = 0`, every `log_stride` steps and at the final
/// step. A divergent run returns [`Error::Diverged`] carrying the rows
/// logged so far.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<TrajectoryLog> {
    let sim = Simulator::new(cfg)?;
    let l = sim.layout;
    let theta = sim.theta_true();
    let dt = cfg.dt;
    let steps = cfg.steps();

    let mut y = sim.initial_state();
    let mut ev = sim.evaluate(0.0, &y)?;
    let mut log = TrajectoryLog {
        config: cfg.clone(),
        state_dim: l.n,
        param_dim: l.p,
        theta_true: theta.clone(),
        rows: vec![sim.row(0.0, &y, &ev, &theta)],
        rank_events: Vec::new(),
        final_z: DVector::zeros(l.p),
        final_w: DMatrix::zeros(l.p, l.p),
    };
    let mut rank = ev.spectrum.numeric_rank();

    let diverged = |log: &mut TrajectoryLog, t: f64, norm: f64, y: &DVector<f64>| {
        log.final_z = l.vector(y, l.z(), l.p);
        log.final_w = l.matrix(y, l.w(), l.p, l.p);
        Error::Diverged {
            t,
            norm,
            partial: Box::new(log.clone()),
        }
    };

    for k in 0..steps {
        let t = k as f64 * dt;
        let t_next = (k + 1) as f64 * dt;
        // `extra` is a constant rate added to Ż over the step.
        let advance = |extra: Option<&DVector<f64>>| {
            let add = |mut d: DVector<f64>| {
                if let Some(v) = extra {
                    let mut zd = l.vector(&d, l.z(), l.p);
                    zd += v;
                    l.put_vector(&mut d, l.z(), &zd);
                }
                d
            };
            rk4_from_slope(
                |s, ys| sim.evaluate(s, ys).map(|e| add(e.deriv)),
                &y,
                t,
                dt,
                add(ev.deriv.clone()),
            )
        };
        let mut stepped = advance(None);
        if cfg.z_mode == ZMode::Substitution {
            // Predict the step end, then rerun it with the averaged `∫ϖ dτ / dt`.
            stepped = stepped.and_then(|pred| {
                let end = sim.evaluate(t_next, &pred)?;
                let x_pred = l.x(&pred);
                let delta = collector::z_substitution_step(
                    &DVector::zeros(l.p),
                    ev.at(&l.x(&y)),
                    end.at(&x_pred),
                    dt,
                );
                advance(Some(&(delta / dt)))
            });
        }
        let mut y_next = match stepped {
            Ok(v) => v,
            Err(Error::NonFinite { .. }) => {
                return Err(diverged(&mut log, t_next, f64::INFINITY, &y))
            }
            Err(e) => return Err(e),
        };

        let w_next = spectral::symmetrize(&l.matrix(&y_next, l.w(), l.p, l.p));
        l.put_matrix(&mut y_next, l.w(), &w_next);
        let x_next = l.x(&y_next);

        let norm = x_next.norm();
        if !(norm <= DIVERGENCE_LIMIT) {
            return Err(diverged(&mut log, t_next, norm, &y_next));
        }
        y = y_next;
        ev = match sim.evaluate(t_next, &y) {
            Ok(e) => e,
            Err(Error::NonFinite { .. }) => {
                return Err(diverged(&mut log, t_next, f64::INFINITY, &y))
            }
            Err(e) => return Err(e),
        };

        let new_rank = ev.spectrum.numeric_rank();
        if new_rank > rank {
            log.rank_events.push(RankEvent {
                t: t_next,
                rank: new_rank,
            });
        }
        rank = new_rank;

        if (k + 1) % cfg.log_stride == 0 || k + 1 == steps {
            log.rows.push(sim.row(t_next, &y, &ev, &theta));
        }
    }

    log.final_z = l.vector(&y, l.z(), l.p);
    log.final_w = l.matrix(&y, l.w(), l.p, l.p);
    Ok(log)
}
