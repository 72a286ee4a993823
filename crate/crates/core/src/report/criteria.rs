//! Pass/fail checks over the built-in scenario runs.

use std::fmt;

use nalgebra::DVector;

use crate::collector::ZMode;
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::sim::{run_scenario, TrajectoryLog};
use crate::spectral;

use super::selfcheck;

pub const SCENARIOS: [&str; 4] = [
    "fo_sufficient",
    "fo_insufficient",
    "bs_lyapunov",
    "bs_composite",
];

/// Extra run used by the Z-mode cross-check.
pub const SUBSTITUTION_RUN: &str = "fo_sufficient_substitution";

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    fn new(id: &'static str, name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            id,
            name,
            passed,
            detail,
        }
    }

    fn failed(id: &'static str, name: &'static str, why: impl fmt::Display) -> Self {
        Self::new(id, name, false, why.to_string())
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag}  {:<4} {:<44} {}", self.id, self.name, self.detail)
    }
}

/// Results of the built-in runs, keyed by scenario name.
#[derive(Debug)]
pub struct RunSet {
    pub runs: Vec<(String, Result<TrajectoryLog>)>,
}

impl RunSet {
    pub fn get(&self, name: &str) -> std::result::Result<&TrajectoryLog, String> {
        match self.runs.iter().find(|(n, _)| n == name) {
            Some((_, Ok(log))) => Ok(log),
            Some((_, Err(e))) => Err(format!("{name}: {e}")),
            None => Err(format!("{name}: not run")),
        }
    }
}

pub fn substitution_config() -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::builtin("fo_sufficient")?;
    cfg.name = SUBSTITUTION_RUN.to_string();
    cfg.z_mode = ZMode::Substitution;
    Ok(cfg)
}

/// Runs the given configs concurrently, one thread each.
pub fn run_all(configs: &[ScenarioConfig]) -> RunSet {
    let runs = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| (cfg.name.clone(), s.spawn(move || run_scenario(cfg))))
            .collect();
        handles
            .into_iter()
            .map(|(name, h)| {
                let r = h.join().unwrap_or_else(|_| {
                    Err(Error::NonFinite {
                        stage: format!("{name} panicked"),
                    })
                });
                (name, r)
            })
            .collect()
    });
    RunSet { runs }
}

/// The four built-in scenarios plus the substitution-mode rerun.
pub fn builtin_configs() -> Result<Vec<ScenarioConfig>> {
    let mut cfgs = SCENARIOS
        .iter()
        .map(|n| ScenarioConfig::builtin(n))
        .collect::<Result<Vec<_>>>()?;
    cfgs.push(substitution_config()?);
    Ok(cfgs)
}

fn inf_dist(a: &DVector<f64>, b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn terminal_error(log: &TrajectoryLog, target: &[f64]) -> f64 {
    inf_dist(&log.last().theta_hat, target)
}

/// Worst `‖θ̂ − target‖∞` over logged rows with `t ≥ t0`.
pub fn worst_error_after(log: &TrajectoryLog, t0: f64, target: &[f64]) -> f64 {
    log.rows
        .iter()
        .filter(|r| r.t >= t0 - 1e-9)
        .map(|r| inf_dist(&r.theta_hat, target))
        .fold(0.0, f64::max)
}

/// Initial value of `dᵀθ̃` and its largest deviation over the run.
pub fn component_drift(log: &TrajectoryLog, direction: &DVector<f64>) -> (f64, f64) {
    let c0 = direction.dot(&log.rows[0].theta_tilde);
    let dev = log
        .rows
        .iter()
        .map(|r| (direction.dot(&r.theta_tilde) - c0).abs())
        .fold(0.0, f64::max);
    (c0, dev)
}

pub fn max_eigenvalue(log: &TrajectoryLog) -> f64 {
    log.rows
        .iter()
        .flat_map(|r| r.eigenvalues.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest `|x₁ − x_r|` over the final `window` seconds.
pub fn tracking_tail(log: &TrajectoryLog, window: f64) -> f64 {
    let t_end = log.last().t;
    log.rows
        .iter()
        .filter(|r| r.t >= t_end - window - 1e-9)
        .filter_map(|r| r.reference.map(|xr| (r.x[0] - xr).abs()))
        .fold(0.0, f64::max)
}

pub fn max_zw_residual(log: &TrajectoryLog) -> f64 {
    log.rows.iter().map(|r| r.zw_residual).fold(0.0, f64::max)
}

pub fn rank_monotone(log: &TrajectoryLog) -> bool {
    log.rows.windows(2).all(|w| w[1].rank >= w[0].rank)
        && log.rank_events.windows(2).all(|w| w[1].rank > w[0].rank)
}

pub fn max_symmetry_gap(log: &TrajectoryLog) -> f64 {
    log.rows
        .iter()
        .map(|r| (r.x[0] - r.x[1]).abs())
        .fold(0.0, f64::max)
}

/// `max_τ ‖E₀(T)·θ̂̇(τ)‖ / (1 + ‖θ̂̇(τ)‖)` with `E₀(T)` the final zero projector.
pub fn confinement_residual(log: &TrajectoryLog) -> Result<f64> {
    let e0 = log.final_spectrum()?.zero_projector();
    Ok(log
        .rows
        .iter()
        .map(|r| (&e0 * &r.theta_rate).norm() / (1.0 + r.theta_rate.norm()))
        .fold(0.0, f64::max))
}

/// `max ‖E₀(t)φ(τ)‖ / ‖φ(τ)‖` column-wise over logged `τ < t`.
pub fn containment_residual(log: &TrajectoryLog) -> Result<f64> {
    let tol = log.config.tol_zero();
    let mut worst = 0.0f64;
    for (k, row) in log.rows.iter().enumerate().skip(1) {
        let s = spectral::psd_eigensystem(&row.w, tol)?;
        if s.zero_index().is_none() {
            continue;
        }
        let e0 = s.zero_projector();
        for earlier in &log.rows[..k] {
            for col in earlier.phi.column_iter() {
                let n = col.norm();
                if n > 0.0 {
                    worst = worst.max((&e0 * col).norm() / n);
                }
            }
        }
    }
    Ok(worst)
}

/// `max_τ ‖φ(τ)ᵀv‖` over unit vectors `v` spanning the final null space.
pub fn null_space_residual(log: &TrajectoryLog) -> Result<f64> {
    let s = log.final_spectrum()?;
    let Some(i) = s.zero_index() else {
        return Ok(0.0);
    };
    let e0 = &s.projectors()[i];
    let mut worst = 0.0f64;
    for v in e0.column_iter() {
        let n = v.norm();
        if n < 1e-6 {
            continue;
        }
        let v = v / n;
        // Check W v = 0 on the held-out vector itself.
        worst = worst.max((&log.final_w * &v).norm());
        for r in &log.rows {
            worst = worst.max((r.phi.transpose() * &v).norm());
        }
    }
    Ok(worst)
}

/// Largest drift of `E₀(T)θ̃(t)` from its initial value.
pub fn unexcited_drift(log: &TrajectoryLog) -> Result<f64> {
    let e0 = log.final_spectrum()?.zero_projector();
    let first = &e0 * &log.rows[0].theta_tilde;
    Ok(log
        .rows
        .iter()
        .map(|r| (&e0 * &r.theta_tilde - &first).norm())
        .fold(0.0, f64::max))
}

/// Largest increase between logged rows of `½|x|² + |(I − E₀(T))θ̃|²/(2γ)`.
pub fn vkappa_max_increase(log: &TrajectoryLog) -> Result<f64> {
    let e0 = log.final_spectrum()?.zero_projector();
    let g = log.config.gamma;
    let v: Vec<f64> = log
        .rows
        .iter()
        .map(|r| {
            let excited = &r.theta_tilde - &e0 * &r.theta_tilde;
            0.5 * r.x.norm_squared() + excited.norm_squared() / (2.0 * g)
        })
        .collect();
    Ok(max_increase(&v))
}

/// Largest increase of the logged `V` column between consecutive rows.
pub fn logged_v_max_increase(log: &TrajectoryLog) -> f64 {
    let v: Vec<f64> = log.rows.iter().map(|r| r.v).collect();
    max_increase(&v)
}

fn max_increase(v: &[f64]) -> f64 {
    v.windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max)
}

fn check<F>(
    id: &'static str,
    name: &'static str,
    runs: &RunSet,
    scenarios: &[&str],
    f: F,
) -> Outcome
where
    F: FnOnce(&[&TrajectoryLog]) -> Result<(bool, String)>,
{
    let mut logs = Vec::new();
    for s in scenarios {
        match runs.get(s) {
            Ok(l) => logs.push(l),
            Err(e) => return Outcome::failed(id, name, e),
        }
    }
    match f(&logs) {
        Ok((passed, detail)) => Outcome::new(id, name, passed, detail),
        Err(e) => Outcome::failed(id, name, e),
    }
}

/// Criteria evaluated on the scenario runs.
pub fn scenario_criteria(runs: &RunSet) -> Vec<Outcome> {
    let mut out = Vec::new();

    out.push(check(
        "1",
        "insufficient-excitation estimate limit",
        runs,
        &["fo_insufficient"],
        |l| {
            let e = terminal_error(l[0], &[1.5, 1.5, -1.0]);
            Ok((
                e <= 0.05,
                format!("|theta_hat(T) - [1.5,1.5,-1]|inf = {e:.3e} (tol 0.05)"),
            ))
        },
    ));

    out.push(check(
        "2",
        "unexcited invariance",
        runs,
        &["fo_insufficient"],
        |l| {
            let d = DVector::from_vec(vec![1.0, -1.0, 0.0]) / 2f64.sqrt();
            let (c0, dev) = component_drift(l[0], &d);
            let ok = (c0 + 1.0 / 2f64.sqrt()).abs() <= 1e-12 && dev <= 1e-4;
            Ok((
                ok,
                format!("initial {c0:.6}, max drift {dev:.3e} (tol 1e-4)"),
            ))
        },
    ));

    out.push(check(
        "3",
        "sufficient-excitation convergence",
        runs,
        &["fo_sufficient"],
        |l| {
            let xn = l[0].last().x.norm();
            let e = terminal_error(l[0], &[1.0, 2.0, -1.0]);
            Ok((
                xn <= 1e-3 && e <= 0.05,
                format!(
                    "|x(T)| = {xn:.3e} (tol 1e-3), |theta_hat(T) - theta|inf = {e:.3e} (tol 0.05)"
                ),
            ))
        },
    ));

    out.push(check(
        "4",
        "eigenvalue ceiling",
        runs,
        &["fo_sufficient", "fo_insufficient", "bs_composite"],
        |l| {
            let m = l
                .iter()
                .map(|log| max_eigenvalue(log))
                .fold(f64::NEG_INFINITY, f64::max);
            Ok((m <= 10.01, format!("max eig W = {m:.6} (ceiling 10.01)")))
        },
    ));

    out.push(check(
        "5",
        "backstepping estimation",
        runs,
        &["bs_composite"],
        |l| {
            let e = worst_error_after(l[0], 15.0, &[1.0, 1.0, 1.0]);
            Ok((
                e <= 0.05,
                format!("max t>=15 |theta_hat - theta|inf = {e:.3e} (tol 0.05)"),
            ))
        },
    ));

    out.push(check("6", "baseline contrast", runs, &["bs_lyapunov"], |l| {
        let trk = tracking_tail(l[0], 2.0);
        let e = terminal_error(l[0], &[1.0, 1.0, 1.0]);
        Ok((
            trk <= 0.05 && e >= 0.1,
            format!("tracking over last 2 s = {trk:.3e} (tol 0.05), |theta_hat(T) - theta|inf = {e:.3e} (min 0.1)"),
        ))
    }));

    out.push(check(
        "7b",
        "confinement and containment",
        runs,
        &["fo_sufficient", "fo_insufficient"],
        |l| {
            let mut conf = 0.0f64;
            let mut cont = 0.0f64;
            let mut null = 0.0f64;
            let mut drift = 0.0f64;
            for log in l {
                conf = conf.max(confinement_residual(log)?);
                cont = cont.max(containment_residual(log)?);
                null = null.max(null_space_residual(log)?);
                drift = drift.max(unexcited_drift(log)?);
            }
            let ok = conf <= 1e-6 && cont <= 1e-6 && null <= 1e-6 && drift <= 1e-6;
            Ok((
                ok,
                format!("confinement {conf:.1e}, containment {cont:.1e}, null space {null:.1e}, unexcited {drift:.1e} (tol 1e-6)"),
            ))
        },
    ));

    out.push(check(
        "7c",
        "Lyapunov descent",
        runs,
        &["fo_insufficient", "bs_composite"],
        |l| {
            let vk = vkappa_max_increase(l[0])?;
            let vn = logged_v_max_increase(l[1]);
            Ok((
                vk <= 1e-8 && vn <= 1e-7,
                format!("V_kappa max rise {vk:.1e} (tol 1e-8), V_n max rise {vn:.1e} (tol 1e-7)"),
            ))
        },
    ));

    out.push(check(
        "7d",
        "Z-mode cross-check",
        runs,
        &["fo_sufficient", SUBSTITUTION_RUN],
        |l| {
            let d = (&l[0].last().theta_hat - &l[1].last().theta_hat).amax();
            Ok((
                d <= 1e-3,
                format!("|theta_hat diff|inf = {d:.3e} (tol 1e-3)"),
            ))
        },
    ));

    out.push(check(
        "7g",
        "trajectory invariants",
        runs,
        &["fo_sufficient", "fo_insufficient", "bs_composite"],
        |l| {
            let sym = max_symmetry_gap(l[1]);
            let rank = l[1].last().rank;
            let zw = l.iter().map(|log| max_zw_residual(log) / (1.0 + log.theta_true.norm())).fold(0.0, f64::max);
            let mono = l.iter().all(|log| rank_monotone(log));
            Ok((
                sym <= 1e-9 && rank == 2 && zw <= 1e-5 && mono,
                format!("|x1-x2| {sym:.1e}, final rank {rank}, Z-W residual {zw:.1e}, rank monotone {mono}"),
            ))
        },
    ));

    out
}

/// Criteria that need no scenario run.
pub fn property_criteria(seed: u64) -> Vec<Outcome> {
    let mut out = Vec::new();

    let s = selfcheck::spectral_suite(seed, 1000);
    out.push(Outcome::new(
        "7a",
        "spectral identities and Lemma 3 bound",
        s.passed(),
        format!(
            "identities {:.1e}, lemma bound slack {:.1e}, complement {:.1e}, reprojection {:.1e} over {} matrices",
            s.identity_residual, s.lemma_violation, s.complement_residual, s.reprojection_residual, s.count
        ),
    ));

    match selfcheck::partials_suite(seed, 100) {
        Ok(p) => out.push(Outcome::new(
            "7e",
            "backstepping partials and n=2 oracle",
            p.passed(),
            format!(
                "finite-difference rel {:.1e} (tol 1e-5), oracle {:.1e} (tol 1e-9) over {} states",
                p.fd_residual, p.oracle_residual, p.count
            ),
        )),
        Err(e) => out.push(Outcome::failed(
            "7e",
            "backstepping partials and n=2 oracle",
            e,
        )),
    }

    match selfcheck::rk4_order_ratio() {
        Ok(r) => out.push(Outcome::new(
            "7f",
            "RK4 order",
            (12.0..=20.0).contains(&r),
            format!("error ratio {r:.3} (range [12, 20])"),
        )),
        Err(e) => out.push(Outcome::failed("7f", "RK4 order", e)),
    }

    out
}
