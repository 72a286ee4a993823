use nalgebra::DVector;

use speccl::collector::{z_substitution_step, SubstitutionPoint, ZMode};
use speccl::config::ScenarioConfig;
use speccl::estimators::{ce_control, EstimatorState, UpdateLaw};
use speccl::plants::first_order_benchmark;
use speccl::report::csv::{emit_csv, events_path, read_csv, render_csv};
use speccl::report::{criteria, write_outputs};
use speccl::sim::{excitation_diagnostic, rk4_step, run_scenario};
use speccl::Error;

fn short(name: &str, horizon: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::builtin(name).unwrap();
    cfg.horizon = horizon;
    cfg
}

#[test]
fn substitution_increments_match_exact_derivative_on_a_segment() {
    let plant = first_order_benchmark();
    let est = EstimatorState::new(DVector::from_vec(vec![0.9, 2.1, -0.9]), 0.05, 2.0, 4.0).unwrap();
    let rhs = |_t: f64, x: &DVector<f64>| {
        let u = ce_control(x, &est, &plant);
        plant.dynamics(x, &u)
    };
    let dt = 1e-3;
    let mut x = DVector::from_vec(vec![3.0, 5.0, -3.0]);
    let mut acc = DVector::zeros(3);
    let mut exact = DVector::zeros(3);
    let integrand = |x: &DVector<f64>| {
        let phi = plant.regressor(x);
        &phi * phi.transpose() * &plant.true_theta
    };
    for k in 0..500 {
        let t = k as f64 * dt;
        let next = rk4_step(rhs, &x, t, dt).unwrap();
        let (phi0, phi1) = (plant.regressor(&x), plant.regressor(&next));
        let (f0, f1) = (plant.drift(&x), plant.drift(&next));
        let (u0, u1) = (
            ce_control(&x, &est, &plant),
            ce_control(&next, &est, &plant),
        );
        acc = z_substitution_step(
            &acc,
            SubstitutionPoint {
                phi: &phi0,
                x: &x,
                drift: &f0,
                u: &u0,
            },
            SubstitutionPoint {
                phi: &phi1,
                x: &next,
                drift: &f1,
                u: &u1,
            },
            dt,
        );
        // ϖ = φ(ẋ − f − u) = φφᵀθ, integrated by Simpson's rule at the midpoint.
        let mid = rk4_step(rhs, &x, t, dt / 2.0).unwrap();
        exact += (integrand(&x) + integrand(&mid) * 4.0 + integrand(&next)) * (dt / 6.0);
        x = next;
    }
    let rel = (&acc - &exact).norm() / exact.norm();
    assert!(rel <= 1e-4, "relative gap {rel}");
}

#[test]
fn filtered_baseline_keeps_y_equal_q_theta() {
    let mut cfg = short("fo_sufficient", 5.0);
    cfg.law = UpdateLaw::FilteredCl;
    let log = run_scenario(&cfg).unwrap();
    for r in &log.rows {
        let q = r.q_max_eig.unwrap();
        assert!(r.yq_residual.unwrap() <= 1e-6 * (1.0 + q), "t = {}", r.t);
    }
    // Q only accumulates, so its largest eigenvalue never decreases.
    assert!(log
        .rows
        .windows(2)
        .all(|w| w[1].q_max_eig >= w[0].q_max_eig));
    let err = criteria::terminal_error(&log, &[1.0, 2.0, -1.0]);
    assert!(err < 0.5, "filtered baseline error {err}");
}

#[test]
fn filtered_baseline_rejects_backstepping_plants() {
    let mut cfg = ScenarioConfig::builtin("bs_composite").unwrap();
    cfg.law = UpdateLaw::FilteredCl;
    assert!(matches!(
        run_scenario(&cfg),
        Err(Error::ConfigDomain { .. })
    ));
}

#[test]
fn insufficient_run_keeps_symmetry_and_rank() {
    let log = run_scenario(&short("fo_insufficient", 5.0)).unwrap();
    assert!(criteria::max_symmetry_gap(&log) <= 1e-9);
    assert_eq!(log.last().rank, 2);
    assert!(criteria::rank_monotone(&log));
    assert!(criteria::max_zw_residual(&log) <= 1e-5 * (1.0 + log.theta_true.norm()));
    assert!(criteria::vkappa_max_increase(&log).unwrap() <= 1e-8);
    let report = excitation_diagnostic(&log, 1.0, 1e-3);
    assert!(!report.se);
}

#[test]
fn backstepping_lyapunov_function_descends() {
    let log = run_scenario(&short("bs_composite", 5.0)).unwrap();
    assert!(criteria::logged_v_max_increase(&log) <= 1e-7);
    assert!(criteria::confinement_residual(&log).unwrap() <= 1e-6);
    let v0 = log.rows[0].v;
    assert!((v0 - 78.5).abs() < 1e-12, "V_n(0) = {v0}");
}

#[test]
fn third_order_plant_runs() {
    let mut cfg = short("bs_composite", 2.0);
    cfg.plant = "sf3_test".into();
    cfg.c = vec![4.0, 4.0, 4.0];
    cfg.x0 = vec![0.5, 0.0, 0.0];
    cfg.theta_hat0 = vec![0.0, 0.0];
    let log = run_scenario(&cfg).unwrap();
    assert!(log.rows.iter().all(|r| r.x.iter().all(|v| v.is_finite())));
    assert!(criteria::logged_v_max_increase(&log) <= 1e-7);
}

#[test]
fn csv_is_deterministic() {
    let cfg = short("bs_lyapunov", 1.0);
    let a = render_csv(&run_scenario(&cfg).unwrap());
    let b = render_csv(&run_scenario(&cfg).unwrap());
    assert_eq!(a, b);
}

#[test]
fn csv_round_trip_reproduces_logged_values() {
    let dir = tempfile::tempdir().unwrap();
    let log = run_scenario(&short("fo_sufficient", 0.5)).unwrap();
    let path = dir.path().join("run.csv");
    emit_csv(&log, &path).unwrap();
    let table = read_csv(&path).unwrap();
    assert_eq!(table.rows.len(), log.rows.len());
    let close = |a: f64, b: f64| (a - b).abs() <= 5e-9 * b.abs();
    for (row, r) in table.rows.iter().zip(&log.rows) {
        assert!(close(row[0], r.t));
        for i in 0..3 {
            assert!(close(row[1 + i], r.x[i]));
            assert!(close(row[4 + i], r.theta_hat[i]));
            assert!(close(row[10 + i], r.eigenvalues[i]));
        }
    }
    let events = std::fs::read_to_string(events_path(&path)).unwrap();
    assert_eq!(events, "0.001,3\n");
}

#[test]
fn insufficient_csv_ends_at_the_predicted_limit() {
    let dir = tempfile::tempdir().unwrap();
    let log = run_scenario(&ScenarioConfig::builtin("fo_insufficient").unwrap()).unwrap();
    write_outputs(&log, dir.path(), false).unwrap();
    let table = read_csv(&dir.path().join("fo_insufficient.csv")).unwrap();
    let target = [1.5, 1.5, -1.0];
    for (i, want) in target.iter().enumerate() {
        let col = table.column(&format!("theta_hat_{}", i + 1)).unwrap();
        assert!((col.last().unwrap() - want).abs() <= 0.05);
    }
    assert!(!dir.path().join("fo_insufficient_states.svg").exists());
}

#[test]
fn substitution_mode_tracks_derivative_mode() {
    let a = run_scenario(&short("fo_sufficient", 3.0)).unwrap();
    let mut cfg = short("fo_sufficient", 3.0);
    cfg.z_mode = ZMode::Substitution;
    let b = run_scenario(&cfg).unwrap();
    let gap = (&a.last().theta_hat - &b.last().theta_hat).amax();
    assert!(gap <= 1e-3, "gap {gap}");
}
