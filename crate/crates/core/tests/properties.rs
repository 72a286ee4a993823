use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use speccl::backstepping::{evaluate_backstepping, BacksteppingGains};
use speccl::collector::{collector_derivative, forgetting_factor, ForgettingConfig};
use speccl::config::{parse_config, ScenarioConfig};
use speccl::estimators::{composite_update, EstimatorState};
use speccl::jet::{Jet, JetSpace};
use speccl::plants::{second_order_benchmark, third_order_test_plant, StrictFeedbackPlant};
use speccl::report::csv::format_value;
use speccl::report::selfcheck::{
    finite_difference_residual, identity_residual, random_symmetric, second_order_oracle_residual,
};
use speccl::spectral::{eigensystem_scaled, project, psd_eigensystem};

fn matrix(seed: u64, p: usize, psd: bool) -> DMatrix<f64> {
    random_symmetric(&mut ChaCha8Rng::seed_from_u64(seed), p, psd)
}

fn vector(len: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-2.0..2.0f64, len).prop_map(DVector::from_vec)
}

fn plant(which: bool) -> StrictFeedbackPlant {
    if which {
        third_order_test_plant()
    } else {
        second_order_benchmark()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn spectral_identities(seed in any::<u64>(), p in 2usize..=8) {
        let w = matrix(seed, p, false);
        let s = eigensystem_scaled(&w, 1e-9).unwrap();
        prop_assert!(identity_residual(&w, &s) <= 1e-9);
        let total: usize = s.multiplicities().iter().sum();
        prop_assert_eq!(total, p);
    }

    #[test]
    fn lemma3_bound_on_the_excited_subspace(seed in any::<u64>(), p in 2usize..=8, v in vector(8)) {
        let w = matrix(seed, p, true);
        let s = psd_eigensystem(&w, 5e-9).unwrap();
        let e0 = s.zero_projector();
        let v = v.rows(0, p).into_owned();
        let v = &v - &e0 * &v;
        prop_assert!(project(&v, &e0).unwrap().norm() <= 1e-9);
        if let Some(lmin) = s.smallest_positive_eigenvalue() {
            prop_assert!(v.dot(&(&w * &v)) >= lmin * v.norm_squared() - 1e-9);
        }
    }

    #[test]
    fn columns_are_orthogonal_to_the_null_space(seed in any::<u64>(), p in 2usize..=8) {
        let w = matrix(seed, p, true);
        let e0 = psd_eigensystem(&w, 5e-9).unwrap().zero_projector();
        prop_assert!((&e0 * &w).amax() <= 1e-9);
    }

    #[test]
    fn projection_is_idempotent(seed in any::<u64>(), p in 2usize..=8, v in vector(8)) {
        let w = matrix(seed, p, false);
        let s = eigensystem_scaled(&w, 1e-9).unwrap();
        let v = v.rows(0, p).into_owned();
        for e in s.projectors() {
            let once = project(&v, e).unwrap();
            let twice = project(&once, e).unwrap();
            prop_assert!((twice - &once).amax() <= 1e-12 * (1.0 + once.amax()));
        }
    }

    #[test]
    fn forgetting_factor_shape(lambda in 0.0..20.0f64, strength in 0.0..100.0f64) {
        let cfg = ForgettingConfig::new(5.0, 10.0).unwrap();
        let rho = forgetting_factor(lambda, strength, &cfg);
        prop_assert!(rho >= 0.0);
        if lambda <= 5.0 {
            prop_assert_eq!(rho, 0.0);
        } else {
            prop_assert!(rho <= strength / lambda + 1e-12);
        }
        if lambda >= 10.0 {
            prop_assert!((rho - strength / lambda).abs() <= 1e-12 * (1.0 + rho));
        }
    }

    #[test]
    fn ceiling_direction_cannot_grow(seed in any::<u64>(), scale in 10.0..12.0f64, phi in vector(9)) {
        // Rescale a random PSD matrix so that its top eigenvalue sits at or above the ceiling.
        let w0 = matrix(seed, 3, true);
        let top = w0.clone().symmetric_eigen();
        let imax = top.eigenvalues.imax();
        if top.eigenvalues[imax] <= 1e-6 {
            return Ok(());
        }
        let w = w0 * (scale / top.eigenvalues[imax]);
        let s = psd_eigensystem(&w, 1e-8).unwrap();
        let phi = DMatrix::from_column_slice(3, 3, phi.as_slice());
        let cfg = ForgettingConfig::new(5.0, 10.0).unwrap();
        let (_, wdot) = collector_derivative(&DVector::zeros(3), &s, &phi, &DVector::zeros(3), &cfg).unwrap();
        let v = top.eigenvectors.column(imax);
        prop_assert!(v.dot(&(&wdot * v)) <= 1e-9 * (1.0 + phi.norm_squared()));
        prop_assert!((&wdot - wdot.transpose()).amax() == 0.0);
    }

    #[test]
    fn regression_equation_is_invariant(seed in any::<u64>(), theta in vector(3), phi in vector(9)) {
        let w = matrix(seed, 3, true) * 4.0;
        let s = psd_eigensystem(&w, 1e-8).unwrap();
        let phi = DMatrix::from_column_slice(3, 3, phi.as_slice());
        let z = &w * &theta;
        let varpi = &phi * phi.transpose() * &theta;
        let cfg = ForgettingConfig::new(5.0, 10.0).unwrap();
        let (zdot, wdot) = collector_derivative(&z, &s, &phi, &varpi, &cfg).unwrap();
        let scale = 1.0 + zdot.amax();
        prop_assert!((zdot - wdot * &theta).amax() <= 1e-9 * scale);
    }

    #[test]
    fn composite_forms_agree(seed in any::<u64>(), theta in vector(3), theta_hat in vector(3), x in vector(3), phi in vector(9)) {
        let w = matrix(seed, 3, true);
        let z = &w * &theta;
        let phi = DMatrix::from_column_slice(3, 3, phi.as_slice());
        let est = EstimatorState::new(theta_hat.clone(), 0.05, 2.0, 4.0).unwrap();
        let a = composite_update(&x, &phi, &z, &w, &est);
        let b = &phi * &x * 0.05 + &w * (&theta - &theta_hat) * (4.0 * 0.05);
        prop_assert!((a - b).amax() <= 1e-9);
    }

    #[test]
    fn backstepping_partials_match_finite_differences(
        third in any::<bool>(),
        x in vector(3),
        theta_hat in vector(3),
        r in prop::collection::vec(-1.0..1.0f64, 4),
    ) {
        let plant = plant(third);
        let n = plant.order;
        let gains = BacksteppingGains::new(vec![8.0; n], 0.01, 8.0).unwrap();
        let x = x.rows(0, n).into_owned();
        let th = theta_hat.rows(0, plant.param_dim).into_owned();
        let res = finite_difference_residual(&plant, &x, &th, &r[..=n], &gains).unwrap();
        prop_assert!(res <= 1e-5, "residual {}", res);
    }

    #[test]
    fn second_order_closed_form(x in vector(2), theta_hat in vector(3), r in prop::collection::vec(-1.0..1.0f64, 3)) {
        let gains = BacksteppingGains::new(vec![8.0, 8.0], 0.01, 8.0).unwrap();
        prop_assert!(second_order_oracle_residual(&x, &theta_hat, &r, &gains).unwrap() <= 1e-9);
    }

    #[test]
    fn tuning_functions_telescope(third in any::<bool>(), x in vector(3), theta_hat in vector(3), r in prop::collection::vec(-1.0..1.0f64, 4)) {
        let plant = plant(third);
        let n = plant.order;
        let gains = BacksteppingGains::new(vec![8.0; n], 0.01, 8.0).unwrap();
        let x = x.rows(0, n).into_owned();
        let th = theta_hat.rows(0, plant.param_dim).into_owned();
        let e = evaluate_backstepping(&plant, &x, &th, &r[..=n], &gains).unwrap();
        let phis: Vec<DVector<f64>> = (1..=n).map(|i| plant.regressor_values(i, x.as_slice())).collect();
        let mut tau = DVector::zeros(plant.param_dim);
        for i in 0..n {
            let mut w = phis[i].clone();
            if i > 0 {
                for (j, phi_j) in phis.iter().enumerate().take(i) {
                    w -= phi_j * e.dalpha_dx[i - 1][j];
                }
            }
            tau += w * e.z[i];
        }
        prop_assert!((&tau - e.tau_n()).amax() <= 1e-10 * (1.0 + tau.amax()));
    }

    #[test]
    fn stage_maps_ignore_later_states(third in any::<bool>(), x in vector(3), bump in -1.0..1.0f64) {
        let plant = plant(third);
        let n = plant.order;
        let x = x.rows(0, n).into_owned();
        for i in 1..n {
            let mut moved = x.clone();
            for j in i..n {
                moved[j] += bump;
            }
            prop_assert_eq!(plant.regressor_values(i, x.as_slice()), plant.regressor_values(i, moved.as_slice()));
            prop_assert_eq!(plant.known_value(i, x.as_slice()), plant.known_value(i, moved.as_slice()));
        }
    }

    #[test]
    fn jet_partials_match_calculus(a in -1.0..1.0f64, b in -1.0..1.0f64) {
        let space = JetSpace::get(2, 2);
        let x = Jet::variable(&space, 0, a);
        let y = Jet::variable(&space, 1, b);
        let f = (&x * &y).sin() + x.exp() * &y;
        // ∂f/∂x = y cos(xy) + eˣ y, ∂²f/∂x∂y = cos(xy) − xy sin(xy) + eˣ
        let fx = f.partial(0);
        prop_assert!((fx.value() - (b * (a * b).cos() + a.exp() * b)).abs() <= 1e-12);
        let fxy = fx.partial(1);
        let expected = (a * b).cos() - a * b * (a * b).sin() + a.exp();
        prop_assert!((fxy.value() - expected).abs() <= 1e-12);
    }

    #[test]
    fn csv_values_round_trip(v in prop::num::f64::NORMAL) {
        let parsed: f64 = format_value(v).parse().unwrap();
        prop_assert!((parsed - v).abs() <= 5e-9 * v.abs());
    }

    #[test]
    fn config_documents_round_trip(k4 in 0.1..20.0f64, gamma in 0.001..1.0f64, x0 in vector(3), stride in 1usize..50) {
        let mut cfg = ScenarioConfig::builtin("fo_insufficient").unwrap();
        cfg.k4 = k4;
        cfg.gamma = gamma;
        cfg.x0 = x0.as_slice().to_vec();
        cfg.log_stride = stride;
        let back = parse_config(&cfg.to_document()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
