//! Uncertain plant models and the built-in benchmark instances.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::jet::{Jet, JetSpace};

pub type DriftMap = fn(&DVector<f64>) -> DVector<f64>;
pub type RegressorMap = fn(&DVector<f64>) -> DMatrix<f64>;

/// `ẋ = f(x) + φ(x)ᵀθ + u` with `φ(x) ∈ ℝ^{p×n}`.
#[derive(Debug, Clone)]
pub struct FirstOrderPlant {
    pub name: &'static str,
    pub dim: usize,
    pub param_dim: usize,
    pub drift: DriftMap,
    pub regressor: RegressorMap,
    pub true_theta: DVector<f64>,
}

impl FirstOrderPlant {
    pub fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.drift)(x)
    }

    pub fn regressor(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.regressor)(x)
    }

    pub fn dynamics(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        first_order_dynamics(self, x, u)
    }
}

pub fn first_order_dynamics(
    plant: &FirstOrderPlant,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dim("first_order_dynamics x", plant.dim, x.len())?;
    check_dim("first_order_dynamics u", plant.dim, u.len())?;
    let xdot = plant.drift(x) + plant.regressor(x).transpose() * &plant.true_theta + u;
    finite(xdot, "first-order plant dynamics")
}

/// Stage map of a strict-feedback plant. The first argument is the 1-based
/// stage index `i`; the slice holds `x_1..x_n`, of which only the first `i`
/// may be read.
pub type StageRegressor = fn(usize, &[Jet]) -> Vec<Jet>;
pub type StageKnown = fn(usize, &[Jet]) -> Jet;

/// `ẋ_i = x_{i+1} + φ_iᵀθ + ψ_i` for `i < n`, `ẋ_n = u + φ_nᵀθ + ψ_n`.
///
/// Stage maps are written over [`Jet`] so the backstepping controller can
/// differentiate them exactly.
#[derive(Debug, Clone)]
pub struct StrictFeedbackPlant {
    pub name: &'static str,
    pub order: usize,
    pub param_dim: usize,
    pub regressor: StageRegressor,
    pub known: StageKnown,
    pub true_theta: DVector<f64>,
}

fn constants(x: &[f64]) -> Vec<Jet> {
    let space = JetSpace::get(x.len(), 0);
    x.iter().map(|&v| Jet::constant(&space, v)).collect()
}

impl StrictFeedbackPlant {
    pub fn stage_regressor(&self, stage: usize, x: &[Jet]) -> Vec<Jet> {
        (self.regressor)(stage, x)
    }

    pub fn stage_known(&self, stage: usize, x: &[Jet]) -> Jet {
        (self.known)(stage, x)
    }

    /// `φ_i(x)` at plain values.
    pub fn regressor_values(&self, stage: usize, x: &[f64]) -> DVector<f64> {
        let phi = self.stage_regressor(stage, &constants(x));
        DVector::from_iterator(self.param_dim, phi.iter().map(Jet::value))
    }

    pub fn known_value(&self, stage: usize, x: &[f64]) -> f64 {
        self.stage_known(stage, &constants(x)).value()
    }

    pub fn dynamics(&self, x: &DVector<f64>, u: f64) -> Result<DVector<f64>> {
        strict_feedback_dynamics(self, x, u)
    }

    pub fn stacked_regressor(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        stacked_regressor(self, x)
    }
}

pub fn strict_feedback_dynamics(
    plant: &StrictFeedbackPlant,
    x: &DVector<f64>,
    u: f64,
) -> Result<DVector<f64>> {
    check_dim("strict_feedback_dynamics", plant.order, x.len())?;
    let (mut xdot, phi) = stacked_regressor(plant, x);
    xdot[plant.order - 1] += u;
    xdot += phi.transpose() * &plant.true_theta;
    finite(xdot, "strict-feedback plant dynamics")
}

/// Returns `F(x, 0)` and `Φ(x) = [φ_1, …, φ_n]`; callers add `u` to the last
/// entry of `F`.
pub fn stacked_regressor(
    plant: &StrictFeedbackPlant,
    x: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let n = plant.order;
    let xs = constants(x.as_slice());
    let mut f = DVector::zeros(n);
    let mut phi = DMatrix::zeros(plant.param_dim, n);
    for i in 1..=n {
        let next = if i < n { x[i] } else { 0.0 };
        f[i - 1] = next + plant.stage_known(i, &xs).value();
        for (k, v) in plant.stage_regressor(i, &xs).iter().enumerate() {
            phi[(k, i - 1)] = v.value();
        }
    }
    (f, phi)
}

/// Reference trajectory with analytic derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceSignal {
    /// `A sin(ωt)`
    Sine {
        amplitude: f64,
        frequency: f64,
    },
    Zero,
}

impl ReferenceSignal {
    /// `[x_r, ẋ_r, …, x_r^{(order)}]` at time `t`.
    pub fn derivatives(&self, t: f64, order: usize) -> Vec<f64> {
        match *self {
            ReferenceSignal::Sine {
                amplitude,
                frequency,
            } => (0..=order)
                .map(|k| {
                    let phase = frequency * t + k as f64 * std::f64::consts::FRAC_PI_2;
                    amplitude * frequency.powi(k as i32) * phase.sin()
                })
                .collect(),
            ReferenceSignal::Zero => vec![0.0; order + 1],
        }
    }
}

fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}

fn finite(v: DVector<f64>, stage: &str) -> Result<DVector<f64>> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            stage: stage.to_string(),
        })
    }
}

/// Three-state first-order benchmark with a coupled regressor:
/// `f = [x₁, x₂, sin x₃]`, `θ = [1, 2, -1]`.
pub fn first_order_benchmark() -> FirstOrderPlant {
    fn drift(x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![x[0], x[1], x[2].sin()])
    }
    fn regressor(x: &DVector<f64>) -> DMatrix<f64> {
        #[rustfmt::skip]
        let phi = DMatrix::from_row_slice(3, 3, &[
            x[1], x[0], 0.0,
            x[0], x[1], 0.0,
            0.0,  0.0,  x[2] * x[2],
        ]);
        phi
    }
    FirstOrderPlant {
        name: "fo_benchmark",
        dim: 3,
        param_dim: 3,
        drift,
        regressor,
        true_theta: DVector::from_vec(vec![1.0, 2.0, -1.0]),
    }
}

/// Second-order strict-feedback benchmark with unmatched uncertainty:
/// `φ₁ = [x₁, x₁², 0]`, `φ₂ = [x₁x₂, x₂, x₂²]`, `ψ = 0`, `θ = [1, 1, 1]`.
pub fn second_order_benchmark() -> StrictFeedbackPlant {
    fn regressor(stage: usize, x: &[Jet]) -> Vec<Jet> {
        match stage {
            1 => vec![x[0].clone(), &x[0] * &x[0], x[0].lift(0.0)],
            2 => vec![&x[0] * &x[1], x[1].clone(), &x[1] * &x[1]],
            _ => unreachable!("second-order plant has two stages"),
        }
    }
    fn known(_stage: usize, x: &[Jet]) -> Jet {
        x[0].lift(0.0)
    }
    StrictFeedbackPlant {
        name: "bs_benchmark",
        order: 2,
        param_dim: 3,
        regressor,
        known,
        true_theta: DVector::from_vec(vec![1.0, 1.0, 1.0]),
    }
}

/// Third-order strict-feedback plant with non-zero known terms, used to
/// exercise the general recursion.
pub fn third_order_test_plant() -> StrictFeedbackPlant {
    fn regressor(stage: usize, x: &[Jet]) -> Vec<Jet> {
        match stage {
            1 => vec![x[0].sin(), x[0].lift(0.0)],
            2 => vec![&x[0] * &x[1], x[1].cos()],
            3 => vec![x[2].clone(), &(&x[0] * &x[2]) * &x[1]],
            _ => unreachable!("third-order plant has three stages"),
        }
    }
    fn known(stage: usize, x: &[Jet]) -> Jet {
        match stage {
            1 => &x[0] * &x[0] * 0.5,
            2 => (&x[0] * &x[1]).exp() * 0.1,
            3 => &x[2] * &x[1] - x[0].cos(),
            _ => unreachable!("third-order plant has three stages"),
        }
    }
    StrictFeedbackPlant {
        name: "sf3_test",
        order: 3,
        param_dim: 2,
        regressor,
        known,
        true_theta: DVector::from_vec(vec![0.8, -0.5]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_vec(xs.to_vec())
    }

    #[test]
    fn first_order_benchmark_dynamics() {
        let plant = first_order_benchmark();
        let x = v(&[3.0, 5.0, -3.0]);
        let xdot = plant.dynamics(&x, &DVector::zeros(3)).unwrap();
        let expected = v(&[14.0, 18.0, (-3.0f64).sin() - 9.0]);
        assert!((xdot - expected).amax() < 1e-12);

        let zero = DVector::zeros(3);
        assert_eq!(plant.dynamics(&zero, &zero).unwrap(), zero);
    }

    #[test]
    fn exact_cancellation_stops_the_plant() {
        let plant = first_order_benchmark();
        let x = v(&[0.3, -1.2, 2.0]);
        let u = -(plant.drift(&x) + plant.regressor(&x).transpose() * &plant.true_theta);
        assert!(plant.dynamics(&x, &u).unwrap().amax() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let plant = first_order_benchmark();
        let r = plant.dynamics(&DVector::zeros(2), &DVector::zeros(3));
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn strict_feedback_examples() {
        let plant = second_order_benchmark();
        assert_eq!(
            plant.dynamics(&v(&[1.0, 0.0]), 0.0).unwrap(),
            v(&[2.0, 0.0])
        );
        assert_eq!(
            plant.dynamics(&v(&[0.0, 0.0]), 0.0).unwrap(),
            v(&[0.0, 0.0])
        );
        assert_eq!(
            plant.dynamics(&v(&[0.0, 1.0]), 0.0).unwrap(),
            v(&[1.0, 2.0])
        );
    }

    #[test]
    fn stacked_regressor_examples() {
        let plant = second_order_benchmark();
        let (f, phi) = plant.stacked_regressor(&v(&[1.0, 0.0]));
        assert_eq!(f, v(&[0.0, 0.0]));
        assert_eq!(
            phi,
            DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 0.0])
        );

        let (_, phi) = plant.stacked_regressor(&v(&[0.0, 0.0]));
        assert_eq!(phi, DMatrix::zeros(3, 2));

        let (_, phi) = plant.stacked_regressor(&v(&[1.0, 1.0]));
        assert_eq!(
            phi,
            DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 1.0, 0.0, 1.0])
        );
    }

    #[test]
    fn stage_maps_are_triangular() {
        for plant in [second_order_benchmark(), third_order_test_plant()] {
            let n = plant.order;
            let base: Vec<f64> = (0..n).map(|k| 0.3 + 0.2 * k as f64).collect();
            for i in 1..=n {
                let phi = plant.regressor_values(i, &base);
                let psi = plant.known_value(i, &base);
                for j in i..n {
                    let mut probe = base.clone();
                    probe[j] += 1.7;
                    assert_eq!(
                        plant.regressor_values(i, &probe),
                        phi,
                        "{} φ_{i} x_{}",
                        plant.name,
                        j + 1
                    );
                    assert_eq!(
                        plant.known_value(i, &probe),
                        psi,
                        "{} ψ_{i} x_{}",
                        plant.name,
                        j + 1
                    );
                }
            }
        }
    }

    #[test]
    fn sine_reference_derivatives() {
        let r = ReferenceSignal::Sine {
            amplitude: 1.0,
            frequency: 1.0,
        };
        let d = r.derivatives(0.4, 3);
        let (s, c) = 0.4f64.sin_cos();
        let expected = [s, c, -s, -c];
        for (a, b) in d.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
