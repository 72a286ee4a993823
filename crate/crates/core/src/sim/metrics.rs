//! Error decomposition and Lyapunov values.

use nalgebra::DVector;

use crate::spectral::Spectrum;

/// Splits `θ̃` into its excited (range of `W`) and unexcited (null space of
/// `W`) components.
pub fn decompose_error(
    theta_tilde: &DVector<f64>,
    spectrum: &Spectrum,
) -> (DVector<f64>, DVector<f64>) {
    let unexcited = spectrum.zero_projector() * theta_tilde;
    (theta_tilde - &unexcited, unexcited)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LyapunovKind {
    /// `V_a = ½xᵀx + θ̃ᵀθ̃/(2γ)`
    Full,
    /// `V_κ = ½xᵀx + θ̃₁ᵀθ̃₁/(2γ)`, excited component only.
    Excited,
    /// `V_n = ½Σz_i² + θ̃ᵀθ̃/(2γ)`
    Tracking,
}

/// All three candidates share one quadratic form; `kind` documents which
/// state and error component the caller passes in.
pub fn lyapunov_value(
    _kind: LyapunovKind,
    state: &DVector<f64>,
    theta_component: &DVector<f64>,
    gamma: f64,
) -> f64 {
    debug_assert!(gamma > 0.0);
    0.5 * state.norm_squared() + theta_component.norm_squared() / (2.0 * gamma)
}
