//! Adaptive control with spectral excitation collection.
//!
//! The collector accumulates the regression pair `(Z, W)` with `Z = Wθ`,
//! forgetting along eigen-directions of `W` so that its spectrum stays
//! inside a preset band. Estimators for first-order plants and an adaptive
//! backstepping controller for strict-feedback plants consume it.

pub mod backstepping;
pub mod collector;
pub mod config;
pub mod error;
pub mod estimators;
pub mod jet;
pub mod plants;
pub mod report;
pub mod sim;
pub mod spectral;

pub use config::ScenarioConfig;
pub use error::{Error, Result};
pub use sim::{run_scenario, TrajectoryLog};
