//! Scenario configuration: a line-oriented `key = value` document.
//!
//! ```text
//! # comments start with '#'
//! scenario = fo_insufficient   # optional built-in base
//! k4 = 6
//! x0 = [4, 4, -3]
//! ```
//!
//! Keys missing from the document keep the values of the base scenario
//! (`fo_sufficient` when no `scenario` key is given).

use std::fmt::Write as _;

use crate::collector::{ForgettingConfig, ZMode};
use crate::error::{Error, Result};
use crate::estimators::UpdateLaw;
use crate::plants::{self, FirstOrderPlant, ReferenceSignal, StrictFeedbackPlant};

pub const DEFAULT_SCENARIO: &str = "fo_sufficient";

const FO_SUFFICIENT: &str = "\
name = fo_sufficient
plant = fo_benchmark
law = spectral_cl
k1 = 2
k4 = 4
gamma = 0.05
sigma_min = 5
sigma_max = 10
x0 = [3, 5, -3]
theta_hat0 = [0.5, 0.5, 0.5]
";

const FO_INSUFFICIENT: &str = "\
name = fo_insufficient
plant = fo_benchmark
law = spectral_cl
k1 = 2
k4 = 4
gamma = 0.05
sigma_min = 5
sigma_max = 10
x0 = [4, 4, -3]
theta_hat0 = [0.5, 0.5, 0.5]
";

const BS_LYAPUNOV: &str = "\
name = bs_lyapunov
plant = bs_benchmark
law = lyapunov
reference = sin
c = [8, 8]
k4 = 8
gamma = 0.01
sigma_min = 5
sigma_max = 10
x0 = [1, 0]
theta_hat0 = [0.5, 1.5, 0.5]
";

const BS_COMPOSITE: &str = "\
name = bs_composite
plant = bs_benchmark
law = spectral_cl
reference = sin
c = [8, 8]
k4 = 8
gamma = 0.01
sigma_min = 5
sigma_max = 10
x0 = [1, 0]
theta_hat0 = [0.5, 1.5, 0.5]
";

/// Built-in scenarios with a one-line description each.
pub const BUILTIN_SCENARIOS: [(&str, &str); 4] = [
    (
        "fo_sufficient",
        "first-order plant, x0 = [3,5,-3], sufficient excitation",
    ),
    (
        "fo_insufficient",
        "first-order plant, x0 = [4,4,-3], rank-deficient excitation",
    ),
    (
        "bs_lyapunov",
        "second-order backstepping, tuning-function update only",
    ),
    (
        "bs_composite",
        "second-order backstepping, composite-learning update",
    ),
];

/// Config text of a built-in scenario.
pub fn builtin_text(name: &str) -> Option<&'static str> {
    match name {
        "fo_sufficient" => Some(FO_SUFFICIENT),
        "fo_insufficient" => Some(FO_INSUFFICIENT),
        "bs_lyapunov" => Some(BS_LYAPUNOV),
        "bs_composite" => Some(BS_COMPOSITE),
        _ => None,
    }
}

/// A plant resolved from its catalog name.
#[derive(Debug, Clone)]
pub enum Plant {
    FirstOrder(FirstOrderPlant),
    StrictFeedback(StrictFeedbackPlant),
}

impl Plant {
    pub fn by_name(name: &str) -> Result<Plant> {
        match name {
            "fo_benchmark" => Ok(Plant::FirstOrder(plants::first_order_benchmark())),
            "bs_benchmark" => Ok(Plant::StrictFeedback(plants::second_order_benchmark())),
            "sf3_test" => Ok(Plant::StrictFeedback(plants::third_order_test_plant())),
            other => Err(Error::domain(
                "plant",
                format!("`{other}` is not one of fo_benchmark, bs_benchmark, sf3_test"),
            )),
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            Plant::FirstOrder(p) => p.dim,
            Plant::StrictFeedback(p) => p.order,
        }
    }

    pub fn param_dim(&self) -> usize {
        match self {
            Plant::FirstOrder(p) => p.param_dim,
            Plant::StrictFeedback(p) => p.param_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub plant: String,
    pub law: UpdateLaw,
    pub reference: ReferenceSignal,
    pub k1: f64,
    pub c: Vec<f64>,
    pub gamma: f64,
    pub k3: f64,
    pub k4: f64,
    pub filter_a: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Zero-eigenvalue threshold relative to `σ_max`.
    pub tol_zero_rel: f64,
    pub x0: Vec<f64>,
    pub theta_hat0: Vec<f64>,
    pub dt: f64,
    pub horizon: f64,
    pub z_mode: ZMode,
    pub log_stride: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: "custom".into(),
            plant: "fo_benchmark".into(),
            law: UpdateLaw::SpectralCl,
            reference: ReferenceSignal::Sine {
                amplitude: 1.0,
                frequency: 1.0,
            },
            k1: 2.0,
            c: vec![8.0, 8.0],
            gamma: 0.05,
            k3: 4.0,
            k4: 4.0,
            filter_a: 10.0,
            sigma_min: 5.0,
            sigma_max: 10.0,
            tol_zero_rel: 1e-9,
            x0: vec![3.0, 5.0, -3.0],
            theta_hat0: vec![0.5, 0.5, 0.5],
            dt: 1e-3,
            horizon: 40.0,
            z_mode: ZMode::Derivative,
            log_stride: 10,
        }
    }
}

impl ScenarioConfig {
    /// A built-in scenario by name.
    pub fn builtin(name: &str) -> Result<Self> {
        let text = builtin_text(name).ok_or_else(|| Error::UnknownScenario(name.to_string()))?;
        let mut cfg = ScenarioConfig::default();
        apply_document(&mut cfg, text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn forgetting(&self) -> Result<ForgettingConfig> {
        ForgettingConfig::new(self.sigma_min, self.sigma_max)
    }

    pub fn tol_zero(&self) -> f64 {
        self.tol_zero_rel * self.sigma_max
    }

    /// Number of integration steps, at least one.
    pub fn steps(&self) -> usize {
        ((self.horizon / self.dt).round() as usize).max(1)
    }

    pub fn resolve_plant(&self) -> Result<Plant> {
        Plant::by_name(&self.plant)
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let value = value.trim();
        match key {
            "scenario" => {
                return Err(Error::domain(
                    "scenario",
                    "only allowed as a document key, not as an override",
                ))
            }
            "name" => self.name = value.to_string(),
            "plant" => self.plant = value.to_string(),
            "law" => self.law = value.parse()?,
            "reference" => self.reference = parse_reference(value)?,
            "k1" => self.k1 = scalar(key, value)?,
            "c" => self.c = vector(key, value)?,
            "gamma" => self.gamma = scalar(key, value)?,
            "k3" => self.k3 = scalar(key, value)?,
            "k4" => self.k4 = scalar(key, value)?,
            "filter_a" => self.filter_a = scalar(key, value)?,
            "sigma_min" => self.sigma_min = scalar(key, value)?,
            "sigma_max" => self.sigma_max = scalar(key, value)?,
            "tol_zero_rel" => self.tol_zero_rel = scalar(key, value)?,
            "x0" => self.x0 = vector(key, value)?,
            "theta_hat0" => self.theta_hat0 = vector(key, value)?,
            "dt" => self.dt = scalar(key, value)?,
            "horizon" => self.horizon = scalar(key, value)?,
            "z_mode" => {
                self.z_mode = match value {
                    "derivative" => ZMode::Derivative,
                    "substitution" => ZMode::Substitution,
                    other => {
                        return Err(Error::domain(
                            key,
                            format!("`{other}` is not one of derivative, substitution"),
                        ))
                    }
                }
            }
            "log_stride" => {
                self.log_stride = value.parse().map_err(|_| {
                    Error::domain(key, format!("`{value}` is not a positive integer"))
                })?
            }
            other => return Err(Error::domain(other, "unknown key")),
        }
        Ok(())
    }

    /// Checks every invariant, including dimensions against the plant.
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(key, format!("must be positive, got {v}")))
            }
        };
        positive("gamma", self.gamma)?;
        positive("k1", self.k1)?;
        positive("k3", self.k3)?;
        positive("k4", self.k4)?;
        positive("filter_a", self.filter_a)?;
        positive("tol_zero_rel", self.tol_zero_rel)?;
        positive("dt", self.dt)?;
        positive("horizon", self.horizon)?;
        self.forgetting()?;
        if self.horizon < self.dt {
            return Err(Error::domain(
                "horizon",
                format!("must be at least dt ({} < {})", self.horizon, self.dt),
            ));
        }
        if self.log_stride == 0 {
            return Err(Error::domain("log_stride", "must be at least 1"));
        }
        for (key, v) in [("x0", &self.x0), ("theta_hat0", &self.theta_hat0)] {
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::domain(key, "entries must be finite"));
            }
        }

        let plant = self.resolve_plant()?;
        let dims = |key: &str, expected: usize, found: usize| {
            if expected == found {
                Ok(())
            } else {
                Err(Error::domain(
                    key,
                    format!(
                        "plant `{}` needs {expected} entries, got {found}",
                        self.plant
                    ),
                ))
            }
        };
        dims("x0", plant.state_dim(), self.x0.len())?;
        dims("theta_hat0", plant.param_dim(), self.theta_hat0.len())?;
        if let Plant::StrictFeedback(sf) = &plant {
            dims("c", sf.order, self.c.len())?;
            if let Some(bad) = self.c.iter().find(|v| !(**v > 0.0)) {
                return Err(Error::domain(
                    "c",
                    format!("all gains must be positive, got {bad}"),
                ));
            }
            if self.law == UpdateLaw::FilteredCl {
                return Err(Error::domain(
                    "law",
                    "filtered_cl is only available for first-order plants",
                ));
            }
        }
        Ok(())
    }

    /// Renders the config as a document that parses back to `self`.
    pub fn to_document(&self) -> String {
        let vec = |v: &[f64]| {
            let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
            format!("[{}]", items.join(", "))
        };
        let reference = match self.reference {
            ReferenceSignal::Zero => "zero".to_string(),
            ReferenceSignal::Sine {
                amplitude,
                frequency,
            } if amplitude == 1.0 && frequency == 1.0 => "sin".to_string(),
            ReferenceSignal::Sine {
                amplitude,
                frequency,
            } => format!("sin({amplitude:?}, {frequency:?})"),
        };
        let mut out = String::new();
        let _ = writeln!(out, "name = {}", self.name);
        let _ = writeln!(out, "plant = {}", self.plant);
        let _ = writeln!(out, "law = {}", self.law);
        let _ = writeln!(out, "reference = {reference}");
        let _ = writeln!(out, "k1 = {:?}", self.k1);
        let _ = writeln!(out, "c = {}", vec(&self.c));
        let _ = writeln!(out, "gamma = {:?}", self.gamma);
        let _ = writeln!(out, "k3 = {:?}", self.k3);
        let _ = writeln!(out, "k4 = {:?}", self.k4);
        let _ = writeln!(out, "filter_a = {:?}", self.filter_a);
        let _ = writeln!(out, "sigma_min = {:?}", self.sigma_min);
        let _ = writeln!(out, "sigma_max = {:?}", self.sigma_max);
        let _ = writeln!(out, "tol_zero_rel = {:?}", self.tol_zero_rel);
        let _ = writeln!(out, "x0 = {}", vec(&self.x0));
        let _ = writeln!(out, "theta_hat0 = {}", vec(&self.theta_hat0));
        let _ = writeln!(out, "dt = {:?}", self.dt);
        let _ = writeln!(out, "horizon = {:?}", self.horizon);
        let _ = writeln!(out, "z_mode = {}", self.z_mode.as_str());
        let _ = writeln!(out, "log_stride = {}", self.log_stride);
        out
    }
}

fn scalar(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::domain(key, format!("`{value}` is not a number")))
}

fn vector(key: &str, value: &str) -> Result<Vec<f64>> {
    let inner = value
        .strip_prefix('[')
        .and_then(|v| v.strip_suffix(']'))
        .ok_or_else(|| Error::domain(key, format!("`{value}` is not a bracketed list")))?;
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|item| scalar(key, item.trim()))
        .collect()
}

fn parse_reference(value: &str) -> Result<ReferenceSignal> {
    match value {
        "sin" => Ok(ReferenceSignal::Sine {
            amplitude: 1.0,
            frequency: 1.0,
        }),
        "zero" => Ok(ReferenceSignal::Zero),
        other => {
            let args = other
                .strip_prefix("sin(")
                .and_then(|v| v.strip_suffix(')'))
                .ok_or_else(|| {
                    Error::domain(
                        "reference",
                        format!("`{other}` is not sin, zero or sin(A, w)"),
                    )
                })?;
            let parts = vector("reference", &format!("[{args}]"))?;
            match parts.as_slice() {
                &[amplitude, frequency] => Ok(ReferenceSignal::Sine {
                    amplitude,
                    frequency,
                }),
                _ => Err(Error::domain("reference", "sin(A, w) takes two arguments")),
            }
        }
    }
}

/// Splits a document into `(line number, key, value)` triples.
fn assignments(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigSyntax {
            line: line_no,
            message: format!("expected `key = value`, found `{line}`"),
        })?;
        let key = key.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(Error::ConfigSyntax {
                line: line_no,
                message: format!("invalid key `{key}`"),
            });
        }
        let value = value.trim();
        if value.is_empty() {
            return Err(Error::ConfigSyntax {
                line: line_no,
                message: format!("missing value for `{key}`"),
            });
        }
        let opens = value.matches('[').count();
        let closes = value.matches(']').count();
        if opens != closes || opens > 1 {
            return Err(Error::ConfigSyntax {
                line: line_no,
                message: format!("unbalanced list `{value}`"),
            });
        }
        out.push((line_no, key.to_string(), value.to_string()));
    }
    Ok(out)
}

fn apply_document(cfg: &mut ScenarioConfig, text: &str) -> Result<()> {
    for (line, key, value) in assignments(text)? {
        if key == "scenario" {
            continue;
        }
        cfg.set(&key, &value).map_err(|e| match e {
            Error::ConfigDomain { key, message } if message == "unknown key" => {
                Error::ConfigSyntax {
                    line,
                    message: format!("unknown key `{key}`"),
                }
            }
            other => other,
        })?;
    }
    Ok(())
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let lines = assignments(text)?;
    let base = lines
        .iter()
        .rev()
        .find(|(_, k, _)| k == "scenario")
        .map(|(_, _, v)| v.as_str())
        .unwrap_or(DEFAULT_SCENARIO);
    let mut cfg = ScenarioConfig::builtin(base)?;
    apply_document(&mut cfg, text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// A built-in scenario name or the path of a config document.
pub fn load_scenario(source: &str) -> Result<ScenarioConfig> {
    if builtin_text(source).is_some() {
        return ScenarioConfig::builtin(source);
    }
    let path = std::path::Path::new(source);
    if !path.exists() {
        return Err(Error::UnknownScenario(source.to_string()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_insufficient_text() {
        let cfg = parse_config(builtin_text("fo_insufficient").unwrap()).unwrap();
        assert_eq!(cfg.x0, vec![4.0, 4.0, -3.0]);
        assert_eq!((cfg.sigma_min, cfg.sigma_max, cfg.gamma), (5.0, 10.0, 0.05));
        assert_eq!((cfg.k1, cfg.k4), (2.0, 4.0));
        assert_eq!(cfg.theta_hat0, vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn empty_document_is_default_scenario() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, ScenarioConfig::builtin(DEFAULT_SCENARIO).unwrap());
        assert_eq!(cfg.dt, 1e-3);
        assert_eq!(cfg.horizon, 40.0);
        assert_eq!(cfg.log_stride, 10);
        assert_eq!(cfg.z_mode, ZMode::Derivative);
    }

    #[test]
    fn inverted_sigma_bounds_are_rejected() {
        let err = parse_config("sigma_min = 5\nsigma_max = 3\n").unwrap_err();
        assert!(
            matches!(err, Error::ConfigDomain { ref key, .. } if key == "sigma_max"),
            "{err}"
        );
    }

    #[test]
    fn syntax_errors_report_lines() {
        let err = parse_config("# header\nk1 = 2\nk4 4\n").unwrap_err();
        assert!(matches!(err, Error::ConfigSyntax { line: 3, .. }), "{err}");
        let err = parse_config("\n\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::ConfigSyntax { line: 3, .. }), "{err}");
        let err = parse_config("x0 = [1, 2\n").unwrap_err();
        assert!(matches!(err, Error::ConfigSyntax { line: 1, .. }), "{err}");
    }

    #[test]
    fn base_scenario_and_overrides() {
        let cfg = parse_config("scenario = bs_composite\nk4 = 6 # stiffer\n").unwrap();
        assert_eq!(cfg.plant, "bs_benchmark");
        assert_eq!(cfg.k4, 6.0);
        assert_eq!(cfg.c, vec![8.0, 8.0]);
        assert!(matches!(
            parse_config("scenario = nope\n"),
            Err(Error::UnknownScenario(_))
        ));
    }

    #[test]
    fn domain_violations() {
        assert!(parse_config("k4 = 0").is_err());
        assert!(parse_config("x0 = [1, 2]").is_err());
        assert!(parse_config("dt = -1").is_err());
        assert!(parse_config("scenario = bs_lyapunov\nlaw = filtered_cl").is_err());
        assert!(parse_config("z_mode = magic").is_err());
        assert!(parse_config("log_stride = 0").is_err());
        assert!(parse_config("scenario = bs_lyapunov\nc = [1, -1]").is_err());
    }

    #[test]
    fn reference_forms() {
        assert_eq!(parse_reference("zero").unwrap(), ReferenceSignal::Zero);
        assert_eq!(
            parse_reference("sin(2, 0.5)").unwrap(),
            ReferenceSignal::Sine {
                amplitude: 2.0,
                frequency: 0.5
            }
        );
        assert!(parse_reference("cos").is_err());
    }

    #[test]
    fn document_round_trip() {
        for (name, _) in BUILTIN_SCENARIOS {
            let mut cfg = ScenarioConfig::builtin(name).unwrap();
            cfg.reference = ReferenceSignal::Sine {
                amplitude: 0.3,
                frequency: 2.5,
            };
            cfg.dt = 2.5e-4;
            let back = parse_config(&cfg.to_document()).unwrap();
            assert_eq!(back, cfg);
        }
    }
}
