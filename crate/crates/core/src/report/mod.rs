//! Output files and the reproduction suite.

pub mod criteria;
pub mod csv;
pub mod plot;
pub mod selfcheck;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::sim::TrajectoryLog;

pub use criteria::Outcome;

/// Seed of the randomized self-checks run by `reproduce`.
pub const SELF_CHECK_SEED: u64 = 20_240_601;

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `<name>.csv`, `<name>.events` and optionally the SVG plots.
pub fn write_outputs(log: &TrajectoryLog, dir: &Path, plots: bool) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let stem = &log.config.name;
    let (csv, events) = csv::emit_csv(log, &dir.join(format!("{stem}.csv")))?;
    let mut files = vec![csv, events];
    if plots {
        files.extend(plot::write_plots(log, dir, stem)?);
    }
    Ok(files)
}

#[derive(Debug)]
pub struct ReproduceSummary {
    pub outcomes: Vec<Outcome>,
    pub files: Vec<PathBuf>,
    pub elapsed: Duration,
}

impl ReproduceSummary {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }
}

impl fmt::Display for ReproduceSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in &self.outcomes {
            writeln!(f, "{o}")?;
        }
        let passed = self.outcomes.iter().filter(|o| o.passed).count();
        write!(
            f,
            "{passed}/{} criteria passed in {:.1} s",
            self.outcomes.len(),
            self.elapsed.as_secs_f64()
        )
    }
}

/// Runs the built-in scenarios, writes their outputs into `outdir` and
/// evaluates every acceptance criterion.
pub fn reproduce_all(outdir: &Path, plots: bool) -> Result<ReproduceSummary> {
    let start = Instant::now();
    ensure_dir(outdir)?;
    let runs = criteria::run_all(&criteria::builtin_configs()?);
    let mut files = Vec::new();
    for name in criteria::SCENARIOS {
        let log = match runs.runs.iter().find(|(n, _)| n == name) {
            Some((_, Ok(log))) => Some(log),
            Some((_, Err(Error::Diverged { partial, .. }))) => Some(partial.as_ref()),
            _ => None,
        };
        if let Some(log) = log {
            files.extend(write_outputs(log, outdir, plots)?);
        }
    }
    let mut outcomes = criteria::scenario_criteria(&runs);
    outcomes.extend(criteria::property_criteria(SELF_CHECK_SEED));
    outcomes.sort_by(|a, b| a.id.cmp(b.id));
    let summary = ReproduceSummary {
        outcomes,
        files,
        elapsed: start.elapsed(),
    };
    let path = outdir.join("summary.txt");
    fs::write(&path, format!("{summary}\n")).map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}
