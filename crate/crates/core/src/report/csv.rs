//! Trajectory CSV files and their `.events` siblings.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sim::TrajectoryLog;

/// Decimal rendering with 9 significant digits; very large or small
/// magnitudes fall back to exponent notation.
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    let s = if (-5..12).contains(&exp) {
        format!("{:.*}", (8 - exp).max(0) as usize, v)
    } else {
        return format!("{v:.8e}");
    };
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn header(log: &TrajectoryLog) -> Vec<String> {
    let (n, p) = (log.state_dim, log.param_dim);
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("x{i}")));
    h.extend((1..=p).map(|i| format!("theta_hat_{i}")));
    h.extend((1..=p).map(|i| format!("theta_tilde_{i}")));
    h.extend((1..=p).map(|i| format!("eig_{i}")));
    h.extend(["rank", "excited_norm", "unexcited_norm", "V"].map(String::from));
    let m = log.input_dim();
    if m == 1 {
        h.push("u".into());
    } else {
        h.extend((1..=m).map(|i| format!("u{i}")));
    }
    h.push("zw_residual".into());
    let first = &log.rows[0];
    if first.reference.is_some() {
        h.push("xr".into());
    }
    if first.q_max_eig.is_some() {
        h.push("q_max_eig".into());
    }
    h
}

/// CSV text of a log: header plus one line per logged row.
pub fn render_csv(log: &TrajectoryLog) -> String {
    let mut out = header(log).join(",");
    out.push('\n');
    for r in &log.rows {
        let mut cells: Vec<String> = vec![format_value(r.t)];
        let vectors = [&r.x, &r.theta_hat, &r.theta_tilde];
        for v in vectors {
            cells.extend(v.iter().map(|&a| format_value(a)));
        }
        cells.extend(r.eigenvalues.iter().map(|&a| format_value(a)));
        cells.push(r.rank.to_string());
        for a in [r.excited_norm, r.unexcited_norm, r.v] {
            cells.push(format_value(a));
        }
        cells.extend(r.u.iter().map(|&a| format_value(a)));
        cells.push(format_value(r.zw_residual));
        cells.extend(r.reference.map(format_value));
        cells.extend(r.q_max_eig.map(format_value));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn render_events(log: &TrajectoryLog) -> String {
    log.rank_events
        .iter()
        .map(|e| format!("{},{}\n", format_value(e.t), e.rank))
        .collect()
}

pub fn events_path(csv: &Path) -> PathBuf {
    csv.with_extension("events")
}

/// Writes `path` and its `.events` sibling; returns both paths.
pub fn emit_csv(log: &TrajectoryLog, path: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::write(path, render_csv(log)).map_err(|e| Error::io(path, e))?;
    let events = events_path(path);
    fs::write(&events, render_events(log)).map_err(|e| Error::io(&events, e))?;
    Ok((path.to_path_buf(), events))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn parse_csv(text: &str) -> std::result::Result<CsvTable, String> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or("empty file")?
        .split(',')
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|c| c.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 2)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if row.len() != header.len() {
            return Err(format!(
                "line {}: {} cells, expected {}",
                i + 2,
                row.len(),
                header.len()
            ));
        }
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text).map_err(|m| {
        Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::InvalidData, m),
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::sim::run_scenario;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_value(1.5), "1.5");
        assert_eq!(format_value(-0.123456789123), "-0.123456789");
        assert_eq!(format_value(9.99999999993), "10");
        assert_eq!(format_value(123456.789123), "123456.789");
        assert_eq!(format_value(2.5e-20), "2.50000000e-20");
        assert_eq!(format_value(0.0), "0");
    }

    #[test]
    fn two_row_log_is_three_lines() {
        let mut cfg = ScenarioConfig::builtin("fo_insufficient").unwrap();
        cfg.horizon = cfg.dt;
        let log = run_scenario(&cfg).unwrap();
        let text = render_csv(&log);
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("t,x1,x2,x3,theta_hat_1,theta_hat_2,theta_hat_3,theta_tilde_1,"));
        assert_eq!(render_events(&log), "0.001,2\n");
    }

    #[test]
    fn backstepping_header_has_scalar_input_and_reference() {
        let mut cfg = ScenarioConfig::builtin("bs_composite").unwrap();
        cfg.horizon = 0.01;
        let log = run_scenario(&cfg).unwrap();
        let h = header(&log);
        assert!(h.ends_with(&["V".into(), "u".into(), "zw_residual".into(), "xr".into()]));
    }
}
