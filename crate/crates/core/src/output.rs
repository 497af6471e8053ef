//! Result emission: CSV for plotting pipelines, JSON for everything
//! else. Numbers are written with Rust's shortest round-trip `f64`
//! formatting, so full double precision survives a parse back.

use std::io::Write;
use std::path::Path;

use crate::analysis::{ConfigRow, CrlbReport, SweepPoint};
use crate::error::{Error, Result};

/// Output encoding for reports and tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidArgument(format!(
                "unknown output format '{other}' (expected csv or json)"
            ))),
        }
    }
}

fn number(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "NaN".to_string(),
    }
}

/// CSV table for a sweep: header plus one row per grid point.
///
/// Schema: `axis_value, pos_bound_m, vel_bound_mps, ori_bound_rad,
/// identifiable`; non-identifiable points carry `NaN` bounds.
pub fn sweep_to_csv(points: &[SweepPoint]) -> Result<String> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("no sweep points to emit".into()));
    }
    let mut out = String::from("axis_value,pos_bound_m,vel_bound_mps,ori_bound_rad,identifiable\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.axis_value,
            number(p.report.position_bound_m),
            number(p.report.velocity_bound_mps),
            number(p.report.orientation_bound_rad),
            p.report.identifiable
        ));
    }
    Ok(out)
}

/// JSON mirror of the sweep reports.
pub fn sweep_to_json(points: &[SweepPoint]) -> Result<String> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("no sweep points to emit".into()));
    }
    serde_json::to_string_pretty(points)
        .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))
}

/// Single-report JSON (the `analyze` output).
pub fn report_to_json(report: &CrlbReport) -> Result<String> {
    serde_json::to_string_pretty(report)
        .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))
}

/// CSV table for an identifiability grid.
pub fn config_rows_to_csv(rows: &[ConfigRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no verdict rows to emit".into()));
    }
    let mut out =
        String::from("n_sats,n_slots,n_antennas,positive_definite,eigen_ratio,minimal\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n_sats, r.n_slots, r.n_antennas, r.positive_definite, r.eigen_ratio, r.minimal
        ));
    }
    Ok(out)
}

/// JSON mirror of the identifiability grid.
pub fn config_rows_to_json(rows: &[ConfigRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no verdict rows to emit".into()));
    }
    serde_json::to_string_pretty(rows)
        .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))
}

/// Write `content` to `path`, or to stdout when no path is given.
pub fn emit(content: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            let mut f = std::fs::File::create(p).map_err(|e| Error::Io {
                path: p.display().to_string(),
                source: e,
            })?;
            f.write_all(content.as_bytes()).map_err(|e| Error::Io {
                path: p.display().to_string(),
                source: e,
            })?;
            Ok(())
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{parameter_sweep, SweepAxis};
    use crate::scenario::{default_scenario, SyncMode};

    fn sample_points() -> Vec<SweepPoint> {
        let s = default_scenario(3, 3, 4, SyncMode::BothOffsets);
        parameter_sweep(&s, SweepAxis::Snr, &[-20.0, 0.0]).unwrap()
    }

    #[test]
    fn csv_has_header_and_one_row_per_point() {
        let points = sample_points();
        let csv = sweep_to_csv(&points[..1]).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with(
            "axis_value,pos_bound_m,vel_bound_mps,ori_bound_rad,identifiable"
        ));
    }

    #[test]
    fn csv_and_json_carry_identical_numbers() {
        let points = sample_points();
        let csv = sweep_to_csv(&points).unwrap();
        let json = sweep_to_json(&points).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        for (line, item) in csv.lines().skip(1).zip(parsed.as_array().unwrap()) {
            let cols: Vec<&str> = line.split(',').collect();
            let pos_csv: f64 = cols[1].parse().unwrap();
            let pos_json = item["report"]["position_bound_m"].as_f64().unwrap();
            assert_eq!(pos_csv, pos_json, "round-trip formatting must be exact");
        }
    }

    #[test]
    fn non_identifiable_rows_emit_nan() {
        let s = default_scenario(1, 1, 1, SyncMode::BothOffsets);
        let points = parameter_sweep(&s, SweepAxis::Snr, &[-20.0]).unwrap();
        let csv = sweep_to_csv(&points).unwrap();
        let row = csv.lines().nth(1).unwrap();
        assert!(row.contains("NaN"));
        assert!(row.ends_with("false"));
    }

    #[test]
    fn empty_input_rejected() {
        assert!(sweep_to_csv(&[]).is_err());
        assert!(config_rows_to_json(&[]).is_err());
    }
}
