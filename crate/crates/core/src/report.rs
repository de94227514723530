//! Plain-text artifact writers. Per-step and per-grid-point series go to CSV
//! (one `# scenario_hash` provenance line, a header row naming units, then
//! data); scalar summaries go to JSON. Files are written to a temporary name
//! and renamed into place so a crash never leaves a half-written artifact.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::analysis::{EnsembleStats, InterpolationResult, ProbeResult};
use crate::error::{Error, Result};
use crate::optimizer::TrajectoryRecord;

/// Writes bytes to `path` via a temporary sibling and an atomic rename.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let parent = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let mut tmp = PathBuf::from(path);
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    tmp.set_file_name(format!(".{file_name}.tmp"));
    {
        let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        file.write_all(contents).map_err(|e| Error::io(&tmp, e))?;
        file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn provenance_line(scenario_hash: &str, units: &str) -> String {
    format!("# scenario_hash={scenario_hash} units={units}\n")
}

/// One row per recorded step of a single trajectory.
pub fn trajectory_csv(
    record: &TrajectoryRecord,
    directions: &[usize],
    scenario_hash: &str,
) -> String {
    let mut out = provenance_line(
        scenario_hash,
        "step=updates drift_sq=param^2 reward_mean=reward reward_std=reward proj=param",
    );
    out.push_str("step,drift_sq,reward_mean,reward_std");
    for k in directions {
        let _ = write!(out, ",proj_{k}");
    }
    out.push('\n');
    for t in 0..record.drift_sq.len() {
        let _ = write!(
            out,
            "{t},{},{},{}",
            record.drift_sq[t], record.reward_mean[t], record.reward_std[t]
        );
        for series in &record.projections {
            let _ = write!(out, ",{}", series[t]);
        }
        out.push('\n');
    }
    out
}

/// One row per step of the ensemble mean/stderr curves.
pub fn ensemble_csv(stats: &EnsembleStats, directions: &[usize], scenario_hash: &str) -> String {
    let mut out = provenance_line(
        scenario_hash,
        "step=updates mean_drift_sq=param^2 stderr_drift_sq=param^2 mean_proj=param var_proj=param^2",
    );
    out.push_str("step,mean_drift_sq,stderr_drift_sq");
    for k in directions {
        let _ = write!(out, ",mean_proj_{k},var_proj_{k}");
    }
    out.push('\n');
    for t in 0..stats.mean_drift.len() {
        let _ = write!(out, "{t},{},{}", stats.mean_drift[t], stats.stderr_drift[t]);
        for dir in &stats.directions {
            let _ = write!(out, ",{},{}", dir.mean[t], dir.variance[t]);
        }
        out.push('\n');
    }
    out
}

/// One row per mixing coefficient of an interpolation path.
pub fn interpolation_csv(result: &InterpolationResult, scenario_hash: &str) -> String {
    let mut out = provenance_line(scenario_hash, "coefficient=mixing reward=reward");
    out.push_str("coefficient,reward\n");
    for (c, r) in result.coefficients.iter().zip(&result.rewards) {
        let _ = writeln!(out, "{c},{r}");
    }
    out
}

/// One row per (direction, magnitude) pair across probe results.
pub fn probe_csv(results: &[ProbeResult], scenario_hash: &str) -> String {
    let mut out = provenance_line(scenario_hash, "magnitude=param reward=reward");
    out.push_str("direction,magnitude,reward\n");
    for probe in results {
        for (m, r) in probe.magnitudes.iter().zip(&probe.rewards) {
            let _ = writeln!(out, "{},{m},{r}", probe.direction_label);
        }
    }
    out
}

/// Parameter vector as a single-column CSV, loadable by the probe and
/// interpolate commands.
pub fn theta_csv(theta: &[f64], scenario_hash: &str) -> String {
    let mut out = provenance_line(scenario_hash, "value=param");
    out.push_str("value\n");
    for v in theta {
        let _ = writeln!(out, "{v}");
    }
    out
}

/// Reads a single-column CSV written by [`theta_csv`] (header optional,
/// `#` comment lines ignored).
pub fn read_theta_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == "value" {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|e| Error::parse(path, format!("bad value {line:?}: {e}")))?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::parse(path, "no values found"));
    }
    Ok(values)
}

/// Extracts one named column from a CSV artifact, skipping `#` lines.
pub fn read_csv_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, e.to_string()))?
        .clone();
    let idx = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::parse(path, format!("column {column:?} not found in {headers:?}")))?;
    let mut values = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::parse(path, e.to_string()))?;
        let field = row
            .get(idx)
            .ok_or_else(|| Error::parse(path, format!("short row while reading {column:?}")))?;
        values.push(
            field
                .parse()
                .map_err(|e| Error::parse(path, format!("bad value {field:?}: {e}")))?,
        );
    }
    Ok(values)
}

/// Serializes a JSON value with stable key order and writes it atomically.
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    atomic_write(path, text.as_bytes())
}
