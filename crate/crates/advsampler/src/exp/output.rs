//! Run artifacts: metric/sample CSVs, grid pmf dumps, and the manifest.
//!
//! CSV columns are fixed per mode and never reorder; see the README for the
//! schemas. Floats are written in Rust's shortest round-trip form, so a rerun
//! with the same config and seed reproduces every file byte for byte.

use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::Serialize;
use serde_json::json;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::metrics::{density_pmf, histogram_pmf, GridSpec, MetricRow};
use crate::sql::ReturnRow;

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// `metrics.csv` for the adversarial training modes:
/// `iteration,critic_loss,generator_loss,beta,sym_kl,mode_coverage`.
pub fn write_metric_rows(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "iteration",
        "critic_loss",
        "generator_loss",
        "beta",
        "sym_kl",
        "mode_coverage",
    ])?;
    for r in rows {
        w.write_record([
            r.iteration.to_string(),
            fmt(r.critic_loss),
            fmt(r.generator_loss),
            fmt(r.beta),
            fmt(r.sym_kl),
            r.mode_coverage.map(fmt).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `metrics.csv` for soft Q-learning:
/// `env_step,eval_return_mean,eval_return_std`.
pub fn write_return_rows(path: &Path, rows: &[ReturnRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["env_step", "eval_return_mean", "eval_return_std"])?;
    for r in rows {
        w.write_record([
            r.env_step.to_string(),
            fmt(r.eval_return_mean),
            fmt(r.eval_return_std),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Generic small CSV: one header plus rows of floats.
pub fn write_float_rows(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| fmt(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// `samples.csv`: header `x0,x1,...` then one row per sample.
pub fn write_samples(path: &Path, samples: ArrayView2<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let header: Vec<String> = (0..samples.ncols()).map(|j| format!("x{j}")).collect();
    w.write_record(&header)?;
    for row in samples.axis_iter(Axis(0)) {
        w.write_record(row.iter().map(|v| fmt(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `samples.csv` back into a matrix.
pub fn read_samples(path: &Path) -> Result<Array2<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let width = r.headers()?.len();
    if width == 0 {
        return Err(Error::Config(format!("{}: empty sample file", path.display())));
    }
    let mut values = Vec::new();
    let mut rows = 0usize;
    for record in r.records() {
        let record = record?;
        if record.len() != width {
            return Err(Error::Config(format!(
                "{}: ragged row with {} fields (expected {width})",
                path.display(),
                record.len()
            )));
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Config(format!("{}: non-numeric field {field:?}", path.display()))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, width), values)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// `grid_pmf.csv`: cell centers, the discretized target pmf, and the sample
/// histogram pmf on the same grid.
pub fn write_grid_pmf<F: Fn(ArrayView1<f64>) -> f64>(
    path: &Path,
    grid: &GridSpec,
    log_density: F,
    samples: ArrayView2<f64>,
) -> Result<()> {
    let target = density_pmf(log_density, grid);
    let (hist, _) = histogram_pmf(samples, grid)?;
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..grid.ndim()).map(|j| format!("c{j}")).collect();
    header.push("target_pmf".into());
    header.push("sample_pmf".into());
    w.write_record(&header)?;
    for i in 0..grid.num_cells() {
        let center = grid.cell_center(i);
        let mut rec: Vec<String> = center.iter().map(|v| fmt(*v)).collect();
        rec.push(fmt(target[i]));
        rec.push(fmt(hist[i]));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Error,
}

/// `manifest.json`: the resolved config, the seed, build provenance, and the
/// run status (plus the diagnostic when a run aborted).
pub fn write_manifest(
    path: &Path,
    cfg: &ExperimentConfig,
    seed: u64,
    status: RunStatus,
    error: Option<&str>,
) -> Result<()> {
    let manifest = json!({
        "config": cfg,
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
        "git": git_describe(),
        "status": status,
        "error": error,
    });
    std::fs::write(path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".to_string())
}
