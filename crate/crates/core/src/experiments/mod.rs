//! Seeded experiment recipes. Each experiment has a config struct with
//! desk-scale defaults, a `run` function returning a serializable result,
//! and a `write` function producing `summary.json`, `metrics.csv` and any
//! experiment-specific CSVs in an output directory.
//!
//! The worker count is an execution setting: it is not echoed into
//! `summary.json`, and outputs are identical for every value.

use std::path::Path;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::metrics::{append_metrics_csv, wilson_interval, MetricRow, Z_99};
use crate::sde::TrajectoryOutcome;

pub mod lemma_a1;
pub mod simsec;
pub mod thm1;
pub mod thm2;
pub mod thm3;

/// Escape counts with a 99% Wilson upper bound on the escape probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapeStats {
    pub n_trajectories: usize,
    pub n_escaped: usize,
    pub horizon: f64,
    pub wilson_upper_99: f64,
    /// First-exit time per trajectory, `None` if it stayed inside.
    pub exit_times: Vec<Option<f64>>,
}

impl EscapeStats {
    pub fn from_outcomes(outcomes: &[TrajectoryOutcome], horizon: f64) -> Self {
        let exit_times: Vec<Option<f64>> = outcomes.iter().map(|o| o.first_exit.map(|e| e.time)).collect();
        let n_escaped = exit_times.iter().filter(|t| t.is_some()).count();
        let (_, upper) = wilson_interval(n_escaped, outcomes.len(), Z_99);
        Self {
            n_trajectories: outcomes.len(),
            n_escaped,
            horizon,
            wilson_upper_99: upper,
            exit_times,
        }
    }
}

/// Runs `f` on a dedicated rayon pool with `workers` threads; 0 uses the
/// global pool.
pub fn with_workers<T, F>(workers: usize, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> Result<T> + Send,
{
    if workers == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| LabError::InvalidInput(format!("cannot build worker pool: {e}")))?;
    pool.install(f)
}

/// Collects per-trajectory results, failing on the first error.
pub(crate) fn collect_outcomes(results: Vec<Result<TrajectoryOutcome>>) -> Result<Vec<TrajectoryOutcome>> {
    results.into_iter().collect()
}

#[derive(Serialize)]
struct Summary<'a, C: Serialize, R: Serialize> {
    experiment: &'a str,
    seed: u64,
    config: &'a C,
    results: &'a R,
}

/// Writes `summary.json` (experiment name, seed, config echo, results) and a
/// fresh `metrics.csv`.
pub fn write_summary_and_metrics<C: Serialize, R: Serialize>(
    dir: &Path,
    experiment: &str,
    seed: u64,
    config: &C,
    results: &R,
    rows: &[MetricRow],
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let summary = Summary {
        experiment,
        seed,
        config,
        results,
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(dir.join("summary.json"), text)?;
    let metrics = dir.join("metrics.csv");
    if metrics.exists() {
        std::fs::remove_file(&metrics)?;
    }
    append_metrics_csv(&metrics, rows)?;
    Ok(())
}

pub(crate) fn row(experiment: &str, target: &str, algorithm: &str, n: usize, d: usize, seed: u64, name: &str, value: f64) -> MetricRow {
    MetricRow {
        experiment: experiment.into(),
        target: target.into(),
        algorithm: algorithm.into(),
        n_samples: n,
        d,
        seed,
        metric_name: name.into(),
        metric_value: value,
    }
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(LabError::InvalidInput(format!("{name} must be positive, got {v}")))
    }
}

pub(crate) fn check_count(name: &str, v: usize) -> Result<()> {
    check_at_least(name, v, 1)
}

pub(crate) fn check_at_least(name: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(LabError::InvalidInput(format!("{name} must be >= {min}, got {v}")))
    }
}
