//! Monte Carlo check of the OU supremum bound: how often the grid supremum
//! of `‖∫_0^t e^{−α(t−s)} dB_s‖` over `[0, T]` exceeds `0.1√d`.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::{check_count, check_positive, row, with_workers, write_summary_and_metrics};
use crate::error::{LabError, Result};
use crate::metrics::{wilson_interval, MetricRow, Z_99};
use crate::sde::{grid_steps, ou_sup_norm_run};
use crate::seeding;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaA1Config {
    pub d: usize,
    pub alphas: Vec<f64>,
    pub horizon: f64,
    pub grid_h: f64,
    pub n_runs: usize,
    /// Threshold is `threshold_factor · √d`.
    pub threshold_factor: f64,
    pub seed: u64,
    #[serde(skip)]
    pub workers: usize,
}

impl Default for LemmaA1Config {
    fn default() -> Self {
        Self {
            d: 50,
            alphas: vec![50.0, 100.0, 400.0],
            horizon: 10.0,
            grid_h: 1e-3,
            n_runs: 1000,
            threshold_factor: 0.1,
            seed: 0,
            workers: 0,
        }
    }
}

impl LemmaA1Config {
    pub fn validate(&self) -> Result<()> {
        check_count("d", self.d)?;
        if self.alphas.is_empty() {
            return Err(LabError::InvalidInput("alphas must list at least one value".into()));
        }
        for a in &self.alphas {
            check_positive("alpha", *a)?;
        }
        check_positive("threshold_factor", self.threshold_factor)?;
        check_count("n_runs", self.n_runs)?;
        grid_steps(self.horizon, self.grid_h)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExceedanceStats {
    pub alpha: f64,
    pub n_runs: usize,
    pub n_exceed: usize,
    pub rate: f64,
    pub wilson_upper_99: f64,
    /// Stationary norm prediction `√(d / (2α))`.
    pub stationary_norm: f64,
    pub mean_sup_norm: f64,
    pub max_sup_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaA1Result {
    pub threshold: f64,
    pub per_alpha: Vec<ExceedanceStats>,
    /// Exceedance rates are nonincreasing along `alphas` sorted ascending.
    pub monotone_in_alpha: bool,
}

pub fn run(cfg: &LemmaA1Config) -> Result<LemmaA1Result> {
    cfg.validate()?;
    with_workers(cfg.workers, || run_inner(cfg))
}

fn run_inner(cfg: &LemmaA1Config) -> Result<LemmaA1Result> {
    let threshold = cfg.threshold_factor * (cfg.d as f64).sqrt();
    let mut per_alpha = Vec::with_capacity(cfg.alphas.len());
    for &alpha in &cfg.alphas {
        // Run `k` uses the same noise stream for every alpha.
        let sups: Vec<f64> = (0..cfg.n_runs)
            .into_par_iter()
            .map(|k| ou_sup_norm_run(alpha, cfg.horizon, cfg.grid_h, cfg.d, seeding::derive_seed(cfg.seed, "lemma-a1", k as u64)))
            .collect::<Result<_>>()?;
        let n_exceed = sups.iter().filter(|s| **s > threshold).count();
        let (_, upper) = wilson_interval(n_exceed, cfg.n_runs, Z_99);
        per_alpha.push(ExceedanceStats {
            alpha,
            n_runs: cfg.n_runs,
            n_exceed,
            rate: n_exceed as f64 / cfg.n_runs as f64,
            wilson_upper_99: upper,
            stationary_norm: (cfg.d as f64 / (2.0 * alpha)).sqrt(),
            mean_sup_norm: sups.iter().sum::<f64>() / sups.len() as f64,
            max_sup_norm: sups.iter().copied().fold(0.0, f64::max),
        });
    }
    let mut sorted: Vec<&ExceedanceStats> = per_alpha.iter().collect();
    sorted.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let monotone_in_alpha = sorted.windows(2).all(|w| w[1].n_exceed <= w[0].n_exceed);
    Ok(LemmaA1Result {
        threshold,
        per_alpha,
        monotone_in_alpha,
    })
}

pub fn metric_rows(cfg: &LemmaA1Config, res: &LemmaA1Result) -> Vec<MetricRow> {
    let mut rows = Vec::new();
    for s in &res.per_alpha {
        let alg = format!("ou_alpha_{}", s.alpha);
        let r = |name: &str, v: f64| row("lemma_a1", "ou_sup_norm", &alg, cfg.n_runs, cfg.d, cfg.seed, name, v);
        rows.push(r("exceedance_count", s.n_exceed as f64));
        rows.push(r("exceedance_rate", s.rate));
        rows.push(r("exceedance_wilson_upper_99", s.wilson_upper_99));
        rows.push(r("stationary_norm", s.stationary_norm));
        rows.push(r("mean_sup_norm", s.mean_sup_norm));
    }
    rows
}

pub fn write(dir: &Path, cfg: &LemmaA1Config, res: &LemmaA1Result) -> Result<()> {
    write_summary_and_metrics(dir, "lemma_a1", cfg.seed, cfg, res, &metric_rows(cfg, res))
}
