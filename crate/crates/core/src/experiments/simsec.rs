//! Learned-score sampling from three initializations: `N(0, I)` ("vanilla"),
//! 30 fresh target draws ("fresh") and 30 memorized training points
//! ("train"), each duplicated up to `n` particles.

use std::path::{Path, PathBuf};

use rand::seq::index::sample as sample_indices;
use serde::Serialize;

use super::{check_at_least, check_count, check_positive, row, with_workers, write_summary_and_metrics};
use crate::error::{LabError, Result};
use crate::metrics::{fit_gaussian_kl, sinkhorn_divergence, MetricRow};
use crate::score_fields::{sample_target, GaussianTarget, GmmComponent, GmmTarget, Target};
use crate::score_net::{
    build_schedule, load_checkpoint, make_training_set, save_checkpoint, unique_rows, write_loss_trace_csv,
    DenoiserModel, LearnedScore, LossRecord, TrainConfig,
};
use crate::sde::simulate_cloud;
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimsecTarget {
    /// `N(𝟙, 2 I_50)`.
    GaussianD50,
    /// `½ N(−𝟙, 2 I_25) + ½ N(4·𝟙, 2 I_25)`.
    GmmD25,
}

impl SimsecTarget {
    pub fn label(self) -> &'static str {
        match self {
            Self::GaussianD50 => "gaussian_d50",
            Self::GmmD25 => "gmm_d25",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussian_d50" => Ok(Self::GaussianD50),
            "gmm_d25" => Ok(Self::GmmD25),
            _ => Err(LabError::InvalidInput(format!("unknown target {s:?} (expected gaussian_d50 or gmm_d25)"))),
        }
    }

    pub fn build(self) -> Result<Target> {
        Ok(match self {
            Self::GaussianD50 => GaussianTarget::new(vec![1.0; 50], 2.0)?.into(),
            Self::GmmD25 => GmmTarget::new(vec![
                GmmComponent {
                    weight: 0.5,
                    mean: vec![-1.0; 25],
                    variance_scale: 2.0,
                },
                GmmComponent {
                    weight: 0.5,
                    mean: vec![4.0; 25],
                    variance_scale: 2.0,
                },
            ])?
            .into(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Vanilla,
    Fresh,
    Train,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Self::Vanilla, Self::Fresh, Self::Train];

    pub fn label(self) -> &'static str {
        match self {
            Self::Vanilla => "vanilla",
            Self::Fresh => "fresh",
            Self::Train => "train",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimsecConfig {
    pub target: SimsecTarget,
    pub epochs: usize,
    pub hidden_width: usize,
    pub learning_rate: f64,
    pub max_level: usize,
    pub n_distinct: usize,
    pub duplication: usize,
    pub n_values: Vec<usize>,
    pub n_init_points: usize,
    pub step_size: f64,
    pub n_steps: usize,
    pub reference_draws: usize,
    /// Sinkhorn trials per (algorithm, n); 0 skips the Sinkhorn metric.
    pub sinkhorn_trials: usize,
    pub sinkhorn_subsample: usize,
    pub blur: f64,
    /// Load the denoiser from this checkpoint instead of training.
    pub checkpoint: Option<PathBuf>,
    pub seed: u64,
    #[serde(skip)]
    pub workers: usize,
}

impl Default for SimsecConfig {
    fn default() -> Self {
        Self {
            target: SimsecTarget::GaussianD50,
            epochs: 30_000,
            hidden_width: 256,
            learning_rate: 1e-3,
            max_level: 200,
            n_distinct: 1000,
            duplication: 10,
            n_values: vec![1500, 7500, 13500, 16250],
            n_init_points: 30,
            step_size: 0.0025,
            n_steps: 1000,
            reference_draws: 5000,
            sinkhorn_trials: 10,
            sinkhorn_subsample: 500,
            blur: 0.01,
            checkpoint: None,
            seed: 0,
            workers: 0,
        }
    }
}

impl SimsecConfig {
    pub fn validate(&self) -> Result<()> {
        check_count("hidden_width", self.hidden_width)?;
        check_positive("learning_rate", self.learning_rate)?;
        check_count("n_distinct", self.n_distinct)?;
        check_count("duplication", self.duplication)?;
        check_count("n_init_points", self.n_init_points)?;
        if self.n_init_points > self.n_distinct {
            return Err(LabError::InvalidInput("n_init_points cannot exceed n_distinct".into()));
        }
        if self.n_values.is_empty() {
            return Err(LabError::InvalidInput("n_values must list at least one size".into()));
        }
        for n in &self.n_values {
            check_at_least("n_values entry", *n, self.n_init_points)?;
        }
        check_positive("step_size", self.step_size)?;
        check_count("n_steps", self.n_steps)?;
        check_at_least("reference_draws", self.reference_draws, 2)?;
        check_count("sinkhorn_subsample", self.sinkhorn_subsample)?;
        check_positive("blur", self.blur)?;
        if !(1..=crate::score_net::NUM_LEVELS).contains(&self.max_level) {
            return Err(LabError::InvalidInput("max_level must lie in 1..=1000".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimsecEntry {
    pub algorithm: Algorithm,
    pub n: usize,
    /// KL(target ‖ Gaussian fit); Gaussian target only.
    pub kl: Option<f64>,
    pub sinkhorn_mean: Option<f64>,
    pub sinkhorn_trials: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimsecResult {
    pub d: usize,
    pub trained_epochs: usize,
    pub final_loss: Option<f64>,
    pub entries: Vec<SimsecEntry>,
    #[serde(skip)]
    pub model: DenoiserModel,
    #[serde(skip)]
    pub loss_trace: Vec<LossRecord>,
}

impl SimsecResult {
    pub fn entry(&self, algorithm: Algorithm, n: usize) -> Option<&SimsecEntry> {
        self.entries.iter().find(|e| e.algorithm == algorithm && e.n == n)
    }
}

/// `points` duplicated to exactly `n` rows: every point `⌊n/k⌋` times and
/// the first `n mod k` points once more.
pub fn duplicate_to(points: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let k = points.len();
    let (base, extra) = (n / k, n % k);
    let mut out = Vec::with_capacity(n);
    for (i, p) in points.iter().enumerate() {
        for _ in 0..base + usize::from(i < extra) {
            out.push(p.clone());
        }
    }
    out
}

pub fn run(cfg: &SimsecConfig) -> Result<SimsecResult> {
    run_with_progress(cfg, |_| {})
}

/// Like [`run`], reporting short progress messages.
pub fn run_with_progress<P: FnMut(&str) + Send>(cfg: &SimsecConfig, progress: P) -> Result<SimsecResult> {
    cfg.validate()?;
    with_workers(cfg.workers, || run_inner(cfg, progress))
}

fn run_inner<P: FnMut(&str)>(cfg: &SimsecConfig, mut progress: P) -> Result<SimsecResult> {
    let target = cfg.target.build()?;
    let d = target.dim();
    let schedule = build_schedule();
    let data = make_training_set(&target, cfg.n_distinct, cfg.duplication, seeding::derive_seed(cfg.seed, "simsec-data", 0))?;
    let (model, loss_trace) = match &cfg.checkpoint {
        Some(path) => {
            let model = load_checkpoint(path)?;
            if model.data_dim() != d {
                return Err(LabError::DimensionMismatch {
                    expected: d,
                    got: model.data_dim(),
                });
            }
            (model, Vec::new())
        }
        None => {
            let tc = TrainConfig {
                epochs: cfg.epochs,
                learning_rate: cfg.learning_rate,
                hidden_width: cfg.hidden_width,
                max_level: cfg.max_level,
                seed: seeding::derive_seed(cfg.seed, "simsec-model", 0),
            };
            let every = (cfg.epochs / 20).max(1);
            let out = crate::score_net::train_with_progress(data.view(), &schedule, &tc, |r| {
                if r.epoch % every == 0 {
                    progress(&format!("epoch {} loss {:.5}", r.epoch, r.loss));
                }
            })?;
            (out.model, out.loss_trace)
        }
    };
    let score = LearnedScore::new(model.clone(), &schedule)?;
    let distinct: Vec<Vec<f64>> = unique_rows(data.view()).into_iter().map(|r| r.to_vec()).collect();
    let standard: Target = GaussianTarget::standard(d).into();
    let reference = if cfg.sinkhorn_trials > 0 {
        sample_target(&target, cfg.reference_draws, seeding::derive_seed(cfg.seed, "simsec-reference", 0))?
    } else {
        Vec::new()
    };

    let mut entries = Vec::new();
    for &n in &cfg.n_values {
        for alg in Algorithm::ALL {
            let label = alg.label();
            let inits = match alg {
                Algorithm::Vanilla => sample_target(&standard, n, seeding::derive_seed(cfg.seed, "simsec-vanilla", n as u64))?,
                Algorithm::Fresh => {
                    let fresh = sample_target(&target, cfg.n_init_points, seeding::derive_seed(cfg.seed, "simsec-fresh", n as u64))?;
                    duplicate_to(&fresh, n)
                }
                Algorithm::Train => {
                    let mut rng = seeding::stream(cfg.seed, "simsec-train-pick", n as u64);
                    let picks: Vec<Vec<f64>> = sample_indices(&mut rng, distinct.len(), cfg.n_init_points)
                        .into_iter()
                        .map(|i| distinct[i].clone())
                        .collect();
                    duplicate_to(&picks, n)
                }
            };
            let seed = seeding::derive_seed(cfg.seed, &format!("simsec-ula-{label}"), n as u64);
            let samples = simulate_cloud(&inits, &score, cfg.step_size, cfg.n_steps, seed)?;
            let kl = match &target {
                Target::Gaussian(g) => Some(fit_gaussian_kl(&samples, g)?),
                Target::Gmm(_) => None,
            };
            let mut trials = Vec::with_capacity(cfg.sinkhorn_trials);
            for t in 0..cfg.sinkhorn_trials {
                let mut rng = seeding::stream(cfg.seed, &format!("simsec-subsample-{label}-{n}"), t as u64);
                let m = cfg.sinkhorn_subsample;
                let xs: Vec<Vec<f64>> = sample_indices(&mut rng, samples.len(), m.min(samples.len()))
                    .into_iter()
                    .map(|i| samples[i].clone())
                    .collect();
                let ys: Vec<Vec<f64>> = sample_indices(&mut rng, reference.len(), m.min(reference.len()))
                    .into_iter()
                    .map(|i| reference[i].clone())
                    .collect();
                trials.push(sinkhorn_divergence(&xs, &ys, 2.0, cfg.blur)?);
            }
            let sinkhorn_mean = (!trials.is_empty()).then(|| trials.iter().sum::<f64>() / trials.len() as f64);
            progress(&format!("n={n} {label} kl={kl:?} sinkhorn={sinkhorn_mean:?}"));
            entries.push(SimsecEntry {
                algorithm: alg,
                n,
                kl,
                sinkhorn_mean,
                sinkhorn_trials: trials,
            });
        }
    }

    Ok(SimsecResult {
        d,
        trained_epochs: loss_trace.len(),
        final_loss: loss_trace.last().map(|r| r.loss),
        entries,
        model,
        loss_trace,
    })
}

pub fn metric_rows(cfg: &SimsecConfig, res: &SimsecResult) -> Vec<MetricRow> {
    let mut rows = Vec::new();
    for e in &res.entries {
        let r = |name: &str, v: f64| row("simsec", cfg.target.label(), e.algorithm.label(), e.n, res.d, cfg.seed, name, v);
        if let Some(kl) = e.kl {
            rows.push(r("kl", kl));
        }
        if let Some(s) = e.sinkhorn_mean {
            rows.push(r("sinkhorn", s));
        }
    }
    rows
}

pub fn write(dir: &Path, cfg: &SimsecConfig, res: &SimsecResult) -> Result<()> {
    write_summary_and_metrics(dir, "simsec", cfg.seed, cfg, res, &metric_rows(cfg, res))?;
    if !res.loss_trace.is_empty() {
        write_loss_trace_csv(&dir.join("loss_trace.csv"), &res.loss_trace)?;
    }
    save_checkpoint(&res.model, &dir.join("model.txt"))
}
