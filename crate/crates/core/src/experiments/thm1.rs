//! Standard normal initialization against the single-mode adversarial
//! field: trajectories started at `N(0, I)` stay trapped near the origin
//! while the target sits at distance `7√d`.

use std::path::Path;

use serde::Serialize;

use super::{check_count, check_positive, collect_outcomes, row, with_workers, write_summary_and_metrics, EscapeStats};
use crate::error::Result;
use crate::linalg::norm;
use crate::metrics::{lp_error_certificate_thm1, lp_score_error_mc, tv_lower_bound, LpCertificate, LpEstimate, MetricRow, WitnessRegion};
use crate::score_fields::{Target, Thm1Field};
use crate::sde::{grid_steps, simulate_batch, write_trajectories_csv, SdeRunConfig, TrajectoryOutcome};
use crate::seeding;
use crate::special::{noncentral_lower_tail, MassKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Thm1Config {
    pub d: usize,
    pub alpha: f64,
    pub horizon: f64,
    pub step_size: f64,
    pub n_trajectories: usize,
    /// Escape threshold is `guard · 4√d`.
    pub guard: f64,
    pub p: f64,
    pub mc_samples: usize,
    /// Record every k-th state into `trajectories.csv`; 0 disables.
    pub record_every: usize,
    pub seed: u64,
    #[serde(skip)]
    pub workers: usize,
}

impl Default for Thm1Config {
    fn default() -> Self {
        Self {
            d: 50,
            alpha: Thm1Field::DEFAULT_ALPHA,
            horizon: 10.0,
            step_size: 1e-3,
            n_trajectories: 1000,
            guard: 0.95,
            p: 2.0,
            mc_samples: 10_000,
            record_every: 0,
            seed: 0,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Thm1Result {
    pub escape: EscapeStats,
    pub escape_radius: f64,
    pub witness_radius: f64,
    /// Target mass of the witness `{‖x‖ ≥ witness_radius}` (a lower bound
    /// when the complement mass is only bounded).
    pub witness_target_mass: f64,
    pub witness_complement_ln_mass: f64,
    pub witness_mass_kind: MassKind,
    pub witness_sample_fraction: f64,
    pub tv_lower_bound: f64,
    pub lp_certificate: LpCertificate,
    pub lp_error_mc: LpEstimate,
    #[serde(skip)]
    pub outcomes: Vec<TrajectoryOutcome>,
}

impl Thm1Config {
    pub fn validate(&self) -> Result<()> {
        check_count("d", self.d)?;
        check_positive("alpha", self.alpha)?;
        check_positive("horizon", self.horizon)?;
        check_positive("step_size", self.step_size)?;
        check_count("n_trajectories", self.n_trajectories)?;
        check_positive("guard", self.guard)?;
        super::check_at_least("mc_samples", self.mc_samples, 2)?;
        if !(self.p >= 1.0) {
            return Err(crate::LabError::InvalidInput(format!("p must be >= 1, got {}", self.p)));
        }
        grid_steps(self.horizon, self.step_size)?;
        Ok(())
    }
}

pub fn run(cfg: &Thm1Config) -> Result<Thm1Result> {
    cfg.validate()?;
    with_workers(cfg.workers, || run_inner(cfg))
}

fn run_inner(cfg: &Thm1Config) -> Result<Thm1Result> {
    let d = cfg.d;
    let sqrt_d = (d as f64).sqrt();
    let field = Thm1Field::along_first_axis(d, cfg.alpha)?;
    let target: Target = field.target().into();
    let standard: Target = crate::score_fields::GaussianTarget::standard(d).into();
    let inits = crate::score_fields::sample_target(&standard, cfg.n_trajectories, seeding::derive_seed(cfg.seed, "thm1-init", 0))?;

    let escape_radius = cfg.guard * Thm1Field::INNER * sqrt_d;
    let exit = move |x: &[f64]| norm(x) >= escape_radius;
    let mut sde = SdeRunConfig::new(cfg.step_size, grid_steps(cfg.horizon, cfg.step_size)?, seeding::derive_seed(cfg.seed, "thm1-sde", 0));
    if cfg.record_every > 0 {
        sde.record_every = Some(cfg.record_every);
    }
    let outcomes = collect_outcomes(simulate_batch(&inits, &field, &sde, Some(&exit)))?;
    let escape = EscapeStats::from_outcomes(&outcomes, cfg.horizon);

    // Witness: everything outside the trap. Its target mass is one minus a
    // noncentral chi-square lower tail.
    let witness_radius = escape_radius;
    let complement = noncentral_lower_tail(d as u32, 49.0 * d as f64, witness_radius * witness_radius)?;
    let witness_target_mass = (1.0 - complement.value).clamp(0.0, 1.0);
    let region = WitnessRegion::OutsideBall {
        center: vec![0.0; d],
        radius: witness_radius,
    };
    let finals: Vec<Vec<f64>> = outcomes.iter().map(|o| o.final_state.clone()).collect();
    let witness_sample_fraction = finals.iter().filter(|x| region.contains(x)).count() as f64 / finals.len() as f64;
    let tv = tv_lower_bound(&finals, &region, witness_target_mass)?;

    let lp_certificate = lp_error_certificate_thm1(d, cfg.p, cfg.alpha)?;
    let lp_error_mc = lp_score_error_mc(&field, &target, &target, cfg.p, cfg.mc_samples, seeding::derive_seed(cfg.seed, "thm1-lp", 0))?;

    Ok(Thm1Result {
        escape,
        escape_radius,
        witness_radius,
        witness_target_mass,
        witness_complement_ln_mass: complement.ln_value,
        witness_mass_kind: complement.kind,
        witness_sample_fraction,
        tv_lower_bound: tv,
        lp_certificate,
        lp_error_mc,
        outcomes,
    })
}

pub fn metric_rows(cfg: &Thm1Config, res: &Thm1Result) -> Vec<MetricRow> {
    let r = |name: &str, v: f64| row("thm1", "gaussian_far_mean", "ula", cfg.n_trajectories, cfg.d, cfg.seed, name, v);
    vec![
        r("escape_count", res.escape.n_escaped as f64),
        r("escape_wilson_upper_99", res.escape.wilson_upper_99),
        r("witness_target_mass", res.witness_target_mass),
        r("tv_lower_bound", res.tv_lower_bound),
        r("lp_certificate", res.lp_certificate.value),
        r("lp_certificate_ln", res.lp_certificate.ln_value),
        r("lp_error_mc", res.lp_error_mc.estimate),
        r("lp_error_mc_stderr", res.lp_error_mc.stderr),
    ]
}

pub fn write(dir: &Path, cfg: &Thm1Config, res: &Thm1Result) -> Result<()> {
    write_summary_and_metrics(dir, "thm1", cfg.seed, cfg, res, &metric_rows(cfg, res))?;
    if cfg.record_every > 0 {
        write_trajectories_csv(&dir.join("trajectories.csv"), &res.outcomes)?;
    }
    Ok(())
}
