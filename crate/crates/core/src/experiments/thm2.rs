//! Data-based initialization against the memorizing adversarial field:
//! trajectories started at the anchors stay inside small balls around them.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::{check_at_least, check_count, check_positive, collect_outcomes, row, with_workers, write_summary_and_metrics, EscapeStats};
use crate::error::{LabError, Result};
use crate::linalg::dist;
use crate::metrics::{
    anchor_ball_union_mass, general_position_check, lp_error_certificate_thm2, lp_score_error_mc, tv_lower_bound,
    GeneralPositionReport, LpCertificate, LpEstimate, MetricRow, WitnessRegion,
};
use crate::score_fields::{sample_target, GaussianTarget, Target, Thm2Field};
use crate::sde::{grid_steps, simulate, write_trajectories_csv, SdeRunConfig, TrajectoryOutcome};
use crate::seeding;
use crate::special::MassKind;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Thm2Config {
    pub d: usize,
    pub n_anchors: usize,
    pub alpha: f64,
    pub horizon: f64,
    pub step_size: f64,
    pub n_traj_per_anchor: usize,
    /// Escape threshold is `guard · 0.15√d` around the starting anchor.
    pub guard: f64,
    pub p: f64,
    pub mc_samples: usize,
    pub record_every: usize,
    pub seed: u64,
    #[serde(skip)]
    pub workers: usize,
}

impl Default for Thm2Config {
    fn default() -> Self {
        Self {
            d: 50,
            n_anchors: 20,
            alpha: Thm2Field::DEFAULT_ALPHA,
            horizon: 10.0,
            step_size: 1e-3,
            n_traj_per_anchor: 50,
            guard: 0.95,
            p: 2.0,
            mc_samples: 10_000,
            record_every: 0,
            seed: 0,
            workers: 0,
        }
    }
}

impl Thm2Config {
    pub fn validate(&self) -> Result<()> {
        check_count("d", self.d)?;
        check_count("n_anchors", self.n_anchors)?;
        check_positive("alpha", self.alpha)?;
        check_positive("horizon", self.horizon)?;
        check_positive("step_size", self.step_size)?;
        check_count("n_traj_per_anchor", self.n_traj_per_anchor)?;
        check_positive("guard", self.guard)?;
        check_at_least("mc_samples", self.mc_samples, 2)?;
        if !(self.p >= 1.0) {
            return Err(LabError::InvalidInput(format!("p must be >= 1, got {}", self.p)));
        }
        grid_steps(self.horizon, self.step_size)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Thm2Simulation {
    pub escape: EscapeStats,
    pub escape_radius: f64,
    pub witness_radius: f64,
    /// `1 − Σ_i P_i`, a lower bound on the witness mass.
    pub witness_target_mass: f64,
    pub union_ln_mass: f64,
    pub union_mass_kind: MassKind,
    pub witness_sample_fraction: f64,
    pub tv_lower_bound: f64,
    pub lp_certificate: LpCertificate,
    pub lp_error_mc: LpEstimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct Thm2Result {
    pub general_position: GeneralPositionReport,
    /// Absent when the anchors fail the general-position check.
    pub simulation: Option<Thm2Simulation>,
    #[serde(skip)]
    pub anchors: Vec<Vec<f64>>,
    #[serde(skip)]
    pub outcomes: Vec<TrajectoryOutcome>,
}

/// `n` anchors drawn i.i.d. from `N(0, I_d)`.
pub fn draw_anchors(d: usize, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let standard: Target = GaussianTarget::standard(d).into();
    sample_target(&standard, n, seeding::derive_seed(seed, "thm2-anchors", 0))
}

pub fn run(cfg: &Thm2Config) -> Result<Thm2Result> {
    cfg.validate()?;
    with_workers(cfg.workers, || run_inner(cfg))
}

fn run_inner(cfg: &Thm2Config) -> Result<Thm2Result> {
    let d = cfg.d;
    let sqrt_d = (d as f64).sqrt();
    let anchors = draw_anchors(d, cfg.n_anchors, cfg.seed)?;
    let general_position = general_position_check(&anchors);
    if !general_position.pass {
        return Ok(Thm2Result {
            general_position,
            simulation: None,
            anchors,
            outcomes: Vec::new(),
        });
    }
    let field = Thm2Field::new(anchors.clone(), cfg.alpha)?;

    let escape_radius = cfg.guard * Thm2Field::INNER * sqrt_d;
    let mut sde = SdeRunConfig::new(cfg.step_size, grid_steps(cfg.horizon, cfg.step_size)?, seeding::derive_seed(cfg.seed, "thm2-sde", 0));
    if cfg.record_every > 0 {
        sde.record_every = Some(cfg.record_every);
    }
    let total = cfg.n_anchors * cfg.n_traj_per_anchor;
    let results: Vec<Result<TrajectoryOutcome>> = (0..total)
        .into_par_iter()
        .map(|i| {
            let x0 = &anchors[i / cfg.n_traj_per_anchor];
            let exit = |x: &[f64]| dist(x, x0) >= escape_radius;
            let mut traj = sde.clone();
            traj.seed = seeding::derive_seed(sde.seed, "batch", i as u64);
            simulate(x0, &field, &traj, Some(&exit))
        })
        .collect();
    let outcomes = collect_outcomes(results)?;
    let escape = EscapeStats::from_outcomes(&outcomes, cfg.horizon);

    // Witness: outside every ball of radius 0.16√d. The union bound on the
    // balls' target mass gives a lower bound on the witness mass.
    let witness_radius = Thm2Field::OUTER * sqrt_d;
    let union = anchor_ball_union_mass(&anchors)?;
    let witness_target_mass = (1.0 - union.value).clamp(0.0, 1.0);
    let region = WitnessRegion::OutsideAllBalls {
        anchors: anchors.clone(),
        radius: witness_radius,
    };
    let finals: Vec<Vec<f64>> = outcomes.iter().map(|o| o.final_state.clone()).collect();
    let witness_sample_fraction = finals.iter().filter(|x| region.contains(x)).count() as f64 / finals.len() as f64;
    let tv = tv_lower_bound(&finals, &region, witness_target_mass)?;

    let target: Target = GaussianTarget::standard(d).into();
    let lp_certificate = lp_error_certificate_thm2(&anchors, cfg.p, cfg.alpha)?;
    let lp_error_mc = lp_score_error_mc(&field, &target, &target, cfg.p, cfg.mc_samples, seeding::derive_seed(cfg.seed, "thm2-lp", 0))?;

    Ok(Thm2Result {
        general_position,
        simulation: Some(Thm2Simulation {
            escape,
            escape_radius,
            witness_radius,
            witness_target_mass,
            union_ln_mass: union.ln_value,
            union_mass_kind: union.kind,
            witness_sample_fraction,
            tv_lower_bound: tv,
            lp_certificate,
            lp_error_mc,
        }),
        anchors,
        outcomes,
    })
}

pub fn metric_rows(cfg: &Thm2Config, res: &Thm2Result) -> Vec<MetricRow> {
    let n = cfg.n_anchors * cfg.n_traj_per_anchor;
    let r = |name: &str, v: f64| row("thm2", "standard_normal", "ula_data_init", n, cfg.d, cfg.seed, name, v);
    let mut rows = vec![r("general_position_pass", if res.general_position.pass { 1.0 } else { 0.0 })];
    if let Some(sim) = &res.simulation {
        rows.extend([
            r("escape_count", sim.escape.n_escaped as f64),
            r("escape_wilson_upper_99", sim.escape.wilson_upper_99),
            r("witness_target_mass", sim.witness_target_mass),
            r("tv_lower_bound", sim.tv_lower_bound),
            r("lp_certificate", sim.lp_certificate.value),
            r("lp_certificate_ln", sim.lp_certificate.ln_value),
            r("lp_error_mc", sim.lp_error_mc.estimate),
            r("lp_error_mc_stderr", sim.lp_error_mc.stderr),
        ]);
    }
    rows
}

pub fn write(dir: &Path, cfg: &Thm2Config, res: &Thm2Result) -> Result<()> {
    write_summary_and_metrics(dir, "thm2", cfg.seed, cfg, res, &metric_rows(cfg, res))?;
    crate::score_fields::write_points_csv(&dir.join("anchors.csv"), &res.anchors)?;
    if cfg.record_every > 0 && !res.outcomes.is_empty() {
        write_trajectories_csv(&dir.join("trajectories.csv"), &res.outcomes)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Thm2Config {
        Thm2Config {
            d: 50,
            n_anchors: 4,
            horizon: 0.2,
            step_size: 1e-3,
            n_traj_per_anchor: 3,
            mc_samples: 100,
            ..Thm2Config::default()
        }
    }

    #[test]
    fn small_run_stays_near_anchors() {
        let res = run(&small()).unwrap();
        assert!(res.general_position.pass);
        let sim = res.simulation.unwrap();
        assert_eq!(sim.escape.n_trajectories, 12);
        assert_eq!(sim.escape.n_escaped, 0);
        for (i, o) in res.outcomes.iter().enumerate() {
            assert!(dist(&o.final_state, &res.anchors[i / 3]) < sim.escape_radius);
        }
        assert!(sim.witness_target_mass > 1.0 - 1e-12);
        assert!(sim.tv_lower_bound > 0.5);
    }

    #[test]
    fn general_position_failure_is_reported() {
        // Two anchors in d = 1 land at least 0.4 apart only by luck; with
        // many anchors the check is bound to fail.
        let cfg = Thm2Config {
            d: 1,
            n_anchors: 30,
            ..small()
        };
        let res = run(&cfg).unwrap();
        assert!(!res.general_position.pass);
        assert!(res.simulation.is_none());
        assert_eq!(metric_rows(&cfg, &res).len(), 1);
    }
}
