//! Cone-absorbing field: the estimate equals the target score except on a
//! small ball inside a narrow cone, where it pushes along the cone axis.
//! Records the fraction of trajectories inside the cone over time.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::{check_at_least, check_count, check_positive, row, with_workers, write_summary_and_metrics};
use crate::error::{LabError, Result};
use crate::metrics::{lp_score_error_mc, LpEstimate, MetricRow};
use crate::score_fields::{sample_target, Cone, GaussianTarget, Target, Thm3Field};
use crate::sde::{grid_steps, run_trajectory, SdeRunConfig};
use crate::seeding;

/// Initial distributions compared in the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Initialization {
    /// `N(0, I)` draws.
    StandardNormal,
    /// The point opposite the patch, `−patch_center`.
    FarFromCone,
    /// The patch center.
    InsidePatch,
}

impl Initialization {
    pub const ALL: [Initialization; 3] = [Self::StandardNormal, Self::FarFromCone, Self::InsidePatch];

    pub fn label(self) -> &'static str {
        match self {
            Self::StandardNormal => "standard_normal",
            Self::FarFromCone => "far_from_cone",
            Self::InsidePatch => "inside_patch",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|i| i.label() == s)
            .ok_or_else(|| LabError::InvalidInput(format!("unknown initialization {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Thm3Config {
    pub d: usize,
    pub theta_degrees: f64,
    /// Patch center is `patch_distance · e_1`.
    pub patch_distance: f64,
    pub patch_radius: f64,
    pub horizon: f64,
    pub step_size: f64,
    pub n_trajectories: usize,
    pub inits: Vec<Initialization>,
    /// Number of log-spaced recording times in `(0, horizon]`.
    pub grid_points: usize,
    pub mc_samples: usize,
    pub seed: u64,
    #[serde(skip)]
    pub workers: usize,
}

impl Default for Thm3Config {
    fn default() -> Self {
        Self {
            d: 2,
            theta_degrees: 10.0,
            patch_distance: 5.0,
            patch_radius: 0.5,
            horizon: 200.0,
            step_size: 1e-3,
            n_trajectories: 1000,
            inits: Initialization::ALL.to_vec(),
            grid_points: 40,
            mc_samples: 100_000,
            seed: 0,
            workers: 0,
        }
    }
}

impl Thm3Config {
    pub fn validate(&self) -> Result<()> {
        check_at_least("d", self.d, 2)?;
        check_positive("theta_degrees", self.theta_degrees)?;
        check_positive("horizon", self.horizon)?;
        check_positive("step_size", self.step_size)?;
        check_count("n_trajectories", self.n_trajectories)?;
        check_count("grid_points", self.grid_points)?;
        check_at_least("mc_samples", self.mc_samples, 2)?;
        if self.inits.is_empty() {
            return Err(LabError::InvalidInput("inits must name at least one initialization".into()));
        }
        grid_steps(self.horizon, self.step_size)?;
        self.field()?;
        Ok(())
    }

    /// Builds the field; geometry errors surface here.
    pub fn field(&self) -> Result<Thm3Field<GaussianTarget>> {
        let mut axis = vec![0.0; self.d];
        axis[0] = 1.0;
        let cone = Cone::new(axis.clone(), self.theta_degrees.to_radians())?;
        let center: Vec<f64> = axis.iter().map(|a| a * self.patch_distance).collect();
        Thm3Field::new(GaussianTarget::standard(self.d), cone, center, self.patch_radius)
    }
}

/// Fraction of trajectories inside the cone at each recording time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeOccupancy {
    pub initialization: Initialization,
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub fractions: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Thm3Result {
    pub occupancy: Vec<ConeOccupancy>,
    /// Monte Carlo estimate of the target's cone mass.
    pub target_cone_mass_mc: f64,
    /// Exact cone mass `θ/π`, available in d = 2.
    pub target_cone_mass_exact: Option<f64>,
    pub l2_error_mc: LpEstimate,
}

/// Step indices `0` and `grid_points` log-spaced values up to `n_steps`.
pub fn log_grid(n_steps: usize, grid_points: usize) -> Vec<usize> {
    let mut steps = vec![0];
    let top = (n_steps as f64).ln();
    for k in 0..grid_points {
        let frac = if grid_points == 1 { 1.0 } else { k as f64 / (grid_points - 1) as f64 };
        let s = ((frac * top).exp().round() as usize).clamp(1, n_steps);
        if *steps.last().expect("non-empty") < s {
            steps.push(s);
        }
    }
    if *steps.last().expect("non-empty") != n_steps {
        steps.push(n_steps);
    }
    steps
}

pub fn run(cfg: &Thm3Config) -> Result<Thm3Result> {
    cfg.validate()?;
    with_workers(cfg.workers, || run_inner(cfg))
}

fn run_inner(cfg: &Thm3Config) -> Result<Thm3Result> {
    let field = cfg.field()?;
    let cone = field.cone().clone();
    let n_steps = grid_steps(cfg.horizon, cfg.step_size)?;
    let grid = log_grid(n_steps, cfg.grid_points);
    let sde = SdeRunConfig::new(cfg.step_size, n_steps, cfg.seed);
    let base: Target = GaussianTarget::standard(cfg.d).into();

    let mut occupancy = Vec::new();
    for &init in &cfg.inits {
        let label = init.label();
        let starts: Vec<Vec<f64>> = match init {
            Initialization::StandardNormal => {
                sample_target(&base, cfg.n_trajectories, seeding::derive_seed(cfg.seed, "thm3-init", 0))?
            }
            Initialization::FarFromCone => vec![field.patch_center().iter().map(|c| -c).collect(); cfg.n_trajectories],
            Initialization::InsidePatch => vec![field.patch_center().to_vec(); cfg.n_trajectories],
        };
        let per_traj: Vec<Result<Vec<bool>>> = starts
            .par_iter()
            .enumerate()
            .map(|(i, x0)| {
                let mut rng = seeding::stream(cfg.seed, &format!("thm3-{label}"), i as u64);
                let mut inside = Vec::with_capacity(grid.len());
                let mut next = 0;
                run_trajectory(x0, &field, &sde, None, &mut rng, |step, x| {
                    if next < grid.len() && grid[next] == step {
                        inside.push(cone.contains(x));
                        next += 1;
                    }
                })?;
                Ok(inside)
            })
            .collect();
        let mut counts = vec![0usize; grid.len()];
        for r in per_traj {
            for (c, hit) in counts.iter_mut().zip(r?) {
                *c += usize::from(hit);
            }
        }
        occupancy.push(ConeOccupancy {
            initialization: init,
            steps: grid.clone(),
            times: grid.iter().map(|s| *s as f64 * cfg.step_size).collect(),
            fractions: counts.iter().map(|c| *c as f64 / cfg.n_trajectories as f64).collect(),
        });
    }

    let draws = sample_target(&base, cfg.mc_samples, seeding::derive_seed(cfg.seed, "thm3-cone-mass", 0))?;
    let target_cone_mass_mc = draws.iter().filter(|x| cone.contains(x)).count() as f64 / draws.len() as f64;
    let target_cone_mass_exact = (cfg.d == 2).then(|| cfg.theta_degrees.to_radians() / std::f64::consts::PI);
    let l2_error_mc = lp_score_error_mc(&field, &base, &base, 2.0, cfg.mc_samples, seeding::derive_seed(cfg.seed, "thm3-lp", 0))?;

    Ok(Thm3Result {
        occupancy,
        target_cone_mass_mc,
        target_cone_mass_exact,
        l2_error_mc,
    })
}

pub fn metric_rows(cfg: &Thm3Config, res: &Thm3Result) -> Vec<MetricRow> {
    let mut rows = Vec::new();
    for occ in &res.occupancy {
        let last = *occ.fractions.last().expect("grid is non-empty");
        rows.push(row("thm3", "standard_normal", occ.initialization.label(), cfg.n_trajectories, cfg.d, cfg.seed, "cone_occupancy_final", last));
    }
    let r = |name: &str, v: f64| row("thm3", "standard_normal", "target", cfg.mc_samples, cfg.d, cfg.seed, name, v);
    rows.push(r("target_cone_mass_mc", res.target_cone_mass_mc));
    rows.push(r("l2_error_mc", res.l2_error_mc.estimate));
    rows.push(r("l2_error_mc_stderr", res.l2_error_mc.stderr));
    rows
}

pub const OCCUPANCY_HEADER: &str = "initialization,step,time,fraction_in_cone,n_trajectories";

pub fn write_occupancy_csv(path: &Path, occupancy: &[ConeOccupancy], n_trajectories: usize) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{OCCUPANCY_HEADER}")?;
    for occ in occupancy {
        for ((s, t), f) in occ.steps.iter().zip(&occ.times).zip(&occ.fractions) {
            writeln!(out, "{},{s},{t:?},{f:?},{n_trajectories}", occ.initialization.label())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write(dir: &Path, cfg: &Thm3Config, res: &Thm3Result) -> Result<()> {
    write_summary_and_metrics(dir, "thm3", cfg.seed, cfg, res, &metric_rows(cfg, res))?;
    write_occupancy_csv(&dir.join("occupancy.csv"), &res.occupancy, cfg.n_trajectories)
}
