//! Trajectory-level SDE primitives: unadjusted Langevin steps, exact
//! Ornstein–Uhlenbeck transitions and first-exit detection.
//!
//! Batches derive one RNG stream per trajectory from the root seed, so the
//! outputs do not depend on the rayon worker count.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure_dim, ensure_finite, LabError, Result};
use crate::linalg::norm;
use crate::score_fields::ScoreField;
use crate::seeding::{self, StreamRng};

/// States beyond this norm are treated as numerical blow-up.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdeRunConfig {
    pub step_size: f64,
    pub n_steps: usize,
    pub seed: u64,
    pub record_every: Option<usize>,
}

impl SdeRunConfig {
    pub fn new(step_size: f64, n_steps: usize, seed: u64) -> Self {
        Self {
            step_size,
            n_steps,
            seed,
            record_every: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(LabError::InvalidInput(format!("step size must be positive, got {}", self.step_size)));
        }
        if self.n_steps == 0 {
            return Err(LabError::InvalidInput("n_steps must be >= 1".into()));
        }
        if self.record_every == Some(0) {
            return Err(LabError::InvalidInput("record_every must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitRecord {
    pub step: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordedState {
    pub step: usize,
    pub time: f64,
    pub state: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryOutcome {
    pub final_state: Vec<f64>,
    pub steps_taken: usize,
    pub first_exit: Option<ExitRecord>,
    pub recorded_states: Option<Vec<RecordedState>>,
}

/// Exit predicate checked after every step.
pub type ExitRegion<'a> = &'a (dyn Fn(&[f64]) -> bool + Sync);

/// One ULA step `x + η s(x) + √(2η) ξ` with caller-supplied noise `ξ`.
pub fn ula_step<F: ScoreField + ?Sized>(x: &[f64], field: &F, eta: f64, noise: &[f64]) -> Result<Vec<f64>> {
    ensure_dim(field.dim(), x.len())?;
    ensure_dim(field.dim(), noise.len())?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(LabError::InvalidInput(format!("step size must be positive, got {eta}")));
    }
    let mut drift = vec![0.0; x.len()];
    field.eval_into(x, &mut drift);
    if !drift.iter().all(|v| v.is_finite()) {
        return Err(LabError::Diverged { step: 0, norm: f64::INFINITY });
    }
    let scale = (2.0 * eta).sqrt();
    Ok(x.iter()
        .zip(&drift)
        .zip(noise)
        .map(|((xi, di), ni)| xi + eta * di + scale * ni)
        .collect())
}

#[inline]
fn fill_normal(rng: &mut StreamRng, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

/// Runs one trajectory with an explicit RNG, calling `observer(step, x)`
/// after every step (including step 0 with the initial state).
pub fn run_trajectory<F, O>(
    x0: &[f64],
    field: &F,
    cfg: &SdeRunConfig,
    exit_region: Option<ExitRegion<'_>>,
    rng: &mut StreamRng,
    mut observer: O,
) -> Result<TrajectoryOutcome>
where
    F: ScoreField + ?Sized,
    O: FnMut(usize, &[f64]),
{
    cfg.validate()?;
    ensure_dim(field.dim(), x0.len())?;
    ensure_finite(x0, "initial state")?;
    let d = x0.len();
    let eta = cfg.step_size;
    let scale = (2.0 * eta).sqrt();
    let mut x = x0.to_vec();
    let mut drift = vec![0.0; d];
    let mut noise = vec![0.0; d];
    let mut recorded = cfg.record_every.map(|_| {
        vec![RecordedState {
            step: 0,
            time: 0.0,
            state: x.clone(),
        }]
    });
    observer(0, &x);
    let mut first_exit = None;
    let mut steps_taken = 0;
    for step in 1..=cfg.n_steps {
        field.eval_into(&x, &mut drift);
        fill_normal(rng, &mut noise);
        for ((xi, di), ni) in x.iter_mut().zip(&drift).zip(&noise) {
            *xi += eta * di + scale * ni;
        }
        steps_taken = step;
        let n = norm(&x);
        if !(n <= DIVERGENCE_NORM) {
            return Err(LabError::Diverged { step, norm: n });
        }
        observer(step, &x);
        if let (Some(rec), Some(every)) = (recorded.as_mut(), cfg.record_every) {
            if step % every == 0 {
                rec.push(RecordedState {
                    step,
                    time: step as f64 * eta,
                    state: x.clone(),
                });
            }
        }
        if let Some(region) = exit_region {
            if region(&x) {
                first_exit = Some(ExitRecord {
                    step,
                    time: step as f64 * eta,
                });
                break;
            }
        }
    }
    Ok(TrajectoryOutcome {
        final_state: x,
        steps_taken,
        first_exit,
        recorded_states: recorded,
    })
}

/// Iterates ULA from `x0` for `cfg.n_steps` steps or until `exit_region`
/// first holds. Deterministic in `cfg.seed`.
pub fn simulate<F: ScoreField + ?Sized>(
    x0: &[f64],
    field: &F,
    cfg: &SdeRunConfig,
    exit_region: Option<ExitRegion<'_>>,
) -> Result<TrajectoryOutcome> {
    let mut rng = seeding::stream(cfg.seed, "trajectory", 0);
    run_trajectory(x0, field, cfg, exit_region, &mut rng, |_, _| {})
}

/// Simulates one trajectory per initial state in parallel. Trajectory `i`
/// uses seed `derive_seed(cfg.seed, "batch", i)`; divergences are returned
/// per trajectory.
pub fn simulate_batch<F: ScoreField + ?Sized>(
    initial_states: &[Vec<f64>],
    field: &F,
    cfg: &SdeRunConfig,
    exit_region: Option<ExitRegion<'_>>,
) -> Vec<Result<TrajectoryOutcome>> {
    initial_states
        .par_iter()
        .enumerate()
        .map(|(i, x0)| {
            let mut traj_cfg = cfg.clone();
            traj_cfg.seed = seeding::derive_seed(cfg.seed, "batch", i as u64);
            simulate(x0, field, &traj_cfg, exit_region)
        })
        .collect()
}

/// Advances a whole particle cloud in lockstep, evaluating the field once per
/// step on the full batch. Particle `i` draws its noise from its own stream,
/// so results match per-particle simulation with the same seeds.
pub fn simulate_cloud<F: ScoreField + ?Sized>(
    initial_states: &[Vec<f64>],
    field: &F,
    step_size: f64,
    n_steps: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    SdeRunConfig::new(step_size, n_steps, seed).validate()?;
    let d = field.dim();
    let n = initial_states.len();
    let mut xs = Vec::with_capacity(n * d);
    for x in initial_states {
        ensure_dim(d, x.len())?;
        xs.extend_from_slice(x);
    }
    ensure_finite(&xs, "initial cloud")?;
    let mut rngs: Vec<StreamRng> = (0..n as u64).map(|i| seeding::stream(seed, "cloud", i)).collect();
    let mut drift = vec![0.0; n * d];
    let scale = (2.0 * step_size).sqrt();
    for step in 1..=n_steps {
        field.eval_batch(&xs, &mut drift);
        xs.par_chunks_mut(d)
            .zip(drift.par_chunks(d))
            .zip(rngs.par_iter_mut())
            .for_each(|((x, g), rng)| {
                for (xi, gi) in x.iter_mut().zip(g) {
                    let z: f64 = rng.sample(StandardNormal);
                    *xi += step_size * gi + scale * z;
                }
            });
        if let Some(bad) = xs.chunks(d).map(norm).find(|v| !(*v <= DIVERGENCE_NORM)) {
            return Err(LabError::Diverged { step, norm: bad });
        }
    }
    Ok(xs.chunks(d).map(<[f64]>::to_vec).collect())
}

/// Exact transition of `dX = −αX dt + √2 dB` over a step `h`:
/// `e^{−αh} x + √((1 − e^{−2αh}) / α) ξ`.
pub fn ou_exact_step(x: &[f64], alpha: f64, h: f64, noise: &[f64]) -> Result<Vec<f64>> {
    check_ou(alpha, h)?;
    ensure_dim(x.len(), noise.len())?;
    let decay = (-alpha * h).exp();
    let sd = (-(-2.0 * alpha * h).exp_m1() / alpha).sqrt();
    Ok(x.iter().zip(noise).map(|(xi, ni)| decay * xi + sd * ni).collect())
}

fn check_ou(alpha: f64, h: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(LabError::InvalidInput(format!("alpha must be positive, got {alpha}")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(LabError::InvalidInput(format!("step must be positive, got {h}")));
    }
    Ok(())
}

/// Number of grid steps covering `[0, horizon]`; the grid must divide the
/// horizon up to rounding.
pub fn grid_steps(horizon: f64, grid_h: f64) -> Result<usize> {
    if !(horizon > 0.0 && grid_h > 0.0) {
        return Err(LabError::InvalidInput("horizon and grid step must be positive".into()));
    }
    let steps = (horizon / grid_h).round();
    if steps < 1.0 || ((steps * grid_h - horizon) / horizon).abs() > 1e-9 {
        return Err(LabError::InvalidInput(format!(
            "grid step {grid_h} does not divide horizon {horizon}"
        )));
    }
    Ok(steps as usize)
}

/// Grid supremum of `‖Z_t‖` for `Z_t = ∫_0^t e^{−α(t−s)} dB_s` (OU with unit
/// diffusion started at 0), sampled with exact transitions.
pub fn ou_sup_norm_run(alpha: f64, horizon: f64, grid_h: f64, d: usize, seed: u64) -> Result<f64> {
    check_ou(alpha, grid_h)?;
    if d == 0 {
        return Err(LabError::InvalidInput("dimension must be >= 1".into()));
    }
    let steps = grid_steps(horizon, grid_h)?;
    let mut rng = seeding::stream(seed, "ou-sup", 0);
    let decay = (-alpha * grid_h).exp();
    let sd = (-(-2.0 * alpha * grid_h).exp_m1() / (2.0 * alpha)).sqrt();
    let mut z = vec![0.0; d];
    let mut sup_sq: f64 = 0.0;
    for _ in 0..steps {
        let mut n2 = 0.0;
        for zi in z.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *zi = decay * *zi + sd * e;
            n2 += *zi * *zi;
        }
        sup_sq = sup_sq.max(n2);
    }
    Ok(sup_sq.sqrt())
}

/// Writes recorded states as `trajectory_id,step,time,coord_0..coord_{d-1}`.
pub fn write_trajectories_csv(path: &Path, outcomes: &[TrajectoryOutcome]) -> Result<()> {
    let d = outcomes.first().map_or(0, |o| o.final_state.len());
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "trajectory_id,step,time")?;
    for j in 0..d {
        write!(out, ",coord_{j}")?;
    }
    writeln!(out)?;
    for (id, o) in outcomes.iter().enumerate() {
        for rec in o.recorded_states.iter().flatten() {
            write!(out, "{id},{},{:?}", rec.step, rec.time)?;
            for v in &rec.state {
                write!(out, ",{v:?}")?;
            }
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}
