//! Quantitative comparisons: L^p score error (Monte Carlo and analytic
//! certificates), witness-set TV lower bounds, Gaussian-fit KL, Sinkhorn
//! divergence and the general-position verifier.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{ensure_dim, LabError, Result};
use crate::linalg::{dist, dist_sq, norm};
use crate::score_fields::{sample_target, Cone, GaussianTarget, ScoreField, Target};
use crate::special::{noncentral_lower_tail, MassKind, TailMass};

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_900_4;

// ---------------------------------------------------------------------------
// General position

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralPositionReport {
    pub pass: bool,
    pub min_pairwise: f64,
    pub min_norm: f64,
    pub max_norm: f64,
    /// Pairs closer than `0.4√d`.
    pub violating_pairs: Vec<(usize, usize)>,
    /// Points whose norm falls outside `[0.5√d, 2√d]`.
    pub violating_norms: Vec<usize>,
}

impl GeneralPositionReport {
    pub fn summary(&self) -> String {
        format!(
            "pass={} min_pairwise={:.4} min_norm={:.4} max_norm={:.4} violating_pairs={} violating_norms={}",
            self.pass,
            self.min_pairwise,
            self.min_norm,
            self.max_norm,
            self.violating_pairs.len(),
            self.violating_norms.len()
        )
    }
}

pub const GP_MIN_PAIRWISE: f64 = 0.4;
pub const GP_MIN_NORM: f64 = 0.5;
pub const GP_MAX_NORM: f64 = 2.0;

/// Checks pairwise separation `≥ 0.4√d` and norms in `[0.5√d, 2√d]`.
/// O(n²) scan; the dimension is read from the points.
pub fn general_position_check(points: &[Vec<f64>]) -> GeneralPositionReport {
    let d = points.first().map_or(0, Vec::len);
    let sqrt_d = (d as f64).sqrt();
    let mut min_pairwise = f64::INFINITY;
    let mut violating_pairs = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let r = dist(&points[i], &points[j]);
            min_pairwise = min_pairwise.min(r);
            if r < GP_MIN_PAIRWISE * sqrt_d {
                violating_pairs.push((i, j));
            }
        }
    }
    let norms: Vec<f64> = points.iter().map(|p| norm(p)).collect();
    let min_norm = norms.iter().copied().fold(f64::INFINITY, f64::min);
    let max_norm = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let violating_norms: Vec<usize> = norms
        .iter()
        .enumerate()
        .filter(|(_, n)| **n < GP_MIN_NORM * sqrt_d || **n > GP_MAX_NORM * sqrt_d)
        .map(|(i, _)| i)
        .collect();
    let pass = !points.is_empty() && violating_pairs.is_empty() && violating_norms.is_empty();
    GeneralPositionReport {
        pass,
        min_pairwise,
        min_norm,
        max_norm,
        violating_pairs,
        violating_norms,
    }
}

// ---------------------------------------------------------------------------
// Witness sets and TV

/// An event `A` on which the target's mass is known.
#[derive(Debug, Clone, PartialEq)]
pub enum WitnessRegion {
    OutsideBall { center: Vec<f64>, radius: f64 },
    OutsideAllBalls { anchors: Vec<Vec<f64>>, radius: f64 },
    Cone(Cone),
}

impl WitnessRegion {
    pub fn validate(&self) -> Result<()> {
        match self {
            WitnessRegion::OutsideBall { radius, .. } | WitnessRegion::OutsideAllBalls { radius, .. } => {
                if !(*radius >= 0.0 && radius.is_finite()) {
                    return Err(LabError::InvalidInput(format!("witness radius must be >= 0, got {radius}")));
                }
            }
            WitnessRegion::Cone(_) => {}
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            WitnessRegion::OutsideBall { center, radius } => dist_sq(x, center) >= radius * radius,
            WitnessRegion::OutsideAllBalls { anchors, radius } => {
                anchors.iter().all(|a| dist_sq(x, a) >= radius * radius)
            }
            WitnessRegion::Cone(c) => c.contains(x),
        }
    }
}

/// Wilson score interval for `successes / trials` at normal quantile `z`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Conservative TV lower bound from a witness set:
/// `max(0, π(A) − p̂(A) − h)` with `h` the 99% Wilson upper half-width.
pub fn tv_lower_bound(samples: &[Vec<f64>], region: &WitnessRegion, target_mass: f64) -> Result<f64> {
    region.validate()?;
    if !(0.0..=1.0).contains(&target_mass) {
        return Err(LabError::InvalidInput(format!("target mass must lie in [0,1], got {target_mass}")));
    }
    if samples.is_empty() {
        return Err(LabError::InvalidInput("tv_lower_bound needs samples".into()));
    }
    let hits = samples.iter().filter(|x| region.contains(x)).count();
    let (_, upper) = wilson_interval(hits, samples.len(), Z_99);
    Ok((target_mass - upper).clamp(0.0, 1.0))
}

// ---------------------------------------------------------------------------
// L^p score error

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LpEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

/// Plug-in Monte Carlo estimate of `E_π[‖est − truth‖^p]^{1/p}` over `n`
/// target draws, with a delta-method standard error.
pub fn lp_score_error_mc<E, T>(est: &E, truth: &T, target: &Target, p: f64, n: usize, seed: u64) -> Result<LpEstimate>
where
    E: ScoreField + ?Sized,
    T: ScoreField + ?Sized,
{
    if n < 2 {
        return Err(LabError::InvalidInput("lp_score_error_mc needs n >= 2".into()));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(LabError::InvalidInput(format!("p must be finite and >= 1, got {p}")));
    }
    ensure_dim(target.dim(), est.dim())?;
    ensure_dim(target.dim(), truth.dim())?;
    let xs = sample_target(target, n, seed)?;
    lp_score_error_on(est, truth, &xs, p)
}

/// Same estimator on caller-supplied sample points.
pub fn lp_score_error_on<E, T>(est: &E, truth: &T, xs: &[Vec<f64>], p: f64) -> Result<LpEstimate>
where
    E: ScoreField + ?Sized,
    T: ScoreField + ?Sized,
{
    let n = xs.len();
    if n < 2 {
        return Err(LabError::InvalidInput("need at least 2 samples".into()));
    }
    let d = est.dim();
    let mut a = vec![0.0; d];
    let mut b = vec![0.0; d];
    let powers: Vec<f64> = xs
        .iter()
        .map(|x| {
            est.eval_into(x, &mut a);
            truth.eval_into(x, &mut b);
            dist(&a, &b).powf(p)
        })
        .collect();
    let mean = powers.iter().sum::<f64>() / n as f64;
    let var = powers.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let estimate = mean.powf(1.0 / p);
    let stderr = if mean > 0.0 {
        (1.0 / p) * mean.powf(1.0 / p - 1.0) * (var / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(LpEstimate { estimate, stderr })
}

/// An analytic upper bound on the L^p score error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LpCertificate {
    pub value: f64,
    pub ln_value: f64,
    /// ln of the bad-set mass the bound is built from.
    pub ln_bad_mass: f64,
    pub mass_kind: MassKind,
}

/// `5α√d · P_bad^{1/p}` with `P_bad = P(‖x‖ < 5√d)` under `N(μ, I)`,
/// `‖μ‖² = 49d`. `p = ∞` gives the sup bound `5α√d`.
pub fn lp_error_certificate_thm1(d: usize, p: f64, alpha: f64) -> Result<LpCertificate> {
    if d == 0 || !(p >= 1.0) || !(alpha > 0.0) {
        return Err(LabError::InvalidInput("certificate needs d >= 1, p >= 1, alpha > 0".into()));
    }
    let df = d as f64;
    let mass = noncentral_lower_tail(d as u32, 49.0 * df, 25.0 * df)?;
    Ok(certificate(5.0 * alpha * df.sqrt(), mass.ln_value, mass.kind, p))
}

/// `3α√d · (Σ_i P_i)^{1/p}` with `P_i = P(‖x − x_i‖ < 0.16√d)` under
/// `N(0, I)`: a union bound on the mass where the estimate differs from the
/// truth.
pub fn lp_error_certificate_thm2(anchors: &[Vec<f64>], p: f64, alpha: f64) -> Result<LpCertificate> {
    if !(p >= 1.0) || !(alpha > 0.0) {
        return Err(LabError::InvalidInput("certificate needs p >= 1, alpha > 0".into()));
    }
    if anchors.is_empty() {
        return Ok(LpCertificate {
            value: 0.0,
            ln_value: f64::NEG_INFINITY,
            ln_bad_mass: f64::NEG_INFINITY,
            mass_kind: MassKind::Exact,
        });
    }
    let report = general_position_check(anchors);
    if !report.pass {
        return Err(LabError::GeneralPosition(report.summary()));
    }
    let d = anchors[0].len();
    let union = anchor_ball_union_mass(anchors)?;
    Ok(certificate(3.0 * alpha * (d as f64).sqrt(), union.ln_value, union.kind, p))
}

/// Union bound `Σ_i P(‖z − x_i‖ < 0.16√d)`, `z ~ N(0, I_d)`.
pub fn anchor_ball_union_mass(anchors: &[Vec<f64>]) -> Result<TailMass> {
    let d = anchors.first().map_or(0, Vec::len);
    if d == 0 {
        return Err(LabError::InvalidInput("anchors must be non-empty".into()));
    }
    let radius_sq = 0.16 * 0.16 * d as f64;
    let mut terms = Vec::with_capacity(anchors.len());
    let mut kind = MassKind::Exact;
    for a in anchors {
        ensure_dim(d, a.len())?;
        let m = noncentral_lower_tail(d as u32, dist_sq(a, &vec![0.0; d]), radius_sq)?;
        if m.kind == MassKind::UpperBound {
            kind = MassKind::UpperBound;
        }
        terms.push(m.ln_value);
    }
    let mx = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ln_value = if mx == f64::NEG_INFINITY {
        mx
    } else {
        mx + terms.iter().map(|t| (t - mx).exp()).sum::<f64>().ln()
    };
    Ok(TailMass {
        value: ln_value.exp().min(1.0),
        ln_value,
        kind,
    })
}

fn certificate(scale: f64, ln_mass: f64, kind: MassKind, p: f64) -> LpCertificate {
    let ln_value = if p.is_infinite() {
        scale.ln()
    } else {
        scale.ln() + ln_mass.min(0.0) / p
    };
    LpCertificate {
        value: ln_value.exp(),
        ln_value,
        ln_bad_mass: ln_mass,
        mass_kind: kind,
    }
}

// ---------------------------------------------------------------------------
// Gaussian KL

/// `KL(N(m0, S0) ‖ N(m1, S1))`.
pub fn gaussian_kl(mean0: &[f64], cov0: &DMatrix<f64>, mean1: &[f64], cov1: &DMatrix<f64>) -> Result<f64> {
    let d = mean0.len();
    ensure_dim(d, mean1.len())?;
    for c in [cov0, cov1] {
        if c.nrows() != d || c.ncols() != d {
            return Err(LabError::DimensionMismatch {
                expected: d,
                got: c.nrows(),
            });
        }
        if (c - c.transpose()).abs().max() > 1e-9 * (1.0 + c.abs().max()) {
            return Err(LabError::InvalidInput("covariance is not symmetric".into()));
        }
    }
    let chol0 = cov0
        .clone()
        .cholesky()
        .ok_or_else(|| LabError::InvalidInput("cov0 is not positive definite".into()))?;
    let chol1 = cov1
        .clone()
        .cholesky()
        .ok_or_else(|| LabError::InvalidInput("cov1 is not positive definite".into()))?;
    let logdet = |l: &DMatrix<f64>| 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let trace_term = chol1.solve(cov0).trace();
    let diff = DVector::from_iterator(d, mean1.iter().zip(mean0).map(|(a, b)| a - b));
    let mahal = diff.dot(&chol1.solve(&diff));
    Ok(0.5 * (trace_term + mahal - d as f64 + logdet(&chol1.l()) - logdet(&chol0.l())))
}

pub const FIT_RIDGE: f64 = 1e-6;

/// Fits mean and covariance (plus `1e-6·I`) to `samples` and returns
/// `KL(target ‖ fitted)`.
pub fn fit_gaussian_kl(samples: &[Vec<f64>], target: &GaussianTarget) -> Result<f64> {
    let d = target.dim();
    let n = samples.len();
    if n < d + 2 {
        return Err(LabError::InvalidInput(format!("fit_gaussian_kl needs at least {} samples, got {n}", d + 2)));
    }
    let (mean, cov) = sample_moments(samples, d)?;
    let cov_t = DMatrix::<f64>::identity(d, d) * target.variance_scale;
    gaussian_kl(&target.mean, &cov_t, &mean, &cov)
}

/// Sample mean and unbiased covariance with the fitting ridge applied.
pub fn sample_moments(samples: &[Vec<f64>], d: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = samples.len();
    let mut mean = vec![0.0; d];
    for s in samples {
        ensure_dim(d, s.len())?;
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| samples[i][j] - mean[j]);
    let mut cov = centered.transpose() * &centered / (n as f64 - 1.0);
    for i in 0..d {
        cov[(i, i)] += FIT_RIDGE;
    }
    // Symmetrize away rounding from the product.
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok((mean, cov))
}

// ---------------------------------------------------------------------------
// Sinkhorn divergence

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Multiplicative ε decrease per annealing stage.
    pub scaling: f64,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 10_000,
            scaling: 0.5,
        }
    }
}

/// Debiased entropic OT divergence
/// `S_ε(X, Y) = OT_ε(X, Y) − ½ OT_ε(X, X) − ½ OT_ε(Y, Y)` with cost
/// `‖x − y‖^p`, `ε = blur^p` and uniform weights.
pub fn sinkhorn_divergence(xs: &[Vec<f64>], ys: &[Vec<f64>], p: f64, blur: f64) -> Result<f64> {
    sinkhorn_divergence_with(xs, ys, p, blur, &SinkhornOptions::default())
}

pub fn sinkhorn_divergence_with(
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    p: f64,
    blur: f64,
    opts: &SinkhornOptions,
) -> Result<f64> {
    if xs.is_empty() || ys.is_empty() {
        return Err(LabError::InvalidInput("sinkhorn needs non-empty point sets".into()));
    }
    if !(blur > 0.0 && blur.is_finite()) || !(p >= 1.0) {
        return Err(LabError::InvalidInput("sinkhorn needs blur > 0 and p >= 1".into()));
    }
    let d = xs[0].len();
    for y in xs.iter().chain(ys) {
        ensure_dim(d, y.len())?;
    }
    let eps = blur.powf(p);
    let cxy = cost_matrix(xs, ys, p);
    let cxx = cost_matrix(xs, xs, p);
    let cyy = cost_matrix(ys, ys, p);
    let ot_xy = entropic_ot(&cxy, xs.len(), ys.len(), eps, opts)?;
    let ot_xx = entropic_ot_symmetric(&cxx, xs.len(), eps, opts)?;
    let ot_yy = entropic_ot_symmetric(&cyy, ys.len(), eps, opts)?;
    let s = ot_xy - 0.5 * (ot_xx + ot_yy);
    Ok(s.max(0.0))
}

fn cost_matrix(xs: &[Vec<f64>], ys: &[Vec<f64>], p: f64) -> Vec<f64> {
    let mut c = Vec::with_capacity(xs.len() * ys.len());
    for x in xs {
        for y in ys {
            let r2 = dist_sq(x, y);
            c.push(if p == 2.0 { r2 } else { r2.sqrt().powf(p) });
        }
    }
    c
}

/// `−ε log Σ_j w_j exp((h_j − c_j)/ε)` over one row/column.
#[inline]
fn soft_min(eps: f64, log_w: f64, h: &[f64], costs: &[f64]) -> f64 {
    let mx = h.iter().zip(costs).map(|(hj, cj)| hj - cj).fold(f64::NEG_INFINITY, f64::max);
    // Terms whose exponent is below this underflow to exactly 0 anyway.
    let cutoff = mx - UNDERFLOW_EXPONENT * eps;
    let inv = 1.0 / eps;
    let mut s = 0.0;
    for (hj, cj) in h.iter().zip(costs) {
        let z = hj - cj;
        if z > cutoff {
            s += ((z - mx) * inv).exp();
        }
    }
    -eps * log_w - mx - eps * s.ln()
}

const UNDERFLOW_EXPONENT: f64 = 746.0;

/// Sweeps per intermediate annealing stage.
const STAGE_SWEEPS: usize = 3;

fn annealing_schedule(cost: &[f64], eps: f64, scaling: f64) -> Vec<f64> {
    let diameter = cost.iter().copied().fold(0.0, f64::max).max(eps);
    let mut stages = Vec::new();
    let mut e = diameter;
    while e > eps {
        stages.push(e);
        e *= scaling;
    }
    stages.push(eps);
    stages
}

/// Entropic OT value `⟨a, f⟩ + ⟨b, g⟩` with alternating log-domain updates
/// and ε-annealing. Converged when one full sweep moves no potential by more
/// than the tolerance.
fn entropic_ot(cost: &[f64], n: usize, m: usize, eps: f64, opts: &SinkhornOptions) -> Result<f64> {
    let log_a = -(n as f64).ln();
    let log_b = -(m as f64).ln();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut cost_t = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            cost_t[j * n + i] = cost[i * m + j];
        }
    }
    let row = |i: usize| &cost[i * m..(i + 1) * m];
    let col = |j: usize| &cost_t[j * n..(j + 1) * n];
    let stages = annealing_schedule(cost, eps, opts.scaling);
    let last = stages.len() - 1;
    for (k, &e) in stages.iter().enumerate() {
        let iters = if k == last { opts.max_iterations } else { STAGE_SWEEPS };
        for _ in 0..iters {
            let mut residual: f64 = 0.0;
            for i in 0..n {
                let v = soft_min(e, log_b, &g, row(i));
                residual = f64::max(residual, (v - f[i]).abs());
                f[i] = v;
            }
            for j in 0..m {
                let v = soft_min(e, log_a, &f, col(j));
                residual = f64::max(residual, (v - g[j]).abs());
                g[j] = v;
            }
            if !residual.is_finite() {
                return Err(LabError::SinkhornNonConvergence { iterations: opts.max_iterations, residual });
            }
            if k == last && residual < opts.tolerance {
                break;
            }
        }
    }
    let fa: f64 = f.iter().sum::<f64>() / n as f64;
    let gb: f64 = g.iter().sum::<f64>() / m as f64;
    Ok(fa + gb)
}

/// Self-transport `OT_ε(X, X)` with the single symmetric potential.
fn entropic_ot_symmetric(cost: &[f64], n: usize, eps: f64, opts: &SinkhornOptions) -> Result<f64> {
    let log_a = -(n as f64).ln();
    let mut f = vec![0.0; n];
    let mut f_new = vec![0.0; n];
    let stages = annealing_schedule(cost, eps, opts.scaling);
    let last = stages.len() - 1;
    for (k, &e) in stages.iter().enumerate() {
        let iters = if k == last { opts.max_iterations } else { STAGE_SWEEPS };
        for _ in 0..iters {
            for (i, fi) in f_new.iter_mut().enumerate() {
                *fi = 0.5 * (f[i] + soft_min(e, log_a, &f, &cost[i * n..(i + 1) * n]));
            }
            let residual = f.iter().zip(&f_new).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            std::mem::swap(&mut f, &mut f_new);
            if !residual.is_finite() {
                return Err(LabError::SinkhornNonConvergence { iterations: opts.max_iterations, residual });
            }
            if k == last && residual < opts.tolerance {
                break;
            }
        }
    }
    Ok(2.0 * f.iter().sum::<f64>() / n as f64)
}

// ---------------------------------------------------------------------------
// Metrics CSV

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub experiment: String,
    pub target: String,
    pub algorithm: String,
    pub n_samples: usize,
    pub d: usize,
    pub seed: u64,
    pub metric_name: String,
    pub metric_value: f64,
}

pub const METRICS_HEADER: &str = "experiment,target,algorithm,n_samples,d,seed,metric_name,metric_value";

/// Appends rows to a long-format metrics CSV, writing the header when the
/// file is new or empty.
pub fn append_metrics_csv(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    let mut out = std::io::BufWriter::new(file);
    if fresh {
        writeln!(out, "{METRICS_HEADER}")?;
    }
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{:?}",
            r.experiment, r.target, r.algorithm, r.n_samples, r.d, r.seed, r.metric_name, r.metric_value
        )?;
    }
    out.flush()?;
    Ok(())
}
