//! Exact target scores and the adversarial score estimates.
//!
//! Every field implements [`ScoreField`]: a deterministic map from a point in
//! `R^d` to a drift vector. Fields are immutable after construction.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::bump::BumpProfile;
use crate::error::{ensure_dim, ensure_finite, LabError, Result};
use crate::linalg::{dist_sq, dot, norm};
use crate::metrics::general_position_check;
use crate::seeding;

/// A deterministic drift field `R^d → R^d`.
pub trait ScoreField: Send + Sync {
    fn dim(&self) -> usize;

    /// Writes the drift at `x` into `out`. Both slices have length `dim()`.
    fn eval_into(&self, x: &[f64], out: &mut [f64]);

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out);
        out
    }

    /// Evaluates a row-major batch of `xs.len() / dim()` points.
    fn eval_batch(&self, xs: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for (x, o) in xs.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
            self.eval_into(x, o);
        }
    }
}

impl<F: ScoreField + ?Sized> ScoreField for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).eval_into(x, out)
    }
    fn eval_batch(&self, xs: &[f64], out: &mut [f64]) {
        (**self).eval_batch(xs, out)
    }
}

impl<F: ScoreField + ?Sized> ScoreField for Box<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).eval_into(x, out)
    }
    fn eval_batch(&self, xs: &[f64], out: &mut [f64]) {
        (**self).eval_batch(xs, out)
    }
}

/// The zero drift. Handy for degenerate runs.
#[derive(Debug, Clone, Copy)]
pub struct ZeroField(pub usize);

impl ScoreField for ZeroField {
    fn dim(&self) -> usize {
        self.0
    }
    fn eval_into(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

// ---------------------------------------------------------------------------
// Targets

/// Isotropic Gaussian `N(mean, variance_scale · I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTarget {
    pub mean: Vec<f64>,
    pub variance_scale: f64,
}

impl GaussianTarget {
    pub fn new(mean: Vec<f64>, variance_scale: f64) -> Result<Self> {
        if mean.is_empty() {
            return Err(LabError::InvalidInput("gaussian target needs d >= 1".into()));
        }
        ensure_finite(&mean, "gaussian mean")?;
        if !(variance_scale > 0.0 && variance_scale.is_finite()) {
            return Err(LabError::InvalidInput(format!(
                "variance_scale must be positive, got {variance_scale}"
            )));
        }
        Ok(Self { mean, variance_scale })
    }

    pub fn standard(d: usize) -> Self {
        Self {
            mean: vec![0.0; d],
            variance_scale: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.dim() as f64;
        -0.5 * dist_sq(x, &self.mean) / self.variance_scale
            - 0.5 * d * (2.0 * std::f64::consts::PI * self.variance_scale).ln()
    }
}

impl ScoreField for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let inv = 1.0 / self.variance_scale;
        for ((o, xi), mi) in out.iter_mut().zip(x).zip(&self.mean) {
            *o = -(xi - mi) * inv;
        }
    }
}

/// Checked Gaussian score.
pub fn gaussian_score(x: &[f64], target: &GaussianTarget) -> Result<Vec<f64>> {
    ensure_dim(target.dim(), x.len())?;
    Ok(target.eval(x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub variance_scale: f64,
}

/// Mixture of isotropic Gaussians.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmTarget {
    components: Vec<GmmComponent>,
    log_weights: Vec<f64>,
}

impl GmmTarget {
    pub fn new(components: Vec<GmmComponent>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| LabError::InvalidInput("gmm needs at least one component".into()))?;
        let d = first.mean.len();
        if d == 0 {
            return Err(LabError::InvalidInput("gmm needs d >= 1".into()));
        }
        let mut total = 0.0;
        for c in &components {
            ensure_dim(d, c.mean.len())?;
            ensure_finite(&c.mean, "gmm mean")?;
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(LabError::InvalidInput(format!("gmm weight must be positive, got {}", c.weight)));
            }
            if !(c.variance_scale > 0.0 && c.variance_scale.is_finite()) {
                return Err(LabError::InvalidInput("gmm variance_scale must be positive".into()));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(LabError::InvalidInput(format!("gmm weights sum to {total}, expected 1")));
        }
        let log_weights = components.iter().map(|c| c.weight.ln()).collect();
        Ok(Self {
            components,
            log_weights,
        })
    }

    pub fn components(&self) -> &[GmmComponent] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    fn component_log_terms(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim() as f64;
        self.components
            .iter()
            .zip(&self.log_weights)
            .map(|(c, lw)| {
                lw - 0.5 * dist_sq(x, &c.mean) / c.variance_scale
                    - 0.5 * d * (2.0 * std::f64::consts::PI * c.variance_scale).ln()
            })
            .collect()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        log_sum_exp(&self.component_log_terms(x))
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

impl ScoreField for GmmTarget {
    fn dim(&self) -> usize {
        self.components[0].mean.len()
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let terms = self.component_log_terms(x);
        let lse = log_sum_exp(&terms);
        out.fill(0.0);
        for (c, t) in self.components.iter().zip(&terms) {
            let post = (t - lse).exp();
            if post == 0.0 {
                continue;
            }
            let scale = post / c.variance_scale;
            for ((o, xi), mi) in out.iter_mut().zip(x).zip(&c.mean) {
                *o -= scale * (xi - mi);
            }
        }
    }
}

pub fn gmm_score(x: &[f64], target: &GmmTarget) -> Result<Vec<f64>> {
    ensure_dim(target.dim(), x.len())?;
    Ok(target.eval(x))
}

/// A target distribution that can be scored, evaluated and sampled.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Gaussian(GaussianTarget),
    Gmm(GmmTarget),
}

impl Target {
    pub fn dim(&self) -> usize {
        match self {
            Target::Gaussian(g) => g.dim(),
            Target::Gmm(g) => g.dim(),
        }
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        match self {
            Target::Gaussian(g) => g.log_density(x),
            Target::Gmm(g) => g.log_density(x),
        }
    }

    /// Draws one point from the target into `out`.
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let (mean, scale) = match self {
            Target::Gaussian(g) => (&g.mean, g.variance_scale),
            Target::Gmm(g) => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut pick = g.components.len() - 1;
                for (k, c) in g.components.iter().enumerate() {
                    acc += c.weight;
                    if u < acc {
                        pick = k;
                        break;
                    }
                }
                let c = &g.components[pick];
                (&c.mean, c.variance_scale)
            }
        };
        let sd = scale.sqrt();
        for (o, m) in out.iter_mut().zip(mean) {
            let z: f64 = rng.sample(StandardNormal);
            *o = m + sd * z;
        }
    }
}

impl ScoreField for Target {
    fn dim(&self) -> usize {
        Target::dim(self)
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Target::Gaussian(g) => g.eval_into(x, out),
            Target::Gmm(g) => g.eval_into(x, out),
        }
    }
}

impl From<GaussianTarget> for Target {
    fn from(g: GaussianTarget) -> Self {
        Target::Gaussian(g)
    }
}

impl From<GmmTarget> for Target {
    fn from(g: GmmTarget) -> Self {
        Target::Gmm(g)
    }
}

/// `n` i.i.d. draws from `target`, deterministic in `seed`.
pub fn sample_target(target: &Target, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(LabError::InvalidInput("sample_target needs n >= 1".into()));
    }
    let mut rng = seeding::stream(seed, "sample-target", 0);
    let d = target.dim();
    Ok((0..n)
        .map(|_| {
            let mut x = vec![0.0; d];
            target.draw_into(&mut rng, &mut x);
            x
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Adversarial fields

/// Score estimate that is an OU-like contraction `−αx` inside `‖x‖ ≤ 4√d`
/// and the exact score of `N(μ, I)` outside `‖x‖ ≥ 5√d`, with `‖μ‖ = 7√d`.
#[derive(Debug, Clone)]
pub struct Thm1Field {
    mu: Vec<f64>,
    alpha: f64,
    sqrt_d: f64,
    profile: BumpProfile,
}

impl Thm1Field {
    pub const MEAN_NORM_PER_SQRT_D: f64 = 7.0;
    pub const INNER: f64 = 4.0;
    pub const OUTER: f64 = 5.0;
    pub const DEFAULT_ALPHA: f64 = 4.0;

    pub fn new(mu: Vec<f64>, alpha: f64) -> Result<Self> {
        if mu.is_empty() {
            return Err(LabError::Construction("thm1 field needs d >= 1".into()));
        }
        ensure_finite(&mu, "thm1 mean")?;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(LabError::Construction(format!("alpha must be positive, got {alpha}")));
        }
        let sqrt_d = (mu.len() as f64).sqrt();
        let ratio = norm(&mu) / sqrt_d;
        if ((ratio - Self::MEAN_NORM_PER_SQRT_D) / Self::MEAN_NORM_PER_SQRT_D).abs() > 1e-9 {
            return Err(LabError::Construction(format!(
                "thm1 mean must have norm 7√d, got {ratio}√d"
            )));
        }
        Ok(Self {
            mu,
            alpha,
            sqrt_d,
            profile: BumpProfile::default(),
        })
    }

    /// Field with `μ = 7√d · e_1`.
    pub fn along_first_axis(d: usize, alpha: f64) -> Result<Self> {
        if d == 0 {
            return Err(LabError::Construction("thm1 field needs d >= 1".into()));
        }
        let mut mu = vec![0.0; d];
        mu[0] = Self::MEAN_NORM_PER_SQRT_D * (d as f64).sqrt();
        Self::new(mu, alpha)
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The target whose score the field reproduces far from the origin.
    pub fn target(&self) -> GaussianTarget {
        GaussianTarget {
            mean: self.mu.clone(),
            variance_scale: 1.0,
        }
    }
}

impl ScoreField for Thm1Field {
    fn dim(&self) -> usize {
        self.mu.len()
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let w = self.profile.value(norm(x) / self.sqrt_d);
        let inner = (1.0 - w) * self.alpha;
        for ((o, xi), mi) in out.iter_mut().zip(x).zip(&self.mu) {
            *o = -inner * xi - w * (xi - mi);
        }
    }
}

pub fn thm1_score(x: &[f64], field: &Thm1Field) -> Result<Vec<f64>> {
    ensure_dim(field.dim(), x.len())?;
    ensure_finite(x, "thm1 argument")?;
    Ok(field.eval(x))
}

/// Index and distance of the closest anchor; ties go to the smallest index.
pub fn nearest_anchor(x: &[f64], anchors: &[Vec<f64>]) -> Result<(usize, f64)> {
    if anchors.is_empty() {
        return Err(LabError::InvalidInput("nearest_anchor needs at least one anchor".into()));
    }
    for a in anchors {
        ensure_dim(x.len(), a.len())?;
    }
    Ok(nearest_unchecked(x, anchors))
}

#[inline]
fn nearest_unchecked(x: &[f64], anchors: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, a) in anchors.iter().enumerate() {
        let d2 = dist_sq(x, a);
        if d2 < best.1 {
            best = (i, d2);
        }
    }
    (best.0, best.1.sqrt())
}

/// Memorizing score estimate: `−α(x − x_i)` within `0.15√d` of an anchor,
/// the standard Gaussian score `−x` beyond `0.16√d` of every anchor.
#[derive(Debug, Clone)]
pub struct Thm2Field {
    anchors: Vec<Vec<f64>>,
    alpha: f64,
    sqrt_d: f64,
    profile: BumpProfile,
}

impl Thm2Field {
    pub const INNER: f64 = 0.15;
    pub const OUTER: f64 = 0.16;
    pub const DEFAULT_ALPHA: f64 = 400.0;

    pub fn new(anchors: Vec<Vec<f64>>, alpha: f64) -> Result<Self> {
        let d = anchors
            .first()
            .map(Vec::len)
            .ok_or_else(|| LabError::Construction("thm2 field needs at least one anchor".into()))?;
        if d == 0 {
            return Err(LabError::Construction("thm2 field needs d >= 1".into()));
        }
        for a in &anchors {
            ensure_dim(d, a.len())?;
            ensure_finite(a, "anchor")?;
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(LabError::Construction(format!("alpha must be positive, got {alpha}")));
        }
        let report = general_position_check(&anchors);
        if !report.pass {
            return Err(LabError::GeneralPosition(report.summary()));
        }
        Ok(Self {
            anchors,
            alpha,
            sqrt_d: (d as f64).sqrt(),
            profile: BumpProfile::default(),
        })
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.anchors
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Maps an anchor distance onto the bump profile's radial axis:
    /// `0.15√d ↦ 4`, `0.16√d ↦ 5`.
    #[inline]
    pub fn bump_argument(&self, r: f64) -> f64 {
        100.0 * r / self.sqrt_d - 11.0
    }
}

impl ScoreField for Thm2Field {
    fn dim(&self) -> usize {
        self.anchors[0].len()
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let (i, r) = nearest_unchecked(x, &self.anchors);
        if r >= Self::OUTER * self.sqrt_d {
            for (o, xi) in out.iter_mut().zip(x) {
                *o = -xi;
            }
            return;
        }
        let w = self.profile.value(self.bump_argument(r));
        let inner = (1.0 - w) * self.alpha;
        for ((o, xi), ai) in out.iter_mut().zip(x).zip(&self.anchors[i]) {
            *o = -inner * (xi - ai) - w * xi;
        }
    }
}

pub fn thm2_score(x: &[f64], field: &Thm2Field) -> Result<Vec<f64>> {
    ensure_dim(field.dim(), x.len())?;
    ensure_finite(x, "thm2 argument")?;
    Ok(field.eval(x))
}

/// `Cone_{θ,u} = { y ≠ 0 : ⟨y/‖y‖, u⟩ ≥ cos θ }`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cone {
    pub axis: Vec<f64>,
    pub half_angle: f64,
}

impl Cone {
    pub fn new(axis: Vec<f64>, half_angle: f64) -> Result<Self> {
        ensure_finite(&axis, "cone axis")?;
        if (norm(&axis) - 1.0).abs() > 1e-9 {
            return Err(LabError::Construction("cone axis must be a unit vector".into()));
        }
        if !(half_angle > 0.0 && half_angle < std::f64::consts::FRAC_PI_2) {
            return Err(LabError::Construction(format!(
                "cone half-angle must lie in (0, π/2), got {half_angle}"
            )));
        }
        Ok(Self { axis, half_angle })
    }

    #[inline]
    pub fn contains(&self, y: &[f64]) -> bool {
        let n = norm(y);
        n > 0.0 && dot(y, &self.axis) >= n * self.half_angle.cos()
    }
}

/// Score estimate that freezes the drift to the cone axis `u` on a closed
/// ball `K′` inside the cone, and follows `base` everywhere else.
#[derive(Debug, Clone)]
pub struct Thm3Field<B> {
    base: B,
    cone: Cone,
    patch_center: Vec<f64>,
    patch_radius: f64,
}

impl<B: ScoreField> Thm3Field<B> {
    pub fn new(base: B, cone: Cone, patch_center: Vec<f64>, patch_radius: f64) -> Result<Self> {
        let d = base.dim();
        ensure_dim(d, cone.axis.len())?;
        ensure_dim(d, patch_center.len())?;
        ensure_finite(&patch_center, "patch center")?;
        if !(patch_radius > 0.0 && patch_radius.is_finite()) {
            return Err(LabError::Construction("patch radius must be positive".into()));
        }
        let c = norm(&patch_center);
        if c <= patch_radius {
            return Err(LabError::Construction("patch ball contains the cone apex".into()));
        }
        // The ball lies in the open cone iff the angle to its center plus its
        // angular radius stays below the half-angle.
        let center_angle = (dot(&patch_center, &cone.axis) / c).clamp(-1.0, 1.0).acos();
        let angular_radius = (patch_radius / c).asin();
        if center_angle + angular_radius >= cone.half_angle {
            return Err(LabError::Construction(format!(
                "patch ball is not strictly inside the cone ({:.4} + {:.4} >= {:.4} rad)",
                center_angle, angular_radius, cone.half_angle
            )));
        }
        Ok(Self {
            base,
            cone,
            patch_center,
            patch_radius,
        })
    }

    pub fn cone(&self) -> &Cone {
        &self.cone
    }

    pub fn patch_center(&self) -> &[f64] {
        &self.patch_center
    }

    pub fn patch_radius(&self) -> f64 {
        self.patch_radius
    }

    pub fn base(&self) -> &B {
        &self.base
    }

    #[inline]
    pub fn in_patch(&self, x: &[f64]) -> bool {
        dist_sq(x, &self.patch_center) <= self.patch_radius * self.patch_radius
    }
}

impl<B: ScoreField> ScoreField for Thm3Field<B> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        if self.in_patch(x) {
            out.copy_from_slice(&self.cone.axis);
        } else {
            self.base.eval_into(x, out);
        }
    }
}

pub fn thm3_score<B: ScoreField>(x: &[f64], field: &Thm3Field<B>) -> Result<Vec<f64>> {
    ensure_dim(field.dim(), x.len())?;
    ensure_finite(x, "thm3 argument")?;
    Ok(field.eval(x))
}

// ---------------------------------------------------------------------------
// Anchor files

/// Reads a headerless CSV of `n` rows × `d` columns.
pub fn read_points_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut points = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let point = record
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|e| {
                    LabError::InvalidInput(format!("{}: row {}: bad number {f:?}: {e}", path.display(), row + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = points.first() {
            let first: &Vec<f64> = first;
            if first.len() != point.len() {
                return Err(LabError::InvalidInput(format!(
                    "{}: row {} has {} columns, expected {}",
                    path.display(),
                    row + 1,
                    point.len(),
                    first.len()
                )));
            }
        }
        points.push(point);
    }
    Ok(points)
}

pub fn write_points_csv(path: &Path, points: &[Vec<f64>]) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for p in points {
        writer.write_record(p.iter().map(|v| format!("{v:?}")))?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn unit_gmm(d: usize) -> GmmTarget {
        GmmTarget::new(vec![
            GmmComponent {
                weight: 0.5,
                mean: vec![-1.0; d],
                variance_scale: 2.0,
            },
            GmmComponent {
                weight: 0.5,
                mean: vec![4.0; d],
                variance_scale: 2.0,
            },
        ])
        .unwrap()
    }

    #[test]
    fn gaussian_score_examples() {
        let t = GaussianTarget::standard(2);
        assert_eq!(gaussian_score(&[0.0, 0.0], &t).unwrap(), vec![0.0, 0.0]);
        assert_eq!(gaussian_score(&[1.0, 0.0], &t).unwrap(), vec![-1.0, 0.0]);
        let t = GaussianTarget::new(vec![1.0, 1.0], 2.0).unwrap();
        assert_eq!(gaussian_score(&[3.0, 3.0], &t).unwrap(), vec![-1.0, -1.0]);
        assert!(gaussian_score(&[1.0], &t).is_err());
    }

    #[test]
    fn single_component_gmm_matches_gaussian() {
        let g = GaussianTarget::new(vec![0.5, -1.0, 2.0], 1.5).unwrap();
        let m = GmmTarget::new(vec![GmmComponent {
            weight: 1.0,
            mean: g.mean.clone(),
            variance_scale: 1.5,
        }])
        .unwrap();
        let x = [0.3, 0.2, -0.7];
        let a = gaussian_score(&x, &g).unwrap();
        let b = gmm_score(&x, &m).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-14);
        }
    }

    #[test]
    fn gmm_midpoint_cancels() {
        let m = unit_gmm(3);
        let s = gmm_score(&[1.5, 1.5, 1.5], &m).unwrap();
        for v in s {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gmm_deep_in_one_basin_matches_that_component() {
        let m = unit_gmm(3);
        let x = [-4.0, -3.0, -5.0];
        // Posterior weight of component 2 here is exp(-Δ) with Δ ≈ 60, so the
        // component-1 score is reproduced to far below 1e-6.
        let c1 = GaussianTarget::new(vec![-1.0; 3], 2.0).unwrap();
        let want = gaussian_score(&x, &c1).unwrap();
        let got = gmm_score(&x, &m).unwrap();
        for (u, v) in got.iter().zip(&want) {
            assert!((u - v).abs() < 1e-6);
        }
    }

    #[test]
    fn gmm_rejects_bad_weights() {
        let bad = GmmTarget::new(vec![GmmComponent {
            weight: 0.7,
            mean: vec![0.0],
            variance_scale: 1.0,
        }]);
        assert!(bad.is_err());
    }

    fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut p = x.to_vec();
                let mut m = x.to_vec();
                p[i] += h;
                m[i] -= h;
                (f(&p) - f(&m)) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let den = norm(b).max(1e-12);
        num / den
    }

    #[test]
    fn scores_match_finite_difference_of_log_density() {
        let g = GaussianTarget::new(vec![1.0, -2.0, 0.5, 3.0], 2.0).unwrap();
        let m = unit_gmm(4);
        let mut rng = seeding::stream(3, "fd", 0);
        for _ in 0..20 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-4.0..6.0)).collect();
            let fd = fd_gradient(|p| g.log_density(p), &x, 1e-5);
            assert!(rel_err(&g.eval(&x), &fd) < 1e-6);
            let fd = fd_gradient(|p| m.log_density(p), &x, 1e-5);
            assert!(rel_err(&m.eval(&x), &fd) < 1e-6);
        }
    }

    #[test]
    fn thm1_examples() {
        let d = 9;
        let f = Thm1Field::along_first_axis(d, 4.0).unwrap();
        assert_eq!(thm1_score(&vec![0.0; d], &f).unwrap(), vec![0.0; d]);
        let mut x = vec![0.0; d];
        x[1] = 3.0 * 3.0;
        let s = thm1_score(&x, &f).unwrap();
        assert_eq!(s[1], -4.0 * 9.0);
        let s = thm1_score(f.mu(), &f).unwrap();
        assert!(s.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn thm1_rejects_wrong_mean_norm() {
        assert!(Thm1Field::new(vec![1.0, 0.0], 4.0).is_err());
        assert!(Thm1Field::along_first_axis(4, -1.0).is_err());
    }

    #[test]
    fn nearest_anchor_rules() {
        let anchors = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.0], vec![5.0, 5.0]];
        assert_eq!(nearest_anchor(&[5.0, 5.0], &anchors).unwrap(), (3, 0.0));
        assert_eq!(nearest_anchor(&[1.0, 0.0], &anchors).unwrap().0, 0);
        assert!(nearest_anchor(&[1.0, 0.0], &[]).is_err());
    }

    #[test]
    fn nearest_anchor_matches_brute_force() {
        let mut rng = seeding::stream(11, "na", 0);
        let anchors: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..5).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        for _ in 0..200 {
            let x: Vec<f64> = (0..5).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let dists: Vec<f64> = anchors.iter().map(|a| crate::linalg::dist(&x, a)).collect();
            let mut bi = 0;
            for i in 1..dists.len() {
                if dists[i] < dists[bi] {
                    bi = i;
                }
            }
            let (i, r) = nearest_anchor(&x, &anchors).unwrap();
            assert_eq!(i, bi);
            assert_abs_diff_eq!(r, dists[bi], epsilon = 1e-12);
        }
    }

    fn spread_anchors(d: usize) -> Vec<Vec<f64>> {
        // Scaled basis vectors: norms √d, pairwise √(2d).
        (0..3)
            .map(|i| {
                let mut a = vec![0.0; d];
                a[i] = (d as f64).sqrt();
                a
            })
            .collect()
    }

    #[test]
    fn thm2_examples() {
        let d = 16;
        let sd = 4.0;
        let anchors = spread_anchors(d);
        let f = Thm2Field::new(anchors.clone(), 400.0).unwrap();
        assert!(thm2_score(&anchors[1], &f).unwrap().iter().all(|v| *v == 0.0));
        let mut x = anchors[0].clone();
        x[3] += 0.1 * sd;
        let s = thm2_score(&x, &f).unwrap();
        assert_abs_diff_eq!(s[3], -400.0 * 0.1 * sd, epsilon = 1e-12);
        assert_eq!(s[0], 0.0);
        let x = vec![0.0; d];
        assert_eq!(thm2_score(&x, &f).unwrap(), vec![0.0; d]);
        let mut x = vec![0.0; d];
        x[5] = 1.0;
        assert_eq!(thm2_score(&x, &f).unwrap()[5], -1.0);
        assert_abs_diff_eq!(f.bump_argument(0.15 * sd), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.bump_argument(0.16 * sd), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn thm2_rejects_crowded_anchors() {
        let d = 16;
        let mut anchors = spread_anchors(d);
        let mut close = anchors[0].clone();
        close[7] += 0.3 * 4.0;
        anchors.push(close);
        assert!(matches!(Thm2Field::new(anchors, 400.0), Err(LabError::GeneralPosition(_))));
    }

    #[test]
    fn thm3_examples_and_geometry() {
        let base = GaussianTarget::standard(2);
        let cone = Cone::new(vec![1.0, 0.0], 10f64.to_radians()).unwrap();
        let f = Thm3Field::new(base.clone(), cone.clone(), vec![5.0, 0.0], 0.5).unwrap();
        assert_eq!(thm3_score(&[5.0, 0.0], &f).unwrap(), vec![1.0, 0.0]);
        assert_eq!(thm3_score(&[-3.0, 2.0], &f).unwrap(), vec![3.0, -2.0]);
        // Just outside the patch the field reverts to the base score.
        let s = thm3_score(&[5.5 + 1e-9, 0.0], &f).unwrap();
        assert!(s[0] < -5.0);
        assert!(Thm3Field::new(base.clone(), cone.clone(), vec![5.0, 1.0], 0.5).is_err());
        assert!(Thm3Field::new(base, cone, vec![0.3, 0.0], 0.5).is_err());
        assert!(Cone::new(vec![1.0, 1.0], 0.2).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let t: Target = GaussianTarget::standard(3).into();
        assert_eq!(sample_target(&t, 10, 5).unwrap(), sample_target(&t, 10, 5).unwrap());
        assert_ne!(sample_target(&t, 10, 5).unwrap(), sample_target(&t, 10, 6).unwrap());
        assert!(sample_target(&t, 0, 5).is_err());
    }

    #[test]
    fn standard_gaussian_sample_mean() {
        let d = 10;
        let t: Target = GaussianTarget::standard(d).into();
        let n = 100_000;
        let xs = sample_target(&t, n, 1).unwrap();
        for j in 0..d {
            let m: f64 = xs.iter().map(|x| x[j]).sum::<f64>() / n as f64;
            assert!(m.abs() < 0.02, "coordinate {j} mean {m}");
        }
    }

    #[test]
    fn one_component_gmm_samples_like_gaussian() {
        let g = GaussianTarget::new(vec![1.0, 2.0], 2.0).unwrap();
        let m = GmmTarget::new(vec![GmmComponent {
            weight: 1.0,
            mean: g.mean.clone(),
            variance_scale: 2.0,
        }])
        .unwrap();
        let a = sample_target(&Target::Gaussian(g), 20_000, 4).unwrap();
        let b = sample_target(&Target::Gmm(m), 20_000, 4).unwrap();
        for j in 0..2 {
            let ma: f64 = a.iter().map(|x| x[j]).sum::<f64>() / 20_000.0;
            let mb: f64 = b.iter().map(|x| x[j]).sum::<f64>() / 20_000.0;
            // 4σ band on the difference of two independent means.
            assert!((ma - mb).abs() < 4.0 * (2.0 * 2.0 / 20_000.0f64).sqrt());
        }
    }

    #[test]
    fn points_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("anchors.csv");
        let pts = vec![vec![1.0, -2.5, 3.25], vec![0.1, 0.2, 0.3]];
        write_points_csv(&path, &pts).unwrap();
        assert_eq!(read_points_csv(&path).unwrap(), pts);
        std::fs::write(&path, "1,2\n3\n").unwrap();
        assert!(read_points_csv(&path).is_err());
    }

    proptest! {
        #[test]
        fn thm1_is_a_function_of_the_point_only(seed in 0u64..1000) {
            let f = Thm1Field::along_first_axis(4, 4.0).unwrap();
            let mut rng = seeding::stream(seed, "p", 0);
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-15.0..15.0)).collect();
            prop_assert_eq!(f.eval(&x), f.eval(&x));
        }
    }
}
