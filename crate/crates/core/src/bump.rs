//! Smooth radial bump profile used to glue the branches of the adversarial
//! score fields.
//!
//! The profile is the classical C^∞ smoothstep built from `exp(-1/t)`:
//!
//! ```text
//! g(r) = f(s) / (f(s) + f(1 - s)),   s = (r - inner) / (outer - inner),
//! f(t) = exp(-1/t) for t > 0, 0 otherwise.
//! ```
//!
//! It is exactly 0 for `r <= inner`, exactly 1 for `r >= outer` and
//! nondecreasing in between.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure_finite, LabError, Result};
use crate::linalg::{dist, norm};
use crate::seeding;

/// Below this argument `exp(-1/t)` is already zero in double precision.
const KERNEL_CUTOFF: f64 = 1e-12;

#[inline]
fn kernel(t: f64) -> f64 {
    if t <= KERNEL_CUTOFF {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpProfile {
    pub inner_radius: f64,
    pub outer_radius: f64,
}

impl Default for BumpProfile {
    fn default() -> Self {
        Self {
            inner_radius: 4.0,
            outer_radius: 5.0,
        }
    }
}

impl BumpProfile {
    pub fn new(inner_radius: f64, outer_radius: f64) -> Result<Self> {
        if !(inner_radius.is_finite() && outer_radius.is_finite() && inner_radius < outer_radius) {
            return Err(LabError::InvalidInput(format!(
                "bump radii must be finite with inner < outer, got ({inner_radius}, {outer_radius})"
            )));
        }
        Ok(Self {
            inner_radius,
            outer_radius,
        })
    }

    /// Profile value at radius `r`. Propagates NaN; use [`bump_radial`] for
    /// checked evaluation.
    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        if r <= self.inner_radius {
            return 0.0;
        }
        if r >= self.outer_radius {
            return 1.0;
        }
        let s = (r - self.inner_radius) / (self.outer_radius - self.inner_radius);
        let lo = kernel(s);
        let hi = kernel(1.0 - s);
        lo / (lo + hi)
    }

    /// Profile value at `‖x‖`.
    #[inline]
    pub fn value_at(&self, x: &[f64]) -> f64 {
        self.value(norm(x))
    }
}

/// Checked evaluation of the default (4, 5) profile.
pub fn bump_radial(r: f64) -> Result<f64> {
    if !r.is_finite() {
        return Err(LabError::InvalidInput(format!("bump radius must be finite, got {r}")));
    }
    Ok(BumpProfile::default().value(r))
}

/// Checked evaluation of the default profile at `‖x‖`.
pub fn bump_eval(x: &[f64]) -> Result<f64> {
    ensure_finite(x, "bump argument")?;
    Ok(BumpProfile::default().value_at(x))
}

/// Largest difference quotient `|ψ(x) − ψ(y)| / ‖x − y‖` over random close
/// pairs with `‖x‖` uniform in `[shell_inner, shell_outer]`.
///
/// Pairs are `y = x + δ v` with `v` a random unit direction and `δ` log-uniform
/// in `[1e-4, 1e-1]`, so the estimate approaches the true Lipschitz constant
/// from below.
pub fn lipschitz_estimate_in_shell(
    profile: &BumpProfile,
    shell_inner: f64,
    shell_outer: f64,
    dim: usize,
    sample_count: usize,
    seed: u64,
) -> Result<f64> {
    if sample_count < 2 {
        return Err(LabError::InvalidInput("lipschitz_estimate needs at least 2 pairs".into()));
    }
    if dim == 0 || !(shell_inner >= 0.0 && shell_inner <= shell_outer) {
        return Err(LabError::InvalidInput("invalid shell or dimension".into()));
    }
    let mut rng = seeding::stream(seed, "bump-lipschitz", 0);
    let mut best = 0.0_f64;
    let mut x = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    for _ in 0..sample_count {
        let radius = rng.gen_range(shell_inner..=shell_outer);
        random_unit(&mut rng, &mut x);
        x.iter_mut().for_each(|c| *c *= radius);
        random_unit(&mut rng, &mut y);
        let step = 10f64.powf(rng.gen_range(-4.0..=-1.0));
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi = xi + step * *yi;
        }
        let gap = dist(&x, &y);
        if gap > 0.0 {
            let q = (profile.value_at(&x) - profile.value_at(&y)).abs() / gap;
            best = best.max(q);
        }
    }
    Ok(best)
}

/// Lipschitz estimate of the default profile over the shell `3.5 ≤ ‖x‖ ≤ 5.5`
/// in three dimensions (the profile is radial, so the constant does not
/// depend on the ambient dimension).
pub fn lipschitz_estimate(sample_count: usize, seed: u64) -> Result<f64> {
    lipschitz_estimate_in_shell(&BumpProfile::default(), 3.5, 5.5, 3, sample_count, seed)
}

pub(crate) fn random_unit<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        for c in out.iter_mut() {
            *c = rng.sample(StandardNormal);
        }
        let n = norm(out);
        if n > 1e-12 {
            out.iter_mut().for_each(|c| *c /= n);
            return;
        }
    }
}
