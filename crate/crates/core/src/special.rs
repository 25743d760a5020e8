//! Chi-square and noncentral chi-square distribution functions.
//!
//! These give exact Gaussian ball masses: for `z ~ N(0, I_d)` and a fixed
//! vector `m`, `‖z + m‖²` is noncentral chi-square with `d` degrees of
//! freedom and noncentrality `‖m‖²`.

use statrs::function::gamma::ln_gamma;

use crate::error::{LabError, Result};

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 100_000;
const TINY: f64 = 1e-300;

/// Regularized lower incomplete gamma function `P(a, x)`.
///
/// Series expansion for `x < a + 1`, Lentz continued fraction for the upper
/// function otherwise.
pub fn reg_lower_gamma(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(LabError::InvalidInput(format!("reg_lower_gamma needs a > 0, got {a}")));
    }
    if !(x >= 0.0) {
        return Err(LabError::InvalidInput(format!("reg_lower_gamma needs x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        Ok((log_prefactor + lower_series(a, x).ln()).exp().min(1.0))
    } else {
        Ok((1.0 - (log_prefactor + upper_continued_fraction(a, x).ln()).exp()).clamp(0.0, 1.0))
    }
}

/// `Σ_n x^n / (a (a+1) ... (a+n))`, so that `P = x^a e^{-x} / Γ(a) · series`.
fn lower_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum
}

/// Continued fraction for `Q = x^a e^{-x} / Γ(a) · cf`.
fn upper_continued_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// `P(χ²_dof ≤ x)`.
pub fn chi_square_cdf(dof: u32, x: f64) -> Result<f64> {
    if dof == 0 {
        return Err(LabError::InvalidInput("chi_square_cdf needs dof >= 1".into()));
    }
    if !(x >= 0.0) {
        return Err(LabError::InvalidInput(format!("chi_square_cdf needs x >= 0, got {x}")));
    }
    reg_lower_gamma(f64::from(dof) / 2.0, x / 2.0)
}

/// Whether a [`TailMass`] is a direct evaluation or a rigorous upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MassKind {
    Exact,
    UpperBound,
}

/// A probability that is either computed directly or bounded from above.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TailMass {
    pub value: f64,
    /// Natural log of `value`; finite even when `value` underflows to zero.
    pub ln_value: f64,
    pub kind: MassKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailQuery {
    pub dof: u32,
    pub noncentrality: f64,
    pub threshold: f64,
}

impl TailQuery {
    fn validate(&self) -> Result<()> {
        if self.dof == 0 {
            return Err(LabError::InvalidInput("dof must be >= 1".into()));
        }
        if !(self.noncentrality >= 0.0 && self.noncentrality.is_finite()) {
            return Err(LabError::InvalidInput("noncentrality must be finite and >= 0".into()));
        }
        if !(self.threshold >= 0.0) {
            return Err(LabError::InvalidInput("threshold must be >= 0".into()));
        }
        Ok(())
    }
}

/// Poisson-mixture series for `P(χ'²_{dof}(λ) ≤ x)`.
///
/// The Poisson weights are summed outward from their mode until the
/// accumulated mass reaches `1 − 1e-12`.
pub fn noncentral_chi_square_cdf(dof: u32, lambda: f64, x: f64) -> Result<f64> {
    let q = TailQuery {
        dof,
        noncentrality: lambda,
        threshold: x,
    };
    q.validate()?;
    if lambda == 0.0 {
        return chi_square_cdf(dof, x);
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let half = lambda / 2.0;
    let mode = half.floor() as u64;
    let ln_weight = |j: u64| -> f64 { -half + j as f64 * half.ln() - ln_gamma(j as f64 + 1.0) };
    let term = |j: u64| -> Result<(f64, f64)> {
        let w = ln_weight(j).exp();
        let p = chi_square_cdf(dof + 2 * j as u32, x)?;
        Ok((w, w * p))
    };

    let (w0, t0) = term(mode)?;
    let mut mass = w0;
    let mut total = t0;
    let mut lo = mode;
    let mut hi = mode;
    let target = 1.0 - 1e-12;
    let mut guard = 0usize;
    while mass < target && guard < 100_000 {
        guard += 1;
        let lo_w = if lo > 0 { ln_weight(lo - 1) } else { f64::NEG_INFINITY };
        let hi_w = ln_weight(hi + 1);
        if lo_w > hi_w {
            lo -= 1;
            let (w, t) = term(lo)?;
            mass += w;
            total += t;
        } else {
            hi += 1;
            let (w, t) = term(hi)?;
            mass += w;
            total += t;
            if w == 0.0 && lo == 0 {
                break;
            }
        }
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Chernoff upper bound on `ln P(χ'²_{dof}(λ) ≤ x)`, valid for every `x`.
///
/// Uses `P(Y ≤ x) ≤ inf_{s > 0} e^{s x} E e^{−sY}` with
/// `ln E e^{−sY} = −(dof/2) ln(1 + 2s) − λ s / (1 + 2s)`. The one-dimensional
/// minimization is done by golden-section search on a bracketing interval
/// (the exponent is convex in `s`).
pub fn noncentral_lower_tail_ln_bound(dof: u32, lambda: f64, x: f64) -> Result<f64> {
    TailQuery {
        dof,
        noncentrality: lambda,
        threshold: x,
    }
    .validate()?;
    let k = f64::from(dof);
    let exponent = |s: f64| s * x - 0.5 * k * (1.0 + 2.0 * s).ln() - lambda * s / (1.0 + 2.0 * s);
    if x >= k + lambda {
        // Bulk or above: the bound is trivial.
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while exponent(hi * 2.0) < exponent(hi) && hi < 1e12 {
        hi *= 2.0;
    }
    hi *= 2.0;
    let mut lo = 0.0;
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut fa, mut fb) = (exponent(a), exponent(b));
    for _ in 0..300 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = exponent(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = exponent(b);
        }
    }
    Ok(fa.min(fb).min(0.0))
}

/// Lower-tail mass `P(χ'²_{dof}(λ) ≤ x)` labelled exact or bound.
///
/// When the series result is below `1e-280` (where it has lost all relative
/// precision) the Chernoff bound is returned instead.
pub fn noncentral_lower_tail(dof: u32, lambda: f64, x: f64) -> Result<TailMass> {
    let ln_bound = noncentral_lower_tail_ln_bound(dof, lambda, x)?;
    if ln_bound < -600.0 {
        return Ok(TailMass {
            value: ln_bound.exp(),
            ln_value: ln_bound,
            kind: MassKind::UpperBound,
        });
    }
    let value = noncentral_chi_square_cdf(dof, lambda, x)?;
    if value < 1e-280 {
        return Ok(TailMass {
            value: ln_bound.exp(),
            ln_value: ln_bound,
            kind: MassKind::UpperBound,
        });
    }
    Ok(TailMass {
        value,
        ln_value: value.ln(),
        kind: MassKind::Exact,
    })
}
