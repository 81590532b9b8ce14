//! Univariate standard normal tails.
//!
//! `log_normal_tail` stays accurate far past the point where the tail itself
//! underflows, which the exact block-set oracles rely on.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// ln(2π)/2
pub const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_7;

/// Beyond this argument the continued fraction is used instead of `erfc`.
const CONTINUED_FRACTION_FROM: f64 = 20.0;

pub fn normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

/// P(Z > t) for standard normal Z.
pub fn normal_tail(t: f64) -> f64 {
    0.5 * libm::erfc(t * FRAC_1_SQRT_2)
}

/// ln P(Z > t), finite for every finite `t`.
pub fn log_normal_tail(t: f64) -> f64 {
    if t < 0.0 {
        (-normal_tail(-t)).ln_1p()
    } else if t <= CONTINUED_FRACTION_FROM {
        normal_tail(t).ln()
    } else {
        -0.5 * t * t - HALF_LN_TWO_PI + mills_ratio_cf(t).ln()
    }
}

/// Mills ratio R(t) = P(Z > t)/φ(t) by the Laplace continued fraction
/// R(t) = 1/(t + 1/(t + 2/(t + 3/(t + ...)))), evaluated with modified Lentz.
fn mills_ratio_cf(t: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = t;
    let mut c = t;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64;
        d = t + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = t + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// Classical Mills-ratio sandwich φ(t)(1/t − 1/t³) ≤ P(Z > t) ≤ φ(t)/t.
pub fn mills_bounds(t: f64) -> Result<(f64, f64)> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("mills_bounds needs t > 0, got {t}")));
    }
    let density = normal_pdf(t);
    let upper = density / t;
    let lower = density * (1.0 / t - 1.0 / (t * t * t));
    Ok((lower, upper))
}
