//! Critical speeds.
//!
//! For a front whose right tail decays like `exp(-ζx)` the speed is
//!
//! ```text
//! v(ζ) = (λ (L(-ζ) - 1) + μ) / ζ
//! ```
//!
//! which is convex on `(0, α)`. Its minimum is the critical speed `v**`,
//! attained at `ζ** ∈ (0, α]`. For exponential jumps
//! `ζ** = √μ / (√λ + √μ)` and `v** = (√λ + √μ)²`.

use serde::Serialize;

use crate::dist::{ExtReal, JumpLaw};
use crate::error::{invalid, Error, Result};

/// Absolute tolerance of the golden-section minimizer on ζ.
pub const ZETA_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedCurvePoint {
    pub zeta: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalSpeed {
    pub zeta_star: f64,
    pub v_star: f64,
    pub lambda: f64,
    pub mu: f64,
    /// The minimum sits at the tail exponent (`ζ** = α` with `L(-α)` finite).
    pub at_tail_boundary: bool,
}

fn check_rates(lambda: f64, mu: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid(format!("mu must be > 0, got {mu}")));
    }
    Ok(())
}

/// `v(ζ) = (λ L(-ζ) - λ + μ) / ζ`; `+inf` where `L(-ζ)` is infinite.
pub fn v_of_zeta(law: &JumpLaw, lambda: f64, mu: f64, zeta: f64) -> Result<ExtReal> {
    check_rates(lambda, mu)?;
    if !(zeta > 0.0) {
        return Err(invalid(format!("zeta must be > 0, got {zeta}")));
    }
    Ok(curve_value(law, lambda, mu, zeta))
}

fn curve_value(law: &JumpLaw, lambda: f64, mu: f64, zeta: f64) -> ExtReal {
    match law.laplace(-zeta) {
        ExtReal::PosInf => ExtReal::PosInf,
        ExtReal::Finite(l) => ExtReal::Finite((lambda * (l - 1.0) + mu) / zeta),
    }
}

/// Left side of the stationarity condition `d v / d ζ = 0`, multiplied by `-ζ²`:
/// `λ ζ L'(-ζ) + λ L(-ζ) - λ + μ`. Positive left of `ζ**`, negative right of it.
fn stationarity(law: &JumpLaw, lambda: f64, mu: f64, zeta: f64) -> Option<f64> {
    let l = law.laplace(-zeta).finite()?;
    let dl = law.laplace_derivative(-zeta).finite()?;
    Some(lambda * zeta * dl + lambda * (l - 1.0) + mu)
}

/// Sampled speed curve (points where `v` is infinite are skipped).
pub fn speed_curve(law: &JumpLaw, lambda: f64, mu: f64, zetas: &[f64]) -> Result<Vec<SpeedCurvePoint>> {
    let mut out = Vec::with_capacity(zetas.len());
    for &zeta in zetas {
        if let ExtReal::Finite(speed) = v_of_zeta(law, lambda, mu, zeta)? {
            out.push(SpeedCurvePoint { zeta, speed });
        }
    }
    Ok(out)
}

/// Critical speed `(ζ**, v**)`; closed form for exponential jumps.
pub fn critical(law: &JumpLaw, lambda: f64, mu: f64) -> Result<CriticalSpeed> {
    check_rates(lambda, mu)?;
    if !(lambda > 0.0) {
        return Err(invalid("critical speed needs lambda > 0"));
    }
    if law.tail_exponent() == ExtReal::Finite(0.0) {
        return Err(Error::UnboundedSpeed);
    }
    if law.is_exponential() {
        let (sl, sm) = (lambda.sqrt(), mu.sqrt());
        return Ok(CriticalSpeed {
            zeta_star: sm / (sl + sm),
            v_star: (sl + sm) * (sl + sm),
            lambda,
            mu,
            at_tail_boundary: false,
        });
    }
    critical_numeric(law, lambda, mu)
}

/// Critical speed by direct minimization of `v(ζ)`, for any law.
pub fn critical_numeric(law: &JumpLaw, lambda: f64, mu: f64) -> Result<CriticalSpeed> {
    check_rates(lambda, mu)?;
    if !(lambda > 0.0) {
        return Err(invalid("critical speed needs lambda > 0"));
    }
    let alpha = law.tail_exponent();
    if alpha == ExtReal::Finite(0.0) {
        return Err(Error::UnboundedSpeed);
    }
    let curve = |z: f64| curve_value(law, lambda, mu, z).to_f64();
    let minimum = minimize_convex(&curve, alpha.to_f64(), law.laplace_finite_at_tail_exponent())?;
    let mut zeta = minimum.argmin;
    if !minimum.at_boundary {
        if let Some(z) = refine_stationary_point(law, lambda, mu, zeta) {
            zeta = z;
        }
    }
    Ok(CriticalSpeed {
        zeta_star: zeta,
        v_star: curve(zeta),
        lambda,
        mu,
        at_tail_boundary: minimum.at_boundary,
    })
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Minimum {
    pub argmin: f64,
    pub at_boundary: bool,
}

/// Minimizes a convex function on `(0, upper)` that blows up at `0+`.
///
/// Brackets geometrically from `min(upper, 1) / 2`; toward a finite `upper`
/// the bracket halves the remaining distance. When the function is still
/// decreasing at `upper` and `finite_at_upper` holds, the minimum is the
/// endpoint itself.
pub(crate) fn minimize_convex(f: &dyn Fn(f64) -> f64, upper: f64, finite_at_upper: bool) -> Result<Minimum> {
    const MAX_BRACKET_STEPS: usize = 400;
    let next_right = |b: f64| if upper.is_finite() { b + 0.5 * (upper - b) } else { 2.0 * b };
    let mut b = if upper.is_finite() { upper.min(1.0) / 2.0 } else { 0.5 };
    let mut fb = f(b);
    let mut a = 0.5 * b;
    let mut fa = f(a);
    let c;
    if fa < fb {
        let mut steps = 0;
        let mut cc;
        loop {
            cc = b;
            b = a;
            fb = fa;
            a = 0.5 * b;
            fa = f(a);
            steps += 1;
            if fa >= fb {
                break;
            }
            if steps > MAX_BRACKET_STEPS || a < f64::MIN_POSITIVE {
                return Err(Error::NonConvergence("speed curve keeps decreasing toward 0".into()));
            }
        }
        c = cc;
    } else {
        let mut cc = next_right(b);
        let mut fc = f(cc);
        let mut steps = 0;
        while fc < fb {
            if upper.is_finite() && upper - cc <= ZETA_TOLERANCE {
                if finite_at_upper && f(upper) <= fc {
                    return Ok(Minimum {
                        argmin: upper,
                        at_boundary: true,
                    });
                }
                break;
            }
            a = b;
            b = cc;
            fb = fc;
            cc = next_right(b);
            fc = f(cc);
            steps += 1;
            if steps > MAX_BRACKET_STEPS || !cc.is_finite() {
                return Err(Error::NonConvergence("speed curve has no interior minimum".into()));
            }
        }
        c = cc;
    }
    Ok(Minimum {
        argmin: golden_section(f, a, c, ZETA_TOLERANCE),
        at_boundary: false,
    })
}

fn golden_section(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a) > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Root of the stationarity condition near `guess`, by bisection on a small bracket.
fn refine_stationary_point(law: &JumpLaw, lambda: f64, mu: f64, guess: f64) -> Option<f64> {
    let g = |z: f64| stationarity(law, lambda, mu, z);
    let mut delta = 1e-8 * guess.max(1.0);
    let (mut lo, mut hi);
    loop {
        lo = guess - delta;
        hi = guess + delta;
        if lo <= 0.0 {
            return None;
        }
        let (glo, ghi) = (g(lo)?, g(hi)?);
        if glo >= 0.0 && ghi <= 0.0 {
            break;
        }
        delta *= 4.0;
        if delta > 1e-4 * guess.max(1.0) {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Inverse of `v(ζ)` on the decreasing branch `(0, ζ**]`.
pub fn zeta_of_v(law: &JumpLaw, lambda: f64, mu: f64, v: f64) -> Result<f64> {
    let crit = critical(law, lambda, mu)?;
    if !(v.is_finite()) || v < crit.v_star * (1.0 - 1e-12) {
        return Err(Error::BelowCritical {
            v,
            v_star: crit.v_star,
        });
    }
    if v <= crit.v_star {
        return Ok(crit.zeta_star);
    }
    if law.is_exponential() {
        let (l, w) = (lambda / mu, v / mu);
        let b = 1.0 + w - l;
        let disc = (b * b - 4.0 * w).max(0.0);
        // (b - √disc) / (2w), rationalized
        return Ok(2.0 / (b + disc.sqrt()));
    }
    let curve = |z: f64| curve_value(law, lambda, mu, z).to_f64();
    // v(ζ) ≥ μ/ζ, so v(lo) ≥ 2v > v
    let mut lo = (mu / (2.0 * v)).min(0.5 * crit.zeta_star);
    let mut hi = crit.zeta_star;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if curve(mid) > v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
