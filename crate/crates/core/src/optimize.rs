//! Budget trade-off between independent jumps and synchronization:
//! maximize `v**(λ, μ)` subject to `aλ + bμ = 1`.

use serde::Serialize;

use crate::dist::JumpLaw;
use crate::error::{invalid, Result};
use crate::speed::critical;

/// Grid size of the unimodality sweep.
pub const SWEEP_POINTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffResult {
    pub lambda_opt: f64,
    pub mu_opt: f64,
    pub v_opt: f64,
    pub a: f64,
    pub b: f64,
    pub warnings: Vec<String>,
}

/// `(λ, v**)` along the budget line at interior grid points.
pub fn sweep(law: &JumpLaw, a: f64, b: f64, points: usize) -> Result<Vec<(f64, f64)>> {
    check_budget(a, b)?;
    (1..=points)
        .map(|i| {
            let lambda = i as f64 / (points + 1) as f64 / a;
            Ok((lambda, objective(law, a, b, lambda)?))
        })
        .collect()
}

fn check_budget(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(invalid("budget weights a, b must be positive"));
    }
    Ok(())
}

fn objective(law: &JumpLaw, a: f64, b: f64, lambda: f64) -> Result<f64> {
    Ok(critical(law, lambda, (1.0 - a * lambda) / b)?.v_star)
}

pub fn optimize_tradeoff(law: &JumpLaw, a: f64, b: f64) -> Result<TradeoffResult> {
    check_budget(a, b)?;
    if law.is_exponential() {
        // maximize (√λ + √μ)² on the line: λ ∝ 1/a², μ ∝ 1/b²
        let lambda = 1.0 / (a + a * a / b);
        let mu = 1.0 / (b + b * b / a);
        let v = (lambda.sqrt() + mu.sqrt()).powi(2);
        return Ok(TradeoffResult {
            lambda_opt: lambda,
            mu_opt: mu,
            v_opt: v,
            a,
            b,
            warnings: Vec::new(),
        });
    }
    numeric_tradeoff(law, a, b)
}

/// Golden-section search on `λ ∈ (0, 1/a)`, with a sweep checking that the
/// objective has a single peak.
pub fn numeric_tradeoff(law: &JumpLaw, a: f64, b: f64) -> Result<TradeoffResult> {
    check_budget(a, b)?;
    let grid = sweep(law, a, b, SWEEP_POINTS)?;
    let mut warnings = Vec::new();
    let peak = grid
        .iter()
        .enumerate()
        .max_by(|x, y| x.1 .1.total_cmp(&y.1 .1))
        .map(|(i, _)| i)
        .expect("non-empty sweep");
    let rising = grid[..=peak].windows(2).all(|w| w[1].1 >= w[0].1 - 1e-6);
    let falling = grid[peak..].windows(2).all(|w| w[1].1 <= w[0].1 + 1e-6);
    if !(rising && falling) {
        warnings.push("v** is not unimodal along the budget line; the optimum may be local".to_string());
    }

    // bracket around the best grid point, then golden section
    let step = 1.0 / ((SWEEP_POINTS + 1) as f64 * a);
    let mut lo = (grid[peak].0 - step).max(0.0);
    let mut hi = (grid[peak].0 + step).min(1.0 / a);
    let f = |l: f64| objective(law, a, b, l);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while hi - lo > 1e-12 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d)?;
        }
    }
    let lambda = 0.5 * (lo + hi);
    Ok(TradeoffResult {
        lambda_opt: lambda,
        mu_opt: (1.0 - a * lambda) / b,
        v_opt: f(lambda)?,
        a,
        b,
        warnings,
    })
}
