//! Traveling waves for exponential jumps.
//!
//! With unit-mean exponential jumps a wave `f_x(t) = φ(x - vt)` solves the
//! planar system
//!
//! ```text
//! φ' = z
//! z' = -z + ((1 + λ - 2φ) / v) z + φ (1 - φ) / v
//! ```
//!
//! (rates normalized so that μ = 1). A wave is a trajectory from `(0, 0)` to
//! `(1, 0)` inside the strip. Near `φ = 0` the ratio `y = z / φ` settles on
//! the unstable slope `γ`; near `φ = 1` the ratio `w = z / (1 - φ)` settles
//! on the slow root `ζ1` of `vζ² - (1 + v - λ)ζ + 1 = 0` or blows up, in
//! which case the trajectory crosses `φ = 1` above the axis. Shooting is done
//! in those ratio variables with `ln φ` and `-ln(1 - φ)` as clocks, so both
//! fixed points sit at infinite parameter and the ratios stay bounded.

use serde::Serialize;

use crate::error::{invalid, Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-6;
/// Tail window `1 - φ ∈ [TAIL_LOW, TAIL_HIGH]` for exponent fits.
pub const TAIL_LOW: f64 = 1e-6;
pub const TAIL_HIGH: f64 = 1e-3;
pub const TAIL_MIN_SAMPLES: usize = 50;

/// Past this `-ln(1 - φ)` a bounded ratio counts as settled.
const SETTLE_DEPTH: f64 = 40.0;
/// Beyond this depth `1 - φ` is below f64 resolution near 1; samples stop.
const STORE_DEPTH: f64 = 33.0;
const BLOWUP_RATIO: f64 = 1e12;
const MAX_DEPTH: f64 = 2000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Classification {
    Proper,
    HitsOneAbove { z1: f64 },
    FellToAxis { phi_hit: f64 },
}

impl Classification {
    pub fn is_proper(&self) -> bool {
        matches!(self, Classification::Proper)
    }

    fn same_kind(&self, other: &Classification) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Classification::Proper => "Proper",
            Classification::HitsOneAbove { .. } => "HitsOneAbove",
            Classification::FellToAxis { .. } => "FellToAxis",
        }
    }
}

/// Solution of `vψ' = ψ (1 + λ - ψ)` through `(x0, φ0)`: the part of a
/// left-boundary wave behind the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeftExtension {
    pub x0: f64,
    pub phi0: f64,
    pub lambda: f64,
    pub v: f64,
}

impl LeftExtension {
    pub fn value_at(&self, x: f64) -> f64 {
        let k = 1.0 + self.lambda;
        let r = k / self.v;
        k / (1.0 + (k - self.phi0) / self.phi0 * (-r * (x - self.x0)).exp())
    }
}

/// A phase-plane trajectory with its x-parameterization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveSolution {
    pub phi: Vec<f64>,
    pub z: Vec<f64>,
    pub x: Vec<f64>,
    pub classification: Classification,
    pub v: f64,
    pub lambda: f64,
    pub mu: f64,
    /// Present for left-boundary waves, which continue left of `x[0]`.
    pub left_extension: Option<LeftExtension>,
}

impl WaveSolution {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// `φ(x)`: cubic Hermite between samples, exponential tails outside.
    pub fn value_at(&self, x: f64) -> f64 {
        let n = self.len();
        if x <= self.x[0] {
            if let Some(ext) = &self.left_extension {
                return ext.value_at(x);
            }
            let (p, z) = (self.phi[0], self.z[0]);
            return if p > 0.0 { p * ((z / p) * (x - self.x[0])).exp() } else { 0.0 };
        }
        if x >= self.x[n - 1] {
            return match self.classification {
                Classification::Proper => {
                    let u = 1.0 - self.phi[n - 1];
                    if u <= 0.0 {
                        1.0
                    } else {
                        1.0 - u * (-(self.z[n - 1] / u) * (x - self.x[n - 1])).exp()
                    }
                }
                _ => 1.0,
            };
        }
        let i = self.x.partition_point(|&xi| xi <= x).clamp(1, n - 1);
        let (x0, x1) = (self.x[i - 1], self.x[i]);
        let dx = x1 - x0;
        if dx <= 0.0 {
            return self.phi[i];
        }
        let t = (x - x0) / dx;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let p = h00 * self.phi[i - 1] + h10 * dx * self.z[i - 1] + h01 * self.phi[i] + h11 * dx * self.z[i];
        p.clamp(0.0, 1.0)
    }

    /// `z` as a function of `φ`: cubic Hermite between samples with slopes
    /// `dz/dφ` from the phase-plane system.
    pub fn z_at_phi(&self, phi: f64) -> Option<f64> {
        let n = self.len();
        if phi < self.phi[0] || phi > self.phi[n - 1] {
            return None;
        }
        let i = self.phi.partition_point(|&p| p <= phi).clamp(1, n - 1);
        let (p0, p1) = (self.phi[i - 1], self.phi[i]);
        let (z0, z1) = (self.z[i - 1], self.z[i]);
        let dp = p1 - p0;
        if dp <= 0.0 {
            return Some(z1);
        }
        let (l, v) = (self.lambda / self.mu, self.v / self.mu);
        let slope = |p: f64, z: f64| if z > 0.0 { phase_rhs(p, z, l, v).1 / z } else { 0.0 };
        let (m0, m1) = (slope(p0, z0), slope(p1, z1));
        let t = (phi - p0) / dp;
        let (t2, t3) = (t * t, t * t * t);
        Some(
            (2.0 * t3 - 3.0 * t2 + 1.0) * z0
                + (t3 - 2.0 * t2 + t) * dp * m0
                + (-2.0 * t3 + 3.0 * t2) * z1
                + (t3 - t2) * dp * m1,
        )
    }

    /// Shifts the x-parameterization by `dx`.
    pub fn shifted(mut self, dx: f64) -> Self {
        for x in &mut self.x {
            *x += dx;
        }
        if let Some(ext) = &mut self.left_extension {
            ext.x0 += dx;
        }
        self
    }
}

/// Right-hand side of the phase-plane system.
pub fn phase_rhs(phi: f64, z: f64, lambda: f64, v: f64) -> (f64, f64) {
    (z, -z + (1.0 + lambda - 2.0 * phi) / v * z + phi * (1.0 - phi) / v)
}

/// Unstable slope `dz/dφ` at the origin.
pub fn origin_eigen(lambda: f64, v: f64) -> Result<f64> {
    if !(lambda >= 0.0 && v > 1.0 + lambda && v.is_finite()) {
        return Err(invalid(format!("origin slope needs v > 1 + lambda, got v={v}, lambda={lambda}")));
    }
    let b = v - 1.0 - lambda;
    // (-b + √(b² + 4v)) / (2v), rationalized
    Ok(2.0 / (b + (b * b + 4.0 * v).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndpointEigen {
    pub zeta1: f64,
    pub zeta2: f64,
    /// No stable real eigendirections at `(1, 0)`: trajectories reach
    /// `φ = 1` with `z > 0`. On `v > 1 + λ` this is exactly `v < v*`.
    pub complex_pair: bool,
}

/// Roots of `vζ² - (1 + v - λ)ζ + 1 = 0`; `-ζ1`, `-ζ2` are the eigen-slopes
/// at `(1, 0)`.
pub fn endpoint_eigen(lambda: f64, v: f64) -> Result<EndpointEigen> {
    if !(v > 0.0 && v.is_finite() && lambda >= 0.0) {
        return Err(invalid("endpoint analysis needs v > 0 and lambda >= 0"));
    }
    let b = 1.0 + v - lambda;
    let disc = b * b - 4.0 * v;
    let scale = b * b + 4.0 * v;
    if disc < -1e-12 * scale || b <= 0.0 {
        let re = b / (2.0 * v);
        return Ok(EndpointEigen {
            zeta1: re,
            zeta2: re,
            complex_pair: true,
        });
    }
    let root = disc.max(0.0).sqrt();
    Ok(EndpointEigen {
        zeta1: 2.0 / (b + root),
        zeta2: (b + root) / (2.0 * v),
        complex_pair: false,
    })
}

/// `v* = (1 + √λ)²` for normalized rates.
pub fn v_star(lambda: f64) -> f64 {
    (1.0 + lambda.sqrt()).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Start {
    /// Leave the origin along the unstable slope.
    Origin,
    Point { phi0: f64, z0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub tolerance: f64,
    pub max_step: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            tolerance: 1e-10,
            max_step: 0.05,
        }
    }
}

/// Adaptive RK4 with step doubling on `(r, x)`, error measured on `r`
/// relative to `max(1, |r|)`. Calls `record` after every accepted step and
/// stops when `stop` returns true or `t` reaches `t_end`.
#[allow(clippy::too_many_arguments)]
fn integrate(
    rhs: impl Fn(f64, f64) -> f64,
    dx: impl Fn(f64) -> f64,
    mut t: f64,
    mut r: f64,
    mut x: f64,
    t_end: f64,
    control: StepControl,
    mut stop: impl FnMut(f64, f64) -> bool,
    mut record: impl FnMut(f64, f64, f64),
) -> Result<(f64, f64, f64)> {
    let f = |t: f64, r: f64| (rhs(t, r), dx(r));
    let rk4 = |t: f64, r: f64, h: f64| {
        let k1 = f(t, r);
        let k2 = f(t + 0.5 * h, r + 0.5 * h * k1.0);
        let k3 = f(t + 0.5 * h, r + 0.5 * h * k2.0);
        let k4 = f(t + h, r + h * k3.0);
        (
            r + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        )
    };
    let mut h = control.max_step.min(0.01);
    while t < t_end {
        let step = h.min(t_end - t);
        let (full, _) = rk4(t, r, step);
        let (half, dx1) = rk4(t, r, 0.5 * step);
        let (two, dx2) = rk4(t + 0.5 * step, half, 0.5 * step);
        let err = (two - full).abs() / 15.0 / two.abs().max(1.0);
        if !err.is_finite() || err > control.tolerance {
            h = 0.25 * step;
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::NonConvergence(format!("step size underflow at t={t}")));
            }
            continue;
        }
        t += step;
        r = two;
        x += dx1 + dx2;
        record(t, r, x);
        if stop(t, r) {
            break;
        }
        let grow = if err > 0.0 { 0.9 * (control.tolerance / err).powf(0.2) } else { 4.0 };
        h = (step * grow.clamp(0.2, 4.0)).min(control.max_step);
    }
    Ok((t, r, x))
}

/// Shoots a trajectory for normalized `(λ, v)`. `x = 0` at `φ = 1/2` for
/// origin starts and at the start point otherwise.
pub fn shoot(lambda: f64, v: f64, start: Start, epsilon: f64, control: StepControl) -> Result<WaveSolution> {
    if !(lambda >= 0.0 && v > 0.0 && v.is_finite()) {
        return Err(invalid("shooting needs lambda >= 0 and v > 0"));
    }
    let ends = endpoint_eigen(lambda, v)?;
    let (phi_start, z_start) = match start {
        Start::Origin => {
            if !(epsilon > 0.0 && epsilon < 0.5) {
                return Err(invalid("epsilon must lie in (0, 1/2)"));
            }
            (epsilon, origin_eigen(lambda, v)? * epsilon)
        }
        Start::Point { phi0, z0 } => {
            if !(phi0 > 0.0 && phi0 < 1.0 && z0 > 0.0) {
                return Err(invalid("interior start needs phi0 in (0, 1) and z0 > 0"));
            }
            (phi0, z0)
        }
    };

    let mut phi = vec![phi_start];
    let mut zs = vec![z_start];
    let mut xs = vec![0.0];
    let mut classification = None;
    let mut x = 0.0;
    let mut x_half = None;

    // left part in σ = ln φ with y = z / φ
    let (mut phi_now, mut z_now) = (phi_start, z_start);
    if phi_start < 0.5 {
        let left = |sigma: f64, y: f64| {
            let p = sigma.exp();
            -1.0 + (1.0 + lambda - 2.0 * p) / v + (1.0 - p) / (v * y) - y
        };
        let mut fell = None;
        let (sigma, y, x_end) = integrate(
            left,
            |y| 1.0 / y,
            phi_start.ln(),
            z_start / phi_start,
            0.0,
            0.5f64.ln(),
            control,
            |sigma, y| {
                if y <= 0.0 {
                    fell = Some(sigma.exp());
                    true
                } else {
                    false
                }
            },
            |sigma, y, x| {
                let p = sigma.exp();
                phi.push(p);
                zs.push(y * p);
                xs.push(x);
            },
        )?;
        x = x_end;
        phi_now = sigma.exp();
        z_now = y * phi_now;
        if let Some(p) = fell {
            classification = Some(Classification::FellToAxis { phi_hit: p });
        } else {
            x_half = Some(x);
        }
    }

    // right part in s = -ln(1 - φ) with w = z / (1 - φ)
    if classification.is_none() {
        let right = |s: f64, w: f64| {
            let p = -(-s).exp_m1();
            w - 1.0 + (1.0 + lambda - 2.0 * p) / v + p / (v * w)
        };
        let s0 = -(-phi_now).ln_1p();
        let w0 = z_now / (1.0 - phi_now);
        let mut outcome = None;
        let (s_end, w_end, x_end) = integrate(
            right,
            |w| 1.0 / w,
            s0,
            w0,
            x,
            MAX_DEPTH,
            control,
            |s, w| {
                if w <= 0.0 {
                    outcome = Some(Classification::FellToAxis {
                        phi_hit: -(-s).exp_m1(),
                    });
                } else if w > BLOWUP_RATIO {
                    outcome = Some(Classification::HitsOneAbove { z1: (w.ln() - s).exp() });
                } else if s >= SETTLE_DEPTH && !ends.complex_pair && w <= ends.zeta2 {
                    outcome = Some(Classification::Proper);
                }
                outcome.is_some()
            },
            |s, w, x| {
                if s <= STORE_DEPTH {
                    let u = (-s).exp();
                    phi.push(1.0 - u);
                    zs.push(w * u);
                    xs.push(x);
                }
            },
        )?;
        match outcome {
            Some(c @ Classification::HitsOneAbove { z1 }) => {
                // remaining distance to φ = 1 is ∫ e^{-s}/z1 ds = 1/w
                phi.push(1.0);
                zs.push(z1);
                xs.push(x_end + 1.0 / w_end);
                classification = Some(c);
            }
            Some(c) => classification = Some(c),
            None => {
                return Err(Error::NonConvergence(format!(
                    "no classification by depth {s_end} (w={w_end})"
                )))
            }
        }
    }

    let shift = match (start, x_half) {
        (Start::Origin, Some(xh)) => -xh,
        _ => 0.0,
    };
    for xi in &mut xs {
        *xi += shift;
    }
    Ok(WaveSolution {
        phi,
        z: zs,
        x: xs,
        classification: classification.expect("classified"),
        v,
        lambda,
        mu: 1.0,
        left_extension: None,
    })
}

/// Shoots at `epsilon` and `epsilon / 10`; the classifications must agree.
fn shoot_checked(lambda: f64, v: f64, start: Start) -> Result<WaveSolution> {
    let control = StepControl::default();
    let wave = shoot(lambda, v, start, DEFAULT_EPSILON, control)?;
    if start == Start::Origin {
        let check = shoot(lambda, v, start, DEFAULT_EPSILON / 10.0, control)?;
        if !wave.classification.same_kind(&check.classification) {
            return Err(Error::NonConvergence(format!(
                "launch offset changes the classification at v={v}: {} vs {}",
                wave.classification.name(),
                check.classification.name()
            )));
        }
    }
    Ok(wave)
}

fn normalize(lambda: f64, mu: f64, v: f64) -> Result<(f64, f64)> {
    if !(lambda >= 0.0 && lambda.is_finite() && mu > 0.0 && mu.is_finite() && v > 0.0 && v.is_finite()) {
        return Err(invalid("need lambda >= 0, mu > 0, v > 0"));
    }
    Ok((lambda / mu, v / mu))
}

fn denormalize(mut wave: WaveSolution, lambda: f64, mu: f64, v: f64) -> WaveSolution {
    wave.lambda = lambda;
    wave.mu = mu;
    wave.v = v;
    wave
}

/// The checked shot from the origin at speed `v > λ + μ`, whatever its
/// classification.
pub fn shoot_original(lambda: f64, mu: f64, v: f64) -> Result<WaveSolution> {
    let (l, w) = normalize(lambda, mu, v)?;
    Ok(denormalize(shoot_checked(l, w, Start::Origin)?, lambda, mu, v))
}

/// Wave of the unbounded system from the origin, if one exists at speed `v`.
pub fn tws_original(lambda: f64, mu: f64, v: f64) -> Result<Option<WaveSolution>> {
    if !(lambda > 0.0) {
        return Err(invalid("tws_original needs lambda > 0"));
    }
    let (l, w) = normalize(lambda, mu, v)?;
    if w <= 1.0 + l {
        return Ok(None);
    }
    let wave = shoot_checked(l, w, Start::Origin)?;
    Ok(wave.classification.is_proper().then(|| denormalize(wave, lambda, mu, v)))
}

fn left_boundary_shot(l: f64, w: f64, phi0: f64) -> Result<WaveSolution> {
    let z0 = phi0 * (1.0 - phi0 + l) / w;
    shoot(l, w, Start::Point { phi0, z0 }, DEFAULT_EPSILON, StepControl::default())
}

fn check_above_critical(l: f64, w: f64, mu: f64) -> Result<()> {
    let vs = v_star(l);
    if w <= vs {
        return Err(Error::BelowCritical {
            v: w * mu,
            v_star: vs * mu,
        });
    }
    Ok(())
}

/// Wave of the system with a left boundary moving at speed `v`, passing
/// through `φ0` at the boundary (`x = 0`).
pub fn tws_left_boundary(lambda: f64, mu: f64, v: f64, phi0: f64) -> Result<WaveSolution> {
    let (l, w) = normalize(lambda, mu, v)?;
    check_above_critical(l, w, mu)?;
    if !(phi0 > 0.0 && phi0 < 1.0) {
        return Err(invalid("phi0 must lie in (0, 1)"));
    }
    let mut wave = left_boundary_shot(l, w, phi0)?;
    if !wave.classification.is_proper() {
        return Err(Error::Phi0TooLarge { phi0 });
    }
    wave.left_extension = Some(LeftExtension {
        x0: 0.0,
        phi0,
        lambda: l,
        v: w,
    });
    Ok(denormalize(wave, lambda, mu, v))
}

/// Largest `φ0` whose left-boundary shot is still proper, by bisection.
pub fn phi0_max(lambda: f64, mu: f64, v: f64) -> Result<f64> {
    let (l, w) = normalize(lambda, mu, v)?;
    check_above_critical(l, w, mu)?;
    let proper = |p: f64| -> Result<bool> { Ok(left_boundary_shot(l, w, p)?.classification.is_proper()) };
    let (mut lo, mut hi) = (1e-9, 1.0 - 1e-9);
    if !proper(lo)? {
        return Ok(0.0);
    }
    if proper(hi)? {
        return Ok(1.0);
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if proper(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Wave of the system with a right boundary moving at `v < v*`; `x = 0` at
/// the boundary, where `φ` reaches 1 with slope `z1 > 0`.
pub fn tws_right_boundary(lambda: f64, mu: f64, v: f64) -> Result<WaveSolution> {
    let (l, w) = normalize(lambda, mu, v)?;
    let vs = v_star(l);
    if w >= vs {
        return Err(invalid(format!("right-boundary waves need v < v* = {}", vs * mu)));
    }
    let wave = shoot_checked(l, w, Start::Origin)?;
    let Classification::HitsOneAbove { .. } = wave.classification else {
        return Err(Error::NonConvergence(format!(
            "expected the origin shot to reach phi = 1 above the axis, got {}",
            wave.classification.name()
        )));
    };
    let end = *wave.x.last().expect("non-empty");
    Ok(denormalize(wave.shifted(-end), lambda, mu, v))
}

/// `ψ(x) = 1 / (1 + exp(-(x + c) / v))`, the wave without independent jumps,
/// sampled on `[-c - 40v, -c + 40v]`.
pub fn logistic_tws(v: f64, c: f64) -> Result<WaveSolution> {
    if !(v > 0.0 && v.is_finite() && c.is_finite()) {
        return Err(invalid("logistic wave needs v > 0 and finite c"));
    }
    let n = 4001;
    let span = 40.0 * v;
    let x: Vec<f64> = (0..n).map(|i| -c - span + 2.0 * span * i as f64 / (n - 1) as f64).collect();
    let phi: Vec<f64> = x.iter().map(|&xi| logistic(v, c, xi)).collect();
    let z = phi.iter().map(|p| p * (1.0 - p) / v).collect();
    Ok(WaveSolution {
        phi,
        z,
        x,
        classification: Classification::Proper,
        v,
        lambda: 0.0,
        mu: 1.0,
        left_extension: None,
    })
}

pub fn logistic(v: f64, c: f64, x: f64) -> f64 {
    1.0 / (1.0 + (-(x + c) / v).exp())
}

/// Least-squares slope of `-ln(1 - φ)` against `x` over the tail window.
pub fn tail_exponent_of_shape(wave: &WaveSolution) -> Result<f64> {
    if !wave.classification.is_proper() {
        return Err(invalid("tail exponents need a proper wave"));
    }
    let pts: Vec<(f64, f64)> = wave
        .phi
        .iter()
        .zip(&wave.x)
        .filter(|(p, _)| (TAIL_LOW..=TAIL_HIGH).contains(&(1.0 - *p)))
        .map(|(p, x)| (*x, -(1.0 - p).ln()))
        .collect();
    if pts.len() < TAIL_MIN_SAMPLES {
        return Err(Error::WindowTooShort {
            samples: pts.len(),
            required: TAIL_MIN_SAMPLES,
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}
