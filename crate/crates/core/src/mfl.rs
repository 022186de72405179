//! Mean-field limit dynamics on a uniform grid.
//!
//! The state is a distribution function `f` sampled at nodes `x_k`, read as
//! piecewise linear between nodes: each cell `(x_{k-1}, x_k]` carries mass
//! `f_k - f_{k-1}` spread uniformly, and mass left of the window sits at
//! `-inf`, where jumps cannot bring it back. With that reading the jump term
//!
//! ```text
//! C(x) = ∫_{(-inf, x]} (1 - J(x - y)) df(y)
//! ```
//!
//! is exact at the nodes: cell `i` contributes `(G((k-i+1)h) - G((k-i)h)) / h`
//! times its mass, with `G` the integrated tail of the jump law. For the
//! exponential law those weights are geometric and `C` is a one-pass
//! recursion.

use serde::Serialize;

use crate::boundary::BoundarySpec;
use crate::dist::JumpLaw;
use crate::error::{invalid, Error, Result};

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_MASS_TOLERANCE: f64 = 1e-6;
pub const PROJECTION_TOLERANCE: f64 = 1e-9;
const MONOTONE_TOLERANCE: f64 = 1e-12;

/// A distribution function on the nodes `origin + offset + k h`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCdf {
    pub origin: f64,
    pub h: f64,
    pub values: Vec<f64>,
    pub offset: f64,
    pub time: f64,
}

impl GridCdf {
    pub fn new(origin: f64, h: f64, values: Vec<f64>) -> Result<Self> {
        let f = GridCdf {
            origin,
            h,
            values,
            offset: 0.0,
            time: 0.0,
        };
        f.check_shape()?;
        Ok(f)
    }

    /// Samples `f` on `left, left + h, ...` up to `right` inclusive.
    pub fn from_fn(left: f64, right: f64, h: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        if !(h > 0.0 && left.is_finite() && right > left) {
            return Err(invalid("grid needs h > 0 and left < right"));
        }
        let n = ((right - left) / h + 1e-9).floor() as usize + 1;
        GridCdf::new(left, h, (0..n).map(|k| f(left + k as f64 * h)).collect())
    }

    /// Unit step at the node nearest 0.
    pub fn dirac(left: f64, right: f64, h: f64) -> Result<Self> {
        if !(left < 0.0 && right > 0.0) {
            return Err(invalid("dirac grid must straddle 0"));
        }
        let zero = (-left / h).round() as usize;
        let mut f = GridCdf::from_fn(left, right, h, |_| 0.0)?;
        for v in &mut f.values[zero..] {
            *v = 1.0;
        }
        Ok(f)
    }

    fn check_shape(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite() && self.origin.is_finite()) {
            return Err(invalid("grid needs finite origin and h > 0"));
        }
        if self.values.len() < 2 {
            return Err(invalid("grid needs at least two nodes"));
        }
        Ok(())
    }

    /// Checks range and monotonicity.
    pub fn validate(&self) -> Result<()> {
        self.check_shape()?;
        if let Some(v) = self.values.iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
            return Err(Error::InvalidState(format!("value {v} outside [0, 1]")));
        }
        if let Some(k) = (1..self.len()).find(|&k| self.values[k] < self.values[k - 1] - MONOTONE_TOLERANCE) {
            return Err(Error::InvalidState(format!("values decrease at node {k}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Absolute position of node 0.
    pub fn left_edge(&self) -> f64 {
        self.origin + self.offset
    }

    pub fn right_edge(&self) -> f64 {
        self.x(self.len() - 1)
    }

    pub fn x(&self, k: usize) -> f64 {
        self.left_edge() + k as f64 * self.h
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.x(k)).collect()
    }

    /// Linear interpolation; constant beyond the window.
    pub fn value_at(&self, x: f64) -> f64 {
        let u = (x - self.left_edge()) / self.h;
        if u <= 0.0 {
            return self.values[0];
        }
        let k = u.floor() as usize;
        if k >= self.len() - 1 {
            return self.values[self.len() - 1];
        }
        let t = u - k as f64;
        self.values[k] + t * (self.values[k + 1] - self.values[k])
    }

    /// Largest pointwise difference to `g` at this grid's nodes.
    pub fn sup_distance(&self, g: impl Fn(f64) -> f64) -> f64 {
        (0..self.len())
            .map(|k| (self.values[k] - g(self.x(k))).abs())
            .fold(0.0, f64::max)
    }
}

/// `inf{x : f(x) >= nu}` with linear interpolation between nodes.
///
/// Below the window the left edge is returned, above it the right edge.
pub fn quantile(f: &GridCdf, nu: f64) -> f64 {
    match f.values.iter().position(|&v| v >= nu) {
        Some(0) => f.left_edge(),
        Some(k) => {
            let (lo, hi) = (f.values[k - 1], f.values[k]);
            f.x(k - 1) + f.h * (nu - lo) / (hi - lo)
        }
        None => f.right_edge(),
    }
}

/// `nu + (1 - nu) f`: the state in which a fraction `nu` of the mass sits
/// frozen at `-inf`. Integrated with synchronization rate `mu (1 - nu)`
/// (see [`Mfl::frozen`]) it bounds the unfrozen dynamics from below.
pub fn freeze_transform(f: &GridCdf, nu: f64) -> Result<GridCdf> {
    if !(0.0..1.0).contains(&nu) {
        return Err(invalid("nu must lie in [0, 1)"));
    }
    let mut g = f.clone();
    for v in &mut g.values {
        *v = nu + (1.0 - nu) * *v;
    }
    Ok(g)
}

#[derive(Debug, Clone)]
enum Kernel {
    /// `K_m = weight * decay^m`.
    Exponential { decay: f64, weight: f64 },
    /// Cell weights `K_m` up to the support width.
    Table(Vec<f64>),
}

impl Kernel {
    fn new(law: &JumpLaw, h: f64) -> Self {
        if law.is_exponential() {
            let decay = (-h).exp();
            return Kernel::Exponential {
                decay,
                weight: -(-h).exp_m1() / h,
            };
        }
        let width = law.support_end().expect("non-exponential laws have bounded support");
        let m_max = (width / h).ceil() as usize + 1;
        Kernel::Table(
            (0..=m_max)
                .map(|m| (law.integrated_tail((m + 1) as f64 * h) - law.integrated_tail(m as f64 * h)) / h)
                .collect(),
        )
    }
}

/// The right-hand side for one (law, rates, boundary, grid spacing).
#[derive(Debug, Clone)]
struct Dynamics {
    law: JumpLaw,
    lambda: f64,
    mu: f64,
    boundary: BoundarySpec,
    h: f64,
    kernel: Kernel,
}

impl Dynamics {
    fn new(law: &JumpLaw, lambda: f64, mu: f64, boundary: BoundarySpec, h: f64) -> Self {
        Dynamics {
            law: law.clone(),
            lambda,
            mu,
            boundary,
            h,
            kernel: Kernel::new(law, h),
        }
    }

    /// Writes `df/dt` at time `t` for nodes starting at absolute `x0`.
    fn eval(&self, f: &[f64], x0: f64, t: f64, out: &mut [f64]) {
        let n = f.len();
        // nodes below `behind` sit at or behind the left boundary
        let behind = match self.boundary.left_at(t) {
            Some(a) if a >= x0 => {
                let j = (((a - x0) / self.h).floor() as usize + 1).min(n);
                if j < n {
                    self.jump_term_after_left(f, x0, a, j, out);
                }
                j
            }
            _ => {
                self.jump_term(f, out);
                0
            }
        };
        for k in 0..n {
            let jump = if k < behind { f[k] } else { out[k] };
            out[k] = -self.lambda * jump - self.mu * f[k] * (1.0 - f[k]);
        }
        if let Some(b) = self.boundary.right_at(t) {
            let u = (b - x0) / self.h - 1e-12;
            let from = if u <= 0.0 { 0 } else { (u.ceil() as usize).min(n) };
            for v in &mut out[from..] {
                *v = 0.0;
            }
        }
    }

    /// `out[k] = C(x_k)` for the system without a left boundary.
    fn jump_term(&self, f: &[f64], out: &mut [f64]) {
        match &self.kernel {
            Kernel::Exponential { decay, weight } => {
                let mut acc = 0.0;
                out[0] = 0.0;
                for k in 1..f.len() {
                    acc = decay * acc + weight * (f[k] - f[k - 1]);
                    out[k] = acc;
                }
            }
            Kernel::Table(cells) => {
                let m_max = cells.len() - 1;
                out[0] = 0.0;
                for k in 1..f.len() {
                    let lo = k.saturating_sub(m_max).max(1);
                    out[k] = (lo..=k).map(|i| cells[k - i] * (f[i] - f[i - 1])).sum();
                }
            }
        }
    }

    /// `out[k] = C(x_k)` for `k >= j`, where `x_j` is the first node past the
    /// left boundary `a`: the mass `f(a)` acts as an atom at `a`.
    fn jump_term_after_left(&self, f: &[f64], x0: f64, a: f64, j: usize, out: &mut [f64]) {
        let h = self.h;
        let xj = x0 + j as f64 * h;
        let d = xj - a;
        let f_a = f[j - 1] + (1.0 - d / h) * (f[j] - f[j - 1]);
        let partial = f[j] - f_a;
        let atom_width = d < 1e-12 * h;
        match &self.kernel {
            Kernel::Exponential { decay, weight } => {
                let spread = if atom_width { 1.0 } else { -(-d).exp_m1() / d };
                let mut acc = f_a * (-d).exp() + partial * spread;
                out[j] = acc;
                for k in j + 1..f.len() {
                    acc = decay * acc + weight * (f[k] - f[k - 1]);
                    out[k] = acc;
                }
            }
            Kernel::Table(cells) => {
                let m_max = cells.len() - 1;
                let law = &self.law;
                for k in j..f.len() {
                    let xk = x0 + k as f64 * h;
                    let mut acc = f_a * law.tail(xk - a);
                    acc += if atom_width {
                        partial * law.tail(xk - xj)
                    } else {
                        partial * (law.integrated_tail(xk - a) - law.integrated_tail(xk - xj)) / d
                    };
                    let lo = k.saturating_sub(m_max).max(j + 1);
                    for i in lo..=k {
                        acc += cells[k - i] * (f[i] - f[i - 1]);
                    }
                    out[k] = acc;
                }
            }
        }
    }
}

/// `df/dt` at the nodes of `f` at time `f.time`.
pub fn rhs(f: &GridCdf, law: &JumpLaw, lambda: f64, mu: f64, boundary: &BoundarySpec) -> Result<Vec<f64>> {
    validate_rates(lambda, mu)?;
    boundary.validate()?;
    f.validate()?;
    let mut out = vec![0.0; f.len()];
    Dynamics::new(law, lambda, mu, *boundary, f.h).eval(&f.values, f.left_edge(), f.time, &mut out);
    Ok(out)
}

fn validate_rates(lambda: f64, mu: f64) -> Result<()> {
    if !(lambda >= 0.0 && mu >= 0.0 && lambda.is_finite() && mu.is_finite()) {
        return Err(invalid("rates must be finite and >= 0"));
    }
    Ok(())
}

/// Window shifting: once the `nu`-quantile passes `trigger` of the window
/// width, drop `shift` of the width on the left and extend on the right
/// with the last value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Recenter {
    Off,
    Quantile { nu: f64, trigger: f64, shift: f64 },
}

impl Default for Recenter {
    fn default() -> Self {
        Recenter::Quantile {
            nu: 0.99,
            trigger: 0.8,
            shift: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MflFrame {
    pub time: f64,
    /// One entry per tracked level, in the trajectory's `nus` order.
    pub quantiles: Vec<f64>,
    #[serde(skip)]
    pub snapshot: Option<GridCdf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MflTrajectory {
    pub law: JumpLaw,
    pub lambda: f64,
    pub mu: f64,
    pub boundary: BoundarySpec,
    pub nus: Vec<f64>,
    pub frames: Vec<MflFrame>,
}

impl MflTrajectory {
    pub fn last(&self) -> &MflFrame {
        self.frames.last().expect("trajectories hold the initial frame")
    }

    pub fn end_time(&self) -> f64 {
        self.last().time
    }

    /// The frame closest to `t`.
    pub fn frame_near(&self, t: f64) -> &MflFrame {
        let i = self.frames.partition_point(|fr| fr.time < t);
        match i {
            0 => &self.frames[0],
            i if i == self.frames.len() => self.last(),
            i if t - self.frames[i - 1].time < self.frames[i].time - t => &self.frames[i - 1],
            i => &self.frames[i],
        }
    }

    /// Tracked quantile at time `t`, linear in time between frames.
    pub fn quantile_at(&self, nu: f64, t: f64) -> Result<f64> {
        let idx = self
            .nus
            .iter()
            .position(|&m| (m - nu).abs() < 1e-12)
            .ok_or_else(|| invalid(format!("quantile level {nu} was not tracked")))?;
        let (t0, t1) = (self.frames[0].time, self.end_time());
        let slack = 1e-9 * (1.0 + t1.abs());
        if t < t0 - slack || t > t1 + slack {
            return Err(invalid(format!("time {t} outside trajectory [{t0}, {t1}]")));
        }
        let i = self.frames.partition_point(|fr| fr.time < t).clamp(1, self.frames.len() - 1);
        let (a, b) = (&self.frames[i - 1], &self.frames[i]);
        if b.time <= a.time {
            return Ok(b.quantiles[idx]);
        }
        let s = ((t - a.time) / (b.time - a.time)).clamp(0.0, 1.0);
        Ok(a.quantiles[idx] + s * (b.quantiles[idx] - a.quantiles[idx]))
    }
}

/// `(q(t2) - q(t1)) / (t2 - t1)` for the tracked `nu`-quantile.
pub fn avg_speed(traj: &MflTrajectory, nu: f64, window: (f64, f64)) -> Result<f64> {
    let (t1, t2) = window;
    if !(t2 > t1) {
        return Err(invalid("window must satisfy t1 < t2"));
    }
    Ok((traj.quantile_at(nu, t2)? - traj.quantile_at(nu, t1)?) / (t2 - t1))
}

/// Integrator configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Mfl {
    pub law: JumpLaw,
    pub lambda: f64,
    pub mu: f64,
    pub boundary: BoundarySpec,
    pub dt: f64,
    pub recenter: Recenter,
    /// Frames are recorded every `record_interval` time units and at the end.
    pub record_interval: f64,
    pub nus: Vec<f64>,
    pub snapshots: bool,
    pub mass_tolerance: f64,
}

impl Mfl {
    pub fn new(law: JumpLaw, lambda: f64, mu: f64) -> Self {
        Mfl {
            law,
            lambda,
            mu,
            boundary: BoundarySpec::None,
            dt: DEFAULT_DT,
            recenter: Recenter::default(),
            record_interval: 0.1,
            nus: vec![0.5],
            snapshots: false,
            mass_tolerance: DEFAULT_MASS_TOLERANCE,
        }
    }

    pub fn boundary(mut self, boundary: BoundarySpec) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn recenter(mut self, recenter: Recenter) -> Self {
        self.recenter = recenter;
        self
    }

    pub fn record_every(mut self, interval: f64) -> Self {
        self.record_interval = interval;
        self
    }

    pub fn track(mut self, nus: &[f64]) -> Self {
        self.nus = nus.to_vec();
        self
    }

    pub fn snapshots(mut self, on: bool) -> Self {
        self.snapshots = on;
        self
    }

    pub fn mass_tolerance(mut self, tolerance: f64) -> Self {
        self.mass_tolerance = tolerance;
        self
    }

    /// The same system with a fraction `nu` of the population frozen: the
    /// live part synchronizes at rate `mu (1 - nu)`. Map its states through
    /// [`freeze_transform`] to compare with the unfrozen dynamics.
    pub fn frozen(mut self, nu: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&nu) {
            return Err(invalid("nu must lie in [0, 1)"));
        }
        self.mu *= 1.0 - nu;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        validate_rates(self.lambda, self.mu)?;
        self.boundary.validate()?;
        if !(self.dt > 0.0 && self.dt * (self.lambda + self.mu) < 0.5) {
            return Err(invalid(format!(
                "dt must be positive with dt (lambda + mu) < 0.5, got dt={}",
                self.dt
            )));
        }
        if !(self.record_interval > 0.0) {
            return Err(invalid("record interval must be positive"));
        }
        if self.nus.iter().any(|nu| !(*nu > 0.0 && *nu < 1.0)) {
            return Err(invalid("tracked quantile levels must lie in (0, 1)"));
        }
        if let Recenter::Quantile { nu, trigger, shift } = self.recenter {
            if !(nu > 0.0 && nu < 1.0 && trigger > 0.0 && trigger < 1.0 && shift > 0.0 && shift < 1.0) {
                return Err(invalid("recentering parameters must lie in (0, 1)"));
            }
        }
        Ok(())
    }

    /// Integrates from `f0` (at time `f0.time`) for `duration` time units
    /// with classical RK4.
    pub fn integrate(&self, f0: &GridCdf, duration: f64) -> Result<MflTrajectory> {
        self.validate()?;
        f0.validate()?;
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(invalid("integration time must be finite and >= 0"));
        }
        let t0 = f0.time;
        if let Some(b) = self.boundary.right_at(t0) {
            if (0..f0.len()).any(|k| f0.x(k) >= b && f0.values[k] < 1.0 - MONOTONE_TOLERANCE) {
                return Err(Error::InvalidState("right-boundary state must equal 1 at and beyond B".into()));
            }
        }

        let steps = ((duration / self.dt) - 1e-9).ceil().max(0.0) as usize;
        let dt = if steps == 0 { 0.0 } else { duration / steps as f64 };
        let record_steps = if steps == 0 {
            1
        } else {
            ((self.record_interval / dt).round() as usize).max(1)
        };
        let dynamics = Dynamics::new(&self.law, self.lambda, self.mu, self.boundary, f0.h);

        let mut f = f0.clone();
        let mut frames = vec![self.frame(&f)];
        self.check_mass(&f)?;
        let n = f.len();
        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut stage = vec![0.0; n];

        for s in 1..=steps {
            let t = t0 + (s - 1) as f64 * dt;
            let x0 = f.left_edge();
            let y = &f.values;
            dynamics.eval(y, x0, t, &mut k1);
            for i in 0..n {
                stage[i] = y[i] + 0.5 * dt * k1[i];
            }
            dynamics.eval(&stage, x0, t + 0.5 * dt, &mut k2);
            for i in 0..n {
                stage[i] = y[i] + 0.5 * dt * k2[i];
            }
            dynamics.eval(&stage, x0, t + 0.5 * dt, &mut k3);
            for i in 0..n {
                stage[i] = y[i] + dt * k3[i];
            }
            dynamics.eval(&stage, x0, t + dt, &mut k4);
            for i in 0..n {
                f.values[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            f.time = t0 + s as f64 * dt;

            let change = project(&mut f.values);
            if change > PROJECTION_TOLERANCE {
                return Err(Error::StabilityViolation { time: f.time, change });
            }
            self.check_mass(&f)?;
            self.maybe_recenter(&mut f);
            if s % record_steps == 0 || s == steps {
                frames.push(self.frame(&f));
            }
        }

        Ok(MflTrajectory {
            law: self.law.clone(),
            lambda: self.lambda,
            mu: self.mu,
            boundary: self.boundary,
            nus: self.nus.clone(),
            frames,
        })
    }

    /// The benchmark trajectory: integrates from the unit step at 0 on the
    /// window `[left, right]`.
    pub fn bmfl(&self, left: f64, right: f64, h: f64, t_end: f64) -> Result<MflTrajectory> {
        self.integrate(&GridCdf::dirac(left, right, h)?, t_end)
    }

    fn frame(&self, f: &GridCdf) -> MflFrame {
        MflFrame {
            time: f.time,
            quantiles: self.nus.iter().map(|&nu| quantile(f, nu)).collect(),
            snapshot: self.snapshots.then(|| f.clone()),
        }
    }

    fn check_mass(&self, f: &GridCdf) -> Result<()> {
        let edge = f.values[f.len() - 1];
        if edge < 1.0 - self.mass_tolerance {
            return Err(Error::MassLeak {
                time: f.time,
                edge_value: edge,
                tolerance: self.mass_tolerance,
            });
        }
        Ok(())
    }

    fn maybe_recenter(&self, f: &mut GridCdf) {
        let Recenter::Quantile { nu, trigger, shift } = self.recenter else {
            return;
        };
        let width = f.right_edge() - f.left_edge();
        if quantile(f, nu) - f.left_edge() <= trigger * width {
            return;
        }
        let cells = ((shift * f.len() as f64).floor() as usize).clamp(1, f.len() - 1);
        let last = f.values[f.len() - 1];
        f.values.drain(..cells);
        f.values.extend(std::iter::repeat_n(last, cells));
        f.offset += cells as f64 * f.h;
    }
}

/// Clamps to `[0, 1]` and applies the running maximum; returns the largest
/// change made.
fn project(values: &mut [f64]) -> f64 {
    let mut change = 0.0_f64;
    let mut running = 0.0_f64;
    for v in values.iter_mut() {
        let target = v.clamp(0.0, 1.0).max(running);
        change = change.max((target - *v).abs());
        *v = target;
        running = target;
    }
    change
}

/// Benchmark trajectory with default settings, tracking the median.
pub fn bmfl(law: &JumpLaw, lambda: f64, mu: f64, t_end: f64, dt: f64, grid: (f64, f64, f64)) -> Result<MflTrajectory> {
    let (left, right, h) = grid;
    Mfl::new(law.clone(), lambda, mu).dt(dt).bmfl(left, right, h, t_end)
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EXP: JumpLaw = JumpLaw::ExponentialMeanOne;

    fn grid(f: impl Fn(f64) -> f64) -> GridCdf {
        GridCdf::from_fn(-10.0, 20.0, 0.05, f).unwrap()
    }

    fn smooth(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    /// Direct quadrature of the jump term for a smooth `f`, as an oracle.
    fn jump_term_oracle(law: &JumpLaw, f: impl Fn(f64) -> f64, x: f64, left: f64) -> f64 {
        let n = 20_000;
        let dy = (x - left) / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let y = left + (i as f64 + 0.5) * dy;
            let density = (f(y + 0.5 * dy) - f(y - 0.5 * dy)) / dy;
            acc += law.tail(x - y) * density * dy;
        }
        acc
    }

    #[test]
    fn fully_advanced_state_is_stationary() {
        let f = grid(|_| 1.0);
        for law in [EXP, JumpLaw::UniformZeroTwo, JumpLaw::DeterministicOne] {
            let r = rhs(&f, &law, 1.3, 0.7, &BoundarySpec::None).unwrap();
            assert!(r.iter().all(|&v| v == 0.0));
        }
        let traj = Mfl::new(EXP, 1.0, 1.0).integrate(&f, 1.0).unwrap();
        assert!(traj.last().quantiles.iter().all(|q| (*q - f.left_edge()).abs() < 1e-12));
    }

    #[test]
    fn step_state_rhs() {
        let h = 0.01;
        let f = GridCdf::dirac(-2.0, 10.0, h).unwrap();
        let r = rhs(&f, &EXP, 1.0, 1.0, &BoundarySpec::None).unwrap();
        for k in 0..f.len() {
            let x = f.x(k);
            if x > 0.5 * h {
                // exact cell average of e^{-(x - y)} over the cell (-h, 0]
                let cell = (-x).exp() * (1.0 - (-h).exp()) / h;
                assert!((r[k] + cell).abs() < 1e-12, "x={x}");
                assert!((r[k] + (-x).exp()).abs() < h * (-x).exp());
            } else if x < -0.5 * h {
                assert_eq!(r[k], 0.0);
            }
        }
    }

    #[test]
    fn logistic_form_without_jumps() {
        let f = grid(smooth);
        let r = rhs(&f, &JumpLaw::UniformZeroTwo, 0.0, 0.8, &BoundarySpec::None).unwrap();
        for (k, v) in r.iter().enumerate() {
            let fk = f.values[k];
            assert!((v + 0.8 * fk * (1.0 - fk)).abs() < 1e-15);
        }
    }

    #[test]
    fn jump_term_matches_quadrature() {
        for law in [EXP, JumpLaw::UniformZeroTwo] {
            let f = grid(smooth);
            let r = rhs(&f, &law, 1.0, 0.0, &BoundarySpec::None).unwrap();
            for x in [-3.0, 0.0, 1.3, 4.0] {
                let k = ((x - f.left_edge()) / f.h).round() as usize;
                let oracle = jump_term_oracle(&law, smooth, f.x(k), -10.0);
                assert!((-r[k] - oracle).abs() < 2e-4, "{} x={x}: {} vs {oracle}", law.name(), -r[k]);
            }
        }
    }

    #[test]
    fn table_kernel_agrees_with_exponential_recursion() {
        // an exponential truncated far out, fed through the table path
        let h = 0.05;
        let f = grid(smooth);
        let fast = Dynamics::new(&EXP, 1.0, 0.0, BoundarySpec::None, h);
        let m_max = (60.0 / h) as usize;
        let table = Dynamics {
            kernel: Kernel::Table(
                (0..=m_max)
                    .map(|m| (EXP.integrated_tail((m + 1) as f64 * h) - EXP.integrated_tail(m as f64 * h)) / h)
                    .collect(),
            ),
            ..fast.clone()
        };
        let mut a = vec![0.0; f.len()];
        let mut b = vec![0.0; f.len()];
        fast.eval(&f.values, f.left_edge(), 0.0, &mut a);
        table.eval(&f.values, f.left_edge(), 0.0, &mut b);
        let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn right_boundary_pins_nodes() {
        let f = grid(|x| if x >= 3.0 { 1.0 } else { smooth(x) * 0.9 });
        let r = rhs(&f, &EXP, 1.0, 1.0, &BoundarySpec::FixedRight { b: 3.0 }).unwrap();
        for k in 0..f.len() {
            if f.x(k) >= 3.0 - 1e-9 {
                assert_eq!(r[k], 0.0);
            } else {
                assert!(r[k] < 0.0);
            }
        }
    }

    #[test]
    fn fixed_right_boundary_keeps_value_one() {
        let b = 2.0;
        let f0 = GridCdf::dirac(-5.0, 10.0, 0.05).unwrap();
        let traj = Mfl::new(EXP, 1.0, 1.0)
            .boundary(BoundarySpec::FixedRight { b })
            .recenter(Recenter::Off)
            .snapshots(true)
            .integrate(&f0, 5.0)
            .unwrap();
        for fr in &traj.frames {
            let s = fr.snapshot.as_ref().unwrap();
            assert!((0..s.len()).filter(|&k| s.x(k) >= b - 1e-9).all(|k| s.values[k] == 1.0));
        }
    }

    #[test]
    fn left_boundary_rhs_forms() {
        let a = 0.53;
        let boundary = BoundarySpec::MovingLeft { a0: a, v: 1.0 };
        let law = EXP;
        let f = grid(smooth);
        let r = rhs(&f, &law, 1.0, 0.5, &boundary).unwrap();
        let f_a = f.value_at(a);
        for k in 0..f.len() {
            let x = f.x(k);
            let fk = f.values[k];
            let expected = if x <= a {
                -fk - 0.5 * fk * (1.0 - fk)
            } else {
                let n = 20_000;
                let dy = (x - a) / n as f64;
                let mut c = f_a * law.tail(x - a);
                for i in 0..n {
                    let y = a + (i as f64 + 0.5) * dy;
                    c += law.tail(x - y) * (f.value_at(y + 0.5 * dy) - f.value_at(y - 0.5 * dy));
                }
                -c - 0.5 * fk * (1.0 - fk)
            };
            assert!((r[k] - expected).abs() < 1e-6, "x={x}: {} vs {expected}", r[k]);
        }
        let uniform = rhs(&f, &JumpLaw::UniformZeroTwo, 1.0, 0.5, &boundary).unwrap();
        assert!(uniform.iter().all(|v| *v <= 0.0 && *v >= -1.5));
    }

    #[test]
    fn quantile_examples() {
        let h = 0.01;
        let step = GridCdf::dirac(-1.0, 1.0, h).unwrap();
        for nu in [0.1, 0.5, 0.9] {
            let q = quantile(&step, nu);
            assert!(q.abs() <= h && q <= 0.0, "{q}");
        }
        let logistic = GridCdf::from_fn(-10.0, 10.0, h, smooth).unwrap();
        assert!(quantile(&logistic, 0.5).abs() < 1e-9);
        let uniform = GridCdf::from_fn(-1.0, 2.0, h, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((quantile(&uniform, 0.25) - 0.25).abs() <= h);
        let mut shifted = uniform.clone();
        shifted.offset = 3.0;
        assert!((quantile(&shifted, 0.25) - 3.25).abs() <= h);
    }

    #[test]
    fn freeze_transform_examples() {
        let f = grid(smooth);
        assert_eq!(freeze_transform(&f, 0.0).unwrap(), f);
        let step = GridCdf::dirac(-1.0, 1.0, 0.1).unwrap();
        let g = freeze_transform(&step, 0.3).unwrap();
        for (a, b) in step.values.iter().zip(&g.values) {
            assert!((b - (0.3 + 0.7 * a)).abs() < 1e-15);
        }
        assert!(freeze_transform(&f, 1.0).is_err());
    }

    #[test]
    fn frozen_dynamics_bound_from_below() {
        // the frozen system started at or above f0 stays at or above f(t)
        let nu = 0.1;
        let f0 = GridCdf::dirac(-5.0, 40.0, 0.05).unwrap();
        let base = Mfl::new(EXP, 1.0, 1.0).recenter(Recenter::Off).snapshots(true).record_every(0.5);
        let full = base.clone().integrate(&f0, 4.0).unwrap();
        let frozen = base.frozen(nu).unwrap().integrate(&f0, 4.0).unwrap();
        for (a, b) in full.frames.iter().zip(&frozen.frames) {
            let lower = freeze_transform(b.snapshot.as_ref().unwrap(), nu).unwrap();
            let upper = a.snapshot.as_ref().unwrap();
            assert!(lower.values.iter().zip(&upper.values).all(|(l, u)| *l >= *u - 1e-12));
        }
    }

    #[test]
    fn bmfl_without_jumps_stays_a_step() {
        let traj = Mfl::new(EXP, 0.0, 1.0).snapshots(true).bmfl(-2.0, 2.0, 0.05, 3.0).unwrap();
        let first = traj.frames[0].snapshot.clone().unwrap();
        assert_eq!(traj.last().snapshot.as_ref().unwrap().values, first.values);
    }

    #[test]
    fn bmfl_is_monotone_and_lipschitz() {
        let (lambda, mu, dt) = (1.0, 1.0, 0.01);
        let traj = Mfl::new(EXP, lambda, mu)
            .dt(dt)
            .record_every(dt)
            .snapshots(true)
            .recenter(Recenter::Off)
            .bmfl(-5.0, 30.0, 0.05, 2.0)
            .unwrap();
        for w in traj.frames.windows(2) {
            let (a, b) = (w[0].snapshot.as_ref().unwrap(), w[1].snapshot.as_ref().unwrap());
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!(y <= x);
                assert!(x - y <= (lambda + mu) * dt + 1e-9);
            }
        }
    }

    #[test]
    fn recentering_preserves_absolute_positions() {
        let f0 = GridCdf::dirac(-10.0, 150.0, 0.05).unwrap();
        let base = Mfl::new(EXP, 1.0, 1.0).track(&[0.5, 0.99]).snapshots(true);
        let wide = GridCdf::dirac(-10.0, 250.0, 0.05).unwrap();
        let moved = base.clone().integrate(&f0, 35.0).unwrap();
        let fixed = base.recenter(Recenter::Off).integrate(&wide, 35.0).unwrap();
        let (a, b) = (moved.last(), fixed.last());
        assert!(a.snapshot.as_ref().unwrap().offset > 0.0);
        assert!((a.quantiles[0] - b.quantiles[0]).abs() < 1e-6, "{} vs {}", a.quantiles[0], b.quantiles[0]);
    }

    #[test]
    fn window_too_small_leaks_mass() {
        let f0 = GridCdf::dirac(-5.0, 10.0, 0.05).unwrap();
        let err = Mfl::new(EXP, 1.0, 1.0).recenter(Recenter::Off).integrate(&f0, 5.0).unwrap_err();
        assert!(matches!(err, Error::MassLeak { .. }), "{err:?}");
    }

    #[test]
    fn rejects_bad_input() {
        let f0 = GridCdf::dirac(-5.0, 10.0, 0.05).unwrap();
        assert!(Mfl::new(EXP, 1.0, 1.0).dt(0.3).integrate(&f0, 1.0).is_err());
        let bad = GridCdf::new(0.0, 0.1, vec![0.5, 0.2, 1.0]).unwrap();
        assert!(rhs(&bad, &EXP, 1.0, 1.0, &BoundarySpec::None).is_err());
        let over = GridCdf::new(0.0, 0.1, vec![0.5, 1.2]).unwrap();
        assert!(rhs(&over, &EXP, 1.0, 1.0, &BoundarySpec::None).is_err());
    }

    #[test]
    fn avg_speed_of_stationary_trajectory_is_zero() {
        let f = grid(|_| 1.0);
        let traj = Mfl::new(EXP, 1.0, 1.0).integrate(&f, 2.0).unwrap();
        assert_eq!(avg_speed(&traj, 0.5, (0.5, 2.0)).unwrap(), 0.0);
        assert!(avg_speed(&traj, 0.5, (0.5, 3.0)).is_err());
        assert!(avg_speed(&traj, 0.3, (0.5, 1.0)).is_err());
    }

    fn ordered_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (prop::collection::vec(0.0..1.0f64, 40), prop::collection::vec(0.0..1.0f64, 40)).prop_map(|(a, b)| {
            let cum = |v: Vec<f64>| -> Vec<f64> {
                let total: f64 = v.iter().sum();
                v.iter()
                    .scan(0.0, |s, x| {
                        *s += x / total;
                        Some(s.min(1.0))
                    })
                    .collect()
            };
            let (f, g) = (cum(a), cum(b));
            let hi: Vec<f64> = f.iter().zip(&g).map(|(x, y)| x.max(*y)).collect();
            (f, hi)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn rhs_is_bounded((f, _g) in ordered_pair(), lambda in 0.0..3.0f64, mu in 0.0..3.0f64) {
            // coarse random CDF padded with ones on the right
            let mut values = vec![0.0; 5];
            values.extend(f);
            values.extend(vec![1.0; 5]);
            let g = GridCdf::new(-1.0, 0.1, values).unwrap();
            for law in [EXP, JumpLaw::UniformZeroTwo, JumpLaw::DeterministicOne] {
                let r = rhs(&g, &law, lambda, mu, &BoundarySpec::None).unwrap();
                prop_assert!(r.iter().all(|v| *v <= 1e-15 && *v >= -(lambda + mu) - 1e-12));
            }
        }

        #[test]
        fn comparison_principle((f, g) in ordered_pair()) {
            let pad = |v: Vec<f64>| {
                let mut values = vec![0.0; 20];
                values.extend(v);
                values.extend(vec![1.0; 400]);
                GridCdf::new(-2.0, 0.1, values).unwrap()
            };
            let (lo, hi) = (pad(f), pad(g));
            let m = Mfl::new(EXP, 1.0, 1.0).snapshots(true).record_every(0.25).recenter(Recenter::Off);
            let a = m.integrate(&lo, 2.0).unwrap();
            let b = m.integrate(&hi, 2.0).unwrap();
            for (x, y) in a.frames.iter().zip(&b.frames) {
                let (x, y) = (x.snapshot.as_ref().unwrap(), y.snapshot.as_ref().unwrap());
                prop_assert!(x.values.iter().zip(&y.values).all(|(p, q)| *p <= *q + 1e-9));
            }
        }
    }
}
