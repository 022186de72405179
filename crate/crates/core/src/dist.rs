//! Jump-size laws.
//!
//! Every law has unit mean. Besides sampling and the CDF `J`, a law exposes
//! its Laplace transform `L(s) = E exp(-sZ)` as an extended real (it is
//! `+inf` to the left of `-alpha`, where `alpha` is the tail exponent), and
//! the integrated tail `G(u) = ∫_0^u (1 - J)` used by the mean-field kernel.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A real number or `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(x),
            ExtReal::PosInf => None,
        }
    }

    /// Lossy view as `f64`, mapping `PosInf` to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl std::fmt::Display for ExtReal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExtReal::Finite(x) => write!(f, "{x}"),
            ExtReal::PosInf => write!(f, "inf"),
        }
    }
}

/// Tolerance on the unit-mean check for tabulated laws.
pub const EMPIRICAL_MEAN_TOLERANCE: f64 = 1e-6;

/// Step of the central difference used for `L'` of tabulated laws.
pub const EMPIRICAL_DERIVATIVE_STEP: f64 = 1e-6;

/// A piecewise-linear CDF through `(location, cdf)` knots.
///
/// `J(x) = 0` left of the first knot; a first knot with positive cdf is an
/// atom. Two knots at the same location encode an atom there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalCdf {
    knots: Vec<(f64, f64)>,
}

impl EmpiricalCdf {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(invalid("empirical law needs at least one knot"));
        }
        let mut prev = (0.0f64, 0.0f64);
        for &(x, p) in &knots {
            if !x.is_finite() || !p.is_finite() {
                return Err(invalid("empirical knots must be finite"));
            }
            if x < 0.0 {
                return Err(invalid(format!("jump location {x} is negative")));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("cdf value {p} outside [0, 1]")));
            }
            if x < prev.0 || p < prev.1 {
                return Err(invalid("empirical knots must be nondecreasing in x and cdf"));
            }
            prev = (x, p);
        }
        if (prev.1 - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("last cdf value is {}, expected 1", prev.1)));
        }
        let law = EmpiricalCdf { knots };
        let mean = law.mean();
        if (mean - 1.0).abs() > EMPIRICAL_MEAN_TOLERANCE {
            return Err(invalid(format!("empirical law has mean {mean}, expected 1")));
        }
        Ok(law)
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    fn mean(&self) -> f64 {
        let (x0, p0) = self.knots[0];
        let mut mean = x0 * p0;
        for w in self.knots.windows(2) {
            let ((a, pa), (b, pb)) = (w[0], w[1]);
            mean += (pb - pa) * 0.5 * (a + b);
        }
        mean
    }

    fn cdf(&self, x: f64) -> f64 {
        let idx = self.knots.partition_point(|k| k.0 <= x);
        if idx == 0 {
            return 0.0;
        }
        if idx == self.knots.len() {
            return 1.0;
        }
        let (a, pa) = self.knots[idx - 1];
        let (b, pb) = self.knots[idx];
        pa + (pb - pa) * (x - a) / (b - a)
    }

    fn quantile(&self, u: f64) -> f64 {
        let idx = self.knots.partition_point(|k| k.1 < u);
        if idx == 0 {
            return self.knots[0].0;
        }
        if idx == self.knots.len() {
            return self.knots[idx - 1].0;
        }
        let (a, pa) = self.knots[idx - 1];
        let (b, pb) = self.knots[idx];
        a + (u - pa) / (pb - pa) * (b - a)
    }

    fn laplace(&self, s: f64) -> f64 {
        let (x0, p0) = self.knots[0];
        let mut total = p0 * (-s * x0).exp();
        for w in self.knots.windows(2) {
            let ((a, pa), (b, pb)) = (w[0], w[1]);
            let dp = pb - pa;
            if dp == 0.0 {
                continue;
            }
            let width = b - a;
            if width == 0.0 {
                total += dp * (-s * a).exp();
                continue;
            }
            // ∫_a^b exp(-s x) dx / width
            let t = s * width;
            let avg = if t.abs() < 1e-12 {
                1.0 - 0.5 * t
            } else {
                -(-t).exp_m1() / t
            };
            total += dp * (-s * a).exp() * avg;
        }
        total
    }

    fn integrated_tail(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let (x0, p0) = self.knots[0];
        if u <= x0 {
            return u;
        }
        let mut acc = x0;
        let mut tail_left = 1.0 - p0;
        for w in self.knots.windows(2) {
            let ((a, _), (b, pb)) = (w[0], w[1]);
            let tail_right = 1.0 - pb;
            if b <= a {
                tail_left = tail_right;
                continue;
            }
            if u <= b {
                let frac = (u - a) / (b - a);
                let tail_u = tail_left + (tail_right - tail_left) * frac;
                return acc + 0.5 * (tail_left + tail_u) * (u - a);
            }
            acc += 0.5 * (tail_left + tail_right) * (b - a);
            tail_left = tail_right;
        }
        acc
    }

    fn support_end(&self) -> f64 {
        self.knots[self.knots.len() - 1].0
    }

    fn has_atoms(&self) -> bool {
        self.knots[0].1 > 0.0 || self.knots.windows(2).any(|w| w[0].0 == w[1].0 && w[1].1 > w[0].1)
    }
}

/// Jump-size distribution with unit mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum JumpLaw {
    /// `J(x) = 1 - exp(-x)`.
    ExponentialMeanOne,
    /// Uniform on `[0, 2]`.
    UniformZeroTwo,
    /// Point mass at 1.
    DeterministicOne,
    EmpiricalCdf(EmpiricalCdf),
}

impl JumpLaw {
    pub fn empirical(knots: Vec<(f64, f64)>) -> Result<Self> {
        EmpiricalCdf::new(knots).map(JumpLaw::EmpiricalCdf)
    }

    /// Short name used by the command line and in CSV output.
    pub fn name(&self) -> &'static str {
        match self {
            JumpLaw::ExponentialMeanOne => "exp",
            JumpLaw::UniformZeroTwo => "uniform02",
            JumpLaw::DeterministicOne => "det1",
            JumpLaw::EmpiricalCdf(_) => "empirical",
        }
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self, JumpLaw::ExponentialMeanOne)
    }

    pub fn mean(&self) -> f64 {
        match self {
            JumpLaw::EmpiricalCdf(e) => e.mean(),
            _ => 1.0,
        }
    }

    /// `J(x)`, right-continuous.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            JumpLaw::ExponentialMeanOne => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-x).exp_m1()
                }
            }
            JumpLaw::UniformZeroTwo => (x / 2.0).clamp(0.0, 1.0),
            JumpLaw::DeterministicOne => {
                if x >= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            JumpLaw::EmpiricalCdf(e) => e.cdf(x),
        }
    }

    /// `1 - J(x)`.
    pub fn tail(&self, x: f64) -> f64 {
        match self {
            JumpLaw::ExponentialMeanOne => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-x).exp()
                }
            }
            _ => 1.0 - self.cdf(x),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            JumpLaw::ExponentialMeanOne => Exp1.sample(rng),
            JumpLaw::UniformZeroTwo => 2.0 * rng.random::<f64>(),
            JumpLaw::DeterministicOne => 1.0,
            JumpLaw::EmpiricalCdf(e) => e.quantile(rng.random::<f64>()),
        }
    }

    /// `L(s) = E exp(-sZ)`.
    pub fn laplace(&self, s: f64) -> ExtReal {
        match self {
            JumpLaw::ExponentialMeanOne => {
                if s <= -1.0 {
                    ExtReal::PosInf
                } else {
                    ExtReal::Finite(1.0 / (1.0 + s))
                }
            }
            JumpLaw::UniformZeroTwo => {
                if s == 0.0 {
                    ExtReal::Finite(1.0)
                } else {
                    ExtReal::Finite(-(-2.0 * s).exp_m1() / (2.0 * s))
                }
            }
            JumpLaw::DeterministicOne => ExtReal::Finite((-s).exp()),
            JumpLaw::EmpiricalCdf(e) => ExtReal::Finite(e.laplace(s)),
        }
    }

    /// `L'(s)`; `+inf` outside the finite domain of `L`.
    pub fn laplace_derivative(&self, s: f64) -> ExtReal {
        match self {
            JumpLaw::ExponentialMeanOne => {
                if s <= -1.0 {
                    ExtReal::PosInf
                } else {
                    ExtReal::Finite(-1.0 / ((1.0 + s) * (1.0 + s)))
                }
            }
            JumpLaw::UniformZeroTwo => {
                if s.abs() < 1e-3 {
                    // -E Z + s E Z^2 - s^2 E Z^3 / 2 + s^3 E Z^4 / 6, with E Z^k = 2^k / (k + 1)
                    ExtReal::Finite(-1.0 + s * (4.0 / 3.0) - s * s + s * s * s * (8.0 / 15.0))
                } else {
                    let e = (-2.0 * s).exp();
                    ExtReal::Finite((2.0 * s * e + (-2.0 * s).exp_m1()) / (2.0 * s * s))
                }
            }
            JumpLaw::DeterministicOne => ExtReal::Finite(-(-s).exp()),
            JumpLaw::EmpiricalCdf(e) => {
                let step = EMPIRICAL_DERIVATIVE_STEP;
                ExtReal::Finite((e.laplace(s + step) - e.laplace(s - step)) / (2.0 * step))
            }
        }
    }

    /// `alpha = sup{ζ ≥ 0 : L(-ζ) < inf}`.
    pub fn tail_exponent(&self) -> ExtReal {
        match self {
            JumpLaw::ExponentialMeanOne => ExtReal::Finite(1.0),
            _ => ExtReal::PosInf,
        }
    }

    /// Whether `L(-alpha)` is finite (only meaningful for finite `alpha`).
    pub fn laplace_finite_at_tail_exponent(&self) -> bool {
        match self.tail_exponent() {
            ExtReal::Finite(alpha) => self.laplace(-alpha).is_finite(),
            ExtReal::PosInf => false,
        }
    }

    /// `G(u) = ∫_0^u (1 - J(y)) dy`; tends to the mean as `u -> inf`.
    pub fn integrated_tail(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        match self {
            JumpLaw::ExponentialMeanOne => -(-u).exp_m1(),
            JumpLaw::UniformZeroTwo => {
                if u >= 2.0 {
                    1.0
                } else {
                    u - 0.25 * u * u
                }
            }
            JumpLaw::DeterministicOne => u.min(1.0),
            JumpLaw::EmpiricalCdf(e) => e.integrated_tail(u),
        }
    }

    /// Right end of the support, `None` when unbounded.
    pub fn support_end(&self) -> Option<f64> {
        match self {
            JumpLaw::ExponentialMeanOne => None,
            JumpLaw::UniformZeroTwo => Some(2.0),
            JumpLaw::DeterministicOne => Some(1.0),
            JumpLaw::EmpiricalCdf(e) => Some(e.support_end()),
        }
    }

    /// Laws with atoms make the mean-field right-hand side discontinuous in x.
    pub fn has_atoms(&self) -> bool {
        match self {
            JumpLaw::DeterministicOne => true,
            JumpLaw::EmpiricalCdf(e) => e.has_atoms(),
            _ => false,
        }
    }
}

impl std::str::FromStr for JumpLaw {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp" | "exponential" => Ok(JumpLaw::ExponentialMeanOne),
            "uniform02" | "uniform" => Ok(JumpLaw::UniformZeroTwo),
            "det1" | "deterministic" => Ok(JumpLaw::DeterministicOne),
            other => Err(invalid(format!("unknown jump law '{other}'"))),
        }
    }
}
