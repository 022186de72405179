//! Published reference rows on the budget line `2λ + μ = 1`: steady-state
//! speeds of 10 000-particle simulations next to the critical speed `v**`.

use crate::dist::JumpLaw;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub lambda: f64,
    pub mu: f64,
    pub v_n: f64,
    pub v_star_star: f64,
}

const fn row(lambda: f64, mu: f64, v_n: f64, v_star_star: f64) -> TableRow {
    TableRow {
        lambda,
        mu,
        v_n,
        v_star_star,
    }
}

/// Exponential jumps.
pub const TABLE_1: [TableRow; 10] = [
    row(0.45, 0.1, 0.9321, 0.974264069),
    row(0.4, 0.2, 1.0863, 1.165685425),
    row(0.35, 0.3, 1.2104, 1.29807407),
    row(0.3, 0.4, 1.2974, 1.392820323),
    row(0.25, 0.5, 1.3236, 1.457106781),
    row(0.2, 0.6, 1.3318, 1.492820323),
    row(1.0 / 6.0, 2.0 / 3.0, 1.3566, 1.5),
    row(0.15, 0.7, 1.3071, 1.49807407),
    row(0.1, 0.8, 1.2206, 1.465685425),
    row(0.05, 0.9, 1.0567, 1.374264069),
];

/// Uniform jumps on `[0, 2]`. The optimum row is printed as `≈ 0.27, ≈ 0.46`.
pub const TABLE_2: [TableRow; 10] = [
    row(0.45, 0.1, 0.8176, 0.844),
    row(0.4, 0.2, 0.9243, 0.955),
    row(0.35, 0.3, 0.9704, 1.0165),
    row(0.3, 0.4, 0.9871, 1.0458),
    row(0.27, 0.46, 0.9917, 1.0505),
    row(0.25, 0.5, 0.9995, 1.0486),
    row(0.2, 0.6, 0.9716, 1.0262),
    row(0.15, 0.7, 0.919, 0.9761),
    row(0.1, 0.8, 0.8209, 0.8907),
    row(0.05, 0.9, 0.6751, 0.7469),
];

/// The rows and jump law of table 1 or 2.
pub fn table(id: u8) -> Option<(&'static [TableRow], JumpLaw)> {
    match id {
        1 => Some((&TABLE_1, JumpLaw::ExponentialMeanOne)),
        2 => Some((&TABLE_2, JumpLaw::UniformZeroTwo)),
        _ => None,
    }
}
