//! Numerics for a mean-field particle system in which every particle makes
//! independent forward jumps and synchronizes with randomly chosen peers that
//! are ahead of it.
//!
//! The crate is organized by the object being computed:
//!
//! - [`dist`]: jump-size laws (sampling, CDF, Laplace transform, tail exponent)
//! - [`speed`]: the speed curve `v(ζ)` and its minimum, the critical speed `v**`
//! - [`particles`]: exact event-driven simulation of the `n`-particle system
//! - [`brw`]: the associated branching random walk
//! - [`mfl`]: deterministic mean-field dynamics on a windowed grid
//! - [`tws`]: traveling-wave shapes for exponential jumps (phase-plane shooting)
//! - [`optimize`]: the self-propulsion / synchronization trade-off
//! - [`tables`]: reference rows for the exponential and uniform experiments
//!
//! Rates are always passed as `(lambda, mu)`: `lambda` is the independent-jump
//! rate and `mu` the synchronization rate. Jump laws have unit mean.

// validation rejects NaN through negated comparisons
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod brw;
pub mod dist;
mod error;
pub mod mfl;
pub mod optimize;
pub mod particles;
pub mod rng;
pub mod speed;
pub mod tables;
pub mod tws;

pub use boundary::BoundarySpec;
pub use dist::{ExtReal, JumpLaw};
pub use error::{Error, Result};
