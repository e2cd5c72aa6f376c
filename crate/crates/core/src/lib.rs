//! Simulation and verification toolkit for ensemble population transfer in
//! n-level quantum systems driven by one scalar chirped pulse.

// `!(x > 0.0)` is used on purpose to reject NaN along with the bound.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod conditions;
pub mod control;
pub mod error;
pub mod frames;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod propagator;
pub mod quad;
pub mod spline;

pub use error::{Error, Result};
