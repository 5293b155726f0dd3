//! Reflective ghost imaging through turbulence: closed-form theory and a Monte Carlo simulator.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod grid;
pub mod scenario;

pub use error::{Error, Result, Warning};
pub mod atmosphere;
pub mod fieldgen;
pub mod fourier;
pub mod seed;
pub mod io;
pub mod optics;
pub mod sensing;
pub mod harness;
