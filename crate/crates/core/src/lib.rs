//! Sparse-amplitude simulation of a spectral quantum graph convolutional
//! network.
//!
//! The crate is `no_std` (with `alloc`). It carries the whole numerical
//! pipeline: graph Laplacians and their eigenbases, classical spectral
//! convolution with exact stage-by-stage oracles, a register-level sparse
//! quantum simulator with fixed-point arithmetic registers, Grover-based
//! overlap estimation, the exchange-test layer readout and a finite
//! difference training loop. File formats and the command line live in the
//! `qgcn` companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod classical;
pub mod error;
pub mod fixed;
pub mod graph;
pub mod linalg;
mod math;
pub mod overlap;
pub mod qconv;
pub mod qsim;
pub mod spectral;
pub mod train;

pub use error::{Error, Result};

/// Tolerance on `|estimate - oracle|` for Grover-based overlap estimation
/// with a `q`-bit phase register and 12 fractional fixed-point bits.
pub fn overlap_error_budget(q: u32) -> f64 {
    core::f64::consts::PI * core::f64::consts::PI * math::exp2(1.0 - q as f64) + math::exp2(-11.0)
}

/// Tolerance on `|feature - oracle|` for the exchange-test layer readout.
pub fn layer_error_budget(q: u32) -> f64 {
    core::f64::consts::PI * math::exp2(1.0 - q as f64) + math::exp2(-11.0)
}
