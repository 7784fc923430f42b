//! Simulation and cost model for Transformer inference on optical
//! matrix-multiply accelerators.
//!
//! The crate is `no_std` (it needs `alloc`). Everything that touches files,
//! the clock or the command line lives in the `photonsim` crate.
//!
//! - [`arch`]: model shapes, exact MAC/load/detect counts, hardware sizing.
//! - [`optics`]: device quantization, four-pass decomposition, shot noise
//!   and systematic error.
//! - [`txsim`]: a small GPT-style forward pass with a pluggable linear backend.
//! - [`energy`]: per-event energy accounting, photon scaling, chunking.

#![no_std]
#![deny(rust_2018_idioms)]
// `!(x >= 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod arch;
pub mod energy;
mod error;
pub mod matrix;
pub mod optics;
pub mod rng;
pub mod txsim;

pub use error::{Error, Result};
pub use matrix::Matrix;
