//! Simulated optical linear algebra.
//!
//! The pipeline for one product is: quantize both operands to the device
//! levels, split the signed product into four non-negative products, read each
//! one out under shot noise, recombine with signs, then add systematic error
//! relative to the mean output size.

mod decompose;
mod lut;
mod matmul;
mod noise;
mod quantize;

pub use decompose::{four_pass_decompose, FourPassOperands, PASS_SIGNS};
pub use lut::{lut_synthesize, LookupTable};
pub use matmul::{optical_matmul, LinearNoise, OpticalMatmul, PhotonAccounting};
pub use noise::{apply_shot_noise, apply_systematic_noise, empirical_snr, NoiseSpec};
pub use quantize::{quantize, QuantGrid, QuantMode, Quantizer, QuantizerSpec, Rounding};
