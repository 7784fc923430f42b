use rand::Rng;
use serde::{Deserialize, Serialize};

use super::quantize::{abs_percentile, QuantGrid, Rounding};
use super::{apply_shot_noise, apply_systematic_noise, four_pass_decompose, LookupTable};
use crate::matrix::Matrix;
use crate::rng::stream;
use crate::Result;

/// Noise applied to a single optical product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearNoise {
    pub systematic_percent: f64,
    /// Infinite means no shot noise.
    #[serde(with = "super::noise::photon_count")]
    pub photons_per_mac: f64,
}

impl LinearNoise {
    pub const NONE: LinearNoise = LinearNoise { systematic_percent: 0.0, photons_per_mac: f64::INFINITY };
}

/// How a photons/MAC budget is spread over the four non-negative passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhotonAccounting {
    /// Every pass receives the full budget.
    #[default]
    PerPass,
    /// The budget is shared, a quarter per pass.
    SplitAcrossPasses,
}

/// Configuration of the simulated optical product `inputs . weights`.
///
/// The input table quantizes the left operand (display), the weight table the
/// right operand (modulator). `None` keeps full precision.
#[derive(Debug, Clone, Copy, Default)]
pub struct OpticalMatmul<'a> {
    pub noise: LinearNoise,
    pub input_lut: Option<&'a LookupTable>,
    pub weight_lut: Option<&'a LookupTable>,
    pub rounding: Rounding,
    pub accounting: PhotonAccounting,
    /// Run the four passes even when there is no shot noise to apply.
    pub force_four_pass: bool,
}

impl Default for LinearNoise {
    fn default() -> Self {
        Self::NONE
    }
}

impl OpticalMatmul<'_> {
    pub fn run<R: Rng + ?Sized>(&self, inputs: &Matrix, weights: &Matrix, rng: &mut R) -> Result<Matrix> {
        let inputs = encode(inputs, self.input_lut, self.rounding, rng)?;
        let weights = encode(weights, self.weight_lut, self.rounding, rng)?;

        let photons = self.noise.photons_per_mac;
        let mut out = if photons.is_infinite() && !self.force_four_pass {
            // without shot noise the four passes sum to the direct product
            inputs.matmul(&weights)?
        } else {
            let per_pass = match self.accounting {
                PhotonAccounting::PerPass => photons,
                PhotonAccounting::SplitAcrossPasses => photons / 4.0,
            };
            let macs_per_output = inputs.cols().max(1) as u64;
            let ops = four_pass_decompose(&inputs, &weights)?;
            let mut acc = Matrix::zeros(inputs.rows(), weights.cols());
            for (a, b, sign) in ops.passes() {
                let product = a.matmul(b)?;
                let read = apply_shot_noise(product.as_slice(), per_pass, macs_per_output, rng)?;
                for (o, v) in acc.as_mut_slice().iter_mut().zip(read) {
                    *o += sign * v;
                }
            }
            acc
        };

        if self.noise.systematic_percent > 0.0 {
            let noisy = apply_systematic_noise(out.as_slice(), self.noise.systematic_percent, rng)?;
            out.as_mut_slice().copy_from_slice(&noisy);
        }
        Ok(out)
    }
}

fn encode<R: Rng + ?Sized>(
    m: &Matrix,
    lut: Option<&LookupTable>,
    rounding: Rounding,
    rng: &mut R,
) -> Result<Matrix> {
    match lut {
        None => Ok(m.clone()),
        Some(table) => {
            let grid = QuantGrid::Lut { scale: abs_percentile(m.as_slice(), 100.0), table };
            Matrix::from_vec(m.rows(), m.cols(), grid.quantize(m.as_slice(), rounding, rng))
        }
    }
}

/// One optical product with the random stream selected by `seed`.
pub fn optical_matmul(
    inputs: &Matrix,
    weights: &Matrix,
    noise: &LinearNoise,
    input_lut: Option<&LookupTable>,
    weight_lut: Option<&LookupTable>,
    seed: u64,
) -> Result<Matrix> {
    let op = OpticalMatmul { noise: *noise, input_lut, weight_lut, ..OpticalMatmul::default() };
    op.run(inputs, weights, &mut stream(seed, 0))
}
