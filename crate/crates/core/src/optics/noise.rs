use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::matrix::mean_abs;
use crate::{Error, Result};

/// Noise settings for a simulated run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Mean-relative Gaussian error (%) on the projection and feed-forward products.
    pub systematic_percent_ff: f64,
    /// Mean-relative Gaussian error (%) on the attention products.
    pub systematic_percent_attn: f64,
    /// Mean photons per MAC at the input; infinite means no shot noise.
    #[serde(with = "photon_count")]
    pub photons_per_mac: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn noiseless(seed: u64) -> Self {
        Self {
            systematic_percent_ff: 0.0,
            systematic_percent_attn: 0.0,
            photons_per_mac: f64::INFINITY,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.systematic_percent_ff >= 0.0 && self.systematic_percent_attn >= 0.0) {
            return Err(Error::InvalidArgument("systematic percentages must be >= 0".into()));
        }
        if !(self.photons_per_mac > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "photons_per_mac must be positive, got {}",
                self.photons_per_mac
            )));
        }
        Ok(())
    }
}

/// Photon counts serialize as a number, or the string `"inf"` for the
/// noiseless limit.
pub(crate) mod photon_count {
    use core::fmt;

    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = f64;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a positive number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v {
                    "inf" | "infinity" | "Infinity" => Ok(f64::INFINITY),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Reads out non-negative intensities under shot noise.
///
/// The outputs are scaled so their mean corresponds to
/// `photons_per_mac * macs_per_output` photons, each element is replaced by a
/// Poisson draw with that mean, and the counts are scaled back.
pub fn apply_shot_noise<R: Rng + ?Sized>(
    outputs: &[f64],
    photons_per_mac: f64,
    macs_per_output: u64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(photons_per_mac > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "photons_per_mac must be positive, got {photons_per_mac}"
        )));
    }
    if macs_per_output == 0 {
        return Err(Error::InvalidArgument("macs_per_output must be at least 1".into()));
    }
    if let Some(i) = outputs.iter().position(|&v| !(v >= 0.0)) {
        return Err(Error::Contract(format!(
            "shot noise needs non-negative intensities, element {i} is {}",
            outputs[i]
        )));
    }
    if photons_per_mac.is_infinite() {
        return Ok(outputs.to_vec());
    }
    let mean = outputs.iter().sum::<f64>() / outputs.len().max(1) as f64;
    if mean == 0.0 {
        return Ok(outputs.to_vec());
    }
    let photons_per_unit = photons_per_mac * macs_per_output as f64 / mean;
    outputs
        .iter()
        .map(|&v| {
            let lambda = v * photons_per_unit;
            if lambda == 0.0 {
                return Ok(0.0);
            }
            let dist = Poisson::new(lambda)
                .map_err(|e| Error::InvalidArgument(format!("poisson mean {lambda}: {e}")))?;
            let count: f64 = dist.sample(rng);
            Ok(count / photons_per_unit)
        })
        .collect()
}

/// Adds zero-mean Gaussian error with standard deviation
/// `percent / 100 * mean(|outputs|)`.
pub fn apply_systematic_noise<R: Rng + ?Sized>(
    outputs: &[f64],
    percent: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(percent >= 0.0) {
        return Err(Error::InvalidArgument(format!("percent {percent} must be >= 0")));
    }
    let sigma = percent / 100.0 * mean_abs(outputs);
    if sigma == 0.0 {
        return Ok(outputs.to_vec());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(format!("{e}")))?;
    Ok(outputs.iter().map(|&v| v + normal.sample(rng)).collect())
}

/// Element-wise `mean / std` over repeated samples, averaged over elements.
///
/// Elements that never vary count as infinite SNR, so identical samples
/// report `f64::INFINITY`. Elements with zero mean and zero spread are skipped.
pub fn empirical_snr(samples: &[Vec<f64>]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    let width = samples[0].len();
    if samples.iter().any(|s| s.len() != width) {
        return Err(Error::Dimension("samples differ in length".into()));
    }
    let count = samples.len() as f64;
    let mut total = 0.0;
    let mut used = 0usize;
    for i in 0..width {
        let mean = samples.iter().map(|s| s[i]).sum::<f64>() / count;
        let var = samples.iter().map(|s| (s[i] - mean) * (s[i] - mean)).sum::<f64>() / (count - 1.0);
        if var == 0.0 {
            if mean == 0.0 {
                continue;
            }
            return Ok(f64::INFINITY);
        }
        total += mean / libm::sqrt(var);
        used += 1;
    }
    if used == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(total / used as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use alloc::vec;

    #[test]
    fn infinite_photons_is_identity() {
        let v = vec![0.1, 2.0, 3.5];
        let mut rng = stream(0, 0);
        assert_eq!(apply_shot_noise(&v, f64::INFINITY, 10, &mut rng).unwrap(), v);
    }

    #[test]
    fn zero_output_stays_zero() {
        let mut rng = stream(0, 1);
        let out = apply_shot_noise(&[0.0, 0.0, 1.0], 5.0, 4, &mut rng).unwrap();
        assert_eq!(out[0], 0.0);
        assert_eq!(out[1], 0.0);
        assert_eq!(apply_shot_noise(&[0.0; 4], 5.0, 4, &mut rng).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn negative_intensity_is_a_contract_violation() {
        let mut rng = stream(0, 2);
        let err = apply_shot_noise(&[1.0, -0.5], 10.0, 1, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn invalid_photon_budget() {
        let mut rng = stream(0, 3);
        assert!(apply_shot_noise(&[1.0], 0.0, 1, &mut rng).is_err());
        assert!(apply_shot_noise(&[1.0], f64::NAN, 1, &mut rng).is_err());
    }

    #[test]
    fn shot_noise_outputs_are_count_multiples() {
        let mut rng = stream(0, 4);
        // mean 1.0 -> 2 photons per unit with 2 photons/MAC and 1 MAC
        let out = apply_shot_noise(&[1.0, 1.0], 2.0, 1, &mut rng).unwrap();
        for v in out {
            assert_eq!(v * 2.0, libm::round(v * 2.0));
        }
    }

    #[test]
    fn systematic_zero_percent_and_zero_outputs() {
        let mut rng = stream(0, 5);
        let v = vec![1.0, -2.0];
        assert_eq!(apply_systematic_noise(&v, 0.0, &mut rng).unwrap(), v);
        assert_eq!(apply_systematic_noise(&[0.0; 3], 5.0, &mut rng).unwrap(), vec![0.0; 3]);
        assert!(apply_systematic_noise(&v, -1.0, &mut rng).is_err());
    }

    #[test]
    fn snr_edge_cases() {
        assert!(empirical_snr(&[vec![1.0]]).is_err());
        assert_eq!(empirical_snr(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap(), f64::INFINITY);
        assert!(empirical_snr(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn noise_spec_validation() {
        let spec = NoiseSpec::noiseless(3);
        spec.validate().unwrap();
        let bad = NoiseSpec { photons_per_mac: 0.0, ..spec };
        assert!(bad.validate().is_err());
    }
}
