//! Device quantization.
//!
//! Calibration picks a clipping range (running EMA of min/max, or a
//! percentile of magnitudes) and produces a [`QuantGrid`]; the grid then maps
//! each value onto a representable level, either to the nearest level
//! (ties to even) or stochastically between the two bracketing levels.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LookupTable;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantMode {
    Ema,
    Percentile,
    Lut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    Stochastic,
    #[default]
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    pub mode: QuantMode,
    pub bits: u32,
    pub ema_gamma: f64,
    pub clip_percentile: f64,
    pub rounding: Rounding,
}

impl Default for QuantizerSpec {
    fn default() -> Self {
        Self {
            mode: QuantMode::Percentile,
            bits: 8,
            ema_gamma: 0.999,
            clip_percentile: 100.0,
            rounding: Rounding::Deterministic,
        }
    }
}

impl QuantizerSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.ema_gamma > 0.0 && self.ema_gamma < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "ema_gamma {} must be in (0, 1)",
                self.ema_gamma
            )));
        }
        if !(self.clip_percentile > 0.0 && self.clip_percentile <= 100.0) {
            return Err(Error::InvalidArgument(format!(
                "clip_percentile {} must be in (0, 100]",
                self.clip_percentile
            )));
        }
        if self.mode != QuantMode::Lut && !(1..=32).contains(&self.bits) {
            return Err(Error::InvalidArgument(format!("bits {} must be in 1..=32", self.bits)));
        }
        Ok(())
    }
}

/// A calibrated set of representable values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuantGrid<'a> {
    /// `levels` evenly spaced values on `[lo, hi]`.
    Uniform { lo: f64, hi: f64, levels: u64 },
    /// Sign-magnitude: `|v| / scale` is mapped onto the table, then rescaled.
    Lut { scale: f64, table: &'a LookupTable },
}

impl QuantGrid<'_> {
    pub fn quantize_value<R: Rng + ?Sized>(&self, v: f64, rounding: Rounding, rng: &mut R) -> f64 {
        match *self {
            QuantGrid::Uniform { lo, hi, levels } => {
                let span = hi - lo;
                if !(span > 0.0) || levels < 2 {
                    return lo;
                }
                let steps = (levels - 1) as f64;
                let t = ((v.clamp(lo, hi) - lo) / span) * steps;
                let k = match rounding {
                    Rounding::Deterministic => round_half_even(t),
                    Rounding::Stochastic => stochastic_round(t, rng),
                };
                lo + span * (k / steps)
            }
            QuantGrid::Lut { scale, table } => {
                if !(scale > 0.0) {
                    return 0.0;
                }
                let sign = if v < 0.0 { -1.0 } else { 1.0 };
                let m = (v.abs() / scale).min(1.0);
                let q = match rounding {
                    Rounding::Deterministic => table.nearest(m),
                    Rounding::Stochastic => {
                        let (a, b) = table.bracket(m);
                        if a == b {
                            a
                        } else if rng.random::<f64>() < (m - a) / (b - a) {
                            b
                        } else {
                            a
                        }
                    }
                };
                sign * q * scale
            }
        }
    }

    pub fn quantize<R: Rng + ?Sized>(&self, values: &[f64], rounding: Rounding, rng: &mut R) -> Vec<f64> {
        values.iter().map(|&v| self.quantize_value(v, rounding, rng)).collect()
    }
}

fn round_half_even(t: f64) -> f64 {
    let f = libm::floor(t);
    let diff = t - f;
    if diff > 0.5 || (diff == 0.5 && libm::fmod(f, 2.0) != 0.0) {
        f + 1.0
    } else {
        f
    }
}

fn stochastic_round<R: Rng + ?Sized>(t: f64, rng: &mut R) -> f64 {
    let f = libm::floor(t);
    let frac = t - f;
    if frac > 0.0 && rng.random::<f64>() < frac {
        f + 1.0
    } else {
        f
    }
}

/// Nearest-rank percentile of `|values|`. `p` is in percent.
pub(crate) fn abs_percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut mags: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    mags.sort_unstable_by(f64::total_cmp);
    let rank = libm::ceil(p / 100.0 * mags.len() as f64) as usize;
    mags[rank.clamp(1, mags.len()) - 1]
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// A quantizer with its calibration state.
///
/// Only the EMA mode carries state between calls; keep one instance per
/// simulation run.
#[derive(Debug, Clone)]
pub struct Quantizer {
    spec: QuantizerSpec,
    lut: Option<LookupTable>,
    ema: Option<(f64, f64)>,
}

impl Quantizer {
    pub fn new(spec: QuantizerSpec, lut: Option<LookupTable>) -> Result<Self> {
        spec.validate()?;
        if spec.mode == QuantMode::Lut && lut.is_none() {
            return Err(Error::InvalidArgument("lut mode needs a lookup table".into()));
        }
        Ok(Self { spec, lut, ema: None })
    }

    pub fn spec(&self) -> &QuantizerSpec {
        &self.spec
    }

    /// Running `(min, max)` for the EMA mode, once observed.
    pub fn ema_range(&self) -> Option<(f64, f64)> {
        self.ema
    }

    /// Observes `values` and returns the grid to quantize them with.
    pub fn calibrate(&mut self, values: &[f64]) -> QuantGrid<'_> {
        let levels = 1u64 << self.spec.bits;
        match self.spec.mode {
            QuantMode::Ema => {
                let (lo, hi) = if values.is_empty() { (0.0, 0.0) } else { min_max(values) };
                let g = self.spec.ema_gamma;
                let next = match self.ema {
                    None => (lo, hi),
                    Some((rlo, rhi)) => (g * rlo + (1.0 - g) * lo, g * rhi + (1.0 - g) * hi),
                };
                self.ema = Some(next);
                QuantGrid::Uniform { lo: next.0, hi: next.1, levels }
            }
            QuantMode::Percentile => {
                let c = abs_percentile(values, self.spec.clip_percentile);
                let negative = values.iter().any(|&v| v < 0.0);
                QuantGrid::Uniform { lo: if negative { -c } else { 0.0 }, hi: c, levels }
            }
            QuantMode::Lut => QuantGrid::Lut {
                scale: abs_percentile(values, self.spec.clip_percentile),
                table: self.lut.as_ref().expect("checked in new"),
            },
        }
    }

    pub fn quantize<R: Rng + ?Sized>(&mut self, values: &[f64], rng: &mut R) -> Vec<f64> {
        let rounding = self.spec.rounding;
        let grid = self.calibrate(values);
        grid.quantize(values, rounding, rng)
    }
}

/// One-shot quantization with a fresh calibration.
pub fn quantize<R: Rng + ?Sized>(
    values: &[f64],
    spec: &QuantizerSpec,
    lut: Option<&LookupTable>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut q = Quantizer::new(*spec, lut.cloned())?;
    Ok(q.quantize(values, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use alloc::vec;

    fn det(bits: u32) -> QuantizerSpec {
        QuantizerSpec { bits, ..QuantizerSpec::default() }
    }

    #[test]
    fn half_is_a_tie_resolved_to_even_level() {
        // 0.5 on 256 levels over [0, 1] sits at 127.5; half-even picks 128.
        let grid = QuantGrid::Uniform { lo: 0.0, hi: 1.0, levels: 256 };
        let mut rng = stream(0, 0);
        let q = grid.quantize_value(0.5, Rounding::Deterministic, &mut rng);
        // enumerate all 256 levels and take the nearest, breaking the tie upward to even
        let levels: Vec<f64> = (0..256).map(|k| k as f64 / 255.0).collect();
        let best = levels
            .iter()
            .enumerate()
            .min_by(|a, b| {
                let da = (a.1 - 0.5).abs();
                let db = (b.1 - 0.5).abs();
                da.partial_cmp(&db).unwrap().then((a.0 % 2).cmp(&(b.0 % 2)))
            })
            .unwrap();
        assert_eq!(best.0, 128);
        assert_eq!(q, *best.1);
    }

    #[test]
    fn exact_levels_are_fixed_points() {
        let grid = QuantGrid::Uniform { lo: 0.0, hi: 1.0, levels: 256 };
        let mut rng = stream(1, 0);
        for k in [0u32, 1, 17, 200, 255] {
            let v = k as f64 / 255.0;
            assert_eq!(grid.quantize_value(v, Rounding::Deterministic, &mut rng), v);
            assert_eq!(grid.quantize_value(v, Rounding::Stochastic, &mut rng), v);
        }
    }

    #[test]
    fn empty_and_zero_inputs() {
        let mut rng = stream(2, 0);
        assert!(quantize(&[], &det(8), None, &mut rng).unwrap().is_empty());
        assert_eq!(quantize(&[0.0; 5], &det(8), None, &mut rng).unwrap(), vec![0.0; 5]);
        let lut = LookupTable::uniform(4).unwrap();
        let spec = QuantizerSpec { mode: QuantMode::Lut, ..det(8) };
        assert_eq!(quantize(&[0.0; 3], &spec, Some(&lut), &mut rng).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn lut_mode_requires_table() {
        let spec = QuantizerSpec { mode: QuantMode::Lut, ..det(8) };
        assert!(Quantizer::new(spec, None).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(QuantizerSpec { ema_gamma: 1.0, ..det(8) }.validate().is_err());
        assert!(QuantizerSpec { clip_percentile: 0.0, ..det(8) }.validate().is_err());
        assert!(QuantizerSpec { clip_percentile: 100.5, ..det(8) }.validate().is_err());
        assert!(det(0).validate().is_err());
    }

    #[test]
    fn percentile_clips_outliers() {
        let mut values: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
        values.push(50.0);
        let spec = QuantizerSpec { clip_percentile: 99.0, ..det(8) };
        let mut rng = stream(3, 0);
        let q = quantize(&values, &spec, None, &mut rng).unwrap();
        assert!(q.iter().all(|&v| v <= 1.0));
    }

    #[test]
    fn ema_tracks_running_range() {
        let spec = QuantizerSpec { mode: QuantMode::Ema, ema_gamma: 0.5, ..det(8) };
        let mut q = Quantizer::new(spec, None).unwrap();
        let mut rng = stream(4, 0);
        q.quantize(&[0.0, 1.0], &mut rng);
        assert_eq!(q.ema_range(), Some((0.0, 1.0)));
        q.quantize(&[-1.0, 3.0], &mut rng);
        assert_eq!(q.ema_range(), Some((-0.5, 2.0)));
    }

    #[test]
    fn lut_floor_applies_to_magnitudes() {
        let lut = super::super::lut_synthesize(128, 256, 0.02).unwrap();
        let grid = QuantGrid::Lut { scale: 2.0, table: &lut };
        let mut rng = stream(5, 0);
        let q = grid.quantize_value(-0.001, Rounding::Deterministic, &mut rng);
        assert!((q + 0.04).abs() < 1e-15);
    }
}
