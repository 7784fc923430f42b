use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-9;

/// Representable modulation levels of a display or modulator.
///
/// `levels` is indexed by drive level and may repeat values; `floor` is the
/// smallest transmission the device can produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "RawTable", try_from = "RawTable")]
pub struct LookupTable {
    levels: Vec<f64>,
    floor: f64,
    distinct: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawTable {
    levels: Vec<f64>,
    #[serde(default)]
    floor: Option<f64>,
}

impl From<LookupTable> for RawTable {
    fn from(t: LookupTable) -> Self {
        RawTable { levels: t.levels, floor: Some(t.floor) }
    }
}

impl TryFrom<RawTable> for LookupTable {
    type Error = Error;

    fn try_from(raw: RawTable) -> Result<Self> {
        let table = LookupTable::new(raw.levels)?;
        match raw.floor {
            Some(f) if (f - table.floor).abs() > NORMALIZATION_TOL => {
                Err(Error::Lut(format!("floor {f} does not match smallest level {}", table.floor)))
            }
            _ => Ok(table),
        }
    }
}

impl LookupTable {
    /// Validates an ascending table whose largest entry is 1.
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Lut("table has no levels".into()));
        }
        for (i, w) in levels.windows(2).enumerate() {
            if !(w[0] <= w[1]) {
                return Err(Error::Lut(format!("levels not ascending at index {}", i + 1)));
            }
        }
        if levels.iter().any(|v| !(0.0..=1.0 + NORMALIZATION_TOL).contains(v)) {
            return Err(Error::Lut("levels must lie in [0, 1]".into()));
        }
        let max = levels[levels.len() - 1];
        if (max - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Lut(format!("largest level is {max}, expected 1")));
        }
        let mut levels = levels;
        let last = levels.len() - 1;
        levels[last] = 1.0;
        let mut distinct = levels.clone();
        distinct.dedup();
        let floor = levels[0];
        Ok(Self { levels, floor, distinct })
    }

    /// `2^bits` evenly spaced levels on `[0, 1]`.
    pub fn uniform(bits: u32) -> Result<Self> {
        if bits == 0 || bits > 24 {
            return Err(Error::Lut(format!("unsupported bit depth {bits}")));
        }
        let n = 1usize << bits;
        Self::new((0..n).map(|i| i as f64 / (n - 1) as f64).collect())
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Sorted distinct values.
    pub fn distinct(&self) -> &[f64] {
        &self.distinct
    }

    pub fn unique_count(&self) -> usize {
        self.distinct.len()
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Nearest representable level; ties go to the even distinct index.
    pub fn nearest(&self, v: f64) -> f64 {
        let (i, j) = self.bracket_indices(v);
        if i == j {
            return self.distinct[i];
        }
        let (a, b) = (self.distinct[i], self.distinct[j]);
        let (da, db) = (v - a, b - v);
        if da < db || (da == db && i % 2 == 0) {
            a
        } else {
            b
        }
    }

    /// The two distinct levels around `v` (equal when `v` is on or past an end).
    pub fn bracket(&self, v: f64) -> (f64, f64) {
        let (i, j) = self.bracket_indices(v);
        (self.distinct[i], self.distinct[j])
    }

    fn bracket_indices(&self, v: f64) -> (usize, usize) {
        let d = &self.distinct;
        let last = d.len() - 1;
        if v <= d[0] {
            return (0, 0);
        }
        if v >= d[last] {
            return (last, last);
        }
        // first index with d[idx] >= v
        let idx = d.partition_point(|&x| x < v);
        if d[idx] == v {
            (idx, idx)
        } else {
            (idx - 1, idx)
        }
    }

    fn rebuild(mut self) -> Self {
        self.distinct = self.levels.clone();
        self.distinct.dedup();
        self
    }
}

/// A synthetic table with `unique_levels` distinct values spread evenly over
/// `[floor, 1]` (or `[0, 1]` when `floor` is zero), padded to `total_levels`
/// entries by snapping an even grid of drive levels to the nearest value.
pub fn lut_synthesize(unique_levels: usize, total_levels: usize, floor: f64) -> Result<LookupTable> {
    if unique_levels == 0 {
        return Err(Error::Lut("at least one unique level is required".into()));
    }
    if unique_levels > total_levels {
        return Err(Error::Lut(format!(
            "{unique_levels} unique levels do not fit in {total_levels} entries"
        )));
    }
    if !(0.0..1.0).contains(&floor) {
        return Err(Error::Lut(format!("floor {floor} must be in [0, 1)")));
    }
    let span = 1.0 - floor;
    let grid = |i: usize, count: usize| -> f64 {
        if count == 1 {
            1.0
        } else {
            floor + span * i as f64 / (count - 1) as f64
        }
    };
    let unique: Vec<f64> = (0..unique_levels).map(|i| grid(i, unique_levels)).collect();
    let levels = (0..total_levels)
        .map(|i| {
            let v = grid(i, total_levels);
            // nearest unique value, lower one on ties
            let k = if unique_levels == 1 {
                0
            } else {
                let pos = (v - floor) / span * (unique_levels - 1) as f64;
                let lo = libm::floor(pos) as usize;
                let lo = lo.min(unique_levels - 1);
                if lo + 1 < unique_levels && pos - lo as f64 > 0.5 {
                    lo + 1
                } else {
                    lo
                }
            };
            unique[k]
        })
        .collect();
    Ok(LookupTable { levels, floor: unique[0], distinct: Vec::new() }.rebuild())
}
