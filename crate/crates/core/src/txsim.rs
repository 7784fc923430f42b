//! A desk-scale GPT-style forward pass.
//!
//! Blocks are pre-norm: `x += Attn(LN(x))`, then `x += FF(LN(x))`, with a
//! causal softmax attention and a ReLU6 feed-forward. Every matrix product goes
//! through the selected [`Backend`]; softmax, layernorm, ReLU6 and residual
//! adds are always computed exactly.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::arch::ModelConfig;
use crate::matrix::Matrix;
use crate::optics::{LinearNoise, LookupTable, NoiseSpec, OpticalMatmul, PhotonAccounting, Rounding};
use crate::rng::{derive_seed, stream};
use crate::{Error, Result};

const LN_EPS: f64 = 1e-5;
const DEVIATION_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerWeights {
    /// `d x 3d`, columns ordered Q | K | V.
    pub qkv: Matrix,
    pub out_proj: Matrix,
    pub ff1: Matrix,
    pub ff2: Matrix,
    pub ln1_gain: Vec<f64>,
    pub ln1_bias: Vec<f64>,
    pub ln2_gain: Vec<f64>,
    pub ln2_bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformerWeights {
    pub config: ModelConfig,
    pub seed: u64,
    pub layers: Vec<LayerWeights>,
}

impl TransformerWeights {
    /// Sets every projection matrix to zero, keeping the layernorm parameters.
    pub fn zero_projections(&mut self) {
        for l in &mut self.layers {
            for m in [&mut l.qkv, &mut l.out_proj, &mut l.ff1, &mut l.ff2] {
                m.as_mut_slice().fill(0.0);
            }
        }
    }
}

/// Half-width of the Xavier-uniform interval.
pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    libm::sqrt(6.0 / (fan_in + fan_out) as f64)
}

fn xavier<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let a = xavier_bound(rows, cols);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-a..=a))
}

/// Xavier-uniform projections, unit layernorm gains and zero biases.
pub fn init_weights(config: &ModelConfig, seed: u64) -> Result<TransformerWeights> {
    config.validate()?;
    let d = config.d as usize;
    let layers = (0..config.layers)
        .map(|layer| {
            let mut rng = stream(derive_seed(seed, 0x5EED), layer);
            LayerWeights {
                qkv: xavier(d, 3 * d, &mut rng),
                out_proj: xavier(d, d, &mut rng),
                ff1: xavier(d, 4 * d, &mut rng),
                ff2: xavier(4 * d, d, &mut rng),
                ln1_gain: vec![1.0; d],
                ln1_bias: vec![0.0; d],
                ln2_gain: vec![1.0; d],
                ln2_bias: vec![0.0; d],
            }
        })
        .collect();
    Ok(TransformerWeights { config: config.clone(), seed, layers })
}

/// `n x d` Gaussian activations, standing in for token embeddings.
pub fn gaussian_input(config: &ModelConfig, sigma: f64, seed: u64) -> Result<Matrix> {
    config.validate()?;
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(format!("{e}")))?;
    let mut rng = stream(derive_seed(seed, 0x1A9u64), 0);
    Ok(Matrix::from_fn(config.n as usize, config.d as usize, |_, _| normal.sample(&mut rng)))
}

/// Settings for routing products through the simulated optics.
#[derive(Debug, Clone, Copy)]
pub struct OpticalBackend<'a> {
    pub noise: NoiseSpec,
    pub input_lut: Option<&'a LookupTable>,
    pub weight_lut: Option<&'a LookupTable>,
    pub rounding: Rounding,
    pub accounting: PhotonAccounting,
    pub force_four_pass: bool,
}

impl<'a> OpticalBackend<'a> {
    pub fn new(noise: NoiseSpec) -> Self {
        Self {
            noise,
            input_lut: None,
            weight_lut: None,
            rounding: Rounding::Deterministic,
            accounting: PhotonAccounting::PerPass,
            force_four_pass: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Backend<'a> {
    Digital,
    Optical(OpticalBackend<'a>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Qkv = 0,
    Scores = 1,
    Mix = 2,
    OutProj = 3,
    Ff1 = 4,
    Ff2 = 5,
}

impl Backend<'_> {
    fn matmul(&self, a: &Matrix, b: &Matrix, layer: u64, slot: Slot, head: u64) -> Result<Matrix> {
        match self {
            Backend::Digital => a.matmul(b),
            Backend::Optical(opt) => {
                let attention = matches!(slot, Slot::Scores | Slot::Mix);
                let percent = if attention {
                    opt.noise.systematic_percent_attn
                } else {
                    opt.noise.systematic_percent_ff
                };
                let op = OpticalMatmul {
                    noise: LinearNoise { systematic_percent: percent, photons_per_mac: opt.noise.photons_per_mac },
                    input_lut: opt.input_lut,
                    weight_lut: opt.weight_lut,
                    rounding: opt.rounding,
                    accounting: opt.accounting,
                    force_four_pass: opt.force_four_pass,
                };
                let op_id = ((layer * 8 + slot as u64) << 32) | head;
                op.run(a, b, &mut stream(opt.noise.seed, op_id))
            }
        }
    }
}

/// Activations and statistics recorded for one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerTrace {
    /// Residual stream after the attention block.
    pub post_attention: Matrix,
    /// Residual stream after the feed-forward block.
    pub post_ff: Matrix,
    /// Mean |output| of the attention block before the residual add.
    pub attention_mean_abs: f64,
    /// Mean |output| of the feed-forward block before the residual add.
    pub ff_mean_abs: f64,
    pub activation_min: f64,
    pub activation_max: f64,
    /// Largest `|row sum - 1|` over all softmax rows.
    pub softmax_row_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardTrace {
    pub layers: Vec<LayerTrace>,
    pub output: Matrix,
}

pub fn layer_norm(x: &Matrix, gain: &[f64], bias: &[f64]) -> Matrix {
    let d = x.cols();
    let mut out = x.clone();
    for r in 0..x.rows() {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let inv = 1.0 / libm::sqrt(var + LN_EPS);
        for (c, o) in out.row_mut(r).iter_mut().enumerate() {
            *o = (row[c] - mean) * inv * gain[c] + bias[c];
        }
    }
    out
}

/// Row-wise softmax; entries above the diagonal are masked when `causal`.
pub fn softmax_rows(scores: &Matrix, causal: bool) -> Matrix {
    let mut out = Matrix::zeros(scores.rows(), scores.cols());
    for r in 0..scores.rows() {
        let visible = if causal { (r + 1).min(scores.cols()) } else { scores.cols() };
        let row = &scores.row(r)[..visible];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|&v| libm::exp(v - max)).collect();
        let sum: f64 = exps.iter().sum();
        for (o, e) in out.row_mut(r).iter_mut().zip(exps) {
            *o = e / sum;
        }
    }
    out
}

pub fn relu6(v: f64) -> f64 {
    v.clamp(0.0, 6.0)
}

fn check_shapes(config: &ModelConfig, weights: &TransformerWeights, input: &Matrix) -> Result<()> {
    config.validate()?;
    let w = &weights.config;
    if (w.n, w.d, w.h, w.layers) != (config.n, config.d, config.h, config.layers) {
        return Err(Error::Dimension(format!(
            "weights were built for (n={}, d={}, h={}, L={}), not (n={}, d={}, h={}, L={})",
            w.n, w.d, w.h, w.layers, config.n, config.d, config.h, config.layers
        )));
    }
    let (n, d) = (config.n as usize, config.d as usize);
    if input.shape() != (n, d) {
        return Err(Error::Dimension(format!(
            "input is {}x{}, expected {n}x{d}",
            input.rows(),
            input.cols()
        )));
    }
    let ok = weights.layers.len() == config.layers as usize
        && weights.layers.iter().all(|l| {
            l.qkv.shape() == (d, 3 * d)
                && l.out_proj.shape() == (d, d)
                && l.ff1.shape() == (d, 4 * d)
                && l.ff2.shape() == (4 * d, d)
                && [&l.ln1_gain, &l.ln1_bias, &l.ln2_gain, &l.ln2_bias].iter().all(|v| v.len() == d)
        });
    if !ok {
        return Err(Error::Dimension("weight tensors do not match the configuration".into()));
    }
    Ok(())
}

pub fn forward(
    config: &ModelConfig,
    weights: &TransformerWeights,
    input: &Matrix,
    backend: &Backend<'_>,
) -> Result<ForwardTrace> {
    check_shapes(config, weights, input)?;
    let (n, d) = (config.n as usize, config.d as usize);
    let heads = config.h as usize;
    let dh = d / heads;
    let scale = 1.0 / libm::sqrt(dh as f64);

    let mut x = input.clone();
    let mut layers = Vec::with_capacity(weights.layers.len());
    for (li, lw) in weights.layers.iter().enumerate() {
        let li = li as u64;

        let normed = layer_norm(&x, &lw.ln1_gain, &lw.ln1_bias);
        let qkv = backend.matmul(&normed, &lw.qkv, li, Slot::Qkv, 0)?;
        let mut mixed = Matrix::zeros(n, d);
        let mut softmax_row_error: f64 = 0.0;
        for head in 0..heads {
            let q = qkv.columns(head * dh, dh);
            let k = qkv.columns(d + head * dh, dh);
            let v = qkv.columns(2 * d + head * dh, dh);
            let scores = backend.matmul(&q, &k.transpose(), li, Slot::Scores, head as u64)?.scale(scale);
            let attn = softmax_rows(&scores, true);
            for r in 0..n {
                let s: f64 = attn.row(r).iter().sum();
                softmax_row_error = softmax_row_error.max((s - 1.0).abs());
            }
            let out = backend.matmul(&attn, &v, li, Slot::Mix, head as u64)?;
            mixed.set_columns(head * dh, &out);
        }
        let attn_out = backend.matmul(&mixed, &lw.out_proj, li, Slot::OutProj, 0)?;
        x = x.add(&attn_out)?;
        let post_attention = x.clone();

        let normed = layer_norm(&x, &lw.ln2_gain, &lw.ln2_bias);
        let hidden = backend.matmul(&normed, &lw.ff1, li, Slot::Ff1, 0)?.map(relu6);
        let (activation_min, activation_max) = hidden
            .as_slice()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let ff_out = backend.matmul(&hidden, &lw.ff2, li, Slot::Ff2, 0)?;
        x = x.add(&ff_out)?;

        layers.push(LayerTrace {
            post_attention,
            post_ff: x.clone(),
            attention_mean_abs: attn_out.mean_abs(),
            ff_mean_abs: ff_out.mean_abs(),
            activation_min,
            activation_max,
            softmax_row_error,
        });
    }
    Ok(ForwardTrace { layers, output: x })
}

/// `mean|noisy - clean| / (mean|clean| + 1e-12)`.
pub fn deviation(noisy: &Matrix, clean: &Matrix) -> Result<f64> {
    let diff = noisy.sub(clean)?;
    Ok(diff.mean_abs() / (clean.mean_abs() + DEVIATION_EPS))
}

/// Output deviation over a grid of systematic-noise levels, indexed `[ff][attn]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSurface {
    pub ff_percents: Vec<f64>,
    pub attn_percents: Vec<f64>,
    pub seed: u64,
    pub deviation: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ff_percent: f64,
    pub attn_percent: f64,
    pub seed: u64,
    pub deviation: f64,
}

/// Runs the optical forward pass for every `(ff%, attn%)` pair and compares
/// the final activations against the digital pass.
///
/// All cells share the noise seed, so each product draws the same underlying
/// random numbers in every cell and only their scale changes.
pub fn noise_sweep(
    config: &ModelConfig,
    weights: &TransformerWeights,
    input: &Matrix,
    ff_grid: &[f64],
    attn_grid: &[f64],
    photons: f64,
    seed: u64,
) -> Result<SweepSurface> {
    if ff_grid.is_empty() || attn_grid.is_empty() {
        return Err(Error::InvalidArgument("noise grids must not be empty".into()));
    }
    let clean = forward(config, weights, input, &Backend::Digital)?.output;
    let mut surface = Vec::with_capacity(ff_grid.len());
    for &ff in ff_grid {
        let mut row = Vec::with_capacity(attn_grid.len());
        for &attn in attn_grid {
            let noise = NoiseSpec {
                systematic_percent_ff: ff,
                systematic_percent_attn: attn,
                photons_per_mac: photons,
                seed,
            };
            noise.validate()?;
            let out = forward(config, weights, input, &Backend::Optical(OpticalBackend::new(noise)))?.output;
            row.push(deviation(&out, &clean)?);
        }
        surface.push(row);
    }
    Ok(SweepSurface { ff_percents: ff_grid.to_vec(), attn_percents: attn_grid.to_vec(), seed, deviation: surface })
}

/// Flattens sweeps over several seeds into `(ff, attn, seed, deviation)` rows.
pub fn sweep_rows(surfaces: &[SweepSurface]) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for s in surfaces {
        for (i, &ff) in s.ff_percents.iter().enumerate() {
            for (j, &attn) in s.attn_percents.iter().enumerate() {
                rows.push(SweepRow { ff_percent: ff, attn_percent: attn, seed: s.seed, deviation: s.deviation[i][j] });
            }
        }
    }
    rows
}
