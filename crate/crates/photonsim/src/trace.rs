//! Forward traces as JSON with row-major nested arrays.

use photonsim_core::arch::ModelConfig;
use photonsim_core::optics::NoiseSpec;
use photonsim_core::txsim::ForwardTrace;
use photonsim_core::Matrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerTap {
    pub post_attention: Vec<Vec<f64>>,
    pub post_ff: Vec<Vec<f64>>,
    pub attention_mean_abs: f64,
    pub ff_mean_abs: f64,
    pub activation_min: f64,
    pub activation_max: f64,
    pub softmax_row_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub config: ModelConfig,
    pub seed: u64,
    /// `digital` or `optical`.
    pub backend: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    pub input: Vec<Vec<f64>>,
    pub layers: Vec<LayerTap>,
    pub output: Vec<Vec<f64>>,
}

impl TraceFile {
    pub fn new(
        config: &ModelConfig,
        seed: u64,
        noise: Option<NoiseSpec>,
        input: &Matrix,
        trace: &ForwardTrace,
    ) -> Self {
        Self {
            config: config.clone(),
            seed,
            backend: if noise.is_some() { "optical" } else { "digital" }.into(),
            noise,
            input: input.to_rows(),
            layers: trace
                .layers
                .iter()
                .map(|l| LayerTap {
                    post_attention: l.post_attention.to_rows(),
                    post_ff: l.post_ff.to_rows(),
                    attention_mean_abs: l.attention_mean_abs,
                    ff_mean_abs: l.ff_mean_abs,
                    activation_min: l.activation_min,
                    activation_max: l.activation_max,
                    softmax_row_error: l.softmax_row_error,
                })
                .collect(),
            output: trace.output.to_rows(),
        }
    }
}
