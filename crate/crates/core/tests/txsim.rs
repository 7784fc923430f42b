use photonsim_core::arch::ModelConfig;
use photonsim_core::optics::NoiseSpec;
use photonsim_core::txsim::{
    deviation, forward, gaussian_input, init_weights, noise_sweep, xavier_bound, Backend, OpticalBackend,
};
use photonsim_core::Matrix;

type Rows = Vec<Vec<f64>>;

fn rows(m: &Matrix) -> Rows {
    m.to_rows()
}

fn mm(a: &Rows, b: &Rows) -> Rows {
    let mut out = vec![vec![0.0; b[0].len()]; a.len()];
    for i in 0..a.len() {
        for j in 0..b[0].len() {
            let mut s = 0.0;
            for l in 0..b.len() {
                s += a[i][l] * b[l][j];
            }
            out[i][j] = s;
        }
    }
    out
}

fn ln(x: &Rows, g: &[f64], b: &[f64]) -> Rows {
    x.iter()
        .map(|r| {
            let mu = r.iter().sum::<f64>() / r.len() as f64;
            let var = r.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / r.len() as f64;
            r.iter().enumerate().map(|(c, v)| (v - mu) / (var + 1e-5).sqrt() * g[c] + b[c]).collect()
        })
        .collect()
}

/// One pre-norm block written out longhand.
fn reference_layer(x: &Rows, w: &photonsim_core::txsim::LayerWeights, h: usize) -> Rows {
    let (n, d) = (x.len(), x[0].len());
    let dh = d / h;
    let a = ln(x, &w.ln1_gain, &w.ln1_bias);
    let qkv = mm(&a, &rows(&w.qkv));
    let mut mixed = vec![vec![0.0; d]; n];
    for head in 0..h {
        for i in 0..n {
            let mut scores = Vec::new();
            for j in 0..=i {
                let mut s = 0.0;
                for c in 0..dh {
                    s += qkv[i][head * dh + c] * qkv[j][d + head * dh + c];
                }
                scores.push(s / (dh as f64).sqrt());
            }
            let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
            let z: f64 = e.iter().sum();
            for c in 0..dh {
                let mut acc = 0.0;
                for j in 0..=i {
                    acc += e[j] / z * qkv[j][2 * d + head * dh + c];
                }
                mixed[i][head * dh + c] = acc;
            }
        }
    }
    let attn = mm(&mixed, &rows(&w.out_proj));
    let x1: Rows = x.iter().zip(&attn).map(|(r, s)| r.iter().zip(s).map(|(a, b)| a + b).collect()).collect();
    let b = ln(&x1, &w.ln2_gain, &w.ln2_bias);
    let hidden: Rows = mm(&b, &rows(&w.ff1)).into_iter().map(|r| r.into_iter().map(|v| v.clamp(0.0, 6.0)).collect()).collect();
    let ff = mm(&hidden, &rows(&w.ff2));
    x1.iter().zip(&ff).map(|(r, s)| r.iter().zip(s).map(|(a, b)| a + b).collect()).collect()
}

#[test]
fn forward_matches_longhand_layers() {
    for (n, d, h, seed) in [(4u64, 8u64, 2u64, 1u64), (7, 12, 3, 2), (5, 16, 4, 3)] {
        let cfg = ModelConfig::new("t", n, d, h, 2).unwrap();
        let w = init_weights(&cfg, seed).unwrap();
        let x = gaussian_input(&cfg, 1.0, seed).unwrap();
        let trace = forward(&cfg, &w, &x, &Backend::Digital).unwrap();
        let mut expected = rows(&x);
        for (li, lw) in w.layers.iter().enumerate() {
            expected = reference_layer(&expected, lw, h as usize);
            for (a, b) in trace.layers[li].post_ff.as_slice().iter().zip(expected.iter().flatten()) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "layer {li}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn trace_invariants() {
    let cfg = ModelConfig::new("t", 16, 32, 4, 3).unwrap();
    let w = init_weights(&cfg, 4).unwrap();
    let x = gaussian_input(&cfg, 1.0, 4).unwrap();
    let trace = forward(&cfg, &w, &x, &Backend::Digital).unwrap();
    for l in &trace.layers {
        assert!(l.softmax_row_error <= 1e-6);
        assert!(l.activation_min >= 0.0 && l.activation_max <= 6.0);
    }
    let bound = xavier_bound(32, 128);
    assert!(w.layers.iter().all(|l| l.ff1.as_slice().iter().all(|v| v.abs() <= bound)));
}

#[test]
fn noiseless_optics_reproduce_digital() {
    for seed in 0..4u64 {
        let cfg = ModelConfig::new("t", 8 + seed, 16, 2, 2).unwrap();
        let w = init_weights(&cfg, seed).unwrap();
        let x = gaussian_input(&cfg, 0.02, seed).unwrap();
        let clean = forward(&cfg, &w, &x, &Backend::Digital).unwrap();
        let mut opt = OpticalBackend::new(NoiseSpec::noiseless(seed));
        opt.force_four_pass = true;
        let four = forward(&cfg, &w, &x, &Backend::Optical(opt)).unwrap();
        assert!(deviation(&four.output, &clean.output).unwrap() < 1e-9);
        let direct = forward(&cfg, &w, &x, &Backend::Optical(OpticalBackend::new(NoiseSpec::noiseless(seed)))).unwrap();
        assert_eq!(direct, clean);
    }
}

fn sweep_setup(seed: u64) -> (ModelConfig, photonsim_core::txsim::TransformerWeights, Matrix) {
    let cfg = ModelConfig::new("sweep", 16, 32, 4, 2).unwrap();
    let w = init_weights(&cfg, seed).unwrap();
    let x = gaussian_input(&cfg, 0.02, seed).unwrap();
    (cfg, w, x)
}

#[test]
#[allow(clippy::needless_range_loop)]
fn deviation_grows_along_each_axis_on_average() {
    let grid = [0.0, 2.0, 5.0, 10.0];
    let seeds = 8u64;
    let mut mean = [[0.0; 4]; 4];
    for seed in 0..seeds {
        let (cfg, w, x) = sweep_setup(seed);
        let s = noise_sweep(&cfg, &w, &x, &grid, &grid, f64::INFINITY, seed).unwrap();
        assert_eq!(s.deviation[0][0], 0.0);
        for i in 0..4 {
            for j in 0..4 {
                mean[i][j] += s.deviation[i][j] / seeds as f64;
            }
        }
    }
    let mut inversions = 0;
    for i in 0..4 {
        for j in 0..3 {
            inversions += usize::from(mean[i][j + 1] < mean[i][j]);
            inversions += usize::from(mean[j + 1][i] < mean[j][i]);
        }
    }
    assert!(inversions <= 1, "{mean:?}");
}

#[test]
fn feed_forward_noise_hurts_more_than_attention_noise() {
    let mut ff_wins = 0;
    for seed in 0..16u64 {
        let (cfg, w, x) = sweep_setup(seed);
        let s = noise_sweep(&cfg, &w, &x, &[0.0, 5.0], &[0.0, 5.0], f64::INFINITY, seed).unwrap();
        ff_wins += usize::from(s.deviation[1][0] >= s.deviation[0][1]);
    }
    assert!(ff_wins >= 12, "ff noise dominated in {ff_wins}/16 seeds");
}

#[test]
fn empty_grid_is_rejected() {
    let (cfg, w, x) = sweep_setup(0);
    assert!(noise_sweep(&cfg, &w, &x, &[], &[1.0], f64::INFINITY, 0).is_err());
}
