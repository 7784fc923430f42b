use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Clone, Parser)]
#[command(name = "photonsim", version, about = "Optical Transformer simulation and energy estimates")]
pub struct Cli {
    /// Seed for weights, inputs and noise.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory [default: .]
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Hardware profile JSON; omitted fields keep their defaults.
    #[arg(long, global = true, value_name = "JSON")]
    pub profile: Option<PathBuf>,
    /// Photon policy JSON, or one of: default, inverse_d, percentile_clipping.
    #[arg(long, global = true, value_name = "JSON")]
    pub policy: Option<String>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Both)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        self != Format::Csv
    }

    pub fn csv(self) -> bool {
        self != Format::Json
    }

    fn as_str(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Per-inference energy and advantage over digital baselines.
    Energy(EnergyArgs),
    /// Digital and optical forward passes of a small model.
    Simulate(SimulateArgs),
    /// Output deviation over a grid of systematic-noise levels.
    Sweep(SweepArgs),
    /// Hardware needed to hold a feed-forward layer in place.
    Requirements(RequirementsArgs),
    /// Energy advantage when weights are chunked through limited memory.
    Chunking(ChunkingArgs),
    /// List the model catalogue.
    Catalogue,
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Energy(_) => "energy",
            Command::Simulate(_) => "simulate",
            Command::Sweep(_) => "sweep",
            Command::Requirements(_) => "requirements",
            Command::Chunking(_) => "chunking",
            Command::Catalogue => "catalogue",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelSelect {
    /// Catalogue model name (repeatable).
    #[arg(long = "model", value_name = "NAME")]
    pub models: Vec<String>,
    /// Model config JSON `{name, n, d, h, L}` (repeatable).
    #[arg(long = "config", value_name = "FILE")]
    pub configs: Vec<PathBuf>,
    /// Every catalogue model.
    #[arg(long)]
    pub all: bool,
}

impl ModelSelect {
    pub fn is_empty(&self) -> bool {
        self.models.is_empty() && self.configs.is_empty() && !self.all
    }
}

#[derive(Debug, Clone, Args)]
pub struct EnergyArgs {
    #[command(flatten)]
    pub select: ModelSelect,
    /// Use the projected future electronics.
    #[arg(long)]
    pub future: bool,
    /// Baseline name (a100, next_gen_gpu) or J/MAC (repeatable) [default: a100, next_gen_gpu]
    #[arg(long = "baseline", value_name = "NAME|J")]
    pub baselines: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ShapeArgs {
    /// Catalogue model to take the shape from.
    #[arg(long)]
    pub model: Option<String>,
    /// Model config JSON.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Sequence length [default: 32]
    #[arg(long)]
    pub n: Option<u64>,
    /// Width [default: 64]
    #[arg(long)]
    pub d: Option<u64>,
    /// Attention heads [default: 4]
    #[arg(long)]
    pub heads: Option<u64>,
    /// Layers [default: 2]
    #[arg(long)]
    pub layers: Option<u64>,
    /// Standard deviation of the Gaussian input activations.
    #[arg(long, default_value_t = 0.02)]
    pub input_sigma: f64,
    /// Run shapes with n*d above 2^20.
    #[arg(long)]
    pub allow_large: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RoundingArg {
    Deterministic,
    Stochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AccountingArg {
    PerPass,
    Split,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
    /// Noise JSON `{systematic_percent_ff, systematic_percent_attn, photons_per_mac, seed}`.
    #[arg(long, value_name = "FILE")]
    pub noise: Option<PathBuf>,
    /// Systematic error (%) on the weight products (QKV, projection, FF)
    #[arg(long, value_name = "PERCENT")]
    pub ff_percent: Option<f64>,
    /// Systematic error (%) on the two attention products
    #[arg(long, value_name = "PERCENT")]
    pub attn_percent: Option<f64>,
    /// Photons per MAC; `inf` disables shot noise.
    #[arg(long)]
    pub photons: Option<f64>,
    /// `level_index,value` CSV for the input display.
    #[arg(long, value_name = "CSV")]
    pub input_lut: Option<PathBuf>,
    /// `level_index,value` CSV for the weight modulator.
    #[arg(long, value_name = "CSV")]
    pub weight_lut: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = RoundingArg::Deterministic)]
    pub rounding: RoundingArg,
    #[arg(long, value_enum, default_value_t = AccountingArg::PerPass)]
    pub accounting: AccountingArg,
    /// Always run the four non-negative passes.
    #[arg(long)]
    pub four_pass: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
    /// Feed-forward noise levels in percent, comma separated.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub ff: Vec<f64>,
    /// Attention noise levels in percent, comma separated.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub attn: Vec<f64>,
    /// Number of seeds, starting at --seed.
    #[arg(long, default_value_t = 4)]
    pub seeds: u64,
    #[arg(long, default_value_t = f64::INFINITY)]
    pub photons: f64,
}

#[derive(Debug, Clone, Args)]
pub struct RequirementsArgs {
    #[command(flatten)]
    pub select: ModelSelect,
    /// Weights held by one core.
    #[arg(long, default_value = "1e7", value_parser = parse_count)]
    pub core_size: u128,
}

#[derive(Debug, Clone, Args)]
pub struct ChunkingArgs {
    #[command(flatten)]
    pub select: ModelSelect,
    /// Weights storable in place, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1e8,1e9,1e10", value_parser = parse_count)]
    pub memory: Vec<u128>,
    /// Batch sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000,10000,100000,1000000", value_parser = parse_count)]
    pub batch: Vec<u128>,
    /// J/bit for activation traffic between processors [default: profile e_read_offchip]
    #[arg(long)]
    pub dram: Option<f64>,
    /// Digital baseline name or J/MAC.
    #[arg(long, default_value = "a100")]
    pub baseline: String,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

/// Accepts integers and integral scientific notation (`1e7`).
pub fn parse_count(s: &str) -> Result<u128, String> {
    if let Ok(v) = s.parse::<u128>() {
        return Ok(v);
    }
    let f: f64 = s.parse().map_err(|_| format!("'{s}' is not a count"))?;
    if f.is_finite() && f >= 0.0 && f.fract() == 0.0 && f < 3.4e38 {
        Ok(f as u128)
    } else {
        Err(format!("'{s}' is not a whole non-negative number"))
    }
}

fn abs_path(p: &Path) -> String {
    std::fs::canonicalize(p)
        .or_else(|_| std::env::current_dir().map(|d| d.join(p)))
        .unwrap_or_else(|_| p.to_path_buf())
        .display()
        .to_string()
}

fn push_select(argv: &mut Vec<String>, s: &ModelSelect) {
    for m in &s.models {
        argv.extend(["--model".into(), m.clone()]);
    }
    for c in &s.configs {
        argv.extend(["--config".into(), abs_path(c)]);
    }
    if s.all {
        argv.push("--all".into());
    }
}

fn push_shape(argv: &mut Vec<String>, s: &ShapeArgs) {
    if let Some(m) = &s.model {
        argv.extend(["--model".into(), m.clone()]);
    }
    if let Some(c) = &s.config {
        argv.extend(["--config".into(), abs_path(c)]);
    }
    for (flag, v) in [("--n", s.n), ("--d", s.d), ("--heads", s.heads), ("--layers", s.layers)] {
        if let Some(v) = v {
            argv.extend([flag.into(), v.to_string()]);
        }
    }
    argv.extend(["--input-sigma".into(), s.input_sigma.to_string()]);
    if s.allow_large {
        argv.push("--allow-large".into());
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl Cli {
    /// Arguments that reproduce this invocation, with absolute paths.
    pub fn canonical_args(&self) -> Vec<String> {
        let mut a = vec!["--seed".to_string(), self.seed.to_string()];
        let out = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        a.extend(["--out".into(), abs_path(&out)]);
        if let Some(p) = &self.profile {
            a.extend(["--profile".into(), abs_path(p)]);
        }
        if let Some(p) = &self.policy {
            let v = if crate::io::named_policy(p).is_some() && !Path::new(p).exists() { p.clone() } else { abs_path(Path::new(p)) };
            a.extend(["--policy".into(), v]);
        }
        a.extend(["--format".into(), self.format.as_str().into()]);
        a.push(self.command.name().into());
        match &self.command {
            Command::Energy(e) => {
                push_select(&mut a, &e.select);
                if e.future {
                    a.push("--future".into());
                }
                for b in &e.baselines {
                    a.extend(["--baseline".into(), b.clone()]);
                }
            }
            Command::Simulate(s) => {
                push_shape(&mut a, &s.shape);
                if let Some(p) = &s.noise {
                    a.extend(["--noise".into(), abs_path(p)]);
                }
                for (flag, v) in [("--ff-percent", s.ff_percent), ("--attn-percent", s.attn_percent), ("--photons", s.photons)] {
                    if let Some(v) = v {
                        a.extend([flag.into(), v.to_string()]);
                    }
                }
                for (flag, p) in [("--input-lut", &s.input_lut), ("--weight-lut", &s.weight_lut)] {
                    if let Some(p) = p {
                        a.extend([flag.into(), abs_path(p)]);
                    }
                }
                let rounding = s.rounding.to_possible_value().expect("no skipped variants");
                let accounting = s.accounting.to_possible_value().expect("no skipped variants");
                a.extend(["--rounding".into(), rounding.get_name().into()]);
                a.extend(["--accounting".into(), accounting.get_name().into()]);
                if s.four_pass {
                    a.push("--four-pass".into());
                }
            }
            Command::Sweep(s) => {
                push_shape(&mut a, &s.shape);
                a.extend(["--ff".into(), join(&s.ff), "--attn".into(), join(&s.attn)]);
                a.extend(["--seeds".into(), s.seeds.to_string(), "--photons".into(), s.photons.to_string()]);
            }
            Command::Requirements(r) => {
                push_select(&mut a, &r.select);
                a.extend(["--core-size".into(), r.core_size.to_string()]);
            }
            Command::Chunking(c) => {
                push_select(&mut a, &c.select);
                a.extend(["--memory".into(), join(&c.memory), "--batch".into(), join(&c.batch)]);
                if let Some(d) = c.dram {
                    a.extend(["--dram".into(), d.to_string()]);
                }
                a.extend(["--baseline".into(), c.baseline.clone()]);
            }
            Command::Catalogue => {}
            Command::Replay(r) => a.push(abs_path(&r.manifest)),
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_accept_scientific_notation() {
        assert_eq!(parse_count("1e7"), Ok(10_000_000));
        assert_eq!(parse_count("42"), Ok(42));
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
    }

    #[test]
    fn canonical_args_parse_back() {
        let cli = Cli::try_parse_from([
            "photonsim", "--seed", "7", "sweep", "--ff", "0,5", "--attn", "0,2.5", "--n", "8", "--d", "16",
        ])
        .unwrap();
        let again = Cli::try_parse_from(std::iter::once("photonsim".to_string()).chain(cli.canonical_args())).unwrap();
        assert_eq!(again.canonical_args(), cli.canonical_args());
        let Command::Sweep(s) = again.command else { panic!("not a sweep") };
        assert_eq!(s.attn, vec![0.0, 2.5]);
        assert!(s.photons.is_infinite());
    }
}
