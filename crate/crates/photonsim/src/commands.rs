use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use photonsim_core::arch::{compute_breakdown, find_model, hardware_requirements, ModelConfig};
use photonsim_core::energy::{
    baseline_by_name, chunked_gpu_energy, chunked_onn_energy, default_profile, future_profile, total_energy,
    Category, ChunkingScenario, EnergyReport, HardwareProfile, PhotonPolicy, BASELINES,
};
use photonsim_core::optics::{NoiseSpec, PhotonAccounting, Rounding};
use photonsim_core::txsim::{
    deviation, forward, gaussian_input, init_weights, noise_sweep, sweep_rows, Backend, OpticalBackend,
};
use serde_json::{json, Map, Value};

use crate::cli::{
    AccountingArg, ChunkingArgs, Cli, Command, EnergyArgs, ModelSelect, RequirementsArgs, RoundingArg, ShapeArgs,
    SimulateArgs, SweepArgs,
};
use crate::error::{CliError, Result};
use crate::float::fmt;
use crate::io;
use crate::manifest::{self, RunManifest};
use crate::trace::TraceFile;

/// Largest `n * d` simulated without `--allow-large`.
pub const DESK_LIMIT: u64 = 1 << 20;

/// Models whose requirements are listed when none are selected.
pub const REQUIREMENT_MODELS: [&str; 7] =
    ["FUTURE-4q", "FUTURE-129T", "FUTURE-16T", "FUTURE-2.4T", "PaLM-like-540B", "MT-NLG-530B", "GPT3-175B"];

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub stdout: String,
    pub outputs: Vec<PathBuf>,
    pub manifest: Option<PathBuf>,
}

struct Ctx<'a> {
    cli: &'a Cli,
    out: PathBuf,
    outputs: Vec<PathBuf>,
    config_paths: Vec<String>,
    resolved: Map<String, Value>,
    stdout: String,
}

impl<'a> Ctx<'a> {
    fn new(cli: &'a Cli) -> Self {
        Self {
            cli,
            out: cli.out.clone().unwrap_or_else(|| PathBuf::from(".")),
            outputs: Vec::new(),
            config_paths: Vec::new(),
            resolved: Map::new(),
            stdout: String::new(),
        }
    }

    fn emit(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out.join(name);
        io::write_atomic(&path, bytes)?;
        self.outputs.push(path);
        Ok(())
    }

    fn note_path(&mut self, p: &Path) {
        self.config_paths.push(std::fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf()).display().to_string());
    }

    fn resolve(&mut self, key: &str, value: impl serde::Serialize) {
        self.resolved.insert(key.into(), serde_json::to_value(value).expect("settings serialize"));
    }

    fn profile(&mut self) -> Result<HardwareProfile> {
        let p = match &self.cli.profile {
            Some(path) => {
                self.note_path(path);
                io::read_profile(path)?
            }
            None => default_profile(),
        };
        Ok(p)
    }

    fn policy(&mut self) -> Result<PhotonPolicy> {
        let p = match &self.cli.policy {
            Some(spec) => {
                if io::named_policy(spec).is_none() || Path::new(spec).exists() {
                    self.note_path(Path::new(spec));
                }
                io::read_policy(spec)?
            }
            None => PhotonPolicy::default(),
        };
        self.resolve("policy", &p);
        Ok(p)
    }

    fn finish(mut self) -> Result<Outcome> {
        let command = self.cli.command.name();
        let path = manifest::manifest_path(&self.out, command);
        let m = RunManifest {
            command: command.into(),
            argv: self.cli.canonical_args(),
            resolved: Value::Object(std::mem::take(&mut self.resolved)),
            config_paths: self.config_paths.clone(),
            seed: self.cli.seed,
            outputs: self.outputs.iter().map(|p| p.display().to_string()).collect(),
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp: manifest::timestamp(),
        };
        manifest::write(&path, &m)?;
        Ok(Outcome { stdout: self.stdout, outputs: self.outputs, manifest: Some(path) })
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    let mut ctx = Ctx::new(cli);
    match &cli.command {
        Command::Energy(a) => energy(&mut ctx, a)?,
        Command::Simulate(a) => simulate(&mut ctx, a)?,
        Command::Sweep(a) => sweep(&mut ctx, a)?,
        Command::Requirements(a) => requirements(&mut ctx, a)?,
        Command::Chunking(a) => chunking(&mut ctx, a)?,
        Command::Catalogue => catalogue(&mut ctx)?,
        Command::Replay(_) => unreachable!("replay is dispatched before execution"),
    }
    ctx.finish()
}

fn unknown_model(name: &str, catalogue: &[ModelConfig]) -> CliError {
    let known = catalogue.iter().map(|m| m.name.as_str()).collect::<Vec<_>>().join(", ");
    CliError::UnknownModel { name: name.into(), known }
}

fn select_models(ctx: &mut Ctx<'_>, select: &ModelSelect) -> Result<Vec<ModelConfig>> {
    let catalogue = io::catalogue()?;
    let mut models = Vec::new();
    if select.all {
        models.extend(catalogue.iter().cloned());
    }
    for name in &select.models {
        models.push(find_model(&catalogue, name).ok_or_else(|| unknown_model(name, &catalogue))?.clone());
    }
    for path in &select.configs {
        ctx.note_path(path);
        models.push(io::read_model_config(path)?);
    }
    Ok(models)
}

fn baseline(spec: &str) -> Result<(String, f64)> {
    if let Some(b) = baseline_by_name(spec) {
        return Ok((b.name.into(), b.j_per_mac));
    }
    match spec.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok((spec.into(), v)),
        _ => Err(CliError::Usage(format!(
            "baseline '{spec}' is neither a positive J/MAC value nor one of: {}",
            BASELINES.iter().map(|b| b.name).collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn report_json(r: &EnergyReport, cfg: &ModelConfig) -> Value {
    let categories: Map<String, Value> =
        Category::ALL.iter().map(|&c| (c.as_str().to_string(), json!(r.category_total(c)))).collect();
    json!({
        "config": cfg,
        "total_joules": r.total(),
        "category_totals": categories,
        "report": r,
    })
}

fn energy(ctx: &mut Ctx<'_>, args: &EnergyArgs) -> Result<()> {
    if args.select.is_empty() {
        return Err(CliError::Usage("choose models with --model, --config or --all".into()));
    }
    let models = select_models(ctx, &args.select)?;
    let base = ctx.profile()?;
    let profile = if args.future { future_profile(&base) } else { base };
    ctx.resolve("profile", profile);
    ctx.resolve("future", args.future);
    let policy = ctx.policy()?;
    let baselines: Vec<(String, f64)> = if args.baselines.is_empty() {
        BASELINES.iter().map(|b| (b.name.to_string(), b.j_per_mac)).collect()
    } else {
        args.baselines.iter().map(|s| baseline(s)).collect::<Result<_>>()?
    };
    ctx.resolve("baselines", &baselines);

    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for cfg in &models {
        let mut r = total_energy(cfg, &profile, &policy)?;
        for (name, j) in &baselines {
            r = r.with_advantage(name.clone(), *j);
        }
        let mut line = format!("{}: {} J, {} MACs", cfg.name, fmt(r.total()), r.total_macs);
        for a in &r.advantages {
            let _ = write!(line, ", {} {}x", a.baseline, fmt(a.ratio));
        }
        ctx.stdout.push_str(&line);
        ctx.stdout.push('\n');
        for c in &r.classes {
            for cat in Category::ALL {
                rows.push(vec![cfg.name.clone(), c.class.as_str().into(), cat.as_str().into(), fmt(c.get(cat))]);
            }
        }
        reports.push(report_json(&r, cfg));
    }
    if ctx.cli.format.json() {
        let doc = json!({ "profile": profile, "policy": policy, "reports": reports });
        ctx.emit("energy.json", &io::json_bytes(&doc))?;
    }
    if ctx.cli.format.csv() {
        ctx.emit("energy.csv", &io::csv_bytes(&["model", "layer_class", "category", "joules"], rows))?;
    }
    Ok(())
}

fn resolve_shape(ctx: &mut Ctx<'_>, s: &ShapeArgs) -> Result<ModelConfig> {
    let mut cfg = if let Some(path) = &s.config {
        ctx.note_path(path);
        io::read_model_config(path)?
    } else if let Some(name) = &s.model {
        let catalogue = io::catalogue()?;
        find_model(&catalogue, name).ok_or_else(|| unknown_model(name, &catalogue))?.clone()
    } else {
        ModelConfig { name: "desk".into(), n: 32, d: 64, h: 4, layers: 2 }
    };
    cfg.n = s.n.unwrap_or(cfg.n);
    cfg.d = s.d.unwrap_or(cfg.d);
    cfg.h = s.heads.unwrap_or(cfg.h);
    cfg.layers = s.layers.unwrap_or(cfg.layers);
    cfg.validate()?;
    let size = cfg.n.saturating_mul(cfg.d);
    if size > DESK_LIMIT && !s.allow_large {
        return Err(CliError::Limit(format!(
            "{}: n*d = {size} exceeds the desk-scale limit of {DESK_LIMIT}; pass --allow-large to run it anyway",
            cfg.name
        )));
    }
    if !(s.input_sigma > 0.0 && s.input_sigma.is_finite()) {
        return Err(CliError::Usage("--input-sigma must be positive".into()));
    }
    ctx.resolve("config", &cfg);
    ctx.resolve("input_sigma", s.input_sigma);
    Ok(cfg)
}

fn simulate(ctx: &mut Ctx<'_>, args: &SimulateArgs) -> Result<()> {
    let cfg = resolve_shape(ctx, &args.shape)?;
    let seed = ctx.cli.seed;
    let mut noise = match &args.noise {
        Some(path) => {
            ctx.note_path(path);
            io::read_noise(path)?
        }
        None => NoiseSpec::noiseless(seed),
    };
    noise.systematic_percent_ff = args.ff_percent.unwrap_or(noise.systematic_percent_ff);
    noise.systematic_percent_attn = args.attn_percent.unwrap_or(noise.systematic_percent_attn);
    noise.photons_per_mac = args.photons.unwrap_or(noise.photons_per_mac);
    noise.validate()?;
    ctx.resolve("noise", noise);

    let mut luts = Vec::new();
    for path in [&args.input_lut, &args.weight_lut] {
        luts.push(match path {
            Some(p) => {
                ctx.note_path(p);
                Some(io::read_lut(p)?)
            }
            None => None,
        });
    }

    let weights = init_weights(&cfg, seed)?;
    let input = gaussian_input(&cfg, args.shape.input_sigma, seed)?;
    let clean = forward(&cfg, &weights, &input, &Backend::Digital)?;
    let backend = OpticalBackend {
        input_lut: luts[0].as_ref(),
        weight_lut: luts[1].as_ref(),
        rounding: match args.rounding {
            RoundingArg::Deterministic => Rounding::Deterministic,
            RoundingArg::Stochastic => Rounding::Stochastic,
        },
        accounting: match args.accounting {
            AccountingArg::PerPass => PhotonAccounting::PerPass,
            AccountingArg::Split => PhotonAccounting::SplitAcrossPasses,
        },
        force_four_pass: args.four_pass,
        ..OpticalBackend::new(noise)
    };
    let noisy = forward(&cfg, &weights, &input, &Backend::Optical(backend))?;

    let dev = deviation(&noisy.output, &clean.output)?;
    let mut per_layer = Vec::new();
    for (i, (a, b)) in noisy.layers.iter().zip(&clean.layers).enumerate() {
        per_layer.push((i, deviation(&a.post_attention, &b.post_attention)?, deviation(&a.post_ff, &b.post_ff)?));
    }
    let _ = writeln!(ctx.stdout, "{}: output deviation {}", cfg.name, fmt(dev));

    ctx.emit("trace_digital.json", &io::json_bytes(&TraceFile::new(&cfg, seed, None, &input, &clean)))?;
    ctx.emit("trace_optical.json", &io::json_bytes(&TraceFile::new(&cfg, seed, Some(noise), &input, &noisy)))?;
    if ctx.cli.format.json() {
        let layers: Vec<Value> = per_layer
            .iter()
            .map(|&(layer, pa, pf)| json!({ "layer": layer, "post_attention": pa, "post_ff": pf }))
            .collect();
        let doc = json!({ "config": cfg, "seed": seed, "noise": noise, "deviation": dev, "layers": layers });
        ctx.emit("deviation.json", &io::json_bytes(&doc))?;
    }
    if ctx.cli.format.csv() {
        let mut rows = Vec::new();
        for &(layer, pa, pf) in &per_layer {
            rows.push(vec![layer.to_string(), "post_attention".into(), fmt(pa)]);
            rows.push(vec![layer.to_string(), "post_ff".into(), fmt(pf)]);
        }
        rows.push(vec!["output".into(), "output".into(), fmt(dev)]);
        ctx.emit("deviation.csv", &io::csv_bytes(&["layer", "tap", "deviation"], rows))?;
    }
    Ok(())
}

fn sweep(ctx: &mut Ctx<'_>, args: &SweepArgs) -> Result<()> {
    if args.ff.is_empty() || args.attn.is_empty() {
        return Err(CliError::Usage("--ff and --attn need at least one level each".into()));
    }
    if args.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    if args.ff.iter().chain(&args.attn).any(|p| p.is_nan() || *p < 0.0) {
        return Err(CliError::Usage("noise levels must be non-negative percentages".into()));
    }
    let cfg = resolve_shape(ctx, &args.shape)?;
    let first = ctx.cli.seed;
    let mut surfaces = Vec::new();
    for seed in first..first.saturating_add(args.seeds) {
        let weights = init_weights(&cfg, seed)?;
        let input = gaussian_input(&cfg, args.shape.input_sigma, seed)?;
        surfaces.push(noise_sweep(&cfg, &weights, &input, &args.ff, &args.attn, args.photons, seed)?);
    }
    let rows = sweep_rows(&surfaces);
    let _ = writeln!(
        ctx.stdout,
        "{}: {} cells x {} seeds = {} rows",
        cfg.name,
        args.ff.len() * args.attn.len(),
        args.seeds,
        rows.len()
    );
    // the surface is always written as CSV; JSON adds the per-seed matrices
    let table = rows
        .iter()
        .map(|r| vec![fmt(r.ff_percent), fmt(r.attn_percent), r.seed.to_string(), fmt(r.deviation)])
        .collect();
    ctx.emit("sweep.csv", &io::csv_bytes(&["ff_percent", "attn_percent", "seed", "deviation"], table))?;
    if ctx.cli.format.json() {
        let photons = if args.photons.is_infinite() { json!("inf") } else { json!(args.photons) };
        let doc = json!({ "config": cfg, "photons_per_mac": photons, "surfaces": surfaces });
        ctx.emit("sweep.json", &io::json_bytes(&doc))?;
    }
    Ok(())
}

fn human_bytes(b: u128) -> String {
    let v = b as f64;
    for (unit, scale) in [("TB", 1e12), ("GB", 1e9), ("MB", 1e6), ("kB", 1e3)] {
        if v >= scale {
            return format!("{:.3} {unit}", v / scale);
        }
    }
    format!("{b} B")
}

fn requirements(ctx: &mut Ctx<'_>, args: &RequirementsArgs) -> Result<()> {
    if args.core_size == 0 {
        return Err(CliError::Usage("--core-size must be at least 1".into()));
    }
    let models = if args.select.is_empty() {
        let catalogue = io::catalogue()?;
        REQUIREMENT_MODELS
            .iter()
            .map(|name| find_model(&catalogue, name).cloned().ok_or_else(|| unknown_model(name, &catalogue)))
            .collect::<Result<Vec<_>>>()?
    } else {
        select_models(ctx, &args.select)?
    };
    ctx.resolve("core_size", args.core_size.to_string());
    let mut rows = Vec::new();
    let mut docs = Vec::new();
    let _ = writeln!(
        ctx.stdout,
        "{:<16} {:>14} {:>14} {:>12} {:>12}",
        "model", "input_elements", "detectors", "mvm_cores", "sram"
    );
    for cfg in &models {
        let r = hardware_requirements(cfg, args.core_size)?;
        let _ = writeln!(
            ctx.stdout,
            "{:<16} {:>14} {:>14} {:>12} {:>12}",
            cfg.name,
            r.input_vector_elements,
            r.detectors,
            r.mvm_cores,
            human_bytes(r.sram_bytes)
        );
        rows.push(vec![
            cfg.name.clone(),
            cfg.n.to_string(),
            cfg.d.to_string(),
            args.core_size.to_string(),
            r.input_vector_elements.to_string(),
            r.detectors.to_string(),
            r.mvm_cores.to_string(),
            r.sram_bytes.to_string(),
        ]);
        docs.push(json!({ "model": cfg.name, "n": cfg.n, "d": cfg.d, "core_size": args.core_size as u64, "requirements": r }));
    }
    if ctx.cli.format.csv() {
        let header =
            ["model", "n", "d", "core_size", "input_vector_elements", "detectors", "mvm_cores", "sram_bytes"];
        ctx.emit("requirements.csv", &io::csv_bytes(&header, rows))?;
    }
    if ctx.cli.format.json() {
        ctx.emit("requirements.json", &io::json_bytes(&docs))?;
    }
    Ok(())
}

fn chunking(ctx: &mut Ctx<'_>, args: &ChunkingArgs) -> Result<()> {
    if args.memory.is_empty() || args.batch.is_empty() {
        return Err(CliError::Usage("--memory and --batch need at least one value each".into()));
    }
    if args.memory.contains(&0) {
        return Err(CliError::Usage("--memory must be at least one weight".into()));
    }
    if args.batch.iter().any(|&b| b == 0 || b > u64::MAX as u128) {
        return Err(CliError::Usage("--batch values must be between 1 and 2^64-1".into()));
    }
    let models = if args.select.is_empty() { io::catalogue()? } else { select_models(ctx, &args.select)? };
    let profile = ctx.profile()?;
    ctx.resolve("profile", profile);
    let policy = ctx.policy()?;
    let (base_name, j_per_mac) = baseline(&args.baseline)?;
    let dram = args.dram.unwrap_or(profile.e_read_offchip);
    if !(dram >= 0.0 && dram.is_finite()) {
        return Err(CliError::Usage("--dram must be a finite energy >= 0".into()));
    }
    ctx.resolve("baseline", (&base_name, j_per_mac));
    ctx.resolve("dram_j_per_bit", dram);

    let mut rows = Vec::new();
    let mut docs = Vec::new();
    for cfg in &models {
        let macs = compute_breakdown(cfg)?.total_macs() as f64;
        for &memory in &args.memory {
            for &batch in &args.batch {
                let s = ChunkingScenario::new(memory, batch as u64, profile.e_read_offchip)?;
                let onn = chunked_onn_energy(cfg, &profile, &policy, &s)?.total();
                let gpu = chunked_gpu_energy(cfg, &profile, j_per_mac, &s, dram)?;
                let adv = macs * j_per_mac / onn;
                let adv_multi = gpu / onn;
                rows.push(vec![
                    cfg.name.clone(),
                    cfg.parameter_count().to_string(),
                    memory.to_string(),
                    batch.to_string(),
                    s.chunks(cfg).to_string(),
                    fmt(onn),
                    fmt(gpu),
                    fmt(adv),
                    fmt(adv_multi),
                ]);
                docs.push(json!({
                    "model": cfg.name,
                    "parameters": cfg.parameter_count() as u64,
                    "memory_weights": memory as u64,
                    "batch_size": batch as u64,
                    "chunks": s.chunks(cfg) as u64,
                    "onn_joules": onn,
                    "gpu_joules": gpu,
                    "advantage": adv,
                    "advantage_vs_multi_gpu": adv_multi,
                }));
            }
        }
    }
    let _ = writeln!(
        ctx.stdout,
        "{} models x {} memory sizes x {} batch sizes vs {base_name}",
        models.len(),
        args.memory.len(),
        args.batch.len()
    );
    if ctx.cli.format.csv() {
        let header = [
            "model",
            "parameters",
            "memory_weights",
            "batch_size",
            "chunks",
            "onn_joules",
            "gpu_joules",
            "advantage",
            "advantage_vs_multi_gpu",
        ];
        ctx.emit("chunking.csv", &io::csv_bytes(&header, rows))?;
    }
    if ctx.cli.format.json() {
        ctx.emit("chunking.json", &io::json_bytes(&docs))?;
    }
    Ok(())
}

fn catalogue(ctx: &mut Ctx<'_>) -> Result<()> {
    let models = io::catalogue()?;
    let mut rows = Vec::new();
    for m in &models {
        let macs = compute_breakdown(m)?.total_macs();
        let _ = writeln!(
            ctx.stdout,
            "{:<16} n={:<5} d={:<7} h={:<4} L={:<4} params={}",
            m.name,
            m.n,
            m.d,
            m.h,
            m.layers,
            m.parameter_count()
        );
        rows.push(vec![
            m.name.clone(),
            m.n.to_string(),
            m.d.to_string(),
            m.h.to_string(),
            m.layers.to_string(),
            m.head_dim().to_string(),
            m.parameter_count().to_string(),
            macs.to_string(),
        ]);
    }
    if ctx.cli.format.csv() {
        let header = ["name", "n", "d", "h", "L", "head_dim", "parameters", "total_macs"];
        ctx.emit("catalogue.csv", &io::csv_bytes(&header, rows))?;
    }
    if ctx.cli.format.json() {
        ctx.emit("catalogue.json", &io::json_bytes(&models))?;
    }
    Ok(())
}

