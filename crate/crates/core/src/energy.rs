//! Energy accounting for an optical accelerator with weights held in place.
//!
//! Every product of [`arch::layer_products`](crate::arch::layer_products) is
//! billed per loaded scalar (memory read, DAC, modulation) and per detected
//! scalar (amplifier, ADC, memory write). Optical energy is photons per MAC
//! times the photon energy; weight maintenance is a per-MAC cost; functions
//! computed digitally pay one memory read and one write per element.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::arch::{compute_breakdown, layer_products, ModelConfig, ProductClass, ProductShape};
use crate::{Error, Result};

/// Energy of one 1 eV photon, in joules.
pub const PHOTON_ENERGY_1EV: f64 = 1.602_176_634e-19;

/// Per-event energy costs and precisions of the modelled system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardwareProfile {
    /// J/bit, off-chip (DRAM) reads; used for streamed weights.
    pub e_read_offchip: f64,
    /// J/bit, SRAM reads of activations.
    pub e_read_sram: f64,
    /// J/bit, memory writes.
    pub e_write: f64,
    /// J per input sample.
    pub e_dac: f64,
    /// J/bit of input precision.
    pub e_mod: f64,
    /// J per detected sample.
    pub e_amp: f64,
    /// J per output sample.
    pub e_adc: f64,
    /// J per MAC for holding weights in place.
    pub e_maintain: f64,
    pub photon_energy: f64,
    /// Hz.
    pub clock: f64,
    pub input_bits: u32,
    pub weight_bits: u32,
    pub output_bits: u32,
    pub mem_bits_per_scalar: u32,
}

impl HardwareProfile {
    pub fn validate(&self) -> Result<()> {
        let energies = [
            ("e_read_offchip", self.e_read_offchip),
            ("e_read_sram", self.e_read_sram),
            ("e_write", self.e_write),
            ("e_dac", self.e_dac),
            ("e_mod", self.e_mod),
            ("e_amp", self.e_amp),
            ("e_adc", self.e_adc),
            ("e_maintain", self.e_maintain),
            ("photon_energy", self.photon_energy),
        ];
        for (name, v) in energies {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be a finite energy >= 0, got {v}")));
            }
        }
        if !(self.clock > 0.0) {
            return Err(Error::InvalidArgument("clock must be positive".into()));
        }
        for (name, b) in [
            ("input_bits", self.input_bits),
            ("weight_bits", self.weight_bits),
            ("output_bits", self.output_bits),
            ("mem_bits_per_scalar", self.mem_bits_per_scalar),
        ] {
            if b == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    fn mem_bits(&self) -> f64 {
        self.mem_bits_per_scalar as f64
    }

    /// `E_load = E_read + E_DAC + E_mod` for one scalar.
    pub fn load_energy(&self) -> f64 {
        self.mem_bits() * self.e_read_sram + self.e_dac + self.input_bits as f64 * self.e_mod
    }

    /// `E_det = E_amp + E_ADC + E_write` for one scalar.
    pub fn detect_energy(&self) -> f64 {
        self.e_amp + self.e_adc + self.mem_bits() * self.e_write
    }

    /// One read and one write of a scalar, for digitally computed functions.
    pub fn digital_access_energy(&self) -> f64 {
        self.mem_bits() * (self.e_read_sram + self.e_write)
    }

    /// Peak MAC rate of one core of `core_size` weights.
    pub fn peak_macs_per_second(&self, core_size: u64) -> f64 {
        core_size as f64 * self.clock
    }
}

/// Present-day component costs.
pub fn default_profile() -> HardwareProfile {
    HardwareProfile {
        e_read_offchip: 1e-12,
        e_read_sram: 0.3e-12,
        e_write: 0.3e-12,
        e_dac: 10e-12,
        e_mod: 1e-15,
        e_amp: 2.4e-12,
        e_adc: 3.17e-12,
        e_maintain: 0.002e-15,
        photon_energy: PHOTON_ENERGY_1EV,
        clock: 10e9,
        input_bits: 5,
        weight_bits: 8,
        output_bits: 7,
        mem_bits_per_scalar: 8,
    }
}

/// Projected electronics: free weight maintenance, converters 32x cheaper,
/// memory 5x cheaper, amplifiers 10x cheaper.
pub fn future_profile(base: &HardwareProfile) -> HardwareProfile {
    HardwareProfile {
        e_maintain: 0.0,
        e_dac: base.e_dac / 32.0,
        e_adc: base.e_adc / 32.0,
        e_read_offchip: base.e_read_offchip / 5.0,
        e_read_sram: base.e_read_sram / 5.0,
        e_write: base.e_write / 5.0,
        e_amp: base.e_amp / 10.0,
        ..*base
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhotonScaling {
    /// Photons per MAC fall as `1/d`: constant photons per dot product.
    InverseD,
    /// The reference photons per MAC at every width.
    Constant,
    /// Measured `(d, photons/MAC)` points, interpolated log-log; `1/d`
    /// beyond the ends.
    Table(Vec<(u64, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonPolicy {
    pub reference_d: u64,
    pub reference_photons_per_mac: f64,
    pub scaling: PhotonScaling,
}

impl Default for PhotonPolicy {
    /// 1500 photons/MAC at `d = 192`, scaled as `1/d`.
    fn default() -> Self {
        Self { reference_d: 192, reference_photons_per_mac: 1500.0, scaling: PhotonScaling::InverseD }
    }
}

impl PhotonPolicy {
    /// Photon counts reached with percentile-clipped models (120 at d=192,
    /// 40 at d=384).
    pub fn percentile_clipping() -> Self {
        Self {
            reference_d: 192,
            reference_photons_per_mac: 120.0,
            scaling: PhotonScaling::Table(alloc::vec![(192, 120.0), (384, 40.0)]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reference_d == 0 {
            return Err(Error::InvalidArgument("reference_d must be at least 1".into()));
        }
        if !(self.reference_photons_per_mac >= 0.0 && self.reference_photons_per_mac.is_finite()) {
            return Err(Error::InvalidArgument("reference_photons_per_mac must be finite and >= 0".into()));
        }
        if let PhotonScaling::Table(points) = &self.scaling {
            if points.is_empty() {
                return Err(Error::InvalidArgument("photon table is empty".into()));
            }
            if points.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(Error::InvalidArgument("photon table widths must increase".into()));
            }
            if points.iter().any(|&(d, p)| d == 0 || !(p > 0.0 && p.is_finite())) {
                return Err(Error::InvalidArgument("photon table entries must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn photons_per_mac(&self, d: u64) -> f64 {
        match &self.scaling {
            PhotonScaling::InverseD => {
                self.reference_photons_per_mac * self.reference_d as f64 / d as f64
            }
            PhotonScaling::Constant => self.reference_photons_per_mac,
            PhotonScaling::Table(points) => table_lookup(points, d),
        }
    }

    /// Photons reaching one output of a width-`d` dot product.
    pub fn photons_per_dot_product(&self, d: u64) -> f64 {
        self.photons_per_mac(d) * d as f64
    }
}

fn table_lookup(points: &[(u64, f64)], d: u64) -> f64 {
    let (first, last) = (points[0], points[points.len() - 1]);
    if d <= first.0 {
        return first.1 * first.0 as f64 / d as f64;
    }
    if d >= last.0 {
        return last.1 * last.0 as f64 / d as f64;
    }
    let i = points.partition_point(|p| p.0 <= d) - 1;
    let (d0, p0) = points[i];
    if d0 == d {
        return p0;
    }
    let (d1, p1) = points[i + 1];
    let t = (libm::log(d as f64) - libm::log(d0 as f64)) / (libm::log(d1 as f64) - libm::log(d0 as f64));
    libm::exp(libm::log(p0) + t * (libm::log(p1) - libm::log(p0)))
}

/// Rows of an [`EnergyReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerClass {
    Qkv,
    AttnQk,
    AttnAv,
    OutProj,
    Ff1,
    Ff2,
    DigitalFns,
}

impl LayerClass {
    pub const ALL: [LayerClass; 7] = [
        LayerClass::Qkv,
        LayerClass::AttnQk,
        LayerClass::AttnAv,
        LayerClass::OutProj,
        LayerClass::Ff1,
        LayerClass::Ff2,
        LayerClass::DigitalFns,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LayerClass::Qkv => "qkv",
            LayerClass::AttnQk => "attn_qk",
            LayerClass::AttnAv => "attn_av",
            LayerClass::OutProj => "out_proj",
            LayerClass::Ff1 => "ff1",
            LayerClass::Ff2 => "ff2",
            LayerClass::DigitalFns => "digital_fns",
        }
    }

    pub fn product(self) -> Option<ProductClass> {
        Some(match self {
            LayerClass::Qkv => ProductClass::QkvProjection,
            LayerClass::AttnQk => ProductClass::AttentionQk,
            LayerClass::AttnAv => ProductClass::AttentionAv,
            LayerClass::OutProj => ProductClass::OutputProjection,
            LayerClass::Ff1 => ProductClass::Ff1,
            LayerClass::Ff2 => ProductClass::Ff2,
            LayerClass::DigitalFns => return None,
        })
    }

    fn from_product(p: ProductClass) -> Self {
        match p {
            ProductClass::QkvProjection => LayerClass::Qkv,
            ProductClass::AttentionQk => LayerClass::AttnQk,
            ProductClass::AttentionAv => LayerClass::AttnAv,
            ProductClass::OutputProjection => LayerClass::OutProj,
            ProductClass::Ff1 => LayerClass::Ff1,
            ProductClass::Ff2 => LayerClass::Ff2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    ElectricalLoad,
    ElectricalDetect,
    Optical,
    Maintenance,
    Digital,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::ElectricalLoad,
        Category::ElectricalDetect,
        Category::Optical,
        Category::Maintenance,
        Category::Digital,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::ElectricalLoad => "electrical_load",
            Category::ElectricalDetect => "electrical_detect",
            Category::Optical => "optical",
            Category::Maintenance => "maintenance",
            Category::Digital => "digital",
        }
    }
}

/// Joules for one layer class, summed over all layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassEnergy {
    pub class: LayerClass,
    pub macs: u128,
    pub electrical_load: f64,
    pub electrical_detect: f64,
    pub optical: f64,
    pub maintenance: f64,
    pub digital: f64,
}

impl ClassEnergy {
    fn empty(class: LayerClass) -> Self {
        Self {
            class,
            macs: 0,
            electrical_load: 0.0,
            electrical_detect: 0.0,
            optical: 0.0,
            maintenance: 0.0,
            digital: 0.0,
        }
    }

    pub fn get(&self, category: Category) -> f64 {
        match category {
            Category::ElectricalLoad => self.electrical_load,
            Category::ElectricalDetect => self.electrical_detect,
            Category::Optical => self.optical,
            Category::Maintenance => self.maintenance,
            Category::Digital => self.digital,
        }
    }

    pub fn total(&self) -> f64 {
        Category::ALL.iter().map(|&c| self.get(c)).sum()
    }

    /// Joules per MAC; infinite for a class with energy but no MACs.
    pub fn energy_per_mac(&self) -> f64 {
        self.total() / self.macs as f64
    }
}

/// The same total split by physical component.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTypes {
    pub memory_read: f64,
    pub memory_write: f64,
    pub dac: f64,
    pub modulation: f64,
    pub amplification: f64,
    pub adc: f64,
    pub maintenance: f64,
    pub optical: f64,
    /// Streaming weights from off-chip memory when they do not fit in place.
    pub weight_load: f64,
}

impl EnergyTypes {
    pub fn total(&self) -> f64 {
        self.memory_read
            + self.memory_write
            + self.dac
            + self.modulation
            + self.amplification
            + self.adc
            + self.maintenance
            + self.optical
            + self.weight_load
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Advantage {
    pub baseline: String,
    pub j_per_mac: f64,
    pub ratio: f64,
}

/// Energy of one inference (one sequence).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub model: String,
    pub total_macs: u128,
    pub classes: Vec<ClassEnergy>,
    pub energy_types: EnergyTypes,
    pub advantages: Vec<Advantage>,
}

impl EnergyReport {
    pub fn class(&self, class: LayerClass) -> &ClassEnergy {
        self.classes.iter().find(|c| c.class == class).expect("every class is present")
    }

    fn class_mut(&mut self, class: LayerClass) -> &mut ClassEnergy {
        self.classes.iter_mut().find(|c| c.class == class).expect("every class is present")
    }

    /// Sum of every cell.
    pub fn total(&self) -> f64 {
        self.classes.iter().map(ClassEnergy::total).sum()
    }

    pub fn category_total(&self, category: Category) -> f64 {
        self.classes.iter().map(|c| c.get(category)).sum()
    }

    /// Adds a digital-baseline comparison: `total_macs * j_per_mac / total`.
    pub fn with_advantage(mut self, baseline: impl Into<String>, j_per_mac: f64) -> Self {
        let ratio = self.total_macs as f64 * j_per_mac / self.total();
        self.advantages.push(Advantage { baseline: baseline.into(), j_per_mac, ratio });
        self
    }

    fn empty(model: &str, total_macs: u128) -> Self {
        Self {
            model: model.into(),
            total_macs,
            classes: LayerClass::ALL.iter().map(|&c| ClassEnergy::empty(c)).collect(),
            energy_types: EnergyTypes::default(),
            advantages: Vec::new(),
        }
    }
}

/// A digital system billed at a flat energy per MAC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DigitalBaseline {
    pub name: &'static str,
    pub j_per_mac: f64,
}

/// Current datacenter GPU (NVIDIA A100 class), 300 fJ/MAC.
pub const A100: DigitalBaseline = DigitalBaseline { name: "a100", j_per_mac: 300e-15 };
/// Hypothetical next-generation GPU, 10 fJ/MAC.
pub const NEXT_GEN_GPU: DigitalBaseline = DigitalBaseline { name: "next_gen_gpu", j_per_mac: 10e-15 };

pub const BASELINES: [DigitalBaseline; 2] = [A100, NEXT_GEN_GPU];

pub fn baseline_by_name(name: &str) -> Option<DigitalBaseline> {
    BASELINES.iter().copied().find(|b| b.name.eq_ignore_ascii_case(name))
}

/// Load and detect energy of one product family (weights in place when flagged).
pub fn product_energy(shape: &ProductShape, profile: &HardwareProfile) -> (f64, f64) {
    (shape.loads() as f64 * profile.load_energy(), shape.detects() as f64 * profile.detect_energy())
}

pub fn optical_energy(config: &ModelConfig, policy: &PhotonPolicy, profile: &HardwareProfile) -> Result<f64> {
    policy.validate()?;
    let macs = compute_breakdown(config)?.total_macs();
    Ok(macs as f64 * policy.photons_per_mac(config.d) * profile.photon_energy)
}

/// Electrical, maintenance and digital cells; the optical cells are zero.
pub fn electrical_energy(config: &ModelConfig, profile: &HardwareProfile) -> Result<EnergyReport> {
    profile.validate()?;
    let breakdown = compute_breakdown(config)?;
    let layers = config.layers as f64;
    let bits = profile.mem_bits();
    let mut report = EnergyReport::empty(&config.name, breakdown.total_macs());
    let mut types = EnergyTypes::default();

    for shape in layer_products(config)? {
        let (load, detect) = product_energy(&shape, profile);
        let loads = shape.loads() as f64 * layers;
        let detects = shape.detects() as f64 * layers;
        let macs = shape.macs() * config.layers as u128;
        let cell = report.class_mut(LayerClass::from_product(shape.class));
        cell.macs = macs;
        cell.electrical_load = load * layers;
        cell.electrical_detect = detect * layers;
        cell.maintenance = macs as f64 * profile.e_maintain;

        types.memory_read += loads * bits * profile.e_read_sram;
        types.dac += loads * profile.e_dac;
        types.modulation += loads * profile.input_bits as f64 * profile.e_mod;
        types.amplification += detects * profile.e_amp;
        types.adc += detects * profile.e_adc;
        types.memory_write += detects * bits * profile.e_write;
        types.maintenance += macs as f64 * profile.e_maintain;
    }

    let elements = breakdown.digital.total() as f64 * layers;
    report.class_mut(LayerClass::DigitalFns).digital = elements * profile.digital_access_energy();
    types.memory_read += elements * bits * profile.e_read_sram;
    types.memory_write += elements * bits * profile.e_write;

    report.energy_types = types;
    Ok(report)
}

/// Full energy of one inference.
pub fn total_energy(config: &ModelConfig, profile: &HardwareProfile, policy: &PhotonPolicy) -> Result<EnergyReport> {
    policy.validate()?;
    let mut report = electrical_energy(config, profile)?;
    let per_mac = policy.photons_per_mac(config.d) * profile.photon_energy;
    let mut optical = 0.0;
    for cell in report.classes.iter_mut().filter(|c| c.class != LayerClass::DigitalFns) {
        cell.optical = cell.macs as f64 * per_mac;
        optical += cell.optical;
    }
    report.energy_types.optical = optical;
    Ok(report)
}

/// `total_macs * digital_j_per_mac / optical total`.
pub fn advantage(
    config: &ModelConfig,
    profile: &HardwareProfile,
    policy: &PhotonPolicy,
    digital_j_per_mac: f64,
) -> Result<f64> {
    if !(digital_j_per_mac > 0.0) {
        return Err(Error::InvalidArgument("digital_j_per_mac must be positive".into()));
    }
    let report = total_energy(config, profile, policy)?;
    Ok(report.total_macs as f64 * digital_j_per_mac / report.total())
}

/// Time-multiplexing weights that do not fit in place.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChunkingScenario {
    /// Weights that can be held at once (1e8 for 100 MB at one byte per weight).
    pub memory_capacity_weights: u128,
    /// Sequences sharing each streamed copy of the weights.
    pub batch_size: u64,
    /// J/bit for streaming weights in.
    pub weight_load_energy: f64,
}

impl ChunkingScenario {
    pub fn new(memory_capacity_weights: u128, batch_size: u64, weight_load_energy: f64) -> Result<Self> {
        let s = Self { memory_capacity_weights, batch_size, weight_load_energy };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.memory_capacity_weights == 0 {
            return Err(Error::InvalidArgument("memory capacity must be at least one weight".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if !(self.weight_load_energy >= 0.0) {
            return Err(Error::InvalidArgument("weight load energy must be >= 0".into()));
        }
        Ok(())
    }

    /// Chunks per layer: `ceil(12 d^2 / capacity)`.
    pub fn chunks(&self, config: &ModelConfig) -> u128 {
        config.layer_weight_count().div_ceil(self.memory_capacity_weights).max(1)
    }

    /// Whether the whole model fits in place, so weights never need streaming.
    pub fn model_fits(&self, config: &ModelConfig) -> bool {
        config.parameter_count() <= self.memory_capacity_weights
    }
}

/// Optical energy when weights are cycled through limited in-place memory.
///
/// Each layer's activation loads repeat once per chunk. When the model does
/// not fit, streaming the weights costs `weights * bits * weight_load_energy`
/// per batch, shared by its sequences.
pub fn chunked_onn_energy(
    config: &ModelConfig,
    profile: &HardwareProfile,
    policy: &PhotonPolicy,
    scenario: &ChunkingScenario,
) -> Result<EnergyReport> {
    scenario.validate()?;
    let mut report = total_energy(config, profile, policy)?;
    let k = scenario.chunks(config) as f64;
    let layers = config.layers as f64;
    let streams = !scenario.model_fits(config);
    let bits = profile.mem_bits();

    for shape in layer_products(config)?.iter().filter(|s| s.weights_in_place) {
        let extra_loads = shape.activation_loads() as f64 * layers * (k - 1.0);
        let weight_j = if streams {
            shape.weight_count() as f64 * layers * bits * scenario.weight_load_energy / scenario.batch_size as f64
        } else {
            0.0
        };
        let cell = report.class_mut(LayerClass::from_product(shape.class));
        cell.electrical_load += extra_loads * profile.load_energy() + weight_j;

        let t = &mut report.energy_types;
        t.memory_read += extra_loads * bits * profile.e_read_sram;
        t.dac += extra_loads * profile.e_dac;
        t.modulation += extra_loads * profile.input_bits as f64 * profile.e_mod;
        t.weight_load += weight_j;
    }
    Ok(report)
}

/// Activation scalars exchanged per inference in a split-weight system:
/// the inputs of every in-place product.
pub fn activation_scalar_count(config: &ModelConfig) -> Result<u128> {
    Ok(layer_products(config)?
        .iter()
        .filter(|s| s.weights_in_place)
        .map(ProductShape::activation_loads)
        .sum::<u128>()
        * config.layers as u128)
}

/// Digital energy when the weights are split over `k` processors: the
/// single-processor cost plus `k` DRAM passes over the activations.
pub fn chunked_gpu_energy(
    config: &ModelConfig,
    profile: &HardwareProfile,
    digital_j_per_mac: f64,
    scenario: &ChunkingScenario,
    dram_j_per_bit: f64,
) -> Result<f64> {
    scenario.validate()?;
    let macs = compute_breakdown(config)?.total_macs() as f64;
    let k = scenario.chunks(config) as f64;
    let activations = activation_scalar_count(config)? as f64;
    Ok(macs * digital_j_per_mac + k * activations * profile.mem_bits() * dram_j_per_bit)
}
