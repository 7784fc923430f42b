//! File formats: JSON documents, CSV tables, atomic writes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use photonsim_core::arch::{builtin_catalogue, ModelConfig};
use photonsim_core::energy::{default_profile, HardwareProfile, PhotonPolicy};
use photonsim_core::optics::{LookupTable, NoiseSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};
use crate::float;

/// Environment variable naming a JSON catalogue that replaces the built-in one.
pub const CATALOGUE_ENV: &str = "PHOTONSIM_CATALOGUE";

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn parse_error(path: &Path, field: String, message: impl ToString) -> CliError {
    let field = if field.is_empty() || field == "." { "<root>".to_string() } else { field };
    CliError::Parse { path: path.to_path_buf(), field, message: message.to_string() }
}

/// Parses a JSON document, reporting the path of the offending field.
pub fn parse_json<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        parse_error(path, field, e.into_inner())
    })
}

fn from_value<T: DeserializeOwned>(path: &Path, value: Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let field = e.path().to_string();
        parse_error(path, field, e.into_inner())
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    parse_json(path, &read(path)?)
}

/// Reads a (possibly partial) profile; missing fields keep their defaults.
pub fn read_profile(path: &Path) -> Result<HardwareProfile> {
    let overlay: Value = read_json(path)?;
    let Value::Object(fields) = overlay else {
        return Err(parse_error(path, String::new(), "expected a JSON object"));
    };
    let mut merged = serde_json::to_value(default_profile()).expect("profile serializes");
    let base = merged.as_object_mut().expect("profile is an object");
    for (key, v) in fields {
        if !base.contains_key(&key) {
            return Err(parse_error(path, key, "unknown field"));
        }
        base.insert(key, v);
    }
    let profile: HardwareProfile = from_value(path, merged)?;
    profile.validate()?;
    Ok(profile)
}

/// Built-in policy names accepted wherever a policy file is.
pub fn named_policy(name: &str) -> Option<PhotonPolicy> {
    match name {
        "default" | "inverse_d" => Some(PhotonPolicy::default()),
        "percentile_clipping" => Some(PhotonPolicy::percentile_clipping()),
        _ => None,
    }
}

pub fn read_policy(spec: &str) -> Result<PhotonPolicy> {
    let path = Path::new(spec);
    let policy = match named_policy(spec) {
        Some(p) if !path.exists() => p,
        _ => read_json(path)?,
    };
    policy.validate()?;
    Ok(policy)
}

pub fn read_noise(path: &Path) -> Result<NoiseSpec> {
    let noise: NoiseSpec = read_json(path)?;
    noise.validate()?;
    Ok(noise)
}

pub fn read_model_config(path: &Path) -> Result<ModelConfig> {
    let cfg: ModelConfig = read_json(path)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_catalogue(path: &Path) -> Result<Vec<ModelConfig>> {
    let models: Vec<ModelConfig> = read_json(path)?;
    for m in &models {
        m.validate()?;
    }
    Ok(models)
}

/// The catalogue named by [`CATALOGUE_ENV`], or the built-in table.
pub fn catalogue() -> Result<Vec<ModelConfig>> {
    match std::env::var_os(CATALOGUE_ENV) {
        Some(p) if !p.is_empty() => read_catalogue(Path::new(&p)),
        _ => Ok(builtin_catalogue()),
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct LutRow {
    level_index: usize,
    value: f64,
}

/// Reads a `level_index,value` table. Indices must cover `0..len` once each.
pub fn read_lut(path: &Path) -> Result<LookupTable> {
    let text = read(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut levels = BTreeMap::new();
    for (i, row) in reader.deserialize::<LutRow>().enumerate() {
        let row = row.map_err(|e| parse_error(path, format!("row {}", i + 1), e))?;
        if levels.insert(row.level_index, row.value).is_some() {
            return Err(parse_error(path, format!("row {}", i + 1), "duplicate level_index"));
        }
    }
    if levels.keys().enumerate().any(|(i, &k)| i != k) {
        return Err(parse_error(path, "level_index".into(), "indices must run 0, 1, 2, ... without gaps"));
    }
    Ok(LookupTable::new(levels.into_values().collect())?)
}

pub fn lut_csv(table: &LookupTable) -> Vec<u8> {
    let rows = table.levels().iter().enumerate().map(|(i, &v)| vec![i.to_string(), float::fmt(v)]).collect();
    csv_bytes(&["level_index", "value"], rows)
}

/// Pretty JSON with every float rounded to nine significant digits.
pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_value(value).expect("output types serialize to JSON");
    float::round_json(&mut v);
    let mut out = serde_json::to_vec_pretty(&v).expect("JSON values serialize");
    out.push(b'\n');
    out
}

/// RFC 4180 table with a header row and LF line endings.
pub fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(&row).expect("writing to memory");
    }
    w.into_inner().expect("flushing to memory")
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}
