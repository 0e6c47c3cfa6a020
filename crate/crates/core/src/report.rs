//! Report plumbing: binary arrays, CSV, JSON and two-column plot data.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Write `values` as consecutive little-endian `f64`.
pub fn write_f64_le(path: &Path, values: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

/// Pretty JSON with a trailing newline. Field order follows the struct
/// definitions, so equal values give identical bytes.
pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Whitespace-separated two-column numeric file with a `#` header line.
pub fn write_series(path: &Path, x: &str, y: &str, rows: &[(f64, f64)]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# {x} {y}\n"));
    for (a, b) in rows {
        out.push_str(&format!("{a} {b}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Write a CSV file through a row-emitting closure.
pub fn write_csv(path: &Path, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    body(&mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Hex SHA-256 of the JSON form of `value`.
pub fn config_hash(value: &impl Serialize) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(config: &impl Serialize, seed: u64) -> Self {
        Provenance { tool: "capfat", version: env!("CARGO_PKG_VERSION"), config_hash: config_hash(config), seed }
    }
}
