//! Deterministic report emission: schema-checked JSON plus fixed-format
//! CSV.
//!
//! Two contracts hold for everything written here. First, an estimate
//! never travels without its evidence: any JSON object carrying a
//! `value` or `mc_mean` key must also carry `convergence_delta` or
//! `stderr`, enforced by a tree walk before anything reaches disk.
//! Second, identical inputs produce identical bytes: maps serialize in
//! sorted key order, floats through shortest-roundtrip formatting, CSV
//! through a fixed 17-significant-digit scientific format with '.'
//! decimal separator and '\n' line endings. Wall-clock facts live in a
//! separate metadata file so they cannot perturb the report bytes.

use crate::{Error, Result};
use serde_json::Value;
use std::io::Write;
use std::path::Path;

/// Formats one f64 with 17 significant digits, enough to round-trip any
/// double, in a locale-independent scientific form.
pub fn significant(v: f64) -> String {
    format!("{v:.16e}")
}

/// Checks the estimate-evidence rule on a JSON tree. Returns the path of
/// the first offending object.
pub fn validate_estimates(value: &Value) -> std::result::Result<(), String> {
    fn walk(v: &Value, path: &str) -> std::result::Result<(), String> {
        match v {
            Value::Object(map) => {
                let is_estimate = ["value", "mc_mean"].iter().any(|k| {
                    map.get(*k).map(Value::is_number).unwrap_or(false)
                });
                let has_evidence =
                    map.contains_key("convergence_delta") || map.contains_key("stderr");
                if is_estimate && !has_evidence {
                    return Err(format!(
                        "estimate at {path} lacks a convergence_delta or stderr field"
                    ));
                }
                for (k, child) in map {
                    walk(child, &format!("{path}.{k}"))?;
                }
                Ok(())
            }
            Value::Array(items) => {
                for (i, child) in items.iter().enumerate() {
                    walk(child, &format!("{path}[{i}]"))?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
    walk(value, "$")
}

/// Writes a schema-checked JSON report. The serializer sorts object keys
/// (serde_json maps are ordered), so reruns are byte-identical.
pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    validate_estimates(value).map_err(|msg| Error::Config(format!("report schema: {msg}")))?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Writes CSV with the fixed numeric contract. Cells arrive already
/// formatted; use [`significant`] for floats.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = Vec::new();
    writeln_row(&mut out, header.iter().map(|s| s.to_string()))?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Config(format!(
                "csv row has {} cells, header has {}",
                row.len(),
                header.len()
            )));
        }
        writeln_row(&mut out, row.iter().cloned())?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn writeln_row(out: &mut Vec<u8>, cells: impl Iterator<Item = String>) -> Result<()> {
    let mut first = true;
    for cell in cells {
        if cell.contains(',') || cell.contains('\n') || cell.contains('"') {
            return Err(Error::Config(format!("csv cell needs quoting, refusing: {cell:?}")));
        }
        if !first {
            out.write_all(b",")?;
        }
        out.write_all(cell.as_bytes())?;
        first = false;
    }
    out.write_all(b"\n")?;
    Ok(())
}

/// Run metadata, the one file allowed to differ between reruns.
pub fn write_meta(path: &Path, command: &str, config_path: &str, duration_ms: u128) -> Result<()> {
    let started = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    let meta = serde_json::json!({
        "command": command,
        "config": config_path,
        "written_unix_ms": started,
        "duration_ms": duration_ms,
    });
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
