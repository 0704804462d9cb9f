//! Run reports: per-check records, digests and serialization.

use std::collections::BTreeMap;

use anyhow::Result;
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const TOOL: &str = "infogeo";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    /// SHA-256 of the canonical JSON of everything the check consumed.
    pub inputs_digest: String,
    pub values: BTreeMap<String, Value>,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub checks: Vec<CheckRecord>,
    pub summary: Summary,
}

impl RunReport {
    pub fn new(command: &str, config_digest: &str, seed: u64, checks: Vec<CheckRecord>) -> Self {
        let passed = checks.iter().filter(|c| c.pass).count();
        Self {
            tool: TOOL,
            version: VERSION,
            command: command.to_string(),
            config_digest: config_digest.to_string(),
            seed,
            summary: Summary {
                total: checks.len(),
                passed,
                failed: checks.len() - passed,
            },
            checks,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// One row per scalar value: `check,inputs_digest,key,value,tolerance,pass`.
    /// Matrix and vector values are flattened with `[i]`/`[i][j]` suffixes.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["check", "inputs_digest", "key", "value", "tolerance", "pass"])?;
        for c in &self.checks {
            for (key, value) in &c.values {
                let mut flat = Vec::new();
                flatten(key, value, &mut flat);
                for (k, v) in flat {
                    w.write_record([
                        c.name.as_str(),
                        c.inputs_digest.as_str(),
                        k.as_str(),
                        v.as_str(),
                        fmt_f64(c.tolerance).as_str(),
                        if c.pass { "true" } else { "false" },
                    ])?;
                }
            }
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}

fn flatten(key: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                flatten(&format!("{key}[{i}]"), item, out);
            }
        }
        Value::Number(n) => out.push((key.to_string(), n.as_f64().map_or_else(|| n.to_string(), fmt_f64))),
        Value::String(s) => out.push((key.to_string(), s.clone())),
        Value::Null => out.push((key.to_string(), "NaN".into())),
        other => out.push((key.to_string(), other.to_string())),
    }
}

/// Scientific notation with 17 significant digits: enough to round-trip
/// any `f64`, and independent of locale.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn digest(value: &Value) -> String {
    // serde_json maps are ordered by key, so this is canonical.
    format!("{:x}", Sha256::digest(value.to_string().as_bytes()))
}

pub fn matrix(m: &DMatrix<f64>) -> Value {
    Value::from(m.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>())
}

/// Builds a record; `values` is a list of `(key, value)` pairs.
pub fn record(name: String, inputs: &Value, values: Vec<(&str, Value)>, tolerance: f64, pass: bool) -> CheckRecord {
    CheckRecord {
        name,
        inputs_digest: digest(inputs),
        values: values.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        tolerance,
        pass,
    }
}
