//! Stamped output files. Every file names its schema, the seed and a hash of the run
//! configuration; nothing time- or path-dependent goes in, so reruns are byte-identical.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::sha256_hex;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stamp {
    pub seed: u64,
    pub config_hash: String,
}

impl Stamp {
    pub fn of(record: &impl Serialize, seed: u64) -> Result<Self> {
        let text = serde_json::to_string(record)?;
        Ok(Self { seed, config_hash: sha256_hex(text.as_bytes()) })
    }

    pub fn tags(&self) -> Vec<(&'static str, String)> {
        vec![("seed", self.seed.to_string()), ("config", self.config_hash.clone())]
    }

    pub fn csv_header(&self, kind: &str, columns: &[&str]) -> String {
        format!(
            "# scatlab {kind} v{SCHEMA_VERSION} seed={} config={}\n{}\n",
            self.seed,
            self.config_hash,
            columns.join(",")
        )
    }

    /// `body` (an object) with schema, seed and hash prepended.
    pub fn json(&self, kind: &str, body: Value) -> Result<String> {
        let mut doc = json!({
            "schema": format!("scatlab.{kind}/{SCHEMA_VERSION}"),
            "seed": self.seed,
            "config_hash": self.config_hash,
        });
        let (Value::Object(head), Value::Object(rest)) = (&mut doc, body) else {
            anyhow::bail!("JSON body for {kind} must be an object");
        };
        head.extend(rest);
        Ok(serde_json::to_string_pretty(&doc)? + "\n")
    }
}

/// Full-precision, round-trippable float formatting for CSV cells.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}
