//! Bank configuration files (TOML or JSON) and bank loading.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use scatlab::filters::{self, FilterBank};
use scatlab::grid::Grid;
use scatlab::io;

fn unit_period() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "constructor", rename_all = "snake_case")]
pub enum Constructor {
    Shannon { j_low: i32, j_high: i32 },
    Meyer { j_low: i32, j_high: i32 },
    Directional { a: f64, rotations: usize, j_coarse: i32 },
    /// Box window of `width` lattice points per axis, translated by `spacing`.
    Ufc { width: usize, spacing: usize, d_target: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankConfig {
    pub d: usize,
    pub n: usize,
    #[serde(default = "unit_period")]
    pub period: f64,
    /// Replaces the constructor's own Littlewood-Paley tolerance.
    #[serde(default)]
    pub lp_tolerance: Option<f64>,
    #[serde(flatten)]
    pub constructor: Constructor,
}

impl BankConfig {
    pub fn parse(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        let cfg: Self = if is_json {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        };
        Ok(cfg)
    }

    pub fn build(&self) -> Result<FilterBank, filters::BankError> {
        let grid = Grid::new(self.d, self.n, self.period)?;
        let mut bank = match self.constructor {
            Constructor::Shannon { j_low, j_high } => filters::build_shannon_1d(grid, j_low, j_high)?,
            Constructor::Meyer { j_low, j_high } => filters::build_meyer_1d(grid, j_low, j_high)?,
            Constructor::Directional { a, rotations, j_coarse } => {
                let mother = filters::meyer_wedge(a, rotations);
                filters::build_directional_2d(grid, a, rotations, j_coarse, &mother)?
            }
            Constructor::Ufc { width, spacing, d_target } => {
                let window = filters::box_window(grid, width);
                filters::build_ufc_bank(grid, &window, spacing, d_target)?
            }
        };
        if let Some(tol) = self.lp_tolerance {
            bank.lp_tolerance = tol;
        }
        Ok(bank)
    }
}

/// A bank plus a digest of whatever it was read from.
pub struct LoadedBank {
    pub bank: FilterBank,
    pub digest: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex(&Sha256::digest(data))
}

/// `path` is a bank export (directory or manifest) or a config file to build from.
pub fn load(path: &Path) -> Result<LoadedBank> {
    let is_export = path.is_dir() || path.file_name().is_some_and(|n| n == io::MANIFEST);
    if is_export {
        let bank = io::load_bank(path)?;
        let dir = if path.is_dir() { path.to_path_buf() } else { path.parent().unwrap_or(Path::new(".")).to_path_buf() };
        let mut h = Sha256::new();
        let manifest = fs::read(dir.join(io::MANIFEST))?;
        h.update(&manifest);
        let m: io::Manifest = serde_json::from_slice(&manifest)?;
        for file in std::iter::once(&m.lowpass).chain(m.filters.iter().map(|f| &f.file)) {
            h.update(fs::read(dir.join(file)).with_context(|| format!("reading {file}"))?);
        }
        return Ok(LoadedBank { bank, digest: hex(&h.finalize()) });
    }
    if !path.exists() {
        bail!("bank {} does not exist", path.display());
    }
    let cfg = BankConfig::parse(path)?;
    let bank = cfg.build()?;
    Ok(LoadedBank { bank, digest: sha256_hex(serde_json::to_string(&cfg)?.as_bytes()) })
}
