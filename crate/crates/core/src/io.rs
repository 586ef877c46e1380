//! On-disk formats: the signal container (UTF-8 key-value header, then little-endian f64
//! `(re, im)` pairs in row-major order) and bank exports (JSON manifest plus one spectral
//! container per filter).

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filters::{self, BankError, Filter, FilterBank, Label, Structure};
use crate::geometry::ConeSpec;
use crate::grid::{Grid, Signal, SpectralSignal};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "scatlab-signal";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs { path: PathBuf, source: std::io::Error },
    #[error("malformed container: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Bank(#[from] BankError),
}

fn fs_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Fs { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Spatial,
    Spectral,
}

impl Domain {
    fn as_str(self) -> &'static str {
        match self {
            Self::Spatial => "spatial",
            Self::Spectral => "spectral",
        }
    }
}

const RESERVED: [&str; 6] = ["version", "d", "n", "period", "domain", "end"];

pub fn write_container(w: &mut impl Write, grid: &Grid, domain: Domain, data: &[Complex64]) -> std::io::Result<()> {
    write_container_tagged(w, grid, domain, data, &[])
}

/// As [`write_container`], with extra `key=value` header lines that readers ignore.
pub fn write_container_tagged(
    w: &mut impl Write,
    grid: &Grid,
    domain: Domain,
    data: &[Complex64],
    tags: &[(&str, String)],
) -> std::io::Result<()> {
    for (k, v) in tags {
        let clean = |s: &str| !s.is_empty() && !s.contains(['=', '\n']);
        if RESERVED.contains(k) || !clean(k) || v.contains('\n') {
            return Err(std::io::Error::new(std::io::ErrorKind::InvalidInput, format!("bad header tag {k:?}")));
        }
    }
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "version={FORMAT_VERSION}")?;
    writeln!(w, "d={}", grid.dim())?;
    writeln!(w, "n={}", grid.n())?;
    writeln!(w, "period={:?}", grid.period())?;
    writeln!(w, "domain={}", domain.as_str())?;
    for (k, v) in tags {
        writeln!(w, "{k}={v}")?;
    }
    writeln!(w, "end")?;
    let mut buf = Vec::with_capacity(data.len() * 16);
    for c in data {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_container(r: impl Read) -> Result<(Grid, Domain, Vec<Complex64>), IoError> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    let mut next = |r: &mut BufReader<_>| -> Result<String, IoError> {
        line.clear();
        r.read_line(&mut line).map_err(|e| IoError::Format(e.to_string()))?;
        Ok(line.trim_end_matches('\n').to_string())
    };
    if next(&mut r)? != MAGIC {
        return Err(IoError::Format("missing magic line".into()));
    }
    let mut fields = std::collections::BTreeMap::new();
    loop {
        let l = next(&mut r)?;
        if l == "end" {
            break;
        }
        if l.is_empty() {
            return Err(IoError::Format("header ended without `end`".into()));
        }
        let (k, v) = l.split_once('=').ok_or_else(|| IoError::Format(format!("bad header line {l:?}")))?;
        fields.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| fields.get(k).ok_or_else(|| IoError::Format(format!("missing header key {k}")));
    let bad = |k: &str| IoError::Format(format!("bad value for {k}"));
    let version: u32 = get("version")?.parse().map_err(|_| bad("version"))?;
    if version != FORMAT_VERSION {
        return Err(IoError::Format(format!("unsupported version {version}")));
    }
    let d: usize = get("d")?.parse().map_err(|_| bad("d"))?;
    let n: usize = get("n")?.parse().map_err(|_| bad("n"))?;
    let period: f64 = get("period")?.parse().map_err(|_| bad("period"))?;
    let domain = match get("domain")?.as_str() {
        "spatial" => Domain::Spatial,
        "spectral" => Domain::Spectral,
        _ => return Err(bad("domain")),
    };
    let grid = Grid::new(d, n, period).map_err(|e| IoError::Format(e.to_string()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| IoError::Format(e.to_string()))?;
    if bytes.len() != grid.len() * 16 {
        return Err(IoError::Format(format!("expected {} payload bytes, found {}", grid.len() * 16, bytes.len())));
    }
    let data = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    Ok((grid, domain, data))
}

pub fn save_signal(path: &Path, f: &Signal) -> Result<(), IoError> {
    save_signal_tagged(path, f, &[])
}

pub fn save_signal_tagged(path: &Path, f: &Signal, tags: &[(&str, String)]) -> Result<(), IoError> {
    let mut buf = Vec::new();
    write_container_tagged(&mut buf, &f.grid, Domain::Spatial, &f.samples, tags).map_err(fs_err(path))?;
    fs::write(path, buf).map_err(fs_err(path))
}

/// Reads either domain, transforming spectra back to samples.
pub fn load_signal(path: &Path) -> Result<Signal, IoError> {
    let file = fs::File::open(path).map_err(fs_err(path))?;
    let (grid, domain, data) = read_container(file)?;
    Ok(match domain {
        Domain::Spatial => Signal { grid, samples: data },
        Domain::Spectral => crate::grid::inverse_fourier(&SpectralSignal { grid, coeffs: data }),
    })
}

fn save_spectrum(path: &Path, s: &SpectralSignal) -> Result<(), IoError> {
    let mut file = fs::File::create(path).map_err(fs_err(path))?;
    write_container(&mut file, &s.grid, Domain::Spectral, &s.coeffs).map_err(fs_err(path))
}

fn load_spectrum(path: &Path, grid: &Grid) -> Result<SpectralSignal, IoError> {
    let file = fs::File::open(path).map_err(fs_err(path))?;
    let (g, domain, data) = read_container(file)?;
    if domain != Domain::Spectral || g != *grid {
        return Err(IoError::Format(format!("{} does not hold a spectrum on the bank grid", path.display())));
    }
    Ok(SpectralSignal { grid: g, coeffs: data })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterEntry {
    pub label: String,
    pub file: String,
    pub shell: Option<usize>,
    pub annulus: Option<(f64, f64)>,
    pub cone: Option<ConeSpec>,
    pub d_psi: f64,
    pub center: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub name: String,
    pub d: usize,
    pub n: usize,
    pub period: f64,
    pub kappa: usize,
    pub gamma: f64,
    pub rho: f64,
    pub alpha: f64,
    pub covered: f64,
    pub lp_tolerance: f64,
    pub lp_deviation: f64,
    /// Coefficients below the support snap that were zeroed at construction.
    pub snapped: usize,
    pub structure: Structure,
    pub scales: Vec<f64>,
    pub lowpass: String,
    pub filters: Vec<FilterEntry>,
}

pub const MANIFEST: &str = "manifest.json";

pub fn manifest_of(bank: &FilterBank) -> Manifest {
    Manifest {
        version: FORMAT_VERSION,
        name: bank.name.clone(),
        d: bank.grid.dim(),
        n: bank.grid.n(),
        period: bank.grid.period(),
        kappa: bank.kappa,
        gamma: bank.gamma,
        rho: bank.rho,
        alpha: bank.alpha(),
        covered: bank.covered,
        lp_tolerance: bank.lp_tolerance,
        lp_deviation: bank.lp_deviation,
        snapped: bank.snapped,
        structure: bank.structure.clone(),
        scales: bank.scales.clone(),
        lowpass: "lowpass.sig".into(),
        filters: bank
            .filters
            .iter()
            .map(|f| FilterEntry {
                label: f.label.to_string(),
                file: format!("{}.sig", f.label),
                shell: f.shell,
                annulus: f.annulus,
                cone: f.cone,
                d_psi: f.chebyshev.radius,
                center: f.chebyshev.center,
            })
            .collect(),
    }
}

/// Writes `manifest.json` and the spectra into `dir`.
pub fn save_bank(bank: &FilterBank, dir: &Path) -> Result<Manifest, IoError> {
    fs::create_dir_all(dir).map_err(fs_err(dir))?;
    let m = manifest_of(bank);
    save_spectrum(&dir.join(&m.lowpass), &bank.lowpass)?;
    for (f, e) in bank.filters.iter().zip(&m.filters) {
        save_spectrum(&dir.join(&e.file), &f.spectrum)?;
    }
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&m)?;
    fs::write(&path, text + "\n").map_err(fs_err(&path))?;
    Ok(m)
}

/// Loads a bank export. The LP deviation is recomputed from the stored spectra, so a tampered
/// file shows up in `lp_deviation`.
pub fn load_bank(dir: &Path) -> Result<FilterBank, IoError> {
    let path = if dir.is_dir() { dir.join(MANIFEST) } else { dir.to_path_buf() };
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let text = fs::read_to_string(&path).map_err(fs_err(&path))?;
    let m: Manifest = serde_json::from_str(&text)?;
    let grid = Grid::new(m.d, m.n, m.period).map_err(|e| IoError::Format(e.to_string()))?;
    let lowpass = load_spectrum(&base.join(&m.lowpass), &grid)?;
    let mut fs_out = Vec::new();
    for e in &m.filters {
        let label: Label = e.label.parse().map_err(|_| IoError::Format(format!("bad label {}", e.label)))?;
        let mut f = Filter::new(label, load_spectrum(&base.join(&e.file), &grid)?)?;
        f.shell = e.shell;
        f.annulus = e.annulus;
        f.cone = e.cone;
        fs_out.push(f);
    }
    fs_out.sort_by_key(|f| f.label);
    let mut bank = FilterBank {
        name: m.name,
        grid,
        lowpass,
        filters: fs_out,
        scales: m.scales,
        kappa: m.kappa,
        gamma: m.gamma,
        rho: m.rho,
        structure: m.structure,
        covered: m.covered,
        lp_tolerance: m.lp_tolerance,
        lp_deviation: 0.0,
        snapped: m.snapped,
    };
    bank.lp_deviation = filters::verify_littlewood_paley(&bank).max_deviation;
    Ok(bank)
}
