//! Periodic sampling grid, unitary Fourier transforms, dyadic dilations and annulus projections.
//!
//! Spectra are stored in FFT order: along each axis, array index `i` carries lattice index
//! `k = i` for `i < n/2` and `k = i - n` otherwise, so the lattice is `{-n/2, .., n/2-1}`.
//! Frequencies are `k / L`.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("sample count {got} does not match grid size {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("nonzero coefficient at lattice index {0:?} would leave the lattice")]
    NyquistOverflow(Vec<i64>),
    #[error("dilation factor {0} is neither an integer nor the reciprocal of one")]
    NonIntegerFactor(f64),
    #[error("compression would discard the nonzero coefficient at lattice index {0:?}")]
    OffLattice(Vec<i64>),
    #[error("invalid shell: inner radius {r} must be positive and below outer radius {big_r}")]
    InvalidShell { r: f64, big_r: f64 },
}

/// Coefficients below this fraction of the largest magnitude count as zero when deciding
/// whether a dilation leaves the lattice.
pub const SUPPORT_SNAP: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    d: usize,
    n: usize,
    period: f64,
}

impl Grid {
    pub fn new(d: usize, n: usize, period: f64) -> Result<Self, GridError> {
        if d != 1 && d != 2 {
            return Err(GridError::InvalidGrid(format!("dimension {d} not in {{1, 2}}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(GridError::InvalidGrid(format!("n = {n} must be a power of two >= 8")));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(GridError::InvalidGrid(format!("period {period} must be positive")));
        }
        Ok(Self { d, n, period })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Total number of samples, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Largest frequency magnitude per axis, `n / (2L)`.
    pub fn nyquist(&self) -> f64 {
        self.n as f64 / (2.0 * self.period)
    }

    /// Lattice spacing `1/L`.
    pub fn spacing(&self) -> f64 {
        1.0 / self.period
    }

    pub fn axis_k(&self, i: usize) -> i64 {
        let h = self.n / 2;
        if i < h {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    pub fn axis_index(&self, k: i64) -> Option<usize> {
        let h = (self.n / 2) as i64;
        if k < -h || k >= h {
            None
        } else if k >= 0 {
            Some(k as usize)
        } else {
            Some((k + self.n as i64) as usize)
        }
    }

    /// Lattice multi-index of a flat spectral position; unused axes are 0.
    pub fn lattice(&self, flat: usize) -> [i64; 2] {
        if self.d == 1 {
            [self.axis_k(flat), 0]
        } else {
            [self.axis_k(flat / self.n), self.axis_k(flat % self.n)]
        }
    }

    pub fn flat(&self, k: [i64; 2]) -> Option<usize> {
        if self.d == 1 {
            self.axis_index(k[0])
        } else {
            Some(self.axis_index(k[0])? * self.n + self.axis_index(k[1])?)
        }
    }

    pub fn frequency(&self, flat: usize) -> [f64; 2] {
        let k = self.lattice(flat);
        [k[0] as f64 / self.period, k[1] as f64 / self.period]
    }

    pub fn freq_norm(&self, flat: usize) -> f64 {
        let xi = self.frequency(flat);
        (xi[0] * xi[0] + xi[1] * xi[1]).sqrt()
    }

    /// Spatial coordinates of a flat sample position, in `[0, L)` per axis.
    pub fn position(&self, flat: usize) -> [f64; 2] {
        let h = self.period / self.n as f64;
        if self.d == 1 {
            [flat as f64 * h, 0.0]
        } else {
            [(flat / self.n) as f64 * h, (flat % self.n) as f64 * h]
        }
    }

    fn check_len(&self, got: usize) -> Result<(), GridError> {
        if got != self.len() {
            Err(GridError::SizeMismatch { expected: self.len(), got })
        } else {
            Ok(())
        }
    }
}

/// Samples in the spatial domain, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub grid: Grid,
    pub samples: Vec<Complex64>,
}

/// Coefficients on the frequency lattice, FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSignal {
    pub grid: Grid,
    pub coeffs: Vec<Complex64>,
}

impl Signal {
    pub fn new(grid: Grid, samples: Vec<Complex64>) -> Result<Self, GridError> {
        grid.check_len(samples.len())?;
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, samples: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_real(grid: Grid, values: &[f64]) -> Result<Self, GridError> {
        grid.check_len(values.len())?;
        Ok(Self { grid, samples: values.iter().map(|&v| Complex64::new(v, 0.0)).collect() })
    }

    pub fn norm_sq(&self) -> f64 {
        crate::sum::neumaier(self.samples.iter().map(|c| c.norm_sqr()))
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }
}

impl SpectralSignal {
    pub fn new(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self, GridError> {
        grid.check_len(coeffs.len())?;
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, coeffs: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    /// Evaluates `g` at every lattice frequency.
    pub fn from_fn(grid: Grid, g: impl Fn([f64; 2]) -> Complex64) -> Self {
        let coeffs = (0..grid.len()).map(|i| g(grid.frequency(i))).collect();
        Self { grid, coeffs }
    }

    pub fn norm_sq(&self) -> f64 {
        crate::sum::neumaier(self.coeffs.iter().map(|c| c.norm_sqr()))
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

fn transpose(data: &mut [Complex64], n: usize) {
    for r in 0..n {
        for c in (r + 1)..n {
            data.swap(r * n + c, c * n + r);
        }
    }
}

/// Unitary in-place DFT over all axes of `grid`.
pub fn fft_in_place(grid: &Grid, data: &mut [Complex64], inverse: bool) {
    let n = grid.n();
    let fft = plan(n, inverse);
    fft.process(data);
    if grid.dim() == 2 {
        transpose(data, n);
        fft.process(data);
        transpose(data, n);
    }
    let scale = 1.0 / (grid.len() as f64).sqrt();
    for v in data.iter_mut() {
        *v *= scale;
    }
}

pub fn forward_fourier(f: &Signal) -> SpectralSignal {
    let mut coeffs = f.samples.clone();
    fft_in_place(&f.grid, &mut coeffs, false);
    SpectralSignal { grid: f.grid, coeffs }
}

pub fn inverse_fourier(spec: &SpectralSignal) -> Signal {
    let mut samples = spec.coeffs.clone();
    fft_in_place(&spec.grid, &mut samples, true);
    Signal { grid: spec.grid, samples }
}

/// Pointwise absolute value.
pub fn modulus(f: &Signal) -> Signal {
    Signal {
        grid: f.grid,
        samples: f.samples.iter().map(|c| Complex64::new(c.norm(), 0.0)).collect(),
    }
}

/// Integer dyadic-style scale factor resolved from `a^m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// Spectrum spreads: coefficient at `k` moves to `q k`.
    Expand(u64),
    /// Spectrum contracts: new coefficient at `k` is the old one at `p k`.
    Compress(u64),
}

pub fn resolve_scale(a: f64, m: i32) -> Result<Scale, GridError> {
    if !(a.is_finite() && a > 0.0) {
        return Err(GridError::NonIntegerFactor(a));
    }
    let factor = a.powi(m.abs());
    let q = factor.round();
    if q < 1.0 || (factor - q).abs() > 1e-9 * factor.max(1.0) || q > (1u64 << 52) as f64 {
        return Err(GridError::NonIntegerFactor(a.powi(m)));
    }
    let q = q as u64;
    Ok(if m >= 0 { Scale::Expand(q) } else { Scale::Compress(q) })
}

fn significant(coeffs: &[Complex64]) -> f64 {
    let max = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    max * SUPPORT_SNAP
}

fn expand(grid: &Grid, coeffs: &[Complex64], q: u64) -> Result<Vec<Complex64>, GridError> {
    let thresh = significant(coeffs);
    let mut out = vec![Complex64::new(0.0, 0.0); coeffs.len()];
    let q = q as i64;
    for (i, &c) in coeffs.iter().enumerate() {
        let k = grid.lattice(i);
        match grid.flat([k[0] * q, k[1] * q]) {
            Some(j) => out[j] = c,
            None if c.norm() > thresh => {
                return Err(GridError::NyquistOverflow(k[..grid.dim()].to_vec()))
            }
            None => {}
        }
    }
    Ok(out)
}

/// Samples the spectrum at `p k`; returns the discarded coefficient positions too.
fn compress(grid: &Grid, coeffs: &[Complex64], p: u64) -> (Vec<Complex64>, Option<Vec<i64>>) {
    let p = p as i64;
    let out = (0..coeffs.len())
        .map(|i| {
            let k = grid.lattice(i);
            grid.flat([k[0] * p, k[1] * p]).map_or(Complex64::new(0.0, 0.0), |j| coeffs[j])
        })
        .collect();
    let thresh = significant(coeffs);
    let lost = coeffs.iter().enumerate().find_map(|(i, c)| {
        let k = grid.lattice(i);
        let off = k[0].rem_euclid(p) != 0 || k[1].rem_euclid(p) != 0;
        (off && c.norm() > thresh).then(|| k[..grid.dim()].to_vec())
    });
    (out, lost)
}

/// Norm-preserving dilation `f -> f(a^m .)` realized as a spectral reindexing.
pub fn dilate_l2_spectrum(f: &SpectralSignal, m: i32, a: f64) -> Result<SpectralSignal, GridError> {
    let coeffs = match resolve_scale(a, m)? {
        Scale::Expand(1) | Scale::Compress(1) => f.coeffs.clone(),
        Scale::Expand(q) => expand(&f.grid, &f.coeffs, q)?,
        Scale::Compress(p) => {
            let (out, lost) = compress(&f.grid, &f.coeffs, p);
            if let Some(k) = lost {
                return Err(GridError::OffLattice(k));
            }
            out
        }
    };
    Ok(SpectralSignal { grid: f.grid, coeffs })
}

/// Filter dilation `xi -> f_hat(a^{-m} xi)` with no amplitude factor. Compression samples
/// the spectrum, so it never fails; expansion permutes values and can overflow.
pub fn dilate_l1_spectrum(f: &SpectralSignal, m: i32, a: f64) -> Result<SpectralSignal, GridError> {
    let coeffs = match resolve_scale(a, m)? {
        Scale::Expand(1) | Scale::Compress(1) => f.coeffs.clone(),
        Scale::Expand(q) => expand(&f.grid, &f.coeffs, q)?,
        Scale::Compress(p) => compress(&f.grid, &f.coeffs, p).0,
    };
    Ok(SpectralSignal { grid: f.grid, coeffs })
}

pub fn dilate_l2(f: &Signal, m: i32, a: f64) -> Result<Signal, GridError> {
    if m == 0 {
        resolve_scale(a, m)?;
        return Ok(f.clone());
    }
    Ok(inverse_fourier(&dilate_l2_spectrum(&forward_fourier(f), m, a)?))
}

pub fn dilate_l1(f: &Signal, m: i32, a: f64) -> Result<Signal, GridError> {
    if m == 0 {
        resolve_scale(a, m)?;
        return Ok(f.clone());
    }
    Ok(inverse_fourier(&dilate_l1_spectrum(&forward_fourier(f), m, a)?))
}

/// Keeps the closed shell `r <= |xi| <= R` of the spectrum.
pub fn project_annulus_spectrum(
    f: &SpectralSignal,
    r: f64,
    big_r: f64,
) -> Result<SpectralSignal, GridError> {
    if !(r > 0.0 && r < big_r) {
        return Err(GridError::InvalidShell { r, big_r });
    }
    let g = f.grid;
    let coeffs = f
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let t = g.freq_norm(i);
            if t >= r && t <= big_r {
                c
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(SpectralSignal { grid: g, coeffs })
}

pub fn project_annulus(f: &Signal, r: f64, big_r: f64) -> Result<Signal, GridError> {
    Ok(inverse_fourier(&project_annulus_spectrum(&forward_fourier(f), r, big_r)?))
}

/// `<f, g>` with the conjugate on `g`.
pub fn inner(f: &[Complex64], g: &[Complex64]) -> Complex64 {
    let re = crate::sum::neumaier(f.iter().zip(g).map(|(a, b)| (a * b.conj()).re));
    let im = crate::sum::neumaier(f.iter().zip(g).map(|(a, b)| (a * b.conj()).im));
    Complex64::new(re, im)
}
