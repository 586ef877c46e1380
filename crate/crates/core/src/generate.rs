//! Seeded test signals: Gaussian bumps, band indicators and random-phase band signals.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{self, Grid, Signal, SpectralSignal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Generator {
    /// Periodized Gaussian of spatial width `sigma` centred at `L/2`.
    GaussianBump { sigma: f64 },
    /// Flat spectrum on `lo <= |xi| < hi`.
    BandIndicator { lo: f64, hi: f64 },
    /// Unit-modulus coefficients with uniform random phases on `lo <= |xi| < hi`, Hermitian so
    /// the signal is real.
    RandomPhaseBand { lo: f64, hi: f64 },
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::GaussianBump { sigma } => write!(f, "gaussian-bump:{sigma}"),
            Self::BandIndicator { lo, hi } => write!(f, "band-indicator:{lo}:{hi}"),
            Self::RandomPhaseBand { lo, hi } => write!(f, "random-phase-band:{lo}:{hi}"),
        }
    }
}

impl FromStr for Generator {
    type Err = String;

    /// `gaussian-bump:SIGMA`, `band-indicator:LO:HI`, `random-phase-band:LO:HI`.
    fn from_str(s: &str) -> Result<Self, String> {
        let mut parts = s.split(':');
        let name = parts.next().unwrap_or_default();
        let nums: Vec<f64> = parts
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad number {p:?}: {e}")))
            .collect::<Result<_, _>>()?;
        let want = |k: usize| {
            if nums.len() == k {
                Ok(())
            } else {
                Err(format!("{name} takes {k} parameter(s), got {}", nums.len()))
            }
        };
        match name {
            "gaussian-bump" => {
                want(1)?;
                Ok(Self::GaussianBump { sigma: nums[0] })
            }
            "band-indicator" => {
                want(2)?;
                Ok(Self::BandIndicator { lo: nums[0], hi: nums[1] })
            }
            "random-phase-band" => {
                want(2)?;
                Ok(Self::RandomPhaseBand { lo: nums[0], hi: nums[1] })
            }
            _ => Err(format!("unknown generator {name:?}")),
        }
    }
}

impl Generator {
    /// Unit-norm real signal. `seed` only matters for the random generator.
    pub fn sample(&self, grid: Grid, seed: u64) -> Result<Signal, String> {
        let spec = match *self {
            Self::GaussianBump { sigma } => gaussian_bump_spectrum(grid, sigma)?,
            Self::BandIndicator { lo, hi } => band_spectrum(grid, lo, hi, |_| Complex64::new(1.0, 0.0))?,
            Self::RandomPhaseBand { lo, hi } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let phases: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
                band_spectrum(grid, lo, hi, |i| Complex64::from_polar(1.0, phases[i]))?
            }
        };
        Ok(real_unit(&spec))
    }
}

fn gaussian_bump_spectrum(grid: Grid, sigma: f64) -> Result<SpectralSignal, String> {
    if !(sigma > 0.0) {
        return Err(format!("sigma = {sigma} must be positive"));
    }
    let c = grid.period() / 2.0;
    let d = grid.dim();
    Ok(SpectralSignal::from_fn(grid, |xi| {
        let r2 = xi[0] * xi[0] + xi[1] * xi[1];
        let shift = -2.0 * PI * c * (xi[0] + if d == 2 { xi[1] } else { 0.0 });
        Complex64::from_polar((-2.0 * PI * PI * sigma * sigma * r2).exp(), shift)
    }))
}

/// Coefficients `coef(i)` on the band, symmetrized as `c(-k) = conj(c(k))`.
fn band_spectrum(
    grid: Grid,
    lo: f64,
    hi: f64,
    coef: impl Fn(usize) -> Complex64,
) -> Result<SpectralSignal, String> {
    if !(lo >= 0.0 && hi > lo) {
        return Err(format!("band [{lo}, {hi}) is empty"));
    }
    let mut s = SpectralSignal::zeros(grid);
    let mut any = false;
    for i in 0..grid.len() {
        let t = grid.freq_norm(i);
        if t < lo || t >= hi {
            continue;
        }
        any = true;
        let k = grid.lattice(i);
        let mirror = grid.flat([-k[0], -k[1]]);
        // The canonical member of each +-k pair carries the random draw.
        let canonical = match mirror {
            Some(j) => i <= j,
            None => true,
        };
        if canonical {
            let c = coef(i);
            s.coeffs[i] = c;
            if let Some(j) = mirror {
                s.coeffs[j] = if j == i { Complex64::new(c.norm(), 0.0) } else { c.conj() };
            }
        }
    }
    if !any {
        return Err(format!("band [{lo}, {hi}) holds no lattice frequency"));
    }
    Ok(s)
}

fn real_unit(spec: &SpectralSignal) -> Signal {
    let mut f = grid::inverse_fourier(spec);
    for c in &mut f.samples {
        *c = Complex64::new(c.re, 0.0);
    }
    let norm = f.norm();
    for c in &mut f.samples {
        *c /= norm;
    }
    f
}
