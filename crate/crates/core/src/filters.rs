//! Semi-discrete Parseval filter banks with scale and cone metadata.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, Ball, ConeSpec, GeometryError, Vec2};
use crate::grid::{self, Grid, GridError, SpectralSignal};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BankError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("filter {0} has empty support")]
    EmptySupport(Label),
    #[error("filter {0} lacks annulus or cone metadata")]
    MissingMetadata(Label),
    #[error("Littlewood-Paley residual {residual:e} below -1e-10 at frequency {at:?}")]
    NonUnitLP { residual: f64, at: Vec<f64> },
    #[error("squared sum deviates by {deviation:e} at frequency {at:?}")]
    CoverageGap { deviation: f64, at: Vec<f64> },
    #[error("support violation: {0}")]
    SupportViolation(String),
    #[error("invalid bank parameters: {0}")]
    Invalid(String),
}

/// Spectral magnitudes below this are snapped to zero when extracting supports.
pub const SNAP: f64 = 1e-14;

/// Scale index `j` and direction index `g`; ordering is lexicographic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Label {
    pub scale: i32,
    pub dir: u32,
}

impl Label {
    pub fn new(scale: i32, dir: u32) -> Self {
        Self { scale, dir }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "j{}.g{}", self.scale, self.dir)
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (j, g) = s.split_once('.').ok_or_else(|| format!("bad label {s:?}"))?;
        let scale = j.strip_prefix('j').and_then(|v| v.parse().ok());
        let dir = g.strip_prefix('g').and_then(|v| v.parse().ok());
        match (scale, dir) {
            (Some(scale), Some(dir)) => Ok(Self { scale, dir }),
            _ => Err(format!("bad label {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    pub label: Label,
    pub spectrum: SpectralSignal,
    /// Flat lattice positions with nonzero spectrum, ascending.
    pub support: Vec<usize>,
    /// Position of `r_j` in the bank's scale list.
    pub shell: Option<usize>,
    pub annulus: Option<(f64, f64)>,
    pub cone: Option<ConeSpec>,
    pub chebyshev: Ball,
}

impl Filter {
    /// Snaps tiny coefficients and caches support and Chebyshev ball.
    pub fn new(label: Label, mut spectrum: SpectralSignal) -> Result<Self, BankError> {
        let mut support = Vec::new();
        for (i, c) in spectrum.coeffs.iter_mut().enumerate() {
            if c.norm() < SNAP {
                *c = Complex64::new(0.0, 0.0);
            } else {
                support.push(i);
            }
        }
        if support.is_empty() {
            return Err(BankError::EmptySupport(label));
        }
        let chebyshev = support_ball(&spectrum.grid, &support)?;
        Ok(Self { label, spectrum, support, shell: None, annulus: None, cone: None, chebyshev })
    }

    pub fn chebyshev_radius(&self) -> f64 {
        self.chebyshev.radius
    }

    pub fn max_abs(&self) -> f64 {
        self.support.iter().map(|&i| self.spectrum.coeffs[i].norm()).fold(0.0, f64::max)
    }
}

pub fn support_ball(grid: &Grid, support: &[usize]) -> Result<Ball, GeometryError> {
    let pts: Vec<Vec2> = support.iter().map(|&i| grid.frequency(i)).collect();
    geometry::min_enclosing_ball(&pts)
}

/// Smallest enclosing ball radius of a filter's lattice support.
pub fn chebyshev_radius(filter: &Filter) -> Result<f64, GeometryError> {
    Ok(support_ball(&filter.spectrum.grid, &filter.support)?.radius)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Structure {
    Generic,
    Ufc { d_psi: f64 },
    Wavelet { a: f64, rotations: usize, j_coarse: i32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub name: String,
    pub grid: Grid,
    pub lowpass: SpectralSignal,
    pub filters: Vec<Filter>,
    /// `r_1 < r_2 < ...`, including the `kappa` radii above the last shell.
    pub scales: Vec<f64>,
    pub kappa: usize,
    pub gamma: f64,
    pub rho: f64,
    pub structure: Structure,
    /// Littlewood-Paley is checked on `|xi| <= covered`.
    pub covered: f64,
    pub lp_tolerance: f64,
    pub lp_deviation: f64,
    /// Coefficients zeroed by the support snap.
    pub snapped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpReport {
    pub max_deviation: f64,
    pub mean_deviation: f64,
    pub worst_frequency: Vec<f64>,
    pub points: usize,
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn real(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// Squared-magnitude transition with `s(u) + s(1-u) = 1`.
pub fn spline(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Squared radial window on `[1/a, a]` with `sum_j R(a^-j t) = 1` for `t > 0`.
pub fn radial_window(a: f64, t: f64) -> f64 {
    if t <= 1.0 / a || t >= a {
        0.0
    } else if t <= 1.0 {
        spline((t - 1.0 / a) / (1.0 - 1.0 / a))
    } else {
        spline((a - t) / (a - 1.0))
    }
}

impl FilterBank {
    pub fn r1(&self) -> f64 {
        self.scales[0]
    }

    pub fn alpha(&self) -> f64 {
        geometry::compute_alpha(self.gamma, self.rho).expect("bank parameters validated")
    }

    pub fn filter(&self, label: Label) -> Option<&Filter> {
        self.filters.binary_search_by(|f| f.label.cmp(&label)).ok().map(|i| &self.filters[i])
    }

    pub fn labels(&self) -> Vec<Label> {
        self.filters.iter().map(|f| f.label).collect()
    }

    /// `D_Psi = sup d_psi`.
    pub fn d_psi(&self) -> f64 {
        self.filters.iter().map(|f| f.chebyshev.radius).fold(0.0, f64::max)
    }

    /// Per-frequency `|chi|^2 + sum |psi|^2`.
    pub fn lp_sum(&self) -> Vec<f64> {
        let mut acc: Vec<f64> = self.lowpass.coeffs.iter().map(|c| c.norm_sqr()).collect();
        for f in &self.filters {
            for &i in &f.support {
                acc[i] += f.spectrum.coeffs[i].norm_sqr();
            }
        }
        acc
    }

    /// Per-frequency `sum |psi|^2` over high-pass filters only.
    pub fn highpass_sum(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.grid.len()];
        for f in &self.filters {
            for &i in &f.support {
                acc[i] += f.spectrum.coeffs[i].norm_sqr();
            }
        }
        acc
    }

    /// Sorts filters, derives gamma and the LP deviation, and checks the metadata invariants.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        name: &str,
        grid: Grid,
        lowpass: SpectralSignal,
        mut filters: Vec<Filter>,
        scales: Vec<f64>,
        kappa: usize,
        rho: f64,
        structure: Structure,
        covered: f64,
        lp_tolerance: f64,
        snapped: usize,
    ) -> Result<Self, BankError> {
        if kappa < 1 || scales.len() <= kappa {
            return Err(BankError::Invalid("too few scales for the overlap kappa".into()));
        }
        if scales.windows(2).any(|w| !(w[1] > w[0])) || scales[0] <= 0.0 {
            return Err(BankError::Invalid("scales must be positive and strictly increasing".into()));
        }
        filters.sort_by_key(|f| f.label);
        if filters.windows(2).any(|w| w[0].label == w[1].label) {
            return Err(BankError::Invalid("duplicate filter labels".into()));
        }
        let gamma = scales
            .iter()
            .zip(scales.iter().skip(kappa))
            .map(|(a, b)| a / b)
            .fold(f64::INFINITY, f64::min);
        geometry::compute_alpha(gamma, rho)?;
        let mut bank = Self {
            name: name.to_string(),
            grid,
            lowpass,
            filters,
            scales,
            kappa,
            gamma,
            rho,
            structure,
            covered,
            lp_tolerance,
            lp_deviation: 0.0,
            snapped,
        };
        bank.check_metadata()?;
        bank.lp_deviation = verify_littlewood_paley(&bank).max_deviation;
        Ok(bank)
    }

    /// Frequency gap below `r_1` plus annulus and cone containment of every support.
    pub fn check_metadata(&self) -> Result<(), BankError> {
        let g = &self.grid;
        let r1 = self.r1();
        for f in &self.filters {
            for &i in &f.support {
                if g.freq_norm(i) < r1 * (1.0 - 1e-12) {
                    return Err(BankError::SupportViolation(format!(
                        "{} reaches into the frequency gap below r_1 = {r1}",
                        f.label
                    )));
                }
            }
            if let Some((lo, hi)) = f.annulus {
                let bad = f.support.iter().find(|&&i| {
                    let t = g.freq_norm(i);
                    t < lo * (1.0 - 1e-12) || t > hi * (1.0 + 1e-12)
                });
                if let Some(&i) = bad {
                    return Err(BankError::SupportViolation(format!(
                        "{} has support at {:?} outside [{lo}, {hi}]",
                        f.label,
                        g.frequency(i)
                    )));
                }
            }
            if let Some(cone) = &f.cone {
                if let Some(&i) = f.support.iter().find(|&&i| !geometry::cone_membership(g.frequency(i), cone)) {
                    return Err(BankError::SupportViolation(format!(
                        "{} has support at {:?} outside its cone",
                        f.label,
                        g.frequency(i)
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Max and mean deviation of the LP sum from 1 over the covered band.
pub fn verify_littlewood_paley(bank: &FilterBank) -> LpReport {
    let acc = bank.lp_sum();
    let g = &bank.grid;
    let mut max = -1.0;
    let mut worst = 0;
    let mut devs = Vec::new();
    for (i, &v) in acc.iter().enumerate() {
        if g.freq_norm(i) > bank.covered {
            continue;
        }
        let dev = (v - 1.0).abs();
        if dev > max {
            max = dev;
            worst = i;
        }
        devs.push(dev);
    }
    let points = devs.len();
    LpReport {
        max_deviation: max.max(0.0),
        mean_deviation: crate::sum::neumaier(devs) / points.max(1) as f64,
        worst_frequency: g.frequency(worst)[..g.dim()].to_vec(),
        points,
    }
}

/// `nu_psi = 2 r_j / (1 + gamma) (1 - rho) A_psi nu*`.
pub fn shift_vector(filter: &Filter, bank: &FilterBank) -> Result<Vec2, BankError> {
    let (Some(shell), Some(cone)) = (filter.shell, filter.cone.as_ref()) else {
        return Err(BankError::MissingMetadata(filter.label));
    };
    let c = 2.0 * bank.scales[shell] / (1.0 + bank.gamma) * (1.0 - bank.rho);
    let ax = cone.axis();
    Ok([c * ax[0], c * ax[1]])
}

fn attach(filter: &mut Filter, shell: usize, scales: &[f64], kappa: usize, cone: ConeSpec) {
    filter.shell = Some(shell);
    filter.annulus = Some((scales[shell], scales[shell + kappa]));
    filter.cone = Some(cone);
}

fn need_1d(grid: &Grid) -> Result<(), BankError> {
    if grid.dim() != 1 {
        return Err(BankError::Invalid("this constructor needs a 1D grid".into()));
    }
    Ok(())
}

fn dyadic_scales(j_low: i32, j_high: i32, kappa: usize) -> Vec<f64> {
    (j_low..=j_high + kappa as i32).map(|j| 2f64.powi(j - 1)).collect()
}

fn check_range(j_low: i32, j_high: i32) -> Result<(), BankError> {
    if j_low > j_high {
        return Err(BankError::Invalid(format!("empty scale range {j_low}..={j_high}")));
    }
    Ok(())
}

/// Sharp dyadic bands `+-[2^(j-1), 2^j)`. The top negative band also takes the Nyquist point
/// when it sits on `-2^J_high`, so the bank partitions the whole lattice.
pub fn build_shannon_1d(grid: Grid, j_low: i32, j_high: i32) -> Result<FilterBank, BankError> {
    need_1d(&grid)?;
    check_range(j_low, j_high)?;
    let top = 2f64.powi(j_high);
    if top > grid.nyquist() {
        let k = (top * grid.period()).ceil() as i64;
        return Err(GridError::NyquistOverflow(vec![k]).into());
    }
    let nyq_in_band = top == grid.nyquist();
    let kappa = 2;
    let scales = dyadic_scales(j_low, j_high, kappa);
    let mut lowpass = SpectralSignal::zeros(grid);
    let mut spectra: Vec<SpectralSignal> =
        (0..2 * (j_high - j_low + 1)).map(|_| SpectralSignal::zeros(grid)).collect();
    let low = 2f64.powi(j_low - 1);
    for i in 0..grid.len() {
        let xi = grid.frequency(i)[0];
        let t = xi.abs();
        if t < low {
            lowpass.coeffs[i] = real(1.0);
            continue;
        }
        let band = (j_low..=j_high).find(|&j| t >= 2f64.powi(j - 1) && t < 2f64.powi(j));
        let band = match band {
            Some(j) => Some(j),
            None if nyq_in_band && xi == -top => Some(j_high),
            None => None,
        };
        if let Some(j) = band {
            let dir = usize::from(xi < 0.0);
            spectra[2 * (j - j_low) as usize + dir].coeffs[i] = real(1.0);
        }
    }
    let mut filters = Vec::new();
    for (idx, spec) in spectra.into_iter().enumerate() {
        let j = j_low + (idx / 2) as i32;
        let dir = (idx % 2) as u32;
        let mut f = Filter::new(Label::new(j, dir), spec)?;
        let cone = ConeSpec::rotated(1, if dir == 0 { 0.0 } else { PI }, 0.0)?;
        attach(&mut f, (j - j_low) as usize, &scales, kappa, cone);
        filters.push(f);
    }
    let covered = if nyq_in_band { top } else { top - 0.5 * grid.spacing() };
    let structure = Structure::Wavelet { a: 2.0, rotations: 2, j_coarse: 1 - j_low };
    FilterBank::assemble("shannon", grid, lowpass, filters, scales, kappa, 0.0, structure, covered, 0.0, 0)
}

/// Smooth dyadic bank: `|psi_j|^2 = R(2^-j |xi|)` on each half line with the spline transition.
pub fn build_meyer_1d(grid: Grid, j_low: i32, j_high: i32) -> Result<FilterBank, BankError> {
    need_1d(&grid)?;
    check_range(j_low, j_high)?;
    let top = 2f64.powi(j_high + 1);
    if top > grid.nyquist() {
        let k = (top * grid.period()).ceil() as i64;
        return Err(GridError::NyquistOverflow(vec![k]).into());
    }
    let kappa = 2;
    let scales = dyadic_scales(j_low, j_high, kappa);
    let lo = 2f64.powi(j_low);
    let mut snapped = 0;
    let lowpass = SpectralSignal::from_fn(grid, |xi| {
        let t = xi[0].abs();
        if t <= lo / 2.0 {
            real(1.0)
        } else if t < lo {
            real((1.0 - radial_window(2.0, t / lo)).max(0.0).sqrt())
        } else {
            zero()
        }
    });
    let mut filters = Vec::new();
    for j in j_low..=j_high {
        let s = 2f64.powi(-j);
        for dir in 0..2u32 {
            let sign = if dir == 0 { 1.0 } else { -1.0 };
            let spec = SpectralSignal::from_fn(grid, |xi| {
                let x = sign * xi[0];
                if x > 0.0 {
                    real(radial_window(2.0, x * s).sqrt())
                } else {
                    zero()
                }
            });
            snapped += spec.coeffs.iter().filter(|c| c.norm() > 0.0 && c.norm() < SNAP).count();
            let mut f = Filter::new(Label::new(j, dir), spec)?;
            let cone = ConeSpec::rotated(1, if dir == 0 { 0.0 } else { PI }, 0.0)?;
            attach(&mut f, (j - j_low) as usize, &scales, kappa, cone);
            filters.push(f);
        }
    }
    let covered = 2f64.powi(j_high);
    let structure = Structure::Wavelet { a: 2.0, rotations: 2, j_coarse: 1 - j_low };
    FilterBank::assemble("meyer", grid, lowpass, filters, scales, kappa, 0.0, structure, covered, 1e-12, snapped)
}

/// Squared angular window of half-width `2 pi / g` centred on the diagonal.
pub fn wedge_window(rotations: usize, theta: f64) -> f64 {
    let width = 2.0 * PI / rotations as f64;
    let mut d = (theta - FRAC_PI_4).rem_euclid(2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    }
    spline(1.0 - d.abs() / width)
}

/// Default directional mother: radial window on `[1/a, a]` times the diagonal wedge.
pub fn meyer_wedge(a: f64, rotations: usize) -> impl Fn(Vec2) -> f64 + Sync {
    move |xi: Vec2| {
        let t = geometry::norm(xi);
        if t == 0.0 {
            return 0.0;
        }
        (radial_window(a, t) * wedge_window(rotations, xi[1].atan2(xi[0]))).sqrt()
    }
}

/// Directional wavelet bank `psi_(j,g)(xi) = mother(a^-j M_g^-1 xi)` on a 2D grid, completed by
/// `chi = sqrt(max(0, 1 - sum |psi|^2))` below the coarsest scale.
pub fn build_directional_2d(
    grid: Grid,
    a: f64,
    rotations: usize,
    j_coarse: i32,
    mother: &(dyn Fn(Vec2) -> f64 + Sync),
) -> Result<FilterBank, BankError> {
    if grid.dim() != 2 {
        return Err(BankError::Invalid("directional banks need a 2D grid".into()));
    }
    if rotations < 8 || rotations % 2 != 0 {
        return Err(BankError::Invalid(format!(
            "rotation group order {rotations} must be even and at least 8 so wedges fit the orthant"
        )));
    }
    if !(a > 1.0) || j_coarse < 1 {
        return Err(BankError::Invalid("need a > 1 and J >= 1".into()));
    }
    let kappa = 2;
    let j0 = 1 - j_coarse;
    let mut j_max = j0 - 1;
    while a.powi(j_max + 2) <= grid.nyquist() * (1.0 + 1e-12) {
        j_max += 1;
    }
    if j_max < j0 {
        let k = (a.powi(j0 + 1) * grid.period()).ceil() as i64;
        return Err(GridError::NyquistOverflow(vec![k, 0]).into());
    }
    // Mother support must lie in the shell [1/a, a^(kappa-1)] and the diagonal cone.
    let probe = Grid::new(2, 64, 16.0 / (2.0 * a))?;
    for i in 0..probe.len() {
        let xi = probe.frequency(i);
        let t = geometry::norm(xi);
        if mother(xi) > SNAP && (t < 1.0 / a * (1.0 - 1e-12) || t > a.powi(kappa as i32 - 1) * (1.0 + 1e-12)) {
            return Err(BankError::SupportViolation(format!("mother spectrum nonzero at {xi:?}")));
        }
    }
    let scales: Vec<f64> = (j0..=j_max + kappa as i32).map(|j| a.powi(j - 1)).collect();
    let mut filters = Vec::new();
    let mut snapped = 0;
    let mut rho: f64 = 0.0;
    for j in j0..=j_max {
        let s = a.powi(-j);
        for g in 0..rotations {
            let theta = 2.0 * PI * g as f64 / rotations as f64;
            let (sn, cs) = theta.sin_cos();
            let spec = SpectralSignal::from_fn(grid, |xi| {
                // M_g^-1 xi, scaled
                let x = [s * (cs * xi[0] + sn * xi[1]), s * (-sn * xi[0] + cs * xi[1])];
                real(mother(x))
            });
            snapped += spec.coeffs.iter().filter(|c| c.norm() > 0.0 && c.norm() < SNAP).count();
            let mut f = Filter::new(Label::new(j, g as u32), spec)?;
            let cone = ConeSpec::rotated(2, theta, 0.0)?;
            for &i in &f.support {
                let y = cone.pull_back(grid.frequency(i));
                let ang = 1.0 - (y[0] + y[1]) / (2f64.sqrt() * geometry::norm(y));
                rho = rho.max(ang);
            }
            f.shell = Some((j - j0) as usize);
            f.annulus = Some((scales[(j - j0) as usize], scales[(j - j0) as usize + kappa]));
            f.cone = Some(cone);
            filters.push(f);
        }
    }
    let rho = (rho + 1e-15).min(1.0 - 1e-12);
    for f in &mut filters {
        if let Some(c) = f.cone.as_mut() {
            c.rho = rho;
        }
    }
    let hp: Vec<f64> = {
        let mut acc = vec![0.0; grid.len()];
        for f in &filters {
            for &i in &f.support {
                acc[i] += f.spectrum.coeffs[i].norm_sqr();
            }
        }
        acc
    };
    if let Some((i, &v)) = hp.iter().enumerate().find(|(_, &v)| 1.0 - v < -1e-10) {
        return Err(BankError::NonUnitLP { residual: 1.0 - v, at: grid.frequency(i).to_vec() });
    }
    let low_edge = a.powi(j0);
    let mut lowpass = SpectralSignal::zeros(grid);
    for (i, &v) in hp.iter().enumerate() {
        if grid.freq_norm(i) < low_edge {
            let c = (1.0 - v).max(0.0).sqrt();
            lowpass.coeffs[i] = real(if c < SNAP { 0.0 } else { c });
        }
    }
    let covered = a.powi(j_max);
    let structure = Structure::Wavelet { a, rotations, j_coarse };
    FilterBank::assemble("directional", grid, lowpass, filters, scales, kappa, rho, structure, covered, 1e-10, snapped)
}

fn unwrapped(grid: &Grid, i: usize) -> [i64; 2] {
    grid.lattice(i)
}

fn wrap(c: i64, h: i64) -> i64 {
    let r = c.rem_euclid(2 * h);
    if r >= h {
        r - 2 * h
    } else {
        r
    }
}

/// Lattice translates of `window` by multiples of `spacing` (in lattice steps). The zero
/// translate is the low-pass; translates that would wrap past Nyquist are left out and their
/// region is excluded from the covered band.
pub fn build_ufc_bank(
    grid: Grid,
    window: &SpectralSignal,
    spacing: usize,
    d_target: f64,
) -> Result<FilterBank, BankError> {
    if window.grid != grid {
        return Err(BankError::Invalid("window lives on a different grid".into()));
    }
    if spacing == 0 {
        return Err(BankError::Invalid("spacing must be positive".into()));
    }
    let d = grid.dim();
    let h = (grid.n() / 2) as i64;
    let base: Vec<(usize, [i64; 2])> = window
        .coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() >= SNAP)
        .map(|(i, _)| (i, unwrapped(&grid, i)))
        .collect();
    if base.is_empty() {
        return Err(BankError::Invalid("empty window".into()));
    }
    let wball = support_ball(&grid, &base.iter().map(|b| b.0).collect::<Vec<_>>())?;
    if wball.radius > d_target * (1.0 + 1e-12) {
        return Err(BankError::Invalid(format!(
            "window radius {} exceeds D_target {d_target}",
            wball.radius
        )));
    }
    let s = spacing as i64;
    let tmax = h / s + 1;
    let range: Vec<i64> = (-tmax..=tmax).collect();
    let shifts: Vec<[i64; 2]> = if d == 1 {
        range.iter().map(|&t| [t, 0]).collect()
    } else {
        range.iter().flat_map(|&a| range.iter().map(move |&b| [a, b])).collect()
    };
    let mut lowpass = SpectralSignal::zeros(grid);
    let mut kept: Vec<([i64; 2], SpectralSignal)> = Vec::new();
    let mut excluded_min = f64::INFINITY;
    for t in shifts {
        let mut spec = SpectralSignal::zeros(grid);
        let mut wraps = false;
        let mut reach = false;
        for &(i, k) in &base {
            let q = [k[0] + s * t[0], k[1] + s * t[1]];
            let inside = q[..d].iter().all(|&c| c >= -h && c < h);
            let wrapped = [wrap(q[0], h), if d == 2 { wrap(q[1], h) } else { 0 }];
            if !inside {
                wraps = true;
            }
            if let Some(j) = grid.flat(wrapped) {
                reach = true;
                spec.coeffs[j] = window.coeffs[i];
            }
        }
        if !reach {
            continue;
        }
        if t == [0, 0] {
            lowpass = spec;
        } else if wraps {
            for (j, c) in spec.coeffs.iter().enumerate() {
                if c.norm() >= SNAP {
                    excluded_min = excluded_min.min(grid.freq_norm(j));
                }
            }
        } else {
            kept.push((t, spec));
        }
    }
    if kept.is_empty() {
        return Err(BankError::Invalid("no high-pass translate fits the grid".into()));
    }
    let mut filters = Vec::new();
    for (t, spec) in kept {
        // Provisional label; replaced once shells are known.
        let f = Filter::new(Label::new(0, 0), spec)?;
        filters.push((t, f));
    }
    let r1 = filters
        .iter()
        .flat_map(|(_, f)| f.support.iter().map(|&i| grid.freq_norm(i)))
        .fold(f64::INFINITY, f64::min);
    let shell_of = |f: &Filter| -> usize {
        let inner = f.support.iter().map(|&i| grid.freq_norm(i)).fold(f64::INFINITY, f64::min);
        ((inner / r1) * (1.0 + 1e-12)).log2().floor().max(0.0) as usize
    };
    let mut kappa = 2usize;
    let mut top_shell = 0;
    for (_, f) in &filters {
        let j = shell_of(f);
        top_shell = top_shell.max(j);
        let outer = f.support.iter().map(|&i| grid.freq_norm(i)).fold(0.0, f64::max);
        let rj = r1 * 2f64.powi(j as i32);
        let need = ((outer / rj) * (1.0 - 1e-12)).log2().ceil().max(0.0) as usize;
        kappa = kappa.max(need);
    }
    let scales: Vec<f64> = (0..=top_shell + kappa).map(|j| r1 * 2f64.powi(j as i32)).collect();
    let mut rho: f64 = 0.0;
    let mut counters = std::collections::BTreeMap::<usize, u32>::new();
    let mut out = Vec::new();
    filters.sort_by_key(|(t, _)| (t[0].abs() + t[1].abs(), *t));
    for (_, mut f) in filters {
        let j = shell_of(&f);
        let dir = counters.entry(j).or_insert(0);
        f.label = Label::new(j as i32 + 1, *dir);
        *dir += 1;
        let cone = if d == 1 {
            let c = f.chebyshev.center[0];
            ConeSpec::rotated(1, if c >= 0.0 { 0.0 } else { PI }, 0.0)?
        } else {
            let c = f.chebyshev.center;
            let theta = c[1].atan2(c[0]) - FRAC_PI_4;
            let cone = ConeSpec::rotated(2, theta, 0.0)?;
            for &i in &f.support {
                let y = cone.pull_back(grid.frequency(i));
                rho = rho.max(1.0 - (y[0] + y[1]) / (2f64.sqrt() * geometry::norm(y)));
            }
            cone
        };
        attach(&mut f, j, &scales, kappa, cone);
        out.push(f);
    }
    let rho = if d == 1 { 0.0 } else { (rho + 1e-15).min(1.0 - 1e-12) };
    for f in &mut out {
        if let Some(c) = f.cone.as_mut() {
            c.rho = rho;
        }
    }
    let covered = if excluded_min.is_finite() { excluded_min - 0.5 * grid.spacing() } else { f64::INFINITY };
    let d_psi = out.iter().map(|f| f.chebyshev.radius).fold(0.0, f64::max);
    let bank = FilterBank::assemble(
        "ufc",
        grid,
        lowpass,
        out,
        scales,
        kappa,
        rho,
        Structure::Ufc { d_psi },
        covered,
        1e-12,
        0,
    )?;
    let rep = verify_littlewood_paley(&bank);
    if rep.max_deviation > bank.lp_tolerance {
        return Err(BankError::CoverageGap { deviation: rep.max_deviation, at: rep.worst_frequency });
    }
    Ok(bank)
}

/// Indicator of `w` consecutive lattice points per axis, centred at the origin.
pub fn box_window(grid: Grid, w: usize) -> SpectralSignal {
    let lo = -((w / 2) as i64);
    let hi = lo + w as i64;
    let mut s = SpectralSignal::zeros(grid);
    for i in 0..grid.len() {
        let k = grid.lattice(i);
        if k[..grid.dim()].iter().all(|&c| c >= lo && c < hi) {
            s.coeffs[i] = real(1.0);
        }
    }
    s
}

/// The bank with every filter (and the low-pass) L1-dilated by `a^m`.
pub fn dilate_bank(bank: &FilterBank, m: i32, a: f64) -> Result<FilterBank, BankError> {
    let scale = a.powi(m);
    let lowpass = grid::dilate_l1_spectrum(&bank.lowpass, m, a)?;
    let mut filters = Vec::new();
    for f in &bank.filters {
        let spec = grid::dilate_l1_spectrum(&f.spectrum, m, a)?;
        if spec.coeffs.iter().all(|c| c.norm() < SNAP) {
            continue;
        }
        let mut g = Filter::new(f.label, spec)?;
        g.shell = f.shell;
        g.annulus = f.annulus.map(|(lo, hi)| (lo * scale, hi * scale));
        g.cone = f.cone;
        filters.push(g);
    }
    let scales = bank.scales.iter().map(|r| r * scale).collect();
    let mut out = FilterBank {
        name: format!("{}-dilated", bank.name),
        grid: bank.grid,
        lowpass,
        filters,
        scales,
        kappa: bank.kappa,
        gamma: bank.gamma,
        rho: bank.rho,
        structure: bank.structure.clone(),
        covered: (bank.covered * scale).min(bank.grid.nyquist() * 2f64.sqrt()),
        lp_tolerance: bank.lp_tolerance,
        lp_deviation: 0.0,
        snapped: bank.snapped,
    };
    out.lp_deviation = verify_littlewood_paley(&out).max_deviation;
    Ok(out)
}

/// Every label in `labels` must belong to the bank.
pub fn check_labels(bank: &FilterBank, labels: &BTreeSet<Label>) -> Result<(), Label> {
    match labels.iter().find(|l| bank.filter(**l).is_none()) {
        Some(l) => Err(*l),
        None => Ok(()),
    }
}
