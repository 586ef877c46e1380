//! Closed-form upper bounds on the energy remainder and the weight machinery behind them.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filters::{FilterBank, Structure};
use crate::geometry;
use crate::grid::{self, Signal};
use crate::sum::neumaier;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error("weight decreases near t = {0:e}")]
    NotNondecreasing(f64),
    #[error("weight is not t^{0}-dominated on the sampled range")]
    WeightNotDominated(f64),
    #[error("constant {0} must be positive and finite")]
    InvalidConstant(f64),
    #[error("bank is not a uniform frequency concentration bank")]
    NotUFC,
    #[error("bank is not wavelet-generated")]
    NotWavelet,
    #[error("support violation: {0}")]
    SupportViolation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Weight {
    /// `(1 + t^2)^(s/2)`.
    Sobolev { s: f64 },
    /// `ln^s(e + t)`.
    LogSobolev { s: f64 },
    /// `t^p`.
    Power { p: f64 },
}

impl Weight {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Self::Sobolev { s } => (1.0 + t * t).powf(s / 2.0),
            Self::LogSobolev { s } => (std::f64::consts::E + t).ln().powf(s),
            Self::Power { p } => t.powf(p),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            Self::Sobolev { s } => s * t * (1.0 + t * t).powf(s / 2.0 - 1.0),
            Self::LogSobolev { s } => {
                let u = std::f64::consts::E + t;
                s * u.ln().powf(s - 1.0) / u
            }
            Self::Power { p } => p * t.powf(p - 1.0),
        }
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Sobolev { s } => write!(f, "sobolev:{s}"),
            Self::LogSobolev { s } => write!(f, "log:{s}"),
            Self::Power { p } => write!(f, "power:{p}"),
        }
    }
}

impl FromStr for Weight {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, v) = s.split_once(':').ok_or_else(|| format!("expected NAME:VALUE, got {s:?}"))?;
        let v: f64 = v.trim().parse().map_err(|e| format!("bad weight parameter {v:?}: {e}"))?;
        if !(v >= 0.0) {
            return Err(format!("weight parameter must be nonnegative, got {v}"));
        }
        match name {
            "sobolev" => Ok(Self::Sobolev { s: v }),
            "log" | "log_sobolev" => Ok(Self::LogSobolev { s: v }),
            "power" => Ok(Self::Power { p: v }),
            _ => Err(format!("unknown weight {name:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Classification {
    Strong,
    /// `h_(k, omega)` is nondecreasing from `threshold` on.
    Weak { threshold: f64 },
    Unclassified,
}

impl Classification {
    pub fn is_strong(&self) -> bool {
        matches!(self, Self::Strong)
    }

    /// Strong weights are weak with any threshold.
    pub fn is_weak(&self) -> bool {
        !matches!(self, Self::Unclassified)
    }

    pub fn threshold(&self) -> Option<f64> {
        match *self {
            Self::Strong => Some(0.0),
            Self::Weak { threshold } => Some(threshold),
            Self::Unclassified => None,
        }
    }
}

pub const CLASSIFY_LO: f64 = 1e-6;
pub const CLASSIFY_HI: f64 = 1e6;
pub const CLASSIFY_PER_DECADE: usize = 100;
/// Slack on `k omega >= 2 t omega'` so that equality (constant `h`) survives round-off.
pub const CLASSIFY_MARGIN: f64 = 1.01;

fn log_grid() -> Vec<f64> {
    let decades = (CLASSIFY_HI / CLASSIFY_LO).log10().round() as usize;
    let n = decades * CLASSIFY_PER_DECADE;
    (0..=n).map(|i| CLASSIFY_LO * 10f64.powf(i as f64 / CLASSIFY_PER_DECADE as f64)).collect()
}

/// Sampled dominance test for an arbitrary weight; central differences stand in for a
/// missing derivative.
pub fn classify_fn(
    omega: &dyn Fn(f64) -> f64,
    derivative: Option<&dyn Fn(f64) -> f64>,
    k: f64,
) -> Result<Classification, CertifyError> {
    let ts = log_grid();
    let mut last_fail = None;
    let mut prev = omega(ts[0]);
    for (i, &t) in ts.iter().enumerate() {
        let w = omega(t);
        if i > 0 && w < prev * (1.0 - 1e-12) {
            return Err(CertifyError::NotNondecreasing(t));
        }
        prev = w;
        let dw = match derivative {
            Some(d) => d(t),
            None => {
                let h = t * 1e-6;
                (omega(t + h) - omega(t - h)) / (2.0 * h)
            }
        };
        if !(CLASSIFY_MARGIN * k * w >= 2.0 * t * dw && dw >= -1e-12 * w) {
            last_fail = Some(i);
        }
    }
    Ok(match last_fail {
        None => Classification::Strong,
        Some(i) if i + 1 < ts.len() => Classification::Weak { threshold: ts[i + 1] },
        Some(_) => Classification::Unclassified,
    })
}

pub fn classify_weight(w: &Weight, k: f64) -> Result<Classification, CertifyError> {
    let f = |t: f64| w.eval(t);
    let d = |t: f64| w.derivative(t);
    classify_fn(&f, Some(&d), k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ThetaKernel {
    /// `exp(-pi |xi|^2)`.
    Gaussian,
    /// `(1 - |xi|)_+^(floor(d/2) + 1)`.
    EuclidHat { d: usize },
}

impl ThetaKernel {
    fn power(d: usize) -> i32 {
        (d / 2 + 1) as i32
    }

    /// Radial profile of the spectrum.
    pub fn hat(&self, r: f64) -> f64 {
        match *self {
            Self::Gaussian => (-std::f64::consts::PI * r * r).exp(),
            Self::EuclidHat { d } => (1.0 - r).max(0.0).powi(Self::power(d)),
        }
    }

    /// Order `k` in `1 - |theta(xi)|^2 <= C |xi|^k`.
    pub fn k(&self) -> f64 {
        match self {
            Self::Gaussian => 2.0,
            Self::EuclidHat { .. } => 1.0,
        }
    }

    pub fn c_theta(&self) -> f64 {
        match *self {
            Self::Gaussian => 2.0 * std::f64::consts::PI,
            Self::EuclidHat { d } => 2.0 * Self::power(d) as f64,
        }
    }

    pub fn compact(&self) -> bool {
        matches!(self, Self::EuclidHat { .. })
    }
}

/// Smallest `C~` with `theta(C~ xi) <= |chi(xi)|` on every lattice frequency, or `None`.
pub fn find_ctilde(bank: &FilterBank, theta: &ThetaKernel) -> Option<f64> {
    let g = &bank.grid;
    let pts: Vec<(f64, f64)> = (0..g.len()).map(|i| (g.freq_norm(i), bank.lowpass.coeffs[i].norm())).collect();
    if !theta.compact() && pts.iter().any(|&(_, c)| c == 0.0) {
        return None;
    }
    let feasible = |c: f64| pts.iter().all(|&(r, chi)| theta.hat(c * r) <= chi + 1e-15);
    let mut hi = 1.0;
    while !feasible(hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return None;
        }
    }
    let mut lo = hi / 2.0;
    while feasible(lo) {
        hi = lo;
        lo /= 2.0;
        if lo < 1e-12 {
            return Some(hi);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// `sum |f(xi)|^2 (1 - |theta(C alpha^(N-1) xi)|^2)`.
pub fn kernel_bound(f: &Signal, bank: &FilterBank, theta: &ThetaKernel, n: usize, c: f64) -> Result<f64, CertifyError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(CertifyError::InvalidConstant(c));
    }
    let spec = grid::forward_fourier(f);
    let scale = c * bank.alpha().powi(n as i32 - 1);
    let g = &f.grid;
    Ok(neumaier(spec.coeffs.iter().enumerate().map(|(i, z)| {
        let h = theta.hat(scale * g.freq_norm(i));
        z.norm_sqr() * (1.0 - h * h)
    })))
}

fn filter_energies(f: &Signal, bank: &FilterBank) -> Vec<f64> {
    let spec = grid::forward_fourier(f);
    bank.filters
        .iter()
        .map(|psi| neumaier(psi.support.iter().map(|&i| (spec.coeffs[i] * psi.spectrum.coeffs[i]).norm_sqr())))
        .collect()
}

/// `sum_psi omega^2(d_psi) |f * psi|^2`.
pub fn weighted_decomp_norm(f: &Signal, bank: &FilterBank, w: &dyn Fn(f64) -> f64) -> f64 {
    let e = filter_energies(f, bank);
    neumaier(bank.filters.iter().zip(e).map(|(psi, e)| w(psi.chebyshev.radius).powi(2) * e))
}

/// `sum omega^2(|xi|) |f(xi)|^2`.
pub fn fourier_weighted_norm_sq(f: &Signal, w: &dyn Fn(f64) -> f64) -> f64 {
    let spec = grid::forward_fourier(f);
    let g = &f.grid;
    neumaier(spec.coeffs.iter().enumerate().map(|(i, z)| w(g.freq_norm(i)).powi(2) * z.norm_sqr()))
}

/// `(|f|_(H^s), |f|_(H^s_log))`.
pub fn sobolev_norms(f: &Signal, s: f64) -> (f64, f64) {
    let sob = Weight::Sobolev { s };
    let log = Weight::LogSobolev { s };
    (
        fourier_weighted_norm_sq(f, &|t| sob.eval(t)).sqrt(),
        fourier_weighted_norm_sq(f, &|t| log.eval(t)).sqrt(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    Kernel,
    Weighted,
    Ufc,
    Sobolev,
    LogSobolev,
    Wavelet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rate {
    /// `O(base^N)`.
    Exponential { base: f64 },
    /// `O(constant N^-exponent)`.
    Polynomial { exponent: f64, constant: f64 },
    /// `O(omega^-2(alpha^-N))` for a weight without a closed form.
    WeightInverse,
    Bounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub n: usize,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCertificate {
    pub bank: String,
    pub theorem: Theorem,
    pub alpha: f64,
    pub constants: BTreeMap<String, f64>,
    /// Explicit `B(N)`; empty when only the asymptotic rate is certified.
    pub rows: Vec<BoundRow>,
    pub valid_from: usize,
    pub rate: Rate,
    pub asymptotic_only: bool,
    pub notes: Vec<String>,
}

impl DecayCertificate {
    pub fn bound(&self, n: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.n == n).map(|r| r.bound)
    }

    /// Rows are nonincreasing in `N`.
    pub fn monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].bound <= w[0].bound * (1.0 + 1e-12))
    }
}

fn base(bank: &FilterBank, theorem: Theorem, alpha: f64) -> DecayCertificate {
    DecayCertificate {
        bank: bank.name.clone(),
        theorem,
        alpha,
        constants: BTreeMap::new(),
        rows: Vec::new(),
        valid_from: 1,
        rate: Rate::Bounded,
        asymptotic_only: false,
        notes: Vec::new(),
    }
}

fn weight_rate(w: &Weight, alpha: f64, k: f64) -> (Theorem, Rate) {
    match *w {
        Weight::Sobolev { s } if s == 0.0 => (Theorem::Sobolev, Rate::Bounded),
        Weight::Sobolev { s } => {
            // Sobolev regularity above k/2 buys nothing more.
            (Theorem::Sobolev, Rate::Exponential { base: alpha.powf(2.0 * s.min(k / 2.0).min(1.0)) })
        }
        Weight::LogSobolev { s } if s == 0.0 => (Theorem::LogSobolev, Rate::Bounded),
        Weight::LogSobolev { s } => (
            Theorem::LogSobolev,
            Rate::Polynomial { exponent: 2.0 * s, constant: (1.0 / alpha).ln().powf(-2.0 * s) },
        ),
        Weight::Power { p } if p == 0.0 => (Theorem::Weighted, Rate::Bounded),
        Weight::Power { p } => (Theorem::Weighted, Rate::Exponential { base: alpha.powf(2.0 * p) }),
    }
}

/// Kernel-bound table `N = 1..=n_max` with `C = C~` when it exists.
pub fn rate_certificate_kernel(f: &Signal, bank: &FilterBank, theta: &ThetaKernel, n_max: usize) -> DecayCertificate {
    let alpha = bank.alpha();
    let mut cert = base(bank, Theorem::Kernel, alpha);
    match find_ctilde(bank, theta) {
        Some(c) => {
            cert.constants.insert("c_tilde".into(), c);
            cert.rows = (1..=n_max)
                .map(|n| BoundRow { n, bound: kernel_bound(f, bank, theta, n, c).expect("positive constant") })
                .collect();
            cert.rate = Rate::Bounded;
        }
        None => {
            cert.asymptotic_only = true;
            cert.valid_from = 2;
            cert.rate = Rate::Bounded;
            cert.notes.push("no C~ for this kernel and low-pass; the N >= 2 constant is not constructive".into());
        }
    }
    cert
}

/// Explicit weighted bound when the weight is strong and `C~` exists, else the asymptotic rate.
pub fn rate_certificate_weighted(
    f: &Signal,
    bank: &FilterBank,
    w: &Weight,
    theta: &ThetaKernel,
    n_max: usize,
) -> Result<DecayCertificate, CertifyError> {
    let alpha = bank.alpha();
    let k = theta.k();
    let class = classify_weight(w, k)?;
    if !class.is_weak() {
        return Err(CertifyError::WeightNotDominated(k));
    }
    let (theorem, rate) = weight_rate(w, alpha, k);
    let mut cert = base(bank, theorem, alpha);
    cert.rate = rate;
    let d_omega = weighted_decomp_norm(f, bank, &|t| w.eval(t));
    cert.constants.insert("k".into(), k);
    cert.constants.insert("c_theta".into(), theta.c_theta());
    cert.constants.insert("d_omega".into(), d_omega);
    if let Some(t) = class.threshold() {
        cert.constants.insert("threshold".into(), t);
    }
    let ctilde = find_ctilde(bank, theta);
    match (class, ctilde) {
        (Classification::Strong, Some(c)) => {
            let pre = (theta.c_theta() * c.powf(k) * alpha.powf(-k)).max(1.0);
            cert.constants.insert("c_tilde".into(), c);
            cert.constants.insert("prefactor".into(), pre);
            cert.valid_from = 2;
            cert.rows = (2..=n_max)
                .map(|n| BoundRow { n, bound: pre * d_omega * w.eval(alpha.powi(-(n as i32))).powi(-2) })
                .collect();
        }
        (class, c) => {
            cert.asymptotic_only = true;
            cert.valid_from = 2;
            if !class.is_strong() {
                cert.notes.push(format!("weight is only weakly t^{k}-dominated; asymptotic rate only"));
            }
            if c.is_none() {
                cert.notes.push("no C~ for this kernel and low-pass; asymptotic rate only".into());
            }
        }
    }
    Ok(cert)
}

/// All-`N` bound `max{1, 2(floor(d/2)+1)/(alpha r_1)} D_Psi (|f|^2 - |f*chi|^2) alpha^N`.
pub fn rate_certificate_ufc(f: &Signal, bank: &FilterBank, n_max: usize) -> Result<DecayCertificate, CertifyError> {
    let d_psi = match bank.structure {
        Structure::Ufc { d_psi } => d_psi,
        _ => return Err(CertifyError::NotUFC),
    };
    let alpha = bank.alpha();
    let d = bank.grid.dim();
    let r1 = bank.r1();
    let pre = (2.0 * (d / 2 + 1) as f64 / (alpha * r1)).max(1.0);
    let hp = highpass_energy(f, bank);
    let mut cert = base(bank, Theorem::Ufc, alpha);
    cert.constants.insert("prefactor".into(), pre);
    cert.constants.insert("d_psi".into(), d_psi);
    cert.constants.insert("r1".into(), r1);
    cert.constants.insert("highpass_energy".into(), hp);
    cert.rows = (1..=n_max).map(|n| BoundRow { n, bound: pre * d_psi * hp * alpha.powi(n as i32) }).collect();
    cert.rate = Rate::Exponential { base: alpha * alpha };
    Ok(cert)
}

/// `|f|^2 - |f * chi|^2`.
pub fn highpass_energy(f: &Signal, bank: &FilterBank) -> f64 {
    let spec = grid::forward_fourier(f);
    neumaier(spec.coeffs.iter().zip(&bank.lowpass.coeffs).map(|(z, c)| z.norm_sqr() * (1.0 - c.norm_sqr())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SobolevKind {
    Sobolev,
    LogSobolev,
}

/// Wavelet rate with `alpha(a^-kappa, rho)` after re-checking every filter against its shell
/// and cone.
pub fn rate_certificate_wavelet(f: &Signal, bank: &FilterBank, s: f64, kind: SobolevKind) -> Result<DecayCertificate, CertifyError> {
    let a = match bank.structure {
        Structure::Wavelet { a, .. } => a,
        _ => return Err(CertifyError::NotWavelet),
    };
    verify_supports(bank)?;
    let gamma = a.powi(-(bank.kappa as i32));
    let alpha = geometry::compute_alpha(gamma, bank.rho).map_err(|e| CertifyError::SupportViolation(e.to_string()))?;
    let w = match kind {
        SobolevKind::Sobolev => Weight::Sobolev { s },
        SobolevKind::LogSobolev => Weight::LogSobolev { s },
    };
    let (theorem, rate) = weight_rate(&w, alpha, 2.0);
    let mut cert = base(bank, theorem, alpha);
    cert.theorem = Theorem::Wavelet;
    cert.rate = rate;
    cert.asymptotic_only = true;
    cert.valid_from = 2;
    cert.constants.insert("a".into(), a);
    cert.constants.insert("kappa".into(), bank.kappa as f64);
    cert.constants.insert("rho".into(), bank.rho);
    cert.constants.insert("s".into(), s);
    let (hs, hlog) = sobolev_norms(f, s);
    cert.constants.insert("sobolev_norm".into(), if kind == SobolevKind::Sobolev { hs } else { hlog });
    if let Rate::Exponential { base } = rate {
        cert.constants.insert("rate_exponent".into(), base.ln() / alpha.ln());
    }
    if !matches!(theorem, Theorem::Sobolev | Theorem::LogSobolev) {
        cert.notes.push("unexpected weight family".into());
    }
    Ok(cert)
}

fn verify_supports(bank: &FilterBank) -> Result<(), CertifyError> {
    let g = &bank.grid;
    for psi in &bank.filters {
        let (lo, hi) = psi
            .annulus
            .ok_or_else(|| CertifyError::SupportViolation(format!("{} has no annulus", psi.label)))?;
        for &i in &psi.support {
            let xi = g.frequency(i);
            let t = geometry::norm(xi);
            let in_shell = t >= lo * (1.0 - 1e-12) && t <= hi * (1.0 + 1e-12);
            let in_cone = psi.cone.map_or(true, |c| geometry::cone_membership(xi, &c));
            if !(in_shell && in_cone) {
                return Err(CertifyError::SupportViolation(format!("{} is nonzero at {:?}", psi.label, &xi[..g.dim()])));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    pub decomp_norm: f64,
    pub fourier_norm: f64,
    pub constant: f64,
    pub kappa: usize,
    pub slack: f64,
}

/// Both sides of `sum omega^2(d_psi)|f*psi|^2 <= C kappa sum omega^2(|xi|)|f(xi)|^2`.
pub fn check_inclusion(f: &Signal, bank: &FilterBank, w: &Weight, k: f64) -> Result<InclusionReport, CertifyError> {
    let class = classify_weight(w, k)?;
    let t = class.threshold().ok_or(CertifyError::WeightNotDominated(k))?;
    let r = |j: usize| -> f64 {
        // 1-based radii, extended geometrically past the stored ones.
        match bank.scales.get(j - 1) {
            Some(v) => *v,
            None => {
                let last = bank.scales.len();
                bank.scales[last - 1] * bank.gamma.powf(-((j - last) as f64) / bank.kappa as f64)
            }
        }
    };
    let mut big_j = 1;
    while r(big_j) < t {
        big_j += 1;
    }
    let small = w.eval(r(big_j + bank.kappa)).powi(2) / w.eval(r(1)).powi(2);
    let constant = small.max(bank.gamma.powf(-k));
    let lhs = weighted_decomp_norm(f, bank, &|t| w.eval(t));
    let rhs = fourier_weighted_norm_sq(f, &|t| w.eval(t));
    Ok(InclusionReport {
        decomp_norm: lhs,
        fourier_norm: rhs,
        constant,
        kappa: bank.kappa,
        slack: constant * bank.kappa as f64 * rhs - lhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{build_meyer_1d, build_shannon_1d};
    use crate::grid::Grid;

    #[test]
    fn sobolev_is_strong_up_to_one() {
        for s in [0.25, 0.5, 1.0] {
            assert!(classify_weight(&Weight::Sobolev { s }, 2.0).unwrap().is_strong());
        }
        assert!(!classify_weight(&Weight::Sobolev { s: 1.5 }, 2.0).unwrap().is_strong());
        assert!(classify_weight(&Weight::Power { p: 1.0 }, 2.0).unwrap().is_strong());
        assert!(classify_weight(&Weight::Power { p: 0.5 }, 1.0).unwrap().is_strong());
    }

    #[test]
    fn large_log_exponent_is_weak() {
        let e = std::f64::consts::E;
        match classify_weight(&Weight::LogSobolev { s: 5.0 }, 2.0).unwrap() {
            Classification::Weak { threshold } => assert!(threshold <= e.powi(5) - e),
            c => panic!("expected weak, got {c:?}"),
        }
    }

    #[test]
    fn decreasing_weight_rejected() {
        let f = |t: f64| 1.0 / (1.0 + t);
        assert!(matches!(classify_fn(&f, None, 2.0), Err(CertifyError::NotNondecreasing(_))));
    }

    #[test]
    fn theta_constants_dominate() {
        for th in [ThetaKernel::Gaussian, ThetaKernel::EuclidHat { d: 1 }, ThetaKernel::EuclidHat { d: 2 }] {
            for i in 1..2000 {
                let r = i as f64 * 1e-3;
                let h = th.hat(r);
                assert!((1.0 - h * h) / r.powf(th.k()) <= th.c_theta() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn ctilde_for_shannon_is_inverse_r1() {
        let g = Grid::new(1, 256, 1.0).unwrap();
        let bank = build_shannon_1d(g, 2, 7).unwrap();
        let c = find_ctilde(&bank, &ThetaKernel::EuclidHat { d: 1 }).unwrap();
        assert!((c - 1.0 / bank.r1()).abs() < 1e-9);
        assert!(find_ctilde(&bank, &ThetaKernel::Gaussian).is_none());
        let m = build_meyer_1d(g, 2, 6).unwrap();
        let c = find_ctilde(&m, &ThetaKernel::EuclidHat { d: 1 }).unwrap();
        for i in 0..g.len() {
            let hat = ThetaKernel::EuclidHat { d: 1 }.hat(c * g.freq_norm(i));
            assert!(hat <= m.lowpass.coeffs[i].norm() + 1e-15);
        }
    }
}
