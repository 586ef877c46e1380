//! Slow-decay signals: weighted sums of frequency-separated dilates whose energy remainder
//! stays above a prescribed null sequence, together with the hypothesis audit.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filters::{FilterBank, Label};
use crate::grid::{self, GridError, Signal, SpectralSignal};
use crate::scatter::{self, ScatterError};
use crate::sum::neumaier;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForgeError {
    #[error("decay sequence increases at index {0}")]
    NotNonincreasing(usize),
    #[error("decay sequence must be positive, got {0}")]
    NonPositive(f64),
    #[error("decay sequence does not tend to zero")]
    NotNull,
    #[error("label {0} is not in the bank")]
    UnknownLabel(Label),
    #[error("Nyquist headroom ran out while choosing exponent {k}")]
    GridExhausted { k: usize },
    #[error("W_{k} saturates at {achieved:.6} below the target {target:.6} (delta {delta_achievable:.6} reachable)")]
    TargetUnreachable { k: usize, achieved: f64, target: f64, delta_achievable: f64 },
    #[error("filter blocks {0} and {1} overlap")]
    DisjointnessViolation(usize, usize),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Scatter(#[from] ScatterError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Null sequence `E_1 >= E_2 >= ... > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum DecaySequence {
    /// `E_N = r^(N-1)`.
    Geometric { ratio: f64 },
    /// `E_N = N^-p`.
    Power { exponent: f64 },
    /// Explicit prefix; past its end the last value is halved at each step.
    Table { values: Vec<f64> },
}

impl DecaySequence {
    pub fn validate(&self) -> Result<(), ForgeError> {
        match self {
            Self::Geometric { ratio } if !(*ratio > 0.0 && *ratio < 1.0) => {
                if *ratio >= 1.0 {
                    Err(ForgeError::NotNull)
                } else {
                    Err(ForgeError::NonPositive(*ratio))
                }
            }
            Self::Power { exponent } if !(*exponent > 0.0) => Err(ForgeError::NotNull),
            Self::Table { values } => {
                if values.is_empty() {
                    return Err(ForgeError::Invalid("empty decay table".into()));
                }
                if let Some(v) = values.iter().find(|v| !(**v > 0.0)) {
                    return Err(ForgeError::NonPositive(*v));
                }
                match values.windows(2).position(|w| w[1] > w[0]) {
                    Some(i) => Err(ForgeError::NotNonincreasing(i + 2)),
                    None => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }

    /// `E_N` for `N >= 1`.
    pub fn value(&self, n: usize) -> f64 {
        assert!(n >= 1, "decay sequences start at N = 1");
        match self {
            Self::Geometric { ratio } => ratio.powi(n as i32 - 1),
            Self::Power { exponent } => (n as f64).powf(-exponent),
            Self::Table { values } => match values.get(n - 1) {
                Some(v) => *v,
                None => values[values.len() - 1] * 0.5f64.powi((n - values.len()) as i32),
            },
        }
    }
}

impl fmt::Display for DecaySequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Geometric { ratio } => write!(f, "geometric:{ratio}"),
            Self::Power { exponent } => write!(f, "power:{exponent}"),
            Self::Table { values } => write!(f, "table:{}", values.len()),
        }
    }
}

impl FromStr for DecaySequence {
    type Err = String;

    /// `geometric:R`, `power:P`, or a whitespace/comma separated list for a table.
    fn from_str(s: &str) -> Result<Self, String> {
        let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("bad number {v:?}: {e}"));
        let seq = if let Some(r) = s.strip_prefix("geometric:") {
            Self::Geometric { ratio: num(r)? }
        } else if let Some(p) = s.strip_prefix("power:") {
            Self::Power { exponent: num(p)? }
        } else {
            let values = s
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(num)
                .collect::<Result<Vec<_>, _>>()?;
            Self::Table { values }
        };
        seq.validate().map_err(|e| e.to_string())?;
        Ok(seq)
    }
}

/// `a_k = sqrt(E_k - E_(k+1))` for `k = 1..=K`.
pub fn make_coefficients(e: &DecaySequence, k_max: usize) -> Result<Vec<f64>, ForgeError> {
    e.validate()?;
    (1..=k_max)
        .map(|k| {
            let d = e.value(k) - e.value(k + 1);
            if d < 0.0 {
                Err(ForgeError::NotNonincreasing(k + 1))
            } else {
                Ok(d.sqrt())
            }
        })
        .collect()
}

/// As [`make_coefficients`] but the last weight carries the whole tail, `a_K = sqrt(E_K)`, so
/// the finite sum reproduces `sum_(k >= N) a_k^2 = E_N` for every `N <= K`.
pub fn truncated_coefficients(e: &DecaySequence, k_max: usize) -> Result<Vec<f64>, ForgeError> {
    let mut a = make_coefficients(e, k_max)?;
    if let Some(last) = a.last_mut() {
        *last = e.value(k_max).sqrt();
    }
    Ok(a)
}

/// `eps_k = (k+1) eta_k + sum_(j > k) eta_j`, indices counted from 0 as in the schedule. The
/// tail stops at the last summand: a finite sum is the series with `a_j = 0` beyond it, and
/// those terms admit arbitrarily small tolerances.
pub fn epsilons(eta: &[f64]) -> Vec<f64> {
    (0..eta.len())
        .map(|k| (k + 1) as f64 * eta[k] + neumaier(eta[k + 1..].iter().copied()))
        .collect()
}

/// Default tolerances for weights `a` (index 0 first): `eta_k = min(c 4^-k, u / (K+1))` with
/// `u` the smallest `delta a_k^2 / (2 |a|^2)` over nonzero weights, which keeps every
/// `eps_k <= delta a_k^2 / (2 |a|^2)`. The cap is shrunk slightly because the smallest weight
/// otherwise meets its bound with equality and rounding can tip it over.
pub fn default_schedule(a: &[f64], delta: f64, c: f64) -> Vec<f64> {
    let norm_sq = neumaier(a.iter().map(|x| x * x));
    let u = a
        .iter()
        .filter(|x| **x != 0.0)
        .map(|x| delta * x * x / (2.0 * norm_sq))
        .fold(f64::INFINITY, f64::min);
    let cap = u / a.len() as f64 * (1.0 - 1e-9);
    (0..a.len()).map(|k| (c * 0.25f64.powi(k as i32)).min(cap)).collect()
}

fn filtered_mass(spec: &SpectralSignal, bank: &FilterBank, label: Label) -> Result<f64, ForgeError> {
    let psi = bank.filter(label).ok_or(ForgeError::UnknownLabel(label))?;
    Ok(neumaier(psi.support.iter().map(|&i| (spec.coeffs[i] * psi.spectrum.coeffs[i]).norm_sqr())))
}

/// `sum_(psi in block) |g * psi|^2`.
pub fn block_mass(g: &Signal, bank: &FilterBank, block: &BTreeSet<Label>) -> Result<f64, ForgeError> {
    let spec = grid::forward_fourier(g);
    let parts = block.iter().map(|l| filtered_mass(&spec, bank, *l)).collect::<Result<Vec<_>, _>>()?;
    Ok(neumaier(parts))
}

/// `sum_(psi not in block) |f * psi|^2`.
pub fn separation_deficits(f: &Signal, bank: &FilterBank, block: &BTreeSet<Label>) -> Result<f64, ForgeError> {
    if let Some(l) = block.iter().find(|l| bank.filter(**l).is_none()) {
        return Err(ForgeError::UnknownLabel(*l));
    }
    let spec = grid::forward_fourier(f);
    let parts: Vec<f64> = bank
        .filters
        .iter()
        .filter(|psi| !block.contains(&psi.label))
        .map(|psi| neumaier(psi.support.iter().map(|&i| (spec.coeffs[i] * psi.spectrum.coeffs[i]).norm_sqr())))
        .collect();
    Ok(neumaier(parts))
}

/// Filters whose support meets the significant spectral support of `f`.
pub fn meeting_block(f: &Signal, bank: &FilterBank) -> BTreeSet<Label> {
    let spec = grid::forward_fourier(f);
    let cut = 1e-14 * spec.max_abs();
    let hot: Vec<bool> = spec.coeffs.iter().map(|c| c.norm() > cut).collect();
    bank.filters.iter().filter(|psi| psi.support.iter().any(|&i| hot[i])).map(|psi| psi.label).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub k: usize,
    pub m: i32,
    /// `W_k(f_(m_k))`.
    pub w_k: f64,
    pub block: BTreeSet<Label>,
    /// Mass of `f_(m_k)` outside its block.
    pub out_mass: f64,
    /// Largest mass an earlier summand puts into this block.
    pub in_mass: f64,
    /// Largest `|<f_(m_k), f_(m_j)>|` over earlier summands.
    pub max_inner: f64,
    pub eta: f64,
}

/// Earlier summands, used by the separation checks.
struct Placed {
    signal: Signal,
    block: BTreeSet<Label>,
}

/// Chooses `m_1 < m_2 < ... < m_K` (gaps of at least `kappa`) with `W_k(f_(m_k)) >= 4 delta` and
/// all separation sums below `eta[k]`. `eta` is indexed from 0 and `eta[0]` belongs to the
/// anchor slot; `anchor` is that summand when present.
pub fn select_subsequence(
    f0: &Signal,
    bank: &FilterBank,
    delta: f64,
    eta: &[f64],
    k_max: usize,
    anchor: Option<&Signal>,
) -> Result<Vec<Selection>, ForgeError> {
    if eta.len() != k_max + 1 {
        return Err(ForgeError::Invalid(format!("need {} tolerances, got {}", k_max + 1, eta.len())));
    }
    if f0.grid != bank.grid {
        return Err(ScatterError::GridMismatch { signal: f0.grid, bank: bank.grid }.into());
    }
    let spacing = bank.kappa.max(1) as i32;
    let mut placed: Vec<Placed> = Vec::new();
    if let Some(g) = anchor {
        placed.push(Placed { signal: g.clone(), block: meeting_block(g, bank) });
    }
    let target = 4.0 * delta;
    let mut out = Vec::new();
    let mut m = 0;
    for k in 1..=k_max {
        let mut best_w = f64::NEG_INFINITY;
        let chosen = loop {
            let fm = match grid::dilate_l2(f0, m, 2.0) {
                Ok(s) => s,
                Err(GridError::NyquistOverflow(_)) => {
                    if best_w > f64::NEG_INFINITY && best_w < target {
                        return Err(ForgeError::TargetUnreachable {
                            k,
                            achieved: best_w,
                            target,
                            delta_achievable: best_w / 4.0,
                        });
                    }
                    return Err(ForgeError::GridExhausted { k });
                }
                Err(e) => return Err(e.into()),
            };
            let block = meeting_block(&fm, bank);
            let disjoint = placed.iter().all(|p| p.block.is_disjoint(&block));
            let out_mass = separation_deficits(&fm, bank, &block)?;
            let mut in_mass = 0f64;
            let mut max_inner = 0f64;
            for p in &placed {
                in_mass = in_mass.max(block_mass(&p.signal, bank, &block)?);
                max_inner = max_inner.max(grid::inner(&fm.samples, &p.signal.samples).norm());
            }
            let separated = disjoint && out_mass <= eta[k] && in_mass <= eta[k] && max_inner <= eta[k];
            if separated {
                let (w_k, _) = scatter::w_n(&fm, bank, k, 0.0)?;
                best_w = best_w.max(w_k);
                if w_k >= target {
                    break (fm, Selection { k, m, w_k, block, out_mass, in_mass, max_inner, eta: eta[k] });
                }
            }
            m += 1;
        };
        placed.push(Placed { signal: chosen.0, block: chosen.1.block.clone() });
        m = chosen.1.m + spacing;
        out.push(chosen.1);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthRow {
    pub n: usize,
    pub e_n: f64,
    /// Measured `W_N(f_E)`.
    pub w: f64,
    /// `sum_k a_k^2 W_N(f_(m_k))`.
    pub additive: f64,
    /// Guaranteed `delta E_N`.
    pub lower_bound: f64,
    /// Right side of the approximate super-additivity inequality with `n = 0`.
    pub superadditive_rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialCertificate {
    pub decay: DecaySequence,
    pub delta: f64,
    /// Depths `1..=certified_depth` are certified.
    pub certified_depth: usize,
    pub coefficients: Vec<f64>,
    pub exponents: Vec<i32>,
    pub eta: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub selections: Vec<Selection>,
    pub norm_sq: f64,
    pub e1: f64,
    /// `|f_E - g|^2` and `|g|^2` for anchored runs.
    pub anchor: Option<(f64, f64)>,
    pub rows: Vec<DepthRow>,
    pub hypotheses_hold: bool,
}

impl AdversarialCertificate {
    /// `W_N(f_E) >= delta E_N` at every certified depth.
    pub fn holds(&self) -> bool {
        self.hypotheses_hold && self.rows.iter().all(|r| r.w >= r.lower_bound - 1e-12 * self.norm_sq)
    }
}

/// `f_E = (g) + sum_k a_k D_(2^m_k) f0` with the full audit.
pub fn build_slow_signal(
    f0: &Signal,
    e: &DecaySequence,
    bank: &FilterBank,
    delta: f64,
    k_max: usize,
    anchor: Option<&Signal>,
) -> Result<(Signal, AdversarialCertificate), ForgeError> {
    if k_max == 0 {
        return Err(ForgeError::Invalid("K must be at least 1".into()));
    }
    if !(delta > 0.0 && delta < 0.25) {
        return Err(ForgeError::Invalid(format!("delta = {delta} not in (0, 1/4)")));
    }
    let a = truncated_coefficients(e, k_max)?;
    // Slot 0 is the anchor (weight 1) when present, otherwise an empty slot.
    let mut weights = vec![if anchor.is_some() { 1.0 } else { 0.0 }];
    weights.extend(&a);
    let eta = default_schedule(&weights, delta, 1e-2);
    let eps = epsilons(&eta);
    let sel = select_subsequence(f0, bank, delta, &eta, k_max, anchor)?;
    let mut summands: Vec<Signal> = Vec::new();
    let mut f = match anchor {
        Some(g) => g.clone(),
        None => Signal::zeros(f0.grid),
    };
    for (s, ak) in sel.iter().zip(&a) {
        let fm = grid::dilate_l2(f0, s.m, 2.0)?;
        for (x, y) in f.samples.iter_mut().zip(&fm.samples) {
            *x += *y * *ak;
        }
        summands.push(fm);
    }
    let norm_sq = f.norm_sq();
    let w_norm_sq = neumaier(weights.iter().map(|x| x * x));
    let tree = scatter::scatter(&f, bank, &scatter::ScatterOptions::new(k_max))?;
    let mut part_w: Vec<Vec<f64>> = Vec::new();
    for fm in &summands {
        let t = scatter::scatter(fm, bank, &scatter::ScatterOptions::new(k_max))?;
        part_w.push((0..=k_max).map(|n| t.w(n)).collect());
    }
    let anchor_w = match anchor {
        Some(g) => {
            let t = scatter::scatter(g, bank, &scatter::ScatterOptions::new(k_max))?;
            Some((0..=k_max).map(|n| t.w(n)).collect::<Vec<_>>())
        }
        None => None,
    };
    let rows = (1..=k_max)
        .map(|n| {
            let additive = neumaier(a.iter().zip(&part_w).map(|(ak, w)| ak * ak * w[n]));
            let mut rhs: Vec<f64> = a
                .iter()
                .zip(&part_w)
                .enumerate()
                .map(|(i, (ak, w))| ak * ak / 2.0 * w[n] - 2.0 * w_norm_sq * eps[i + 1])
                .collect();
            if let Some(aw) = &anchor_w {
                rhs.push(aw[n] / 2.0 - 2.0 * w_norm_sq * eps[0]);
            }
            DepthRow {
                n,
                e_n: e.value(n),
                w: tree.w(n),
                additive,
                lower_bound: delta * e.value(n),
                superadditive_rhs: neumaier(rhs),
            }
        })
        .collect();
    let eps_small = (1..=k_max).all(|k| weights[k] == 0.0 || eps[k] <= delta * weights[k] * weights[k] / (2.0 * w_norm_sq));
    let targets_met = sel.iter().all(|s| s.w_k >= 4.0 * delta);
    let sep = sel.iter().all(|s| s.out_mass <= s.eta && s.in_mass <= s.eta && s.max_inner <= s.eta);
    let anchor_info = anchor.map(|g| {
        let diff = neumaier(f.samples.iter().zip(&g.samples).map(|(x, y)| (x - y).norm_sqr()));
        (diff, g.norm_sq())
    });
    let cert = AdversarialCertificate {
        decay: e.clone(),
        delta,
        certified_depth: k_max,
        coefficients: a.clone(),
        exponents: sel.iter().map(|s| s.m).collect(),
        eta,
        epsilon: eps,
        selections: sel,
        norm_sq,
        e1: e.value(1),
        anchor: anchor_info,
        rows,
        hypotheses_hold: targets_met && eps_small && sep,
    };
    Ok((f, cert))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperadditivityReport {
    pub w_sum: f64,
    pub rhs: f64,
    pub slack: f64,
    /// Measured `eta_k`: the larger of the outside mass and the largest earlier in-block mass.
    pub eta: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub additive: f64,
}

/// Evaluates both sides of the approximate super-additivity inequality from measured
/// separation deficits.
pub fn check_superadditivity(
    fs: &[Signal],
    a: &[f64],
    blocks: &[BTreeSet<Label>],
    bank: &FilterBank,
    depth: usize,
    n: usize,
) -> Result<SuperadditivityReport, ForgeError> {
    if fs.is_empty() || fs.len() != a.len() || fs.len() != blocks.len() {
        return Err(ForgeError::Invalid("signals, weights and blocks must have equal length".into()));
    }
    for i in 0..blocks.len() {
        for j in i + 1..blocks.len() {
            if !blocks[i].is_disjoint(&blocks[j]) {
                return Err(ForgeError::DisjointnessViolation(i, j));
            }
        }
    }
    let mut eta = Vec::with_capacity(fs.len());
    for (k, f) in fs.iter().enumerate() {
        let mut e = separation_deficits(f, bank, &blocks[k])?;
        for g in &fs[..k] {
            e = e.max(block_mass(g, bank, &blocks[k])?);
        }
        eta.push(e);
    }
    let eps = epsilons(&eta);
    let weights_sq = neumaier(a.iter().map(|x| x * x));
    let grid = fs[0].grid;
    let mut sum = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (f, ak) in fs.iter().zip(a) {
        for (x, y) in sum.iter_mut().zip(&f.samples) {
            *x += *y * *ak;
        }
    }
    let w_sum = scatter::w_n(&Signal { grid, samples: sum }, bank, depth, 0.0)?.0;
    let ws = fs.iter().map(|f| Ok(scatter::w_n(f, bank, depth, 0.0)?.0)).collect::<Result<Vec<f64>, ForgeError>>()?;
    let rhs = neumaier((n..fs.len()).map(|k| a[k] * a[k] / 2.0 * ws[k] - 2.0 * weights_sq * eps[k]));
    let additive = neumaier(a.iter().zip(&ws).map(|(ak, w)| ak * ak * w));
    Ok(SuperadditivityReport { w_sum, rhs, slack: w_sum - rhs, eta, epsilon: eps, additive })
}
