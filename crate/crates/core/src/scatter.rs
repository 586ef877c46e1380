//! Scattering cascade: propagators `U[p]`, windowed outputs, layer energies with a pruning
//! ledger, and the comparison checks built on them.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filters::{self, BankError, Filter, FilterBank, Label};
use crate::grid::{self, Grid, GridError, Signal};
use crate::sum::neumaier;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScatterError {
    #[error("signal grid {signal:?} does not match bank grid {bank:?}")]
    GridMismatch { signal: Grid, bank: Grid },
    #[error("depth {depth} needs about {needed} nodes, over the budget of {budget}")]
    DepthTooLarge { depth: usize, needed: usize, budget: usize },
    #[error("depth {depth} would retain about {bytes} bytes of propagated signals, over the cap of {cap}")]
    SignalMemory { depth: usize, bytes: usize, cap: usize },
    #[error("energy identity broken at layer {layer}: residual {residual:e}")]
    InconsistentTree { layer: usize, residual: f64 },
    #[error("profile has depth {have}, asked for {want}")]
    DepthExceeded { have: usize, want: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Bank(#[from] BankError),
}

pub const DEFAULT_BUDGET: usize = 4_000_000;

/// Cap on the bytes held by retained `U[p] f` samples at any one layer.
pub const SIGNAL_MEMORY_CAP: usize = 2 << 30;

/// Label used for the low-pass when it joins the propagating set.
pub const LOWPASS: Label = Label { scale: i32::MIN, dir: 0 };

/// Node budget from `SCATTER_BUDGET`, else [`DEFAULT_BUDGET`].
pub fn env_budget() -> usize {
    std::env::var("SCATTER_BUDGET").ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_BUDGET)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Path(pub Vec<Label>);

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "e");
        }
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "/")?;
            }
            if *l == LOWPASS {
                write!(f, "chi")?;
            } else {
                write!(f, "{l}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterOptions {
    pub depth: usize,
    pub prune: f64,
    pub budget: usize,
    /// Propagate through the low-pass as well (full frame).
    pub include_lowpass: bool,
    /// Keep `U[p] f` for the deepest layer too.
    pub keep_signals: bool,
}

impl ScatterOptions {
    pub fn new(depth: usize) -> Self {
        Self { depth, prune: 0.0, budget: env_budget(), include_lowpass: false, keep_signals: false }
    }

    pub fn prune(mut self, tau: f64) -> Self {
        self.prune = tau;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub path: Path,
    /// `||U[p] f||^2`.
    pub energy: f64,
    /// `||U[p] f * chi||^2`; not computed for the deepest layer.
    pub output_energy: Option<f64>,
    /// Nonnegative samples of `U[p] f`, present where the node was expanded or kept.
    pub signal: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringTree {
    pub grid: Grid,
    pub depth: usize,
    pub prune: f64,
    pub norm_sq: f64,
    /// `layers[n]` holds the surviving depth-`n` nodes in path order.
    pub layers: Vec<Vec<Node>>,
    /// Energy of nodes cut at each layer.
    pub pruned: Vec<f64>,
    pub pruned_nodes: Vec<usize>,
    /// Energy that fell outside every filter (uncovered band) when expanding into each layer.
    pub leak: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEnergy {
    pub layer: usize,
    pub w: f64,
    pub w_error: f64,
    pub cumulative_output: f64,
    pub mixed_partial: f64,
    pub leak: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyProfile {
    pub norm_sq: f64,
    pub layers: Vec<LayerEnergy>,
}

fn check_grid(f: &Grid, bank: &FilterBank) -> Result<(), ScatterError> {
    if *f != bank.grid {
        return Err(ScatterError::GridMismatch { signal: *f, bank: bank.grid });
    }
    Ok(())
}

/// `|f * psi|`.
pub fn propagate_one(f: &Signal, psi: &Filter) -> Result<Signal, ScatterError> {
    if f.grid != psi.spectrum.grid {
        return Err(ScatterError::GridMismatch { signal: f.grid, bank: psi.spectrum.grid });
    }
    let spec = grid::forward_fourier(f);
    let mut prod = vec![Complex64::new(0.0, 0.0); spec.coeffs.len()];
    for &i in &psi.support {
        prod[i] = spec.coeffs[i] * psi.spectrum.coeffs[i];
    }
    grid::fft_in_place(&f.grid, &mut prod, true);
    Ok(Signal { grid: f.grid, samples: prod.into_iter().map(|c| Complex64::new(c.norm(), 0.0)).collect() })
}

/// Filters in propagation order, optionally led by the low-pass.
fn propagating(bank: &FilterBank, include_lowpass: bool) -> Vec<Filter> {
    let mut out = Vec::new();
    if include_lowpass {
        let mut chi = Filter::new(LOWPASS, bank.lowpass.clone()).expect("nonzero low-pass");
        chi.label = LOWPASS;
        out.push(chi);
    }
    out.extend(bank.filters.iter().cloned());
    out
}

fn filtered_energy(spec: &[Complex64], psi: &Filter) -> f64 {
    neumaier(psi.support.iter().map(|&i| (spec[i] * psi.spectrum.coeffs[i]).norm_sqr()))
}

fn modulus_of_product(grid: &Grid, spec: &[Complex64], psi: &Filter) -> Vec<f64> {
    let mut prod = vec![Complex64::new(0.0, 0.0); spec.len()];
    for &i in &psi.support {
        prod[i] = spec[i] * psi.spectrum.coeffs[i];
    }
    grid::fft_in_place(grid, &mut prod, true);
    prod.into_iter().map(|c| c.norm()).collect()
}

fn real_spectrum(grid: &Grid, u: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    grid::fft_in_place(grid, &mut buf, false);
    buf
}

struct Expansion {
    output_energy: f64,
    leak: f64,
    children: Vec<Node>,
    pruned: Vec<f64>,
}

fn expand(
    grid: &Grid,
    spec: &[Complex64],
    path: &Path,
    filters: &[Filter],
    lowpass: &[f64],
    lp_sum: &[f64],
    last: bool,
    opts: &ScatterOptions,
) -> Expansion {
    let output_energy = neumaier(spec.iter().zip(lowpass).map(|(c, &l)| c.norm_sqr() * l));
    let leak = neumaier(spec.iter().zip(lp_sum).map(|(c, &s)| c.norm_sqr() * (1.0 - s)));
    let mut children = Vec::new();
    let mut pruned = Vec::new();
    for psi in filters {
        let e = filtered_energy(spec, psi);
        if e == 0.0 {
            continue;
        }
        if e < opts.prune {
            pruned.push(e);
            continue;
        }
        let mut p = path.0.clone();
        p.push(psi.label);
        let signal = (!last || opts.keep_signals).then(|| modulus_of_product(grid, spec, psi));
        children.push(Node { path: Path(p), energy: e, output_energy: None, signal });
    }
    Expansion { output_energy, leak, children, pruned }
}

/// Breadth-first cascade to `opts.depth` with energy-threshold pruning.
pub fn scatter(f: &Signal, bank: &FilterBank, opts: &ScatterOptions) -> Result<ScatteringTree, ScatterError> {
    check_grid(&f.grid, bank)?;
    let grid = f.grid;
    let filters = propagating(bank, opts.include_lowpass);
    let lowpass: Vec<f64> = bank.lowpass.coeffs.iter().map(|c| c.norm_sqr()).collect();
    let mut lp_sum = bank.lp_sum();
    if opts.include_lowpass {
        // chi^2 counted twice would misstate the leak; LP sum over the propagating set only.
        lp_sum = bank.highpass_sum().iter().zip(&lowpass).map(|(h, l)| h + l).collect();
    }
    let root_spec = grid::forward_fourier(f).coeffs;
    let norm_sq = neumaier(root_spec.iter().map(|c| c.norm_sqr()));
    let mut layers: Vec<Vec<Node>> =
        vec![vec![Node { path: Path::default(), energy: norm_sq, output_energy: None, signal: None }]];
    let mut pruned = vec![0.0; opts.depth + 1];
    let mut pruned_nodes = vec![0usize; opts.depth + 1];
    let mut leak = vec![0.0; opts.depth + 1];
    let mut total_nodes = 1usize;
    for n in 0..opts.depth {
        let needed = layers[n].len() * filters.len();
        if total_nodes + needed > opts.budget {
            return Err(ScatterError::DepthTooLarge {
                depth: opts.depth,
                needed: total_nodes + needed,
                budget: opts.budget,
            });
        }
        let last = n + 1 == opts.depth;
        if !last || opts.keep_signals {
            let bytes = needed.saturating_mul(grid.len() * std::mem::size_of::<f64>());
            if bytes > SIGNAL_MEMORY_CAP {
                return Err(ScatterError::SignalMemory { depth: opts.depth, bytes, cap: SIGNAL_MEMORY_CAP });
            }
        }
        let frontier = std::mem::take(&mut layers[n]);
        let results: Vec<(Node, Expansion)> = frontier
            .into_par_iter()
            .map(|mut node| {
                let spec = if n == 0 {
                    root_spec.clone()
                } else {
                    real_spectrum(&grid, node.signal.as_ref().expect("expanded nodes keep signals"))
                };
                let ex = expand(&grid, &spec, &node.path, &filters, &lowpass, &lp_sum, last, opts);
                node.output_energy = Some(ex.output_energy);
                if !opts.keep_signals {
                    node.signal = None;
                }
                (node, ex)
            })
            .collect();
        let mut next = Vec::new();
        let mut cut = Vec::new();
        let mut leaks = Vec::new();
        let mut kept = Vec::with_capacity(results.len());
        for (node, ex) in results {
            leaks.push(ex.leak);
            pruned_nodes[n + 1] += ex.pruned.len();
            cut.extend(ex.pruned);
            next.extend(ex.children);
            kept.push(node);
        }
        layers[n] = kept;
        pruned[n + 1] = neumaier(cut);
        leak[n + 1] = neumaier(leaks);
        total_nodes += next.len();
        layers.push(next);
    }
    if opts.depth == 0 {
        let out = neumaier(root_spec.iter().zip(&lowpass).map(|(c, &l)| c.norm_sqr() * l));
        layers[0][0].output_energy = Some(out);
    }
    Ok(ScatteringTree { grid, depth: opts.depth, prune: opts.prune, norm_sq, layers, pruned, pruned_nodes, leak })
}

impl ScatteringTree {
    /// `W_n` over surviving nodes.
    pub fn w(&self, n: usize) -> f64 {
        neumaier(self.layers[n].iter().map(|nd| nd.energy))
    }

    /// Upper bound on the energy missing from `W_n` because of pruning.
    pub fn w_error(&self, n: usize) -> f64 {
        neumaier(self.pruned[..=n].iter().copied())
    }

    pub fn output(&self, n: usize) -> f64 {
        neumaier(self.layers[n].iter().filter_map(|nd| nd.output_energy))
    }

    /// Nodes below the root sorted by energy, largest first; ties keep path order.
    pub fn top_paths(&self, k: usize) -> Vec<(String, f64)> {
        let mut all: Vec<&Node> = self.layers.iter().skip(1).flatten().collect();
        all.sort_by(|a, b| b.energy.total_cmp(&a.energy).then_with(|| a.path.cmp(&b.path)));
        all.into_iter().take(k).map(|nd| (nd.path.to_string(), nd.energy)).collect()
    }
}

/// Per-layer aggregates; checks the energy decomposition within the pruning bound.
pub fn energy_profile(tree: &ScatteringTree) -> Result<EnergyProfile, ScatterError> {
    let mut layers = Vec::new();
    let mut cumulative = Vec::new();
    let mut mixed = Vec::new();
    let mut leaks = Vec::new();
    let tol = 1e-8 * tree.norm_sq.max(f64::MIN_POSITIVE);
    for n in 0..=tree.depth {
        let w = tree.w(n);
        leaks.push(tree.leak[n]);
        mixed.push(w.sqrt());
        let cum = neumaier(cumulative.iter().copied());
        let leak = neumaier(leaks.iter().copied());
        let err = tree.w_error(n);
        let residual = tree.norm_sq - (cum + w + leak);
        if residual < -tol || residual > err + tol {
            return Err(ScatterError::InconsistentTree { layer: n, residual });
        }
        layers.push(LayerEnergy {
            layer: n,
            w,
            w_error: err,
            cumulative_output: cum,
            mixed_partial: neumaier(mixed.iter().copied()),
            leak,
            residual,
        });
        if n < tree.depth {
            cumulative.push(tree.output(n));
        }
    }
    Ok(EnergyProfile { norm_sq: tree.norm_sq, layers })
}

/// `W_N` and the pruning error bound.
pub fn w_n(f: &Signal, bank: &FilterBank, depth: usize, tau: f64) -> Result<(f64, f64), ScatterError> {
    let tree = scatter(f, bank, &ScatterOptions::new(depth).prune(tau))?;
    Ok((tree.w(depth), tree.w_error(depth)))
}

/// `sum_{m <= n} W_m^(1/2)`.
pub fn mixed_scattering_norm(profile: &EnergyProfile, n: usize) -> Result<f64, ScatterError> {
    profile
        .layers
        .get(n)
        .map(|l| l.mixed_partial)
        .ok_or(ScatterError::DepthExceeded { have: profile.layers.len() - 1, want: n })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonexpansiveReport {
    pub input_distance: f64,
    /// `||U[Psi^N] f - U[Psi^N] g||`.
    pub propagated_distance: f64,
    /// `||S[Psi^N; chi] f - S[Psi^N; chi] g||`.
    pub output_distance: f64,
    /// Outputs of layers `< N` together with the depth-`N` propagators.
    pub full_distance: f64,
    pub slack: f64,
}

/// Walks the trees of `f` and `g` in lockstep (no pruning) and measures path-wise distances.
pub fn check_nonexpansive(f: &Signal, g: &Signal, bank: &FilterBank, depth: usize) -> Result<NonexpansiveReport, ScatterError> {
    check_grid(&f.grid, bank)?;
    check_grid(&g.grid, bank)?;
    let grid = f.grid;
    let lowpass: Vec<f64> = bank.lowpass.coeffs.iter().map(|c| c.norm_sqr()).collect();
    let budget = env_budget();
    let needed: usize = (0..=depth).map(|n| bank.filters.len().pow(n as u32)).sum();
    if needed > budget {
        return Err(ScatterError::DepthTooLarge { depth, needed, budget });
    }
    let diff: Vec<f64> = f.samples.iter().zip(&g.samples).map(|(a, b)| (a - b).norm_sqr()).collect();
    let input = neumaier(diff).sqrt();
    let mut frontier = vec![(grid::forward_fourier(f).coeffs, grid::forward_fourier(g).coeffs)];
    let mut outputs = Vec::new();
    let out_dist = |a: &[Complex64], b: &[Complex64]| {
        neumaier(a.iter().zip(b).zip(&lowpass).map(|((x, y), &l)| (x - y).norm_sqr() * l))
    };
    for _ in 0..depth {
        let layer_out = neumaier(frontier.iter().map(|(a, b)| out_dist(a, b)));
        outputs.push(layer_out);
        frontier = frontier
            .par_iter()
            .flat_map_iter(|(a, b)| {
                bank.filters.iter().map(move |psi| {
                    let ua = modulus_of_product(&grid, a, psi);
                    let ub = modulus_of_product(&grid, b, psi);
                    (real_spectrum(&grid, &ua), real_spectrum(&grid, &ub))
                })
            })
            .collect();
    }
    let prop_sq = neumaier(
        frontier.iter().map(|(a, b)| neumaier(a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()))),
    );
    let out_sq = neumaier(frontier.iter().map(|(a, b)| out_dist(a, b)));
    let full = (neumaier(outputs.iter().copied()) + prop_sq).sqrt();
    let (p, o) = (prop_sq.sqrt(), out_sq.sqrt());
    let slack = (input - p).min(p - o).min(input - full);
    Ok(NonexpansiveReport { input_distance: input, propagated_distance: p, output_distance: o, full_distance: full, slack })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub w_f: f64,
    pub w_g: f64,
    pub distance: f64,
    /// Right side minus left side of `|W f - W g| <= sqrt(2) ||f - g|| sqrt(W f + W g)`.
    pub slack_a: f64,
    /// Right side minus left side of `W f >= W g / 2 - ||f - g||^2`, read as `W f - (..)`.
    pub slack_b: f64,
}

pub fn check_lipschitz_bounds(f: &Signal, g: &Signal, bank: &FilterBank, depth: usize) -> Result<LipschitzReport, ScatterError> {
    check_grid(&g.grid, bank)?;
    let (wf, _) = w_n(f, bank, depth, 0.0)?;
    let (wg, _) = w_n(g, bank, depth, 0.0)?;
    let dist = neumaier(f.samples.iter().zip(&g.samples).map(|(a, b)| (a - b).norm_sqr())).sqrt();
    let slack_a = 2f64.sqrt() * dist * (wf + wg).sqrt() - (wf - wg).abs();
    let slack_b = wf - (wg / 2.0 - dist * dist);
    Ok(LipschitzReport { w_f: wf, w_g: wg, distance: dist, slack_a, slack_b })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub m: i32,
    /// `W_N[Phi](D^2 f)`.
    pub dilated_signal: f64,
    /// `W_N[D^1 Phi](f)` with the filters contracted by the inverse factor.
    pub dilated_bank: f64,
    pub abs_diff: f64,
}

/// Both sides of the dilation covariance identity for `A = 2^m I`.
pub fn check_dilation_covariance(f: &Signal, bank: &FilterBank, depth: usize, m: i32) -> Result<CovarianceReport, ScatterError> {
    check_grid(&f.grid, bank)?;
    let lhs = w_n(&grid::dilate_l2(f, m, 2.0)?, bank, depth, 0.0)?.0;
    let moved = filters::dilate_bank(bank, -m, 2.0)?;
    let rhs = w_n(f, &moved, depth, 0.0)?.0;
    Ok(CovarianceReport { m, dilated_signal: lhs, dilated_bank: rhs, abs_diff: (lhs - rhs).abs() })
}

/// `W_k(D^2_(2^m) f)` for `m = 0..=m_max`.
pub fn dilation_energy_limit(f: &Signal, bank: &FilterBank, k: usize, m_max: i32) -> Result<Vec<f64>, ScatterError> {
    check_grid(&f.grid, bank)?;
    let spec = grid::forward_fourier(f);
    (0..=m_max)
        .map(|m| {
            let d = grid::inverse_fourier(&grid::dilate_l2_spectrum(&spec, m, 2.0)?);
            Ok(w_n(&d, bank, k, 0.0)?.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::build_shannon_1d;

    #[test]
    fn path_display() {
        assert_eq!(Path::default().to_string(), "e");
        let p = Path(vec![Label::new(3, 0), Label::new(5, 2)]);
        assert_eq!(p.to_string(), "j3.g0/j5.g2");
        assert_eq!(Path(vec![LOWPASS]).to_string(), "chi");
    }

    #[test]
    fn depth_zero_is_root() {
        let g = Grid::new(1, 64, 1.0).unwrap();
        let bank = build_shannon_1d(g, 1, 5).unwrap();
        let f = Signal::from_real(g, &(0..64).map(|i| (i as f64).sin()).collect::<Vec<_>>()).unwrap();
        let t = scatter(&f, &bank, &ScatterOptions::new(0)).unwrap();
        assert_eq!(t.layers.len(), 1);
        assert!((t.w(0) - f.norm_sq()).abs() < 1e-12 * f.norm_sq());
    }

    #[test]
    fn budget_is_enforced() {
        let g = Grid::new(1, 64, 1.0).unwrap();
        let bank = build_shannon_1d(g, 1, 5).unwrap();
        let f = Signal::from_real(g, &(0..64).map(|i| (i as f64 * 0.7).cos()).collect::<Vec<_>>()).unwrap();
        let mut o = ScatterOptions::new(3);
        o.budget = 50;
        assert!(matches!(scatter(&f, &bank, &o), Err(ScatterError::DepthTooLarge { .. })));
    }

    #[test]
    fn grid_mismatch() {
        let g = Grid::new(1, 64, 1.0).unwrap();
        let h = Grid::new(1, 128, 1.0).unwrap();
        let bank = build_shannon_1d(g, 1, 5).unwrap();
        let f = Signal::zeros(h);
        assert!(matches!(scatter(&f, &bank, &ScatterOptions::new(1)), Err(ScatterError::GridMismatch { .. })));
    }
}
