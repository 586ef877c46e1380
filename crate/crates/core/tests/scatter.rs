use proptest::prelude::*;

use scatlab::filters::{self, FilterBank};
use scatlab::generate::Generator;
use scatlab::grid::{self, Grid, Signal};
use scatlab::scatter::{self, ScatterError, ScatterOptions};

fn grid1(n: usize) -> Grid {
    Grid::new(1, n, 1.0).unwrap()
}

fn band(g: Grid, lo: f64, hi: f64, seed: u64) -> Signal {
    Generator::RandomPhaseBand { lo, hi }.sample(g, seed).unwrap()
}

fn add(f: &Signal, h: &Signal, c: f64) -> Signal {
    Signal { grid: f.grid, samples: f.samples.iter().zip(&h.samples).map(|(a, b)| a + b * c).collect() }
}

fn lowpass_energy(f: &Signal, bank: &FilterBank) -> f64 {
    let spec = grid::forward_fourier(f);
    spec.coeffs.iter().zip(&bank.lowpass.coeffs).map(|(z, c)| (z * c).norm_sqr()).sum()
}

#[test]
fn decomposition_holds_at_every_layer() {
    let banks = [
        filters::build_shannon_1d(grid1(512), 1, 8).unwrap(),
        filters::build_meyer_1d(grid1(512), 1, 7).unwrap(),
    ];
    for bank in &banks {
        for seed in 0..3 {
            let f = band(bank.grid, 1.0, 100.0, seed);
            let tree = scatter::scatter(&f, bank, &ScatterOptions::new(3)).unwrap();
            let profile = scatter::energy_profile(&tree).unwrap();
            for l in &profile.layers {
                assert!(l.residual.abs() <= 1e-10 * f.norm_sq(), "{} layer {}: {}", bank.name, l.layer, l.residual);
            }
            for w in profile.layers.windows(2) {
                assert!(w[1].w <= w[0].w + 1e-10 * f.norm_sq());
                assert!(w[1].mixed_partial >= w[0].mixed_partial);
            }
        }
    }
}

#[test]
fn full_frame_preserves_the_norm() {
    let bank = filters::build_shannon_1d(grid1(256), 1, 7).unwrap();
    let f = band(bank.grid, 1.0, 90.0, 4);
    for depth in 1..=3 {
        let mut opts = ScatterOptions::new(depth);
        opts.include_lowpass = true;
        let tree = scatter::scatter(&f, &bank, &opts).unwrap();
        let total: f64 = tree.layers[depth].iter().map(|n| n.energy).sum::<f64>() + tree.leak.iter().sum::<f64>();
        assert!((total - f.norm_sq()).abs() <= 1e-9 * f.norm_sq(), "depth {depth}: {total}");
    }
}

#[test]
fn depth_zero_and_single_layer_values() {
    let bank = filters::build_shannon_1d(grid1(1024), 3, 9).unwrap();
    let f = band(bank.grid, 1.0, 300.0, 1);
    assert!((scatter::w_n(&f, &bank, 0, 0.0).unwrap().0 - f.norm_sq()).abs() <= 1e-12 * f.norm_sq());
    let w1 = scatter::w_n(&f, &bank, 1, 0.0).unwrap().0;
    assert!((w1 - (f.norm_sq() - lowpass_energy(&f, &bank))).abs() <= 1e-12 * f.norm_sq());
    // Entirely below r_1 = 4, entirely inside one band.
    let low = band(bank.grid, 1.0, 4.0, 2);
    // Zero up to the round-off the generator leaves outside its band.
    assert!(scatter::w_n(&low, &bank, 1, 0.0).unwrap().0 <= 1e-28);
    let one = Generator::BandIndicator { lo: 32.0, hi: 64.0 }.sample(bank.grid, 0).unwrap();
    assert!((scatter::w_n(&one, &bank, 1, 0.0).unwrap().0 - one.norm_sq()).abs() <= 1e-12);
}

#[test]
fn propagator_examples() {
    let bank = filters::build_shannon_1d(grid1(256), 1, 7).unwrap();
    let f = band(bank.grid, 1.0, 7.0, 3);
    let far = bank.filters.iter().find(|p| p.annulus.unwrap().0 >= 32.0).unwrap();
    assert!(scatter::propagate_one(&f, far).unwrap().norm_sq() <= 1e-28);
    let spec = grid::forward_fourier(&f);
    for psi in &bank.filters {
        let direct: f64 = psi.support.iter().map(|&i| spec.coeffs[i].norm_sqr()).sum();
        let u = scatter::propagate_one(&f, psi).unwrap();
        assert!((u.norm_sq() - direct).abs() <= 1e-12 * f.norm_sq());
        assert!(u.samples.iter().all(|c| c.re >= 0.0 && c.im == 0.0));
    }
}

#[test]
fn mixed_norm_edge_cases() {
    let bank = filters::build_shannon_1d(grid1(256), 3, 7).unwrap();
    let zero = Signal::zeros(bank.grid);
    let p = scatter::energy_profile(&scatter::scatter(&zero, &bank, &ScatterOptions::new(2)).unwrap()).unwrap();
    assert_eq!(scatter::mixed_scattering_norm(&p, 2).unwrap(), 0.0);
    let low = band(bank.grid, 1.0, 4.0, 9);
    let p = scatter::energy_profile(&scatter::scatter(&low, &bank, &ScatterOptions::new(2)).unwrap()).unwrap();
    assert!((scatter::mixed_scattering_norm(&p, 2).unwrap() - low.norm()).abs() <= 1e-12);
    assert!((p.layers[1].cumulative_output - low.norm_sq()).abs() <= 1e-12);
    assert!(matches!(scatter::mixed_scattering_norm(&p, 3), Err(ScatterError::DepthExceeded { .. })));
}

#[test]
fn runs_are_bit_identical() {
    let bank = filters::build_meyer_1d(grid1(512), 1, 7).unwrap();
    let f = band(bank.grid, 2.0, 150.0, 12);
    let opts = ScatterOptions::new(3).prune(1e-6 * f.norm_sq());
    let a = scatter::scatter(&f, &bank, &opts).unwrap();
    let b = scatter::scatter(&f, &bank, &opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.top_paths(5), b.top_paths(5));
    let top = a.top_paths(5);
    assert!(top.windows(2).all(|w| w[0].1 >= w[1].1));
}

#[test]
fn trivial_pairs() {
    let bank = filters::build_shannon_1d(grid1(256), 1, 7).unwrap();
    let f = band(bank.grid, 1.0, 100.0, 5);
    let same = scatter::check_nonexpansive(&f, &f, &bank, 2).unwrap();
    assert_eq!(same.propagated_distance, 0.0);
    assert_eq!(same.output_distance, 0.0);
    let zero = Signal::zeros(bank.grid);
    let vs_zero = scatter::check_nonexpansive(&f, &zero, &bank, 2).unwrap();
    let w2 = scatter::w_n(&f, &bank, 2, 0.0).unwrap().0;
    assert!((vs_zero.propagated_distance - w2.sqrt()).abs() <= 1e-12 * f.norm());
    assert!(vs_zero.propagated_distance <= f.norm());
    let lip = scatter::check_lipschitz_bounds(&f, &f, &bank, 2).unwrap();
    assert_eq!(lip.slack_a, 0.0);
    let lip = scatter::check_lipschitz_bounds(&f, &zero, &bank, 2).unwrap();
    assert!(lip.slack_b >= 0.0);
}

#[test]
fn continuity_under_shrinking_perturbations() {
    let bank = filters::build_meyer_1d(grid1(512), 1, 7).unwrap();
    let f = band(bank.grid, 1.0, 120.0, 21);
    let h = band(bank.grid, 1.0, 120.0, 22);
    for depth in 1..=3 {
        let wf = scatter::w_n(&f, &bank, depth, 0.0).unwrap().0;
        for e in 1..=4 {
            let c = 10f64.powi(-e);
            let wph = scatter::w_n(&add(&f, &h, c), &bank, depth, 0.0).unwrap().0;
            let rhs = 2f64.sqrt() * c * h.norm() * (wph + wf).sqrt();
            assert!((wph - wf).abs() <= rhs + 1e-12, "depth {depth}, |h| = {c}");
        }
    }
}

#[test]
fn dilation_covariance() {
    let g = grid1(1024);
    // The expanded signal's modulus is sampled on every other grid point, so any modulus
    // energy past n/4 aliases. A narrow bump keeps that tail below round-off; a broadband
    // random-phase band would not.
    let f = Generator::GaussianBump { sigma: 0.05 }.sample(g, 0).unwrap();
    let shannon = filters::build_shannon_1d(g, 1, 9).unwrap();
    let id = scatter::check_dilation_covariance(&f, &shannon, 2, 0).unwrap();
    assert_eq!(id.dilated_signal, id.dilated_bank);
    let r = scatter::check_dilation_covariance(&f, &shannon, 2, 1).unwrap();
    assert!(r.abs_diff <= 1e-12 * f.norm_sq(), "{r:?}");
    let meyer = filters::build_meyer_1d(g, 1, 8).unwrap();
    let r = scatter::check_dilation_covariance(&f, &meyer, 2, 1).unwrap();
    assert!(r.abs_diff <= 1e-9 * r.dilated_signal, "{r:?}");
}

#[test]
fn dilated_energy_approaches_the_norm() {
    let g = grid1(1024);
    let bank = filters::build_shannon_1d(g, 1, 9).unwrap();
    let f = Generator::BandIndicator { lo: 1.0, hi: 2.0 }.sample(g, 0).unwrap();
    let seq = scatter::dilation_energy_limit(&f, &bank, 1, 0).unwrap();
    assert!((seq[0] - f.norm_sq()).abs() <= 1e-12);
    let f = Generator::BandIndicator { lo: 16.0, hi: 32.0 }.sample(g, 0).unwrap();
    for bank in [bank, filters::build_meyer_1d(g, 1, 8).unwrap()] {
        // m = 3 pushes modulus sidebands past the top filter and into the leak.
        let seq = scatter::dilation_energy_limit(&f, &bank, 2, 2).unwrap();
        assert!(seq.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{}: {seq:?}", bank.name);
    }
}

#[test]
fn explicit_budget_is_enforced() {
    let bank = filters::build_shannon_1d(grid1(256), 1, 7).unwrap();
    let f = band(bank.grid, 1.0, 100.0, 0);
    let mut opts = ScatterOptions::new(4);
    opts.budget = 1000;
    assert!(matches!(scatter::scatter(&f, &bank, &opts), Err(ScatterError::DepthTooLarge { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pruning_error_stays_in_the_ledger(seed in any::<u64>(), exp in 2i32..7, lo in 1.0f64..20.0) {
        let bank = filters::build_shannon_1d(grid1(256), 1, 7).unwrap();
        let f = band(bank.grid, lo, lo + 80.0, seed);
        let exact = scatter::w_n(&f, &bank, 3, 0.0).unwrap().0;
        let tau = 10f64.powi(-exp) * f.norm_sq();
        let (w, err) = scatter::w_n(&f, &bank, 3, tau).unwrap();
        let slack = 1e-12 * f.norm_sq();
        prop_assert!(exact - w >= -slack);
        prop_assert!(exact - w <= err + slack);
        let tree = scatter::scatter(&f, &bank, &ScatterOptions::new(3).prune(tau)).unwrap();
        prop_assert!(scatter::energy_profile(&tree).is_ok());
    }

    #[test]
    fn energy_never_increases_with_depth(seed in any::<u64>(), hi in 10.0f64..120.0) {
        let bank = filters::build_meyer_1d(grid1(256), 1, 6).unwrap();
        let f = band(bank.grid, 1.0, hi, seed);
        let p = scatter::energy_profile(&scatter::scatter(&f, &bank, &ScatterOptions::new(3)).unwrap()).unwrap();
        for w in p.layers.windows(2) {
            prop_assert!(w[1].w <= w[0].w + 1e-10 * f.norm_sq());
        }
    }
}
