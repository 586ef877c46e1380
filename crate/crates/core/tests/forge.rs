use std::collections::BTreeSet;

use proptest::prelude::*;

use scatlab::filters::{self, FilterBank};
use scatlab::forge::{self, DecaySequence, ForgeError};
use scatlab::generate::Generator;
use scatlab::grid::{self, Grid, Signal};
use scatlab::scatter;

fn grid1(n: usize) -> Grid {
    Grid::new(1, n, 1.0).unwrap()
}

fn indicator(g: Grid, lo: f64, hi: f64) -> Signal {
    Generator::BandIndicator { lo, hi }.sample(g, 0).unwrap()
}

fn lowpass_energy(f: &Signal, bank: &FilterBank) -> f64 {
    let spec = grid::forward_fourier(f);
    spec.coeffs.iter().zip(&bank.lowpass.coeffs).map(|(z, c)| (z * c).norm_sqr()).sum()
}

#[test]
fn geometric_four_summands_are_orthogonal() {
    // Smallest grid with room for four exponents two apart and a W_4 above 4 delta.
    let g = grid1(1 << 13);
    let bank = filters::build_shannon_1d(g, 1, 12).unwrap();
    let f0 = indicator(g, 32.0, 64.0);
    let e = DecaySequence::Geometric { ratio: 0.5 };
    let (f, cert) = forge::build_slow_signal(&f0, &e, &bank, 0.002, 4, None).unwrap();
    assert!(cert.holds());
    assert!(cert.exponents.windows(2).all(|w| w[1] - w[0] >= 2));
    assert!((f.norm_sq() - cert.e1).abs() <= 1e-12);
    for s in &cert.selections {
        assert!(s.out_mass <= 1e-28 && s.in_mass <= 1e-28, "{s:?}");
    }
    // Recompute everything the certificate claims from the returned signal.
    let tree = scatter::scatter(&f, &bank, &scatter::ScatterOptions::new(4)).unwrap();
    for row in &cert.rows {
        assert_eq!(tree.w(row.n), row.w);
        assert!((row.w - row.additive).abs() <= 1e-10, "N = {}", row.n);
        assert!(row.w >= row.lower_bound);
        assert_eq!(row.lower_bound, 0.002 * e.value(row.n));
    }
    let cf = 1.0;
    assert!(cert.norm_sq <= 2.0 * cf * (1.0 + cert.e1) + 1e-9);
}

#[test]
fn anchored_run_stays_near_the_anchor() {
    let g = grid1(4096);
    let bank = filters::build_shannon_1d(g, 1, 11).unwrap();
    let anchor = Generator::RandomPhaseBand { lo: 1.0, hi: 8.0 }.sample(g, 5).unwrap();
    let f0 = indicator(g, 64.0, 128.0);
    let e = DecaySequence::Power { exponent: 1.0 };
    let (f, cert) = forge::build_slow_signal(&f0, &e, &bank, 0.05, 2, Some(&anchor)).unwrap();
    assert!(cert.holds());
    let (dist, gn) = cert.anchor.unwrap();
    let direct: f64 = f.samples.iter().zip(&anchor.samples).map(|(a, b)| (a - b).norm_sqr()).sum();
    assert!((dist - direct).abs() <= 1e-12);
    assert!(dist <= 2.0 * gn * cert.e1 + 1e-9);
}

#[test]
fn distinct_dilates_are_orthogonal() {
    let g = grid1(4096);
    let f0 = indicator(g, 32.0, 64.0);
    for m in 2..=5 {
        let fm = grid::dilate_l2(&f0, m, 2.0).unwrap();
        assert!(grid::inner(&f0.samples, &fm.samples).norm() <= 1e-14, "m = {m}");
    }
}

#[test]
fn deficits_for_aligned_and_empty_blocks() {
    let g = grid1(1024);
    let bank = filters::build_shannon_1d(g, 1, 9).unwrap();
    let f = indicator(g, 16.0, 32.0);
    let block = forge::meeting_block(&f, &bank);
    assert_eq!(block.len(), 2);
    assert!(forge::separation_deficits(&f, &bank, &block).unwrap() <= 1e-28);
    let h = Generator::RandomPhaseBand { lo: 1.0, hi: 300.0 }.sample(g, 3).unwrap();
    let all = forge::separation_deficits(&h, &bank, &BTreeSet::new()).unwrap();
    assert!((all - (h.norm_sq() - lowpass_energy(&h, &bank))).abs() <= 1e-12);
    let bogus: BTreeSet<_> = [filters::Label::new(99, 0)].into();
    assert!(matches!(forge::separation_deficits(&f, &bank, &bogus), Err(ForgeError::UnknownLabel(_))));
}

#[test]
fn meyer_block_of_adjacent_scales_is_tight() {
    let g = grid1(2048);
    let bank = filters::build_meyer_1d(g, 1, 9).unwrap();
    let f = indicator(g, 40.0, 60.0);
    let block = forge::meeting_block(&f, &bank);
    let scales: BTreeSet<i32> = block.iter().map(|l| l.scale).collect();
    assert_eq!(scales.len(), 2);
    assert!(forge::separation_deficits(&f, &bank, &block).unwrap() <= 1e-12);
}

#[test]
fn superadditivity_for_separated_bands() {
    let g = grid1(1024);
    let bank = filters::build_shannon_1d(g, 1, 9).unwrap();
    let fs = vec![indicator(g, 16.0, 32.0), indicator(g, 128.0, 256.0)];
    let blocks: Vec<_> = fs.iter().map(|f| forge::meeting_block(f, &bank)).collect();
    let a = [0.5f64.sqrt(), 0.5f64.sqrt()];
    let r = forge::check_superadditivity(&fs, &a, &blocks, &bank, 2, 0).unwrap();
    assert!((r.w_sum - r.additive).abs() <= 1e-10, "{r:?}");
    assert!(r.slack >= -1e-8);
    let one = forge::check_superadditivity(&fs[..1], &[1.0], &blocks[..1], &bank, 2, 0).unwrap();
    assert!((one.rhs - one.w_sum / 2.0).abs() <= 1e-15);
    let clash = [blocks[0].clone(), blocks[0].clone()];
    assert!(matches!(
        forge::check_superadditivity(&fs, &a, &clash, &bank, 2, 0),
        Err(ForgeError::DisjointnessViolation(0, 1))
    ));
}

#[test]
fn meyer_leakage_is_absorbed_by_measured_epsilons() {
    let g = grid1(2048);
    let bank = filters::build_meyer_1d(g, 1, 9).unwrap();
    let fs = vec![indicator(g, 8.0, 12.0), indicator(g, 96.0, 150.0)];
    let blocks: Vec<_> = fs.iter().map(|f| forge::meeting_block(f, &bank)).collect();
    let r = forge::check_superadditivity(&fs, &[0.8, 0.6], &blocks, &bank, 2, 0).unwrap();
    assert!(r.slack >= -1e-8, "{r:?}");
}

#[test]
fn forge_errors() {
    let g = grid1(64);
    let bank = filters::build_shannon_1d(g, 1, 5).unwrap();
    let f0 = indicator(g, 8.0, 16.0);
    let e = DecaySequence::Geometric { ratio: 0.5 };
    assert!(matches!(forge::build_slow_signal(&f0, &e, &bank, 0.1, 0, None), Err(ForgeError::Invalid(_))));
    assert!(matches!(forge::build_slow_signal(&f0, &e, &bank, 0.3, 2, None), Err(ForgeError::Invalid(_))));
    let r = forge::build_slow_signal(&f0, &e, &bank, 0.125, 3, None);
    assert!(matches!(r, Err(ForgeError::TargetUnreachable { .. } | ForgeError::GridExhausted { .. })), "{r:?}");
}

#[test]
fn closed_form_coefficients() {
    let a = forge::make_coefficients(&DecaySequence::Geometric { ratio: 0.5 }, 6).unwrap();
    for (k, ak) in a.iter().enumerate() {
        assert!((ak - 2f64.powf(-((k + 1) as f64) / 2.0)).abs() < 1e-15);
    }
    let a = forge::make_coefficients(&DecaySequence::Power { exponent: 1.0 }, 6).unwrap();
    for (k, ak) in a.iter().enumerate() {
        let k = (k + 1) as f64;
        assert!((ak - (1.0 / (k * (k + 1.0))).sqrt()).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn truncated_weights_telescope(ratio in 0.05f64..0.95, p in 0.1f64..3.0, k_max in 1usize..12, geometric in any::<bool>()) {
        let e = if geometric { DecaySequence::Geometric { ratio } } else { DecaySequence::Power { exponent: p } };
        let a = forge::truncated_coefficients(&e, k_max).unwrap();
        for n in 1..=k_max {
            let tail: f64 = a[n - 1..].iter().map(|x| x * x).sum();
            prop_assert!((tail - e.value(n)).abs() <= 1e-14);
        }
        prop_assert!(a.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn default_schedule_keeps_epsilons_small(w in proptest::collection::vec(0.01f64..1.0, 2..8), delta in 0.01f64..0.24) {
        let eta = forge::default_schedule(&w, delta, 1e-2);
        let eps = forge::epsilons(&eta);
        let norm_sq: f64 = w.iter().map(|x| x * x).sum();
        for (k, wk) in w.iter().enumerate() {
            prop_assert!(eps[k] <= delta * wk * wk / (2.0 * norm_sq) * (1.0 + 1e-12));
        }
    }
}
