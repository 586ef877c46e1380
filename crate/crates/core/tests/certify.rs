use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use scatlab::certify::{self, Rate, SobolevKind, ThetaKernel, Weight};
use scatlab::filters::{self, FilterBank};
use scatlab::forge::{self, DecaySequence};
use scatlab::generate::Generator;
use scatlab::geometry;
use scatlab::grid::{self, Grid, Signal, SpectralSignal};
use scatlab::scatter;

fn grid1(n: usize) -> Grid {
    Grid::new(1, n, 1.0).unwrap()
}

fn band(g: Grid, lo: f64, hi: f64, seed: u64) -> Signal {
    Generator::RandomPhaseBand { lo, hi }.sample(g, seed).unwrap()
}

fn ufc() -> FilterBank {
    let g = grid1(128);
    filters::build_ufc_bank(g, &filters::box_window(g, 8), 8, 10.0).unwrap()
}

fn lowpass_energy(f: &Signal, bank: &FilterBank) -> f64 {
    let spec = grid::forward_fourier(f);
    spec.coeffs.iter().zip(&bank.lowpass.coeffs).map(|(z, c)| (z * c).norm_sqr()).sum()
}

fn measured(f: &Signal, bank: &FilterBank, depth: usize) -> Vec<f64> {
    let tree = scatter::scatter(f, bank, &scatter::ScatterOptions::new(depth)).unwrap();
    (0..=depth).map(|n| tree.w(n)).collect()
}

/// Composite Simpson rule on `[-b, b]`.
fn simpson(f: impl Fn(f64) -> f64, b: f64, steps: usize) -> f64 {
    let h = 2.0 * b / steps as f64;
    let inner: f64 = (1..steps).map(|i| f(-b + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(-b) + f(b) + inner) * h / 3.0
}

#[test]
fn kernel_certificates_dominate_measured_energy() {
    let g = grid1(1024);
    let theta = ThetaKernel::EuclidHat { d: 1 };
    let banks = [filters::build_shannon_1d(g, 1, 9).unwrap(), filters::build_meyer_1d(g, 1, 8).unwrap()];
    for bank in &banks {
        let c = certify::find_ctilde(bank, &theta).unwrap();
        for (i, psi_chi) in bank.lowpass.coeffs.iter().enumerate() {
            assert!(theta.hat(c * g.freq_norm(i)) <= psi_chi.norm() + 1e-15);
        }
        for seed in 0..3 {
            let f = band(g, 1.0, 200.0, seed);
            let cert = certify::rate_certificate_kernel(&f, bank, &theta, 4);
            assert!(cert.monotone());
            let w = measured(&f, bank, 4);
            for n in 1..=4 {
                let b = cert.bound(n).unwrap();
                assert!(w[n] <= b + 1e-8 * f.norm_sq(), "{} N = {n}: {} > {b}", bank.name, w[n]);
                assert!(b <= f.norm_sq() * (1.0 + 1e-12));
            }
        }
    }
}

#[test]
fn shannon_ctilde_is_inverse_r1() {
    let bank = filters::build_shannon_1d(grid1(1024), 3, 9).unwrap();
    let c = certify::find_ctilde(&bank, &ThetaKernel::EuclidHat { d: 1 }).unwrap();
    assert!(c <= 1.0 / bank.r1() * (1.0 + 1e-9));
}

#[test]
fn ufc_certificate_dominates_and_matches_plug_in() {
    let bank = ufc();
    let g = bank.grid;
    let alpha = bank.alpha();
    let pre = (2.0 / (alpha * bank.r1())).max(1.0);
    for seed in 0..3 {
        let f = band(g, 1.0, 60.0, seed);
        let cert = certify::rate_certificate_ufc(&f, &bank, 4).unwrap();
        let hp = f.norm_sq() - lowpass_energy(&f, &bank);
        let w = measured(&f, &bank, 4);
        for n in 1..=4 {
            let b = cert.bound(n).unwrap();
            let plug = pre * bank.d_psi() * hp * alpha.powi(n as i32);
            assert!((b - plug).abs() <= 1e-12 * plug);
            assert!(w[n] <= b + 1e-8 * f.norm_sq());
        }
        assert_eq!(cert.rate, Rate::Exponential { base: alpha * alpha });
    }
    let low = band(g, 0.0, bank.r1(), 0);
    let cert = certify::rate_certificate_ufc(&low, &bank, 3).unwrap();
    assert!(cert.rows.iter().all(|r| r.bound <= 1e-28));
    let shannon = filters::build_shannon_1d(g, 1, 6).unwrap();
    assert!(certify::rate_certificate_ufc(&low, &shannon, 3).is_err());
}

#[test]
fn gaussian_theta_has_no_explicit_constant() {
    let bank = filters::build_shannon_1d(grid1(512), 1, 8).unwrap();
    assert!(certify::find_ctilde(&bank, &ThetaKernel::Gaussian).is_none());
    let f = band(bank.grid, 1.0, 100.0, 0);
    let cert = certify::rate_certificate_kernel(&f, &bank, &ThetaKernel::Gaussian, 4);
    assert!(cert.asymptotic_only && cert.rows.is_empty());
    let cert = certify::rate_certificate_weighted(&f, &bank, &Weight::Sobolev { s: 0.5 }, &ThetaKernel::Gaussian, 4).unwrap();
    assert!(cert.asymptotic_only);
    match cert.rate {
        Rate::Exponential { base } => assert!((base - bank.alpha()).abs() <= 1e-12),
        r => panic!("unexpected rate {r:?}"),
    }
}

#[test]
fn log_sobolev_rate_is_polynomial() {
    let bank = filters::build_shannon_1d(grid1(512), 1, 8).unwrap();
    let f = band(bank.grid, 1.0, 100.0, 0);
    let s = 1.5;
    let cert = certify::rate_certificate_weighted(&f, &bank, &Weight::LogSobolev { s }, &ThetaKernel::Gaussian, 4).unwrap();
    match cert.rate {
        Rate::Polynomial { exponent, constant } => {
            assert_eq!(exponent, 2.0 * s);
            assert!((constant - (1.0 / bank.alpha()).ln().powf(-2.0 * s)).abs() <= 1e-12);
        }
        r => panic!("unexpected rate {r:?}"),
    }
}

#[test]
fn kernel_bound_single_coefficient_and_monotonicity() {
    let g = grid1(256);
    let bank = filters::build_shannon_1d(g, 1, 7).unwrap();
    let theta = ThetaKernel::EuclidHat { d: 1 };
    let mut spec = SpectralSignal::zeros(g);
    let k0 = g.flat([3, 0]).unwrap();
    spec.coeffs[k0] = Complex64::new(0.6, 0.8);
    let f = grid::inverse_fourier(&spec);
    for n in 1..=5 {
        let b = certify::kernel_bound(&f, &bank, &theta, n, 0.5).unwrap();
        let h = theta.hat(0.5 * bank.alpha().powi(n as i32 - 1) * 3.0);
        assert!((b - (1.0 - h * h)).abs() <= 1e-14);
    }
    let f = band(g, 1.0, 100.0, 7);
    let bounds: Vec<f64> = (1..=30).map(|n| certify::kernel_bound(&f, &bank, &theta, n, 1.0).unwrap()).collect();
    assert!(bounds.windows(2).all(|w| w[1] <= w[0]));
    assert!(*bounds.last().unwrap() < 1e-3 * bounds[0]);
    // Smaller alpha, smaller bound.
    let mut by_alpha = Vec::new();
    for rho in [0.0, 0.2, 0.5, 0.8] {
        let mut b = bank.clone();
        b.rho = rho;
        by_alpha.push((b.alpha(), certify::kernel_bound(&f, &b, &theta, 3, 1.0).unwrap()));
    }
    assert!(by_alpha.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
    assert!(certify::kernel_bound(&f, &bank, &theta, 1, 0.0).is_err());
}

#[test]
fn theta_constants_hold_on_the_lattice() {
    let g = Grid::new(2, 64, 8.0).unwrap();
    for theta in [ThetaKernel::Gaussian, ThetaKernel::EuclidHat { d: 2 }] {
        let worst = (0..g.len())
            .map(|i| g.freq_norm(i))
            .filter(|&r| r > 0.0)
            .map(|r| (1.0 - theta.hat(r).powi(2)) / r.powf(theta.k()))
            .fold(0.0, f64::max);
        assert!(worst <= theta.c_theta() * (1.0 + 1e-12), "{theta:?}: {worst}");
    }
    assert_eq!(ThetaKernel::Gaussian.c_theta(), 2.0 * PI);
    assert_eq!(ThetaKernel::EuclidHat { d: 2 }.c_theta(), 4.0);
}

#[test]
fn sobolev_norm_oracles() {
    let g = grid1(1024);
    let f = band(g, 1.0, 100.0, 4);
    let (hs, hlog) = certify::sobolev_norms(&f, 0.0);
    assert!((hs - f.norm()).abs() <= 1e-12 && (hlog - f.norm()).abs() <= 1e-12);
    let mut spec = SpectralSignal::zeros(g);
    spec.coeffs[g.flat([-7, 0]).unwrap()] = Complex64::new(0.0, 2.0);
    let spike = grid::inverse_fourier(&spec);
    assert!((certify::sobolev_norms(&spike, 1.5).0 - 50f64.powf(0.75) * 2.0).abs() <= 1e-12);
    // |f_hat(xi)|^2 of the bump is proportional to exp(-4 pi^2 sigma^2 xi^2).
    let sigma = 0.05;
    let bump = Generator::GaussianBump { sigma }.sample(g, 0).unwrap();
    let a = 4.0 * PI * PI * sigma * sigma;
    // For s = 1 the summand is entire, so the lattice sum equals the integral up to
    // exp(-pi^2 / a); fractional s has branch points at +-i and the two differ.
    let num = simpson(|x| (1.0 + x * x) * (-a * x * x).exp(), 80.0, 200_000);
    let den = simpson(|x| (-a * x * x).exp(), 80.0, 200_000);
    let oracle = (num / den).sqrt();
    let got = certify::sobolev_norms(&bump, 1.0).0;
    assert!((got - oracle).abs() <= 1e-6 * oracle, "{got} vs {oracle}");
}

#[test]
fn weighted_decomposition_norm_cases() {
    let g = grid1(1024);
    let bank = filters::build_shannon_1d(g, 1, 9).unwrap();
    let f = band(g, 1.0, 300.0, 2);
    let one = certify::weighted_decomp_norm(&f, &bank, &|_| 1.0);
    assert!((one - (f.norm_sq() - lowpass_energy(&f, &bank))).abs() <= 1e-12);
    let w = Weight::Sobolev { s: 1.0 };
    let narrow = Generator::BandIndicator { lo: 64.0, hi: 128.0 }.sample(g, 0).unwrap();
    let block = forge::meeting_block(&narrow, &bank);
    let d_b = bank.filter(*block.iter().next().unwrap()).unwrap().chebyshev.radius;
    let got = certify::weighted_decomp_norm(&narrow, &bank, &|t| w.eval(t));
    assert!((got - w.eval(d_b).powi(2)).abs() <= 1e-10 * got);
    let u = ufc();
    let f = band(u.grid, 1.0, 60.0, 3);
    let hp = f.norm_sq() - lowpass_energy(&f, &u);
    for w in [Weight::Sobolev { s: 1.0 }, Weight::Power { p: 0.5 }, Weight::LogSobolev { s: 2.0 }] {
        let d = certify::weighted_decomp_norm(&f, &u, &|t| w.eval(t));
        assert!(d <= w.eval(u.d_psi()).powi(2) * hp * (1.0 + 1e-12), "{w:?}");
    }
}

#[test]
fn inclusion_holds_on_random_band_signals() {
    let g = grid1(1024);
    let bank = filters::build_shannon_1d(g, 1, 9).unwrap();
    let w = Weight::Sobolev { s: 1.0 };
    for seed in 0..20 {
        let lo = 1.0 + (seed % 5) as f64;
        let f = band(g, lo, lo + 50.0 * (1 + seed % 4) as f64, seed);
        let r = certify::check_inclusion(&f, &bank, &w, 2.0).unwrap();
        assert!(r.slack >= 0.0, "seed {seed}: {r:?}");
    }
    // Constant weight: both sides are plain energies.
    let f = band(g, 1.0, 300.0, 0);
    let r = certify::check_inclusion(&f, &bank, &Weight::Power { p: 0.0 }, 2.0).unwrap();
    assert!((r.fourier_norm - f.norm_sq()).abs() <= 1e-12);
    assert!((r.decomp_norm - (f.norm_sq() - lowpass_energy(&f, &bank))).abs() <= 1e-12);
}

#[test]
fn sqrt_weight_norm_is_finite_on_ufc() {
    let bank = ufc();
    let w = Weight::Power { p: 0.5 };
    for seed in 0..5 {
        let f = band(bank.grid, 1.0, bank.grid.nyquist(), seed);
        let d = certify::weighted_decomp_norm(&f, &bank, &|t| w.eval(t));
        assert!(d.is_finite() && d <= bank.d_psi() * f.norm_sq());
    }
}

#[test]
fn wavelet_rates() {
    let g = grid1(1024);
    let bank = filters::build_meyer_1d(g, 1, 8).unwrap();
    let f = band(g, 1.0, 200.0, 0);
    let exponent = |s: f64| {
        let cert = certify::rate_certificate_wavelet(&f, &bank, s, SobolevKind::Sobolev).unwrap();
        assert!((cert.alpha - 0.6).abs() <= 1e-12);
        cert.constants["rate_exponent"]
    };
    assert!((exponent(0.5) - 1.0).abs() <= 1e-12);
    assert!((exponent(1.0) - 2.0).abs() <= 1e-12);
    assert!((exponent(2.0) - exponent(1.0)).abs() <= 1e-12);
    let cert = certify::rate_certificate_wavelet(&f, &bank, 1.0, SobolevKind::LogSobolev).unwrap();
    assert!(matches!(cert.rate, Rate::Polynomial { .. }));
    let ufc = ufc();
    assert!(certify::rate_certificate_wavelet(&band(ufc.grid, 1.0, 9.0, 0), &ufc, 1.0, SobolevKind::Sobolev).is_err());
    assert!(geometry::compute_alpha(0.25, 1.0 - 1e-9).unwrap() > 1.0 - 1e-6);
}

#[test]
fn forged_signals_leave_every_sobolev_ball() {
    let g = grid1(1 << 13);
    let bank = filters::build_shannon_1d(g, 1, 12).unwrap();
    let f0 = Generator::BandIndicator { lo: 32.0, hi: 64.0 }.sample(g, 0).unwrap();
    let e = DecaySequence::Power { exponent: 1.0 };
    let w = Weight::Sobolev { s: 0.5 };
    let norms: Vec<f64> = (2..=4)
        .map(|k| {
            let (f, cert) = forge::build_slow_signal(&f0, &e, &bank, 0.002, k, None).unwrap();
            assert!(cert.holds());
            certify::weighted_decomp_norm(&f, &bank, &|t| w.eval(t))
        })
        .collect();
    assert!(norms.windows(2).all(|p| p[1] > 1.5 * p[0]), "{norms:?}");
}

#[test]
fn classification_examples() {
    assert!(certify::classify_weight(&Weight::Sobolev { s: 0.5 }, 2.0).unwrap().is_strong());
    assert!(certify::classify_weight(&Weight::Power { p: 1.0 }, 2.0).unwrap().is_strong());
    let log = certify::classify_weight(&Weight::LogSobolev { s: 3.0 }, 2.0).unwrap();
    let e = std::f64::consts::E;
    assert!(log.is_weak() && log.threshold().unwrap() <= (e.powi(3) - e) * 10f64.powf(0.01));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sobolev_norms_grow_with_s(seed in any::<u64>(), s in 0.0f64..3.0, ds in 0.01f64..1.0) {
        let f = band(grid1(512), 0.0, 200.0, seed);
        let (a, la) = certify::sobolev_norms(&f, s);
        let (b, lb) = certify::sobolev_norms(&f, s + ds);
        prop_assert!(b >= a * (1.0 - 1e-14));
        prop_assert!(lb >= la * (1.0 - 1e-14));
    }

    #[test]
    fn kernel_bound_is_at_most_the_norm(seed in any::<u64>(), n in 1usize..10, c in 0.01f64..10.0) {
        let bank = filters::build_meyer_1d(grid1(512), 1, 7).unwrap();
        let f = band(bank.grid, 0.0, 250.0, seed);
        let b = certify::kernel_bound(&f, &bank, &ThetaKernel::EuclidHat { d: 1 }, n, c).unwrap();
        prop_assert!(b >= 0.0 && b <= f.norm_sq() * (1.0 + 1e-12));
    }
}
