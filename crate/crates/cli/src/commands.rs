use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use scatlab::certify::{self, SobolevKind, ThetaKernel, Weight};
use scatlab::filters::{self, FilterBank};
use scatlab::forge::{self, DecaySequence};
use scatlab::generate::Generator;
use scatlab::grid::{Grid, Signal};
use scatlab::io;
use scatlab::scatter::{self, ScatterOptions};

use crate::config::{self, sha256_hex, BankConfig};
use crate::output::{self, num, Stamp};
use crate::{exit, AdversarialArgs, CertificateKind, CertifyArgs, Format, ScatterArgs, SignalArgs, ThetaArg};

/// Dominance slack allowed before `certify` reports a violation, relative to `|f|^2`.
const DOMINANCE_TOL: f64 = 1e-8;
/// Energy identity tolerance for unpruned scatter runs, relative to `|f|^2`.
const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
enum SignalRecord {
    File { sha256: String },
    Generator { generator: String, seed: u64 },
}

fn resolve_signal(args: &SignalArgs, grid: Grid) -> Result<(Signal, SignalRecord)> {
    match (&args.signal, &args.generator) {
        (Some(path), _) => {
            let f = io::load_signal(path)?;
            if f.grid != grid {
                bail!("signal grid {:?} does not match the bank grid {:?}", f.grid, grid);
            }
            let bytes = fs::read(path)?;
            Ok((f, SignalRecord::File { sha256: sha256_hex(&bytes) }))
        }
        (None, Some(spec)) => {
            let gen: Generator = spec.parse().map_err(|e: String| anyhow!(e))?;
            let f = gen.sample(grid, args.seed).map_err(|e| anyhow!(e))?;
            Ok((f, SignalRecord::Generator { generator: gen.to_string(), seed: args.seed }))
        }
        (None, None) => bail!("give either --signal or --generator"),
    }
}

fn report_bank(bank: &FilterBank) -> Result<()> {
    let lp = filters::verify_littlewood_paley(bank);
    println!("bank: {} (d={}, n={}, {} filters)", bank.name, bank.grid.dim(), bank.grid.n(), bank.filters.len());
    println!("lp_deviation: {:e} (tolerance {:e}, mean {:e}, {} points)", lp.max_deviation, bank.lp_tolerance, lp.mean_deviation, lp.points);
    println!("worst_frequency: {:?}", lp.worst_frequency);
    println!("gamma: {}", bank.gamma);
    println!("alpha: {}", bank.alpha());
    let gap = bank.check_metadata();
    match &gap {
        Ok(()) => println!("frequency_gap: ok (r_1 = {})", bank.r1()),
        Err(e) => println!("frequency_gap: FAILED ({e})"),
    }
    if lp.max_deviation > bank.lp_tolerance {
        return Err(exit(
            2,
            format!(
                "Littlewood-Paley deviation {:e} exceeds tolerance {:e}; worst frequency {:?}",
                lp.max_deviation, bank.lp_tolerance, lp.worst_frequency
            ),
        ));
    }
    if let Err(e) = gap {
        return Err(exit(2, format!("frequency gap check failed: {e}")));
    }
    Ok(())
}

pub fn bank_build(config: &Path, out: &Path) -> Result<()> {
    let cfg = BankConfig::parse(config)?;
    let bank = cfg.build()?;
    io::save_bank(&bank, out)?;
    println!("config: {}", sha256_hex(serde_json::to_string(&cfg)?.as_bytes()));
    println!("wrote {}", out.join(io::MANIFEST).display());
    report_bank(&bank)
}

pub fn bank_verify(path: &Path) -> Result<()> {
    let lb = config::load(path)?;
    report_bank(&lb.bank)
}

pub fn scatter(a: &ScatterArgs) -> Result<()> {
    if !(a.prune >= 0.0) {
        bail!("--prune must be nonnegative");
    }
    let lb = config::load(&a.bank)?;
    let bank = &lb.bank;
    let (f, source) = resolve_signal(&a.signal, bank.grid)?;
    let record = json!({
        "command": "scatter",
        "bank": lb.digest,
        "signal": source,
        "depth": a.depth,
        "prune": a.prune,
        "format": a.format,
        "top_k": a.top_k,
    });
    let stamp = Stamp::of(&record, a.signal.seed)?;
    let tree = scatter::scatter(&f, bank, &ScatterOptions::new(a.depth).prune(a.prune))?;
    let profile = scatter::energy_profile(&tree)?;
    let last = profile.layers.last().expect("profile has a root layer");
    // Raw identity gap: includes energy outside the frame's cover.
    let residual = last.residual + last.leak;
    let tol = RESIDUAL_TOL * profile.norm_sq;
    let top = a.top_k.map(|k| tree.top_paths(k));

    match a.format {
        Format::Csv => {
            let mut csv = stamp.csv_header("energy-profile", &["layer", "W_n", "W_n_error", "cumulative_output", "mixed_partial"]);
            for l in &profile.layers {
                csv += &format!("{},{},{},{},{}\n", l.layer, num(l.w), num(l.w_error), num(l.cumulative_output), num(l.mixed_partial));
            }
            output::write(&a.out, "profile.csv", &csv)?;
            if let Some(top) = &top {
                let mut csv = stamp.csv_header("paths", &["path", "energy"]);
                for (p, e) in top {
                    csv += &format!("{p},{}\n", num(*e));
                }
                output::write(&a.out, "paths.csv", &csv)?;
            }
        }
        Format::Json => {
            let paths: Option<Vec<_>> = top.as_ref().map(|t| t.iter().map(|(p, e)| json!({"path": p, "energy": e})).collect());
            let body = json!({
                "norm_sq": profile.norm_sq,
                "residual": residual,
                "leak": last.leak,
                "pruned_nodes": tree.pruned_nodes,
                "layers": profile.layers,
                "top_paths": paths,
            });
            output::write(&a.out, "profile.json", &stamp.json("energy-profile", body)?)?;
        }
    }

    println!("norm_sq: {:e}", profile.norm_sq);
    println!("W_{}: {:e} (pruning bound {:e})", a.depth, last.w, last.w_error);
    println!("residual: {residual:e} (outside the cover {:e}, tolerance {tol:e})", last.leak);
    if a.prune == 0.0 && residual.abs() > tol {
        return Err(exit(3, format!("energy identity residual {residual:e} exceeds {tol:e}")));
    }
    Ok(())
}

fn parse_decay(s: &str) -> Result<DecaySequence> {
    let seq = match s.strip_prefix("file:") {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
            text.parse::<DecaySequence>()
        }
        None => s.parse(),
    };
    seq.map_err(|e| anyhow!("rejected decay sequence {s:?}: {e}"))
}

/// One-octave band at the largest power of two not above `n/64`.
fn default_base(grid: Grid) -> Generator {
    let lo = 2f64.powi(((grid.n() / 64).max(1) as f64).log2().floor() as i32);
    Generator::BandIndicator { lo, hi: 2.0 * lo }
}

pub fn adversarial(a: &AdversarialArgs) -> Result<()> {
    let decay = parse_decay(&a.decay)?;
    let lb = config::load(&a.bank)?;
    let bank = &lb.bank;
    let gen: Generator = match &a.generator {
        Some(s) => s.parse().map_err(|e: String| anyhow!(e))?,
        None => default_base(bank.grid),
    };
    let f0 = gen.sample(bank.grid, a.seed).map_err(|e| anyhow!(e))?;
    let anchor = match &a.anchor {
        Some(p) => Some((io::load_signal(p)?, sha256_hex(&fs::read(p)?))),
        None => None,
    };
    let record = json!({
        "command": "adversarial",
        "bank": lb.digest,
        "base": gen.to_string(),
        "seed": a.seed,
        "decay": decay,
        "k": a.k,
        "delta": a.delta,
        "anchor": anchor.as_ref().map(|x| &x.1),
    });
    let stamp = Stamp::of(&record, a.seed)?;
    let (f, cert) = forge::build_slow_signal(&f0, &decay, bank, a.delta, a.k, anchor.as_ref().map(|x| &x.0))
        .with_context(|| format!("forging on n = {} from base {gen}", bank.grid.n()))?;

    let tags = stamp.tags();
    let tags: Vec<(&str, String)> = tags.iter().map(|(k, v)| (*k, v.clone())).collect();
    fs::create_dir_all(&a.out)?;
    io::save_signal_tagged(&a.out.join("f_E.sig"), &f, &tags)?;
    output::write(&a.out, "certificate.json", &stamp.json("adversarial-certificate", json!({ "certificate": cert }))?)?;

    println!("exponents m_k: {:?}", cert.exponents);
    println!("norm_sq: {:e} (E_1 = {:e})", cert.norm_sq, cert.e1);
    println!("certified N: 1..={}", cert.certified_depth);
    println!("{:>3} {:>14} {:>14} {:>14}", "N", "E_N", "W_N(f_E)", "delta*E_N");
    for r in &cert.rows {
        println!("{:>3} {:>14.6e} {:>14.6e} {:>14.6e}", r.n, r.e_n, r.w, r.lower_bound);
    }
    if !cert.holds() {
        bail!("forged signal does not meet its certificate (hypotheses hold: {})", cert.hypotheses_hold);
    }
    Ok(())
}

fn parse_weight(w: Option<&String>) -> Result<Weight> {
    let w = w.ok_or_else(|| anyhow!("this certificate needs --weight"))?;
    w.parse().map_err(|e: String| anyhow!(e))
}

/// Membership norms this far above `|f|^2` make the bound numerically vacuous.
const LARGE_NORM: f64 = 1e2;

pub fn certify(a: &CertifyArgs) -> Result<()> {
    let lb = config::load(&a.bank)?;
    let bank = &lb.bank;
    let (f, source) = resolve_signal(&a.signal, bank.grid)?;
    let theta = match a.theta {
        ThetaArg::EuclidHat => ThetaKernel::EuclidHat { d: bank.grid.dim() },
        ThetaArg::Gaussian => ThetaKernel::Gaussian,
    };
    let record = json!({
        "command": "certify",
        "bank": lb.digest,
        "signal": source,
        "certificate": a.certificate,
        "weight": a.weight,
        "theta": a.theta,
        "depth": a.depth,
    });
    let stamp = Stamp::of(&record, a.signal.seed)?;
    let cert = match a.certificate {
        CertificateKind::Kernel => certify::rate_certificate_kernel(&f, bank, &theta, a.depth),
        CertificateKind::Weighted => certify::rate_certificate_weighted(&f, bank, &parse_weight(a.weight.as_ref())?, &theta, a.depth)?,
        CertificateKind::Ufc => certify::rate_certificate_ufc(&f, bank, a.depth)?,
        CertificateKind::Wavelet => match parse_weight(a.weight.as_ref())? {
            Weight::Sobolev { s } => certify::rate_certificate_wavelet(&f, bank, s, SobolevKind::Sobolev)?,
            Weight::LogSobolev { s } => certify::rate_certificate_wavelet(&f, bank, s, SobolevKind::LogSobolev)?,
            w => bail!("wavelet certificates take sobolev or log weights, not {w}"),
        },
    };
    let tree = scatter::scatter(&f, bank, &ScatterOptions::new(a.depth))?;
    let norm_sq = f.norm_sq();
    let tol = DOMINANCE_TOL * norm_sq;

    let mut csv = stamp.csv_header("certificate-comparison", &["N", "measured_W_N", "bound", "slack"]);
    let mut rows = Vec::new();
    let mut violated = Vec::new();
    for n in 1..=a.depth {
        let w = tree.w(n);
        let bound = cert.bound(n);
        let slack = bound.map(|b| b - w);
        if slack.is_some_and(|s| s < -tol) {
            violated.push(n);
        }
        let cell = |x: Option<f64>| x.map(num).unwrap_or_default();
        csv += &format!("{n},{},{},{}\n", num(w), cell(bound), cell(slack));
        rows.push(json!({"n": n, "measured": w, "bound": bound, "slack": slack}));
    }
    output::write(&a.out, "comparison.csv", &csv)?;
    let body = json!({"certificate": cert, "comparison": rows});
    output::write(&a.out, "certificate.json", &stamp.json("decay-certificate", body)?)?;

    println!("theorem: {:?}, alpha = {}", cert.theorem, cert.alpha);
    match cert.rate {
        certify::Rate::Exponential { base } => {
            println!("rate: O({base:e}^N)");
            if let Some(e) = cert.constants.get("rate_exponent") {
                println!("rate exponent: {e} (W_N = O(alpha^({e} N)))");
            }
        }
        certify::Rate::Polynomial { exponent, .. } => println!("rate: O(N^-{exponent}), rate exponent {exponent}"),
        r => println!("rate: {r:?}"),
    }
    if cert.asymptotic_only {
        println!("asymptotic only, from N = {}", cert.valid_from);
    }
    for note in &cert.notes {
        println!("note: {note}");
    }
    let membership = cert.constants.get("d_omega").copied().or_else(|| cert.constants.get("sobolev_norm").map(|s| s * s));
    if let Some(m) = membership {
        if m > LARGE_NORM * norm_sq {
            println!("warning: membership norm {m:e} is large against |f|^2 = {norm_sq:e}; the bound carries little information");
        }
    }
    for n in 1..=a.depth {
        match cert.bound(n) {
            Some(b) => println!("N={n}: W_N = {:e}, bound = {b:e}", tree.w(n)),
            None => println!("N={n}: W_N = {:e}", tree.w(n)),
        }
    }
    if !violated.is_empty() {
        return Err(exit(6, format!("measured energy exceeds the certified bound at N = {violated:?}")));
    }
    Ok(())
}
