mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use scatlab::filters::BankError;
use scatlab::forge::ForgeError;
use scatlab::scatter::ScatterError;

#[derive(Parser, Debug)]
#[command(name = "scatlab", version, about = "Windowed scattering on the discrete torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build or verify a filter bank.
    #[command(subcommand)]
    Bank(BankCommand),
    /// Scatter a signal and write its energy profile.
    Scatter(ScatterArgs),
    /// Forge a signal whose energy decays no faster than a given sequence.
    Adversarial(AdversarialArgs),
    /// Emit a decay certificate and compare it against measured energies.
    Certify(CertifyArgs),
}

#[derive(Subcommand, Debug)]
enum BankCommand {
    /// Build a bank from a TOML or JSON config and export it.
    Build {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-check a bank export or config.
    Verify {
        #[arg(long)]
        bank: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
pub struct SignalArgs {
    /// Signal container file.
    #[arg(long, conflicts_with = "generator")]
    pub signal: Option<PathBuf>,
    /// `gaussian-bump:SIGMA`, `band-indicator:LO:HI` or `random-phase-band:LO:HI`.
    #[arg(long)]
    pub generator: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
pub struct ScatterArgs {
    /// Bank export directory, manifest, or config file.
    #[arg(long)]
    pub bank: PathBuf,
    #[command(flatten)]
    pub signal: SignalArgs,
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    #[arg(long, default_value_t = 0.0)]
    pub prune: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Also dump the `K` most energetic paths.
    #[arg(long)]
    pub top_k: Option<usize>,
}

#[derive(Args, Debug)]
pub struct AdversarialArgs {
    #[arg(long)]
    pub bank: PathBuf,
    /// Base signal f0; defaults to a one-octave band indicator at n/64.
    #[arg(long)]
    pub generator: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `geometric:R`, `power:P`, `file:PATH`, or an inline list of values.
    #[arg(long)]
    pub decay: String,
    /// Number of summands, which is also the certified depth.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 0.125)]
    pub delta: f64,
    /// Signal the forged one should stay close to.
    #[arg(long)]
    pub anchor: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CertificateKind {
    Kernel,
    Weighted,
    Ufc,
    Wavelet,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaArg {
    EuclidHat,
    Gaussian,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    #[arg(long)]
    pub bank: PathBuf,
    #[command(flatten)]
    pub signal: SignalArgs,
    #[arg(long, value_enum)]
    pub certificate: CertificateKind,
    /// `sobolev:S`, `log:S` or `power:P`.
    #[arg(long)]
    pub weight: Option<String>,
    #[arg(long, value_enum, default_value_t = ThetaArg::EuclidHat)]
    pub theta: ThetaArg,
    /// Deepest layer compared against the bound.
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Error carrying a specific process exit code.
#[derive(Debug)]
pub struct Exit {
    pub code: u8,
    pub message: String,
}

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Exit {}

pub fn exit(code: u8, message: impl Into<String>) -> anyhow::Error {
    Exit { code, message: message.into() }.into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Exit>() {
            return e.code;
        }
        if let Some(e) = cause.downcast_ref::<ScatterError>() {
            return match e {
                ScatterError::DepthTooLarge { .. } | ScatterError::SignalMemory { .. } => 4,
                ScatterError::InconsistentTree { .. } => 3,
                _ => 1,
            };
        }
        if let Some(e) = cause.downcast_ref::<ForgeError>() {
            return match e {
                ForgeError::TargetUnreachable { .. } | ForgeError::GridExhausted { .. } => 5,
                ForgeError::Scatter(ScatterError::DepthTooLarge { .. } | ScatterError::SignalMemory { .. }) => 4,
                _ => 1,
            };
        }
        if let Some(e) = cause.downcast_ref::<BankError>() {
            return match e {
                BankError::CoverageGap { .. } | BankError::NonUnitLP { .. } => 2,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    // Usage errors exit with 1 so that 2 stays reserved for Littlewood-Paley failures.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Bank(BankCommand::Build { config, out }) => commands::bank_build(&config, &out),
        Command::Bank(BankCommand::Verify { bank }) => commands::bank_verify(&bank),
        Command::Scatter(a) => commands::scatter(&a),
        Command::Adversarial(a) => commands::adversarial(&a),
        Command::Certify(a) => commands::certify(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
