//! Command-line entry point: argument grammar, configuration, dispatch and exit codes.

mod commands;
mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, ErrorClass, Result};

pub use output::{format_float, to_json_pretty, write_atomic};

/// Default residual tolerance when `--tol` is absent.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default seed when `--seed` is absent.
pub const DEFAULT_SEED: u64 = 1;
/// Environment variable capping the worker threads of parallel sweeps.
pub const THREADS_ENV: &str = "OPALG_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "opalg", version, about = "Operator-algebraic pricing on finite-dimensional matrix markets")]
pub struct Cli {
    /// Model file; repeat for `check`.
    #[arg(long, global = true)]
    pub model: Vec<PathBuf>,
    /// Output file, written atomically; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Residual tolerance (feasibility tolerance for `arb`).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON file supplying defaults for the global flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Conditional expectations E_t(X) with their axiom residuals.
    Condexp(CondexpArgs),
    /// Pricing operator Π_t(X) with its structural residuals.
    Price(PriceArgs),
    /// Search for a pricing state nonpositive on a gains cone.
    Arb(ArbArgs),
    /// Price a payoff under a lattice jump model.
    Jump(JumpArgs),
    /// Lattice digital against Black–Scholes as the lattice step shrinks.
    Bslimit(BslimitArgs),
    /// Slowly varying rate against its frozen-rate approximation.
    Wkb(WkbArgs),
    /// Quantum Markov semigroup checks and valuation.
    Qms(QmsArgs),
    /// Random-matrix Cramér–Rao demonstration.
    Fisher(FisherArgs),
    /// Run the property suite on the given models, or on the bundled ones.
    Check(CheckArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Condexp(_) => "condexp",
            Command::Price(_) => "price",
            Command::Arb(_) => "arb",
            Command::Jump(_) => "jump",
            Command::Bslimit(_) => "bslimit",
            Command::Wkb(_) => "wkb",
            Command::Qms(_) => "qms",
            Command::Fisher(_) => "fisher",
            Command::Check(_) => "check",
        }
    }

    fn default_format(&self) -> Format {
        match self {
            Command::Jump(_) | Command::Bslimit(_) | Command::Wkb(_) | Command::Fisher(_) => Format::Csv,
            _ => Format::Json,
        }
    }
}

#[derive(Debug, Args)]
pub struct CondexpArgs {
    /// State file {"rho": matrix}; the maximally mixed state when absent.
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Observable file holding one matrix.
    #[arg(long)]
    pub observable: PathBuf,
    /// Filtration time; every time when absent.
    #[arg(long)]
    pub time: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PriceArgs {
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Claim file holding one matrix, paid at the horizon.
    #[arg(long)]
    pub claim: PathBuf,
    #[arg(long)]
    pub time: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ArbArgs {
    /// Gains file {"gains": [matrix, ...]}.
    #[arg(long)]
    pub gains: PathBuf,
    /// Faithfulness floor ρ ⪰ δI.
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
}

#[derive(Debug, Args)]
pub struct JumpArgs {
    /// Times to maturity.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.5, 1.0])]
    pub tau: Vec<f64>,
    /// Spot prices.
    #[arg(long = "spot", value_delimiter = ',', default_values_t = [1.0])]
    pub s: Vec<f64>,
    /// Payoff as inline JSON or a file, e.g. {"kind":"digital","strike":1.0}.
    #[arg(long, default_value = r#"{"kind":"digital","strike":1.0}"#)]
    pub payoff: String,
    #[arg(long, value_enum, default_value_t = JumpMethod::Series)]
    pub method: JumpMethod,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum JumpMethod {
    Series,
    Expm,
}

#[derive(Debug, Args)]
pub struct BslimitArgs {
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.05)]
    pub rate: f64,
    #[arg(long, default_value_t = 1.0)]
    pub maturity: f64,
    #[arg(long = "spot", default_value_t = 1.0)]
    pub s: f64,
    #[arg(long, default_value = r#"{"kind":"digital","strike":1.0}"#)]
    pub payoff: String,
    /// Lattice steps Δ.
    #[arg(long, value_delimiter = ',', default_values_t = [0.08, 0.04, 0.02, 0.01])]
    pub deltas: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct WkbArgs {
    /// Rate r(u) = r0 + slope·u, slowed to r(εu).
    #[arg(long, default_value_t = 0.03)]
    pub r0: f64,
    #[arg(long, default_value_t = 0.02)]
    pub slope: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.01])]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub maturity: f64,
    /// Equally spaced knots on [0, maturity]; every ordered pair is tested.
    #[arg(long, default_value_t = 5)]
    pub knots: usize,
    #[arg(long = "spot", default_value_t = 1.0)]
    pub s: f64,
    #[arg(long, default_value = r#"{"kind":"digital","strike":1.0}"#)]
    pub payoff: String,
}

#[derive(Debug, Args)]
pub struct QmsArgs {
    /// Candidate invariant state.
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Terminal observable; the identity when absent.
    #[arg(long)]
    pub observable: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub time: f64,
    #[arg(long, default_value_t = 1.0)]
    pub maturity: f64,
    /// Random observables per sampled time.
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FisherDemo {
    Semicircular,
}

#[derive(Debug, Args)]
pub struct FisherArgs {
    #[arg(long, value_enum, default_value_t = FisherDemo::Semicircular)]
    pub demo: FisherDemo,
    #[arg(long, default_value_t = 512)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// State applied to every given model; the maximally mixed state when absent.
    #[arg(long)]
    pub state: Option<PathBuf>,
}

/// Strict configuration file: every key optional, unknown keys rejected.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub subcommand: Option<String>,
    pub model: Option<Vec<PathBuf>>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

/// Effective settings after merging the config file under the command line.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub model: Vec<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Format,
    /// Explicit tolerance, if any; commands fall back to their own default.
    pub tol: Option<f64>,
    pub seed: u64,
}

impl RunConfig {
    pub fn resolve(cli: &Cli) -> Result<Self> {
        let file = match &cli.config {
            Some(p) => crate::algebra::parse_json::<ConfigFile>(&read_file(p)?)?,
            None => ConfigFile::default(),
        };
        let name = cli.command.name();
        if let Some(s) = &file.subcommand {
            if s != name {
                return Err(Error::Parse {
                    path: "subcommand".into(),
                    message: format!("config is for `{s}` but `{name}` was invoked"),
                });
            }
        }
        let tol = cli.tol.or(file.tol);
        if let Some(t) = tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidParameter(format!("tolerance must be positive, got {t}")));
            }
        }
        Ok(Self {
            subcommand: name.to_string(),
            model: if cli.model.is_empty() { file.model.unwrap_or_default() } else { cli.model.clone() },
            out: cli.out.clone().or(file.out),
            format: cli.format.or(file.format).unwrap_or_else(|| cli.command.default_format()),
            tol,
            seed: cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        })
    }

    fn tol_or_default(&self) -> f64 {
        self.tol.unwrap_or(DEFAULT_TOL)
    }

    fn single_model(&self) -> Result<&Path> {
        match self.model.as_slice() {
            [one] => Ok(one),
            [] => Err(Error::InvalidParameter(format!("`{}` needs --model FILE", self.subcommand))),
            _ => Err(Error::InvalidParameter(format!("`{}` takes a single --model", self.subcommand))),
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Process exit code of an error class.
pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Validation => 1,
        ErrorClass::CheckFailed => 2,
        ErrorClass::Numerical => 3,
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidParameter(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `argv` (program name first), runs one subcommand and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                eprintln!("ERROR Usage: a subcommand is required (see --help)");
                return 1;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("ERROR Usage: {first}");
            return 1;
        }
    };
    let result = configure_threads().and_then(|_| RunConfig::resolve(&cli)).and_then(|cfg| commands::dispatch(&cli.command, &cfg));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ERROR {}: {}", e.code(), single_line(&e.to_string()));
            exit_code(e.class())
        }
    }
}

fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
