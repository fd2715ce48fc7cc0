//! Command-line front end. Every subcommand is a pure function of its
//! arguments and seed; JSON outputs carry a hash of the arguments.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::decoders::{Backend, DecoderConfig};
use crate::error::{Error, Result};

pub use commands::parse_weights;

/// Environment variable overriding the worker-thread count.
pub const WORKERS_ENV: &str = "FAILSPEC_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

#[derive(Parser, Debug, Serialize)]
#[command(name = "failspec", version, about = "Failure-spectrum, min-weight and splitting analysis of decoding systems")]
pub struct Cli {
    /// JSON file of default flag values, flat or keyed by subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
pub enum Command {
    /// Write a built-in system to the interchange format.
    Gen(GenArgs),
    /// Sample a failure spectrum or direct-sampling rates.
    Spectrum(SpectrumArgs),
    /// Fit an ansatz to a sampled spectrum.
    Fit(FitArgs),
    /// Distances, logical enumeration and search, onset counting.
    Minweight(MinweightArgs),
    /// Multi-seeded splitting from a JSON job.
    Split(SplitArgs),
    /// Merge fit, onset, splitting and Monte Carlo outputs.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Family {
    Rep,
    Ut,
    Rt,
}

#[derive(Args, Debug, Serialize)]
pub struct GenArgs {
    pub family: Family,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d1: Option<usize>,
    #[arg(long)]
    pub d2: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DecoderArgs {
    /// lookup, bnb or bposd.
    #[arg(long, default_value = "lookup")]
    pub decoder: String,
    #[arg(long)]
    pub bp_iters: Option<usize>,
    #[arg(long)]
    pub bp_scale: Option<f64>,
    #[arg(long)]
    pub node_budget: Option<u64>,
    #[arg(long)]
    pub lookup_limit: Option<usize>,
}

impl DecoderArgs {
    pub fn config(&self) -> Result<DecoderConfig> {
        let backend: Backend = self.decoder.parse()?;
        let mut cfg = DecoderConfig::with_backend(backend);
        if let Some(v) = self.bp_iters {
            cfg.bp_iters = v;
        }
        if let Some(v) = self.bp_scale {
            cfg.bp_scale = v;
        }
        if let Some(v) = self.node_budget {
            cfg.node_budget = v;
        }
        if let Some(v) = self.lookup_limit {
            cfg.lookup_limit = v;
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug, Serialize)]
#[command(group(clap::ArgGroup::new("points").required(true).args(["weights", "rates"])))]
#[command(group(clap::ArgGroup::new("stop").required(true).args(["trials", "failures"])))]
pub struct SpectrumArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[command(flatten)]
    pub decoder: DecoderArgs,
    /// Weights as `lo:hi:step` (inclusive) or a comma list.
    #[arg(long)]
    pub weights: Option<String>,
    /// Global rates as a comma list; writes a rates CSV instead.
    #[arg(long)]
    pub rates: Option<String>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Sample each point until this many failures.
    #[arg(long)]
    pub failures: Option<u64>,
    #[arg(long, default_value_t = 1_000_000_000)]
    pub max_trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct FitArgs {
    #[arg(long)]
    pub spectrum: PathBuf,
    #[arg(long)]
    pub rates: Option<PathBuf>,
    /// System supplying N, K and b.
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long, default_value = "a3")]
    pub variant: String,
    /// Fixed parameters such as `w0=6`; repeatable or comma separated.
    #[arg(long)]
    pub fix: Vec<String>,
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Prediction grid `lo:hi:n`, log spaced over `[lo, hi)`.
    #[arg(long, default_value = "1e-5:0.5:300")]
    pub grid: String,
    /// Reference curve CSV with columns `p,P`.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Also fit a power law to the rates and emit its curve.
    #[arg(long)]
    pub compare_powerlaw: bool,
    /// Distance for the power-law exponent grid; defaults to `2 w0`.
    #[arg(long)]
    pub distance: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Predicted-curve CSV.
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Mode {
    Distance,
    Dbound,
    Enumerate,
    Search,
    Onset,
    OnsetSample,
}

#[derive(Args, Debug, Serialize)]
pub struct MinweightArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[command(flatten)]
    pub decoder: DecoderArgs,
    #[arg(long, value_enum)]
    pub mode: Mode,
    #[arg(long)]
    pub wmax: Option<usize>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 1000)]
    pub rounds: usize,
    #[arg(long)]
    pub target: Option<usize>,
    #[arg(long)]
    pub decimation: bool,
    #[arg(long)]
    pub perturb: bool,
    /// Comma list of columns excluded from search.
    #[arg(long)]
    pub restrict: Option<String>,
    /// Close found logicals under the toric translation group.
    #[arg(long)]
    pub symmetry: bool,
    /// Fresh samples for a coverage estimate after a search.
    #[arg(long)]
    pub coverage: Option<usize>,
    /// Logical-set file of weight D.
    #[arg(long)]
    pub logicals: Option<PathBuf>,
    /// Logical-set file of weight D + 1, for odd D.
    #[arg(long)]
    pub logicals_d1: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    /// Where enumerate and search write the weight-D set.
    #[arg(long)]
    pub logicals_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub job: PathBuf,
    #[arg(long = "L")]
    pub l: Option<usize>,
    #[arg(long = "M")]
    pub m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub budget_seconds: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct ReportArgs {
    /// JSON written by `fit`.
    #[arg(long)]
    pub fit: Option<PathBuf>,
    /// JSON written by `minweight --mode onset`.
    #[arg(long)]
    pub onset: Option<PathBuf>,
    /// Rates CSV written by `split`.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Rates CSV written by `spectrum --rates`.
    #[arg(long)]
    pub rates: Option<PathBuf>,
    #[arg(long, default_value = "1e-5:0.5:300")]
    pub grid: String,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Hex SHA-256 of the JSON form of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let json = serde_json::to_string(value)?;
    Ok(Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect())
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1).map(|a| a.to_string_lossy());
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().map(|v| PathBuf::from(v.as_ref()));
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

/// Appends config-file values for flags not given on the command line.
fn apply_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else { return Ok(args) };
    let root: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
    let cmd = Cli::command();
    let words: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let sub = words.iter().find(|w| cmd.find_subcommand(w.as_str()).is_some());
    let table = sub.and_then(|s| root.get(s.as_str())).unwrap_or(&root);
    let Some(obj) = table.as_object() else {
        return Err(Error::invalid("config file must hold a JSON object"));
    };
    let given: Vec<&str> =
        words.iter().filter_map(|w| w.strip_prefix("--")).map(|w| w.split('=').next().unwrap_or(w)).collect();
    let mut out = args;
    for (key, value) in obj {
        if value.is_object() {
            continue;
        }
        // Unknown keys become unknown flags and fail the parse.
        let name = key.replace('_', "-");
        if given.contains(&name.as_str()) {
            continue;
        }
        let flag = format!("--{name}");
        let items = match value {
            serde_json::Value::Array(a) => a.clone(),
            v => vec![v.clone()],
        };
        for item in items {
            match item {
                serde_json::Value::Bool(true) => out.push(flag.clone().into()),
                serde_json::Value::Bool(false) | serde_json::Value::Null => {}
                serde_json::Value::String(s) => {
                    out.push(flag.clone().into());
                    out.push(s.into());
                }
                other => {
                    out.push(flag.clone().into());
                    out.push(other.to_string().into());
                }
            }
        }
    }
    Ok(out)
}

fn parse(args: Vec<OsString>) -> std::result::Result<Cli, clap::Error> {
    let merged = apply_config(args).map_err(|e| Cli::command().error(clap::error::ErrorKind::InvalidValue, e))?;
    let matches = Cli::command().try_get_matches_from(merged)?;
    Cli::from_arg_matches(&matches)
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) => EXIT_USAGE,
        Error::BudgetExhausted(_) => EXIT_BUDGET,
        _ => EXIT_INFEASIBLE,
    }
}

fn configure_workers() -> Result<()> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| Error::invalid(format!("{WORKERS_ENV}={v:?} is not a count")))?;
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    configure_workers()?;
    match &cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Spectrum(a) => commands::spectrum(a),
        Command::Fit(a) => commands::fit(a),
        Command::Minweight(a) => commands::minweight(a),
        Command::Split(a) => commands::split(a),
        Command::Report(a) => commands::report(a),
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match parse(args.into_iter().map(Into::into).collect()) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
