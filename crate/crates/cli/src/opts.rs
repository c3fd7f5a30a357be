//! Command-line surface and its resolution against a config file.
//!
//! The clap structs hold every value option as `Option` so that a
//! missing flag can fall back to the config file and then to the
//! built-in default; required options are enforced only after that
//! merge. Resolution turns them into plain structs the commands
//! consume, with all strings parsed and all defaults applied.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use svdmarg::CovMode;

use crate::config::{require, resolve, resolve_flag, Settings};
use crate::error::{CliError, Result};

/// Environment variable that caps the worker pool when `--threads` is
/// not given.
pub const THREADS_ENV: &str = "SVDMARG_THREADS";

/// Every config key any subcommand understands.
pub const ALL_KEYS: [&str; 16] = [
    "x", "y", "gamma", "nodes", "cov-mode", "out", "transpose", "sizes", "arm", "seed", "draws",
    "warmup", "n", "k", "out-dir", "threads",
];

/// Posterior moments for normal-normal regression, marginalized over the
/// coefficients and integrated over the two scales.
#[derive(Debug, Parser)]
#[command(name = "svdmarg", version, about, max_term_width = 100)]
pub struct Cli {
    /// Worker threads for factorization and quadrature; defaults to all
    /// cores. Also settable via SVDMARG_THREADS (flag wins over the
    /// environment, the environment over the config file).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// Config file with `key = value` lines supplying defaults for any
    /// long option of the subcommand being run.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit posterior moments by quadrature and write a JSON summary.
    Fit(FitArgs),
    /// Generate synthetic data, time fits across sizes, and tabulate.
    Bench(BenchArgs),
    /// Write a synthetic data set as X.csv, y.csv, beta_true.csv.
    Gen(GenArgs),
    /// Run the scale sampler and write the chain with coefficient draws.
    Sample(SampleArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Design matrix CSV, n rows by k numeric columns; a header row is
    /// detected automatically. Required.
    #[arg(long, value_name = "FILE")]
    pub x: Option<PathBuf>,

    /// Response CSV, one numeric column of length n. Required.
    #[arg(long, value_name = "FILE")]
    pub y: Option<PathBuf>,

    /// Coefficient of ln^2 sigma1 in the prior exponent [default: 8].
    #[arg(long)]
    pub gamma: Option<f64>,

    /// Quadrature nodes per axis [default: 200].
    #[arg(long)]
    pub nodes: Option<usize>,

    /// Covariance assembly: exact, paper, or diag [default: exact].
    #[arg(long = "cov-mode", value_name = "MODE", value_parser = ["exact", "paper", "diag"])]
    pub cov_mode: Option<String>,

    /// Output path for the JSON summary; `-` writes to stdout
    /// [default: summary.json].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    /// Read X as stored transposed (k rows of n values).
    #[arg(long)]
    pub transpose: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated problem sizes, each NxK (e.g. 50x5,100x10).
    /// Required.
    #[arg(long, value_name = "LIST")]
    pub sizes: Option<String>,

    /// Which arms to run: trap, svd-mcmc, or both [default: trap].
    #[arg(long, value_name = "ARM", value_parser = ["trap", "svd-mcmc", "both"])]
    pub arm: Option<String>,

    /// Seed for the synthetic data of every size [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,

    /// Nodes per axis of the timed quadrature fit; the error column
    /// compares against a 500-node reference [default: 200].
    #[arg(long)]
    pub nodes: Option<usize>,

    /// Post-warmup draws of the sampler arm [default: 10000].
    #[arg(long)]
    pub draws: Option<usize>,

    /// Warmup steps of the sampler arm [default: 1000].
    #[arg(long)]
    pub warmup: Option<usize>,

    /// Output path for the CSV table [default: bench.csv].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Number of observations. Required.
    #[arg(long)]
    pub n: Option<usize>,

    /// Number of coefficients. Required.
    #[arg(long)]
    pub k: Option<usize>,

    /// Generator seed; the same seed reproduces the files byte for
    /// byte. Required.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Directory the three CSV files are written into; created if
    /// missing. Required.
    #[arg(long = "out-dir", value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Design matrix CSV, as for fit. Required.
    #[arg(long, value_name = "FILE")]
    pub x: Option<PathBuf>,

    /// Response CSV, as for fit. Required.
    #[arg(long, value_name = "FILE")]
    pub y: Option<PathBuf>,

    /// Coefficient of ln^2 sigma1 in the prior exponent [default: 8].
    #[arg(long)]
    pub gamma: Option<f64>,

    /// Post-warmup draws to record. Required.
    #[arg(long)]
    pub draws: Option<usize>,

    /// Warmup steps before recording [default: 1000].
    #[arg(long)]
    pub warmup: Option<usize>,

    /// Chain seed; coefficient draws use an offset stream so the two
    /// sequences differ [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,

    /// Output path for the chain CSV [default: chain.csv].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    /// Read X as stored transposed (k rows of n values).
    #[arg(long)]
    pub transpose: bool,
}

/// Bench arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Trap,
    SvdMcmc,
    Both,
}

impl Arm {
    pub fn runs_trap(self) -> bool {
        matches!(self, Arm::Trap | Arm::Both)
    }

    pub fn runs_mcmc(self) -> bool {
        matches!(self, Arm::SvdMcmc | Arm::Both)
    }
}

impl FromStr for Arm {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trap" => Ok(Arm::Trap),
            "svd-mcmc" => Ok(Arm::SvdMcmc),
            "both" => Ok(Arm::Both),
            other => Err(CliError::Invalid(format!(
                "unknown arm {other:?}; expected trap, svd-mcmc, or both"
            ))),
        }
    }
}

/// Resolved options of `fit`.
#[derive(Debug)]
pub struct FitOpts {
    pub x: PathBuf,
    pub y: PathBuf,
    pub gamma: f64,
    pub nodes: usize,
    pub cov_mode: CovMode,
    pub out: PathBuf,
    pub transpose: bool,
}

/// Resolved options of `bench`.
#[derive(Debug)]
pub struct BenchOpts {
    pub sizes: Vec<(usize, usize)>,
    pub arm: Arm,
    pub seed: u64,
    pub nodes: usize,
    pub draws: usize,
    pub warmup: usize,
    pub out: PathBuf,
}

/// Resolved options of `gen`.
#[derive(Debug)]
pub struct GenOpts {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

/// Resolved options of `sample`.
#[derive(Debug)]
pub struct SampleOpts {
    pub x: PathBuf,
    pub y: PathBuf,
    pub gamma: f64,
    pub draws: usize,
    pub warmup: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub transpose: bool,
}

pub fn resolve_fit(args: FitArgs, cfg: &Settings) -> Result<FitOpts> {
    Ok(FitOpts {
        x: require(args.x, cfg, "x")?,
        y: require(args.y, cfg, "y")?,
        gamma: resolve(args.gamma, cfg, "gamma", 8.0)?,
        nodes: resolve(args.nodes, cfg, "nodes", 200)?,
        cov_mode: parse_mode(resolve(args.cov_mode, cfg, "cov-mode", "exact".into())?)?,
        out: resolve(args.out, cfg, "out", PathBuf::from("summary.json"))?,
        transpose: resolve_flag(args.transpose, cfg, "transpose")?,
    })
}

pub fn resolve_bench(args: BenchArgs, cfg: &Settings) -> Result<BenchOpts> {
    Ok(BenchOpts {
        sizes: parse_sizes(&require::<String>(args.sizes, cfg, "sizes")?)?,
        arm: resolve::<String>(args.arm, cfg, "arm", "trap".into())?.parse()?,
        seed: resolve(args.seed, cfg, "seed", 0)?,
        nodes: resolve(args.nodes, cfg, "nodes", 200)?,
        draws: resolve(args.draws, cfg, "draws", 10_000)?,
        warmup: resolve(args.warmup, cfg, "warmup", 1_000)?,
        out: resolve(args.out, cfg, "out", PathBuf::from("bench.csv"))?,
    })
}

pub fn resolve_gen(args: GenArgs, cfg: &Settings) -> Result<GenOpts> {
    Ok(GenOpts {
        n: require(args.n, cfg, "n")?,
        k: require(args.k, cfg, "k")?,
        seed: require(args.seed, cfg, "seed")?,
        out_dir: require(args.out_dir, cfg, "out-dir")?,
    })
}

pub fn resolve_sample(args: SampleArgs, cfg: &Settings) -> Result<SampleOpts> {
    Ok(SampleOpts {
        x: require(args.x, cfg, "x")?,
        y: require(args.y, cfg, "y")?,
        gamma: resolve(args.gamma, cfg, "gamma", 8.0)?,
        draws: require(args.draws, cfg, "draws")?,
        warmup: resolve(args.warmup, cfg, "warmup", 1_000)?,
        seed: resolve(args.seed, cfg, "seed", 0)?,
        out: resolve(args.out, cfg, "out", PathBuf::from("chain.csv"))?,
        transpose: resolve_flag(args.transpose, cfg, "transpose")?,
    })
}

/// Thread cap: flag, else environment, else config, else none (rayon
/// uses all cores).
pub fn resolve_threads(flag: Option<usize>, cfg: &Settings) -> Result<Option<usize>> {
    let value = match flag {
        Some(t) => Some(t),
        None => match std::env::var(THREADS_ENV) {
            Ok(raw) => Some(raw.parse().map_err(|_| {
                CliError::Invalid(format!("{THREADS_ENV}={raw:?} is not a thread count"))
            })?),
            Err(_) => cfg.get("threads")?,
        },
    };
    if value == Some(0) {
        return Err(CliError::Invalid("thread count must be at least 1".into()));
    }
    Ok(value)
}

fn parse_mode(raw: String) -> Result<CovMode> {
    raw.parse().map_err(CliError::Core)
}

/// Parses `50x5,100x10` into `[(50, 5), (100, 10)]`.
fn parse_sizes(raw: &str) -> Result<Vec<(usize, usize)>> {
    let mut sizes = Vec::new();
    for token in raw.split(',') {
        let token = token.trim();
        let parsed = token
            .split_once(['x', 'X'])
            .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
        match parsed {
            Some((n, k)) if n >= 1 && k >= 1 => sizes.push((n, k)),
            _ => {
                return Err(CliError::Invalid(format!(
                    "size {token:?} is not of the form NxK with N, K >= 1"
                )))
            }
        }
    }
    if sizes.is_empty() {
        return Err(CliError::Invalid("size list is empty".into()));
    }
    Ok(sizes)
}
