//! `kmimo` — experiment runner for randomized-Kaczmarz MIMO detection and
//! precoding. Experiment subcommands consume a TOML config and emit a
//! long-format CSV (plus a JSON metadata record); `detect` and `precode`
//! run one solve on matrices read from plain-text files.
//!
//! Exit codes: 0 success, 1 config/parse errors, 2 numerical failure.

mod config;
mod experiments;
mod matio;
mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use kmimo_core::channel::{RngStream, StreamLabel};
use kmimo_core::kaczmarz::{dl_precode, ul_detect};
use kmimo_core::numerics::{norm, sub_vec};
use num_complex::Complex64;
use serde::Serialize;

use config::{ExperimentConfig, ExperimentKind, OutputFormat};
use output::{Accounting, Metadata};

#[derive(Debug)]
pub enum CliError {
    /// Configuration, parsing, or I/O problems (exit code 1).
    Config(String),
    /// Numerical failures inside an experiment (exit code 2).
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "{m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "kmimo", version, about = "Randomized-Kaczmarz MIMO experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment configuration (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Master seed override
    #[arg(long)]
    seed: Option<u64>,
    /// Monte-Carlo worker threads (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
    /// Output path override
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format override: csv or json
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct SolveArgs {
    /// Channel estimate matrix file (M x K)
    #[arg(long)]
    channel: PathBuf,
    /// Regularization parameter xi (>= 0)
    #[arg(long, default_value_t = 0.0)]
    xi: f64,
    /// Iteration count
    #[arg(long, default_value_t = 10_000)]
    iters: u64,
    /// Row-sampling seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence-gain comparison over a grid of user counts
    Gains(ExperimentArgs),
    /// Detection-error traces versus the complexity budget
    Convergence(ExperimentArgs),
    /// Uplink ergodic-rate bounds
    RatesUl(ExperimentArgs),
    /// Downlink ergodic-rate bounds
    RatesDl(ExperimentArgs),
    /// Normalized gap to the exact transceiver versus budget
    Gap(ExperimentArgs),
    /// One uplink detection solve; JSON result on stdout
    Detect {
        #[command(flatten)]
        solve: SolveArgs,
        /// Received observation vector file (M x 1)
        #[arg(long)]
        observation: PathBuf,
    },
    /// One downlink precoding solve; JSON result on stdout
    Precode {
        #[command(flatten)]
        solve: SolveArgs,
        /// User symbol vector file (K x 1)
        #[arg(long)]
        symbols: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gains(a) => run_experiment(ExperimentKind::Gains, a),
        Command::Convergence(a) => run_experiment(ExperimentKind::Convergence, a),
        Command::RatesUl(a) => run_experiment(ExperimentKind::RatesUl, a),
        Command::RatesDl(a) => run_experiment(ExperimentKind::RatesDl, a),
        Command::Gap(a) => run_experiment(ExperimentKind::Gap, a),
        Command::Detect { solve, observation } => run_detect(solve, observation),
        Command::Precode { solve, symbols } => run_precode(solve, symbols),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Config(_) => ExitCode::from(1),
                CliError::Numerical(_) => ExitCode::from(2),
            }
        }
    }
}

fn run_experiment(kind: ExperimentKind, args: ExperimentArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("read {}: {e}", args.config.display())))?;
    let mut config = ExperimentConfig::from_toml(&text)?;
    if config.kind != kind {
        return Err(CliError::Config(format!(
            "config kind does not match the '{}' subcommand",
            kind_name(kind)
        )));
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let format = match args.format.as_deref() {
        None => config.format.unwrap_or(OutputFormat::Csv),
        Some(f) => OutputFormat::parse(f)
            .ok_or_else(|| CliError::Config(format!("unknown format '{f}'")))?,
    };
    let out_path: PathBuf = match (&args.out, &config.out) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => PathBuf::from(format!(
            "{}.{}",
            kind_name(kind),
            if format == OutputFormat::Csv { "csv" } else { "json" }
        )),
    };

    let started = Instant::now();
    let result = match args.workers {
        None => experiments::run(&config),
        Some(workers) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            pool.install(|| experiments::run(&config))
        }
    }?;

    let meta = Metadata {
        tool: "kmimo",
        version: env!("CARGO_PKG_VERSION"),
        config_echo: &text,
        master_seed: config.seed,
        trials: config.trials,
        accounting: Accounting::default(),
        wall_time_s: started.elapsed().as_secs_f64(),
        gain_reports: result.gain_reports,
    };
    match format {
        OutputFormat::Csv => {
            output::write_csv(&out_path, &result.rows)?;
            let meta_path = out_path.with_extension("meta.json");
            output::write_metadata(&meta_path, &meta)?;
            eprintln!("wrote {} and {}", out_path.display(), meta_path.display());
        }
        OutputFormat::Json => {
            output::write_json(&out_path, &result.rows, &meta)?;
            eprintln!("wrote {}", out_path.display());
        }
    }
    Ok(())
}

fn kind_name(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Gains => "gains",
        ExperimentKind::Convergence => "convergence",
        ExperimentKind::RatesUl => "rates-ul",
        ExperimentKind::RatesDl => "rates-dl",
        ExperimentKind::Gap => "gap",
    }
}

#[derive(Serialize)]
struct SolveReport {
    estimate: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    signal: Option<Vec<[f64; 2]>>,
    iterations: u64,
    ops: u64,
    /// Relative consistency residual of the driven system at the iterate.
    residual: f64,
}

fn load_matrix(path: &PathBuf) -> Result<kmimo_core::Mat, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("read {}: {e}", path.display())))?;
    matio::parse_matrix(&text)
}

fn load_vector(path: &PathBuf) -> Result<Vec<Complex64>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("read {}: {e}", path.display())))?;
    matio::parse_vector(&text)
}

fn pairs(v: &[Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

/// Residual of the adjoint system `Qᴴu + xi v = rhs`, relative to `rhs`.
fn consistency_residual(
    q: &kmimo_core::Mat,
    state: &kmimo_core::kaczmarz::KaState<f64>,
    xi: f64,
    rhs: &[Complex64],
) -> f64 {
    let mut lhs = q.adjoint_mul_vec(&state.u);
    for (l, v) in lhs.iter_mut().zip(&state.v) {
        *l += v * Complex64::new(xi, 0.0);
    }
    norm(&sub_vec(&lhs, rhs)) / norm(rhs).max(f64::MIN_POSITIVE)
}

fn run_detect(solve: SolveArgs, observation: PathBuf) -> Result<(), CliError> {
    if solve.xi < 0.0 {
        return Err(CliError::Config("xi must be nonnegative".into()));
    }
    let q = load_matrix(&solve.channel)?;
    let y = load_vector(&observation)?;
    if y.len() != q.rows() {
        return Err(CliError::Config(format!(
            "observation length {} does not match the {} channel rows",
            y.len(),
            q.rows()
        )));
    }
    let stream = RngStream::new(solve.seed, StreamLabel::KaRows, 0);
    let run = ul_detect(&q, &y, solve.xi, solve.iters, stream)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let b = q.adjoint_mul_vec(&y);
    let report = SolveReport {
        estimate: pairs(&run.s_hat),
        signal: None,
        iterations: run.state.iterations,
        ops: run.state.ops,
        residual: consistency_residual(&q, &run.state, solve.xi, &b),
    };
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable report"));
    Ok(())
}

fn run_precode(solve: SolveArgs, symbols: PathBuf) -> Result<(), CliError> {
    if solve.xi < 0.0 {
        return Err(CliError::Config("xi must be nonnegative".into()));
    }
    let q = load_matrix(&solve.channel)?;
    let s = load_vector(&symbols)?;
    if s.len() != q.cols() {
        return Err(CliError::Config(format!(
            "symbol count {} does not match the {} channel columns",
            s.len(),
            q.cols()
        )));
    }
    let stream = RngStream::new(solve.seed, StreamLabel::KaRows, 0);
    let run = dl_precode(&q, &s, solve.xi, solve.iters, stream)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let report = SolveReport {
        estimate: pairs(&run.w),
        signal: Some(pairs(&run.x)),
        iterations: run.state.iterations,
        ops: run.state.ops,
        residual: consistency_residual(&q, &run.state, solve.xi, &s),
    };
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable report"));
    Ok(())
}
