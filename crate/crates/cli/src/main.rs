//! Command-line front end for the modal decomposition library: solve
//! systems from JSON descriptions, verify decompositions against the
//! time-domain recursion, run the statistical analyses, benchmark the
//! solver and calibrate the deflation gate.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 unusable input
//! (flags, files, configuration), 3 the solver left unconverged poles,
//! 4 a verification threshold was missed.

mod analyze;
mod bench;
mod calibrate;
mod decompose;
mod manifest;
mod system_file;
mod tables;
mod verify;
mod wav;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fdn_modal_core::solver::{DeflationStrategy, EaiConfig, Scheme};

#[derive(Parser)]
#[command(name = "fdn-modal", version, about = "Modal decomposition of feedback delay networks")]
struct Cli {
    /// Worker threads for pole sweeps and ensembles (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a system for all poles and residues; write a modes CSV.
    Decompose(decompose::DecomposeArgs),
    /// Check a modes CSV against the system's time-domain recursion.
    Verify(verify::VerifyArgs),
    /// Statistical analyses over systems or ensembles.
    #[command(subcommand)]
    Analyze(analyze::AnalyzeCmd),
    /// Time the solver methods over a sweep of system orders.
    Bench(bench::BenchArgs),
    /// Re-estimate the deflation error bound from random systems.
    Calibrate(calibrate::CalibrateArgs),
}

/// Why a command gave up, mapped onto the exit-code contract.
pub enum Failure {
    /// Unreadable or invalid input: file, schema, configuration.
    Parse(String),
    /// The solver finished with unconverged poles.
    NonConvergence(String),
    /// A verification threshold was missed.
    Verification(String),
    /// Output could not be written or an internal step failed.
    Io(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Io(_) => 1,
            Failure::Parse(_) => 2,
            Failure::NonConvergence(_) => 3,
            Failure::Verification(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Parse(m)
            | Failure::NonConvergence(m)
            | Failure::Verification(m)
            | Failure::Io(m) => m,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SchemeArg {
    /// All poles step against the same snapshot; parallel.
    Jacobi,
    /// Steps see earlier updates within the sweep; sequential.
    GaussSeidel,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum DeflationArg {
    /// Full deflation sum per step; quadratic per sweep.
    Exact,
    /// Near neighbors exact, far field closed-form, gated fallback.
    Approx,
}

/// Solver overrides shared by every command that runs the iteration.
#[derive(Args)]
pub struct SolverFlags {
    /// Reciprocal-condition stop: treat the loop matrix as singular below this.
    #[arg(long)]
    pub tol_rcond: Option<f64>,
    /// Relative step-size stop.
    #[arg(long)]
    pub tol_step: Option<f64>,
    /// Step-error budget protected by the deflation gate.
    #[arg(long)]
    pub tol_ad: Option<f64>,
    /// Angular neighbors summed exactly (even; default order/100).
    #[arg(long)]
    pub near_count: Option<usize>,
    /// A-priori bound on the far-field estimate error, used by the gate.
    #[arg(long)]
    pub defl_err: Option<f64>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    #[arg(long, value_enum)]
    pub deflation: Option<DeflationArg>,
    /// Sweep budget before poles are reported unconverged.
    #[arg(long, default_value_t = 100)]
    pub max_iters: u32,
}

impl SolverFlags {
    /// Library defaults for `order`, with the flag overrides applied.
    pub fn resolve(&self, order: usize) -> Result<EaiConfig, Failure> {
        let mut config = EaiConfig::for_order(order);
        if let Some(v) = self.tol_rcond {
            config.tol_rcond = v;
        }
        if let Some(v) = self.tol_step {
            config.tol_step = v;
        }
        if let Some(v) = self.tol_ad {
            config.tol_ad = v;
        }
        if let Some(v) = self.near_count {
            config.near_count = v;
        }
        if let Some(v) = self.defl_err {
            config.deflation_err_bound = v;
        }
        if let Some(s) = self.scheme {
            config.scheme = match s {
                SchemeArg::Jacobi => Scheme::Jacobi,
                SchemeArg::GaussSeidel => Scheme::GaussSeidel,
            };
        }
        if let Some(d) = self.deflation {
            config.deflation = match d {
                DeflationArg::Exact => DeflationStrategy::Exact,
                DeflationArg::Approx => DeflationStrategy::Approximate,
            };
        }
        config.max_full_iterations = self.max_iters;
        config
            .validate(order)
            .map_err(|e| Failure::Parse(format!("solver configuration: {e}")))?;
        Ok(config)
    }

    /// The resolved configuration as manifest JSON.
    pub fn manifest_config(config: &EaiConfig) -> serde_json::Value {
        serde_json::json!({
            "tol_rcond": config.tol_rcond,
            "tol_step": config.tol_step,
            "tol_ad": config.tol_ad,
            "near_count": config.near_count,
            "defl_err": config.deflation_err_bound,
            "scheme": match config.scheme {
                Scheme::Jacobi => "jacobi",
                Scheme::GaussSeidel => "gauss-seidel",
            },
            "deflation": match config.deflation {
                DeflationStrategy::Exact => "exact",
                DeflationStrategy::Approximate => "approx",
            },
            "max_iters": config.max_full_iterations,
        })
    }
}

/// `<input stem>.<tag>.csv` in the invocation directory.
pub fn default_out(input: &std::path::Path, tag: &str) -> PathBuf {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    PathBuf::from(format!("{stem}.{tag}.csv"))
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("fdn-modal: cannot configure {threads} worker threads: {e}");
            std::process::exit(1);
        }
    }
    let result = match cli.command {
        Command::Decompose(args) => decompose::run(args),
        Command::Verify(args) => verify::run(args),
        Command::Analyze(cmd) => analyze::run(cmd),
        Command::Bench(args) => bench::run(args),
        Command::Calibrate(args) => calibrate::run(args),
    };
    if let Err(failure) = result {
        eprintln!("fdn-modal: {}", failure.message());
        std::process::exit(failure.code());
    }
}
