//! `spectral3`: batch front end for the forward and inverse solvers.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "spectral3", version, about = "Forward and inverse spectral problems for third-order operators")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Eigenvalues and weights of a coefficient pair.
    Forward(ForwardArgs),
    /// Reconstruct coefficients from spectral data.
    Inverse(InverseArgs),
    /// Forward, truncate, inverse and compare, for several N.
    Roundtrip(RoundtripArgs),
    /// Perturb one datum along a ladder of sizes and measure the response.
    Stability(StabilityArgs),
    /// Check a reconstruction against its data.
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Clone)]
pub struct SolverArgs {
    /// Newton residual tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub newton_tol: f64,
    /// Relative tolerance for pairing coinciding eigenvalues.
    #[arg(long, default_value_t = 1e-8)]
    pub pair_tol: f64,
    /// Relative tolerance for declaring a Weyl solution evaluation on a pole.
    #[arg(long, default_value_t = 1e-10)]
    pub pole_tol: f64,
}

#[derive(Debug, Args)]
pub struct ForwardArgs {
    #[arg(long)]
    pub coeffs: PathBuf,
    #[arg(long, default_value_t = 12)]
    pub n_max: usize,
    /// Resample the coefficients onto this many subintervals.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    /// Truncation N of the main equation.
    #[arg(long, default_value_t = 12)]
    pub big_n: usize,
    #[arg(long, default_value_t = 512)]
    pub grid: usize,
    /// Amplitude of a zero-mean cos(2 pi x) term in the model tau1.
    #[arg(long, default_value_t = 0.0)]
    pub model_jitter: f64,
    /// Solve even when the data check fails.
    #[arg(long)]
    pub force: bool,
    /// Condition estimate above which a node counts as singular.
    #[arg(long, default_value_t = 1e14)]
    pub cond_limit: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct InverseArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub diag: Option<PathBuf>,
    /// Run a verification and store it in the diagnostics.
    #[arg(long, value_parser = ["spectral", "weyl"])]
    pub verify: Option<String>,
}

#[derive(Debug, Args)]
pub struct RoundtripArgs {
    #[arg(long)]
    pub coeffs: PathBuf,
    /// Comma-separated truncations.
    #[arg(long, value_delimiter = ',', default_value = "8,12,16")]
    pub big_n: Vec<usize>,
    #[arg(long, default_value_t = 512)]
    pub grid: usize,
    #[arg(long, default_value_t = 0.0)]
    pub model_jitter: f64,
    #[arg(long, default_value_t = 1e14)]
    pub cond_limit: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Datum to move: beta:n,k or lambda:n,k.
    #[arg(long, default_value = "beta:1,1")]
    pub perturb: String,
    #[arg(long, value_delimiter = ',', default_value = "1e-2,5e-3,2.5e-3")]
    pub deltas: Vec<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub rec: PathBuf,
    #[arg(long, value_parser = ["spectral", "weyl"], default_value = "spectral")]
    pub mode: String,
    /// Truncation the reconstruction was built with (default: all data).
    #[arg(long)]
    pub big_n: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub model_jitter: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

fn main() -> ExitCode {
    let args = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Forward(a) => commands::forward(a),
        Command::Inverse(a) => commands::inverse(a),
        Command::Roundtrip(a) => commands::roundtrip(a),
        Command::Stability(a) => commands::stability(a),
        Command::Verify(a) => commands::verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
