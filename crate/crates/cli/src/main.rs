mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "spca", version, about = "Sparse PCA via variable projection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit sparse loadings to a data matrix.
    Solve(SolveArgs),
    /// Generate synthetic data.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Score recovered supports against planted ground truth.
    Score(ScoreArgs),
    /// Time the deterministic and randomized solvers on low-rank synthetics.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Reg {
    None,
    L0,
    L1,
    /// L0 plus ridge
    L0l2,
    /// L1 plus ridge (elastic net)
    L1l2,
    Group,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Bin,
}

#[derive(Args)]
pub struct SolveArgs {
    /// Data matrix, rows are observations (CSV or binary).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long)]
    pub rank: usize,
    #[arg(long, value_enum, default_value = "none")]
    pub reg: Reg,
    /// Sparsity weight; required for every penalty except `none`.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Ridge weight for `l0l2` and `l1l2`.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Group partition file for `--reg group`: one group of 1-based variable indices per line.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// Huber loss with an explicit sparse outlier matrix.
    #[arg(long)]
    pub robust: bool,
    /// Huber threshold; defaults to 1.345 * 1.4826 * MAD of the initial residual.
    #[arg(long)]
    pub huber_kappa: Option<f64>,
    /// Solve on a randomized sketch of the data.
    #[arg(long)]
    pub randomized: bool,
    #[arg(long, default_value_t = 10)]
    pub oversample: usize,
    #[arg(long, default_value_t = 2)]
    pub power_iters: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Use the data as given instead of subtracting column means.
    #[arg(long)]
    pub no_center: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Accelerated steps with restart on objective increase.
    #[arg(long)]
    pub fista: bool,
    /// Start from random loadings instead of the leading right singular vectors.
    #[arg(long)]
    pub random_init: bool,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Subcommand)]
enum GenCommand {
    /// Three oscillating Gaussian blobs switching on and off over a pixel grid.
    Multiscale(MultiscaleArgs),
    /// Add salt-and-pepper spikes to an existing matrix.
    Corrupt(CorruptArgs),
}

#[derive(Args)]
pub struct MultiscaleArgs {
    /// Grid as HEIGHTxWIDTH.
    #[arg(long, default_value = "40x40")]
    pub grid: String,
    #[arg(long, default_value_t = 300)]
    pub snapshots: usize,
    /// Seconds between snapshots.
    #[arg(long, default_value_t = 0.5)]
    pub dt: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Args)]
pub struct CorruptArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Fraction of entries to corrupt.
    #[arg(long, default_value_t = 0.05)]
    pub fraction: f64,
    /// Spike magnitude; defaults to 10 times the largest absolute entry.
    #[arg(long)]
    pub magnitude: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Subtract column means before corrupting.
    #[arg(long)]
    pub center: bool,
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Args)]
pub struct ScoreArgs {
    /// Ground truth written by `gen multiscale`.
    #[arg(long, requires = "loadings")]
    pub truth: Option<PathBuf>,
    #[arg(long, requires = "truth")]
    pub loadings: Option<PathBuf>,
    /// Loadings with magnitude above this count as support.
    #[arg(long, default_value_t = 1e-6)]
    pub threshold: f64,
    /// 0/1 mask written by `gen corrupt`.
    #[arg(long, requires = "outliers")]
    pub mask: Option<PathBuf>,
    #[arg(long, requires = "mask")]
    pub outliers: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub outlier_threshold: f64,
    /// Also write the report here.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct BenchArgs {
    /// Comma-separated shapes, each ROWSxCOLS.
    #[arg(long, default_value = "2000x1344")]
    pub shapes: String,
    #[arg(long, default_value_t = 10)]
    pub rank: usize,
    #[arg(long, default_value_t = 3)]
    pub repetitions: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Failure with the exit status it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or unreadable input: exit 2.
    Usage(String),
    /// The solver broke down: exit 3.
    Numerical(String),
}

impl From<spca::SpcaError> for Failure {
    fn from(e: spca::SpcaError) -> Self {
        use spca::SpcaError::*;
        match e {
            NonFinite { .. } | Convergence { .. } => Failure::Numerical(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

/// OpenBLAS picks its SkylakeX kernels on AVX-512 hosts, and those return
/// wrong GEMM results on some virtualized CPUs. The Haswell kernels are
/// correct wherever AVX2 exists, so re-launch with them pinned unless the
/// caller already chose a core type.
#[cfg(all(unix, target_arch = "x86_64"))]
fn pin_blas_kernels() {
    use std::os::unix::process::CommandExt;
    if std::env::var_os("OPENBLAS_CORETYPE").is_some() || !std::is_x86_feature_detected!("avx2") {
        return;
    }
    if let Ok(exe) = std::env::current_exe() {
        let err = std::process::Command::new(exe)
            .args(std::env::args_os().skip(1))
            .env("OPENBLAS_CORETYPE", "Haswell")
            .exec();
        log::warn!("could not re-launch with pinned BLAS kernels: {err}");
    }
}

#[cfg(not(all(unix, target_arch = "x86_64")))]
fn pin_blas_kernels() {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    pin_blas_kernels();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(args) => commands::solve(&args),
        Command::Gen(GenCommand::Multiscale(args)) => commands::gen_multiscale(&args),
        Command::Gen(GenCommand::Corrupt(args)) => commands::gen_corrupt(&args),
        Command::Score(args) => commands::score(&args),
        Command::Bench(args) => commands::bench(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use spca::SpcaError;

    #[test]
    fn solver_breakdowns_map_to_numerical_failures() {
        assert!(matches!(
            Failure::from(SpcaError::NonFinite { iteration: 4 }),
            Failure::Numerical(_)
        ));
        let conv = SpcaError::Convergence {
            routine: "svd",
            rows: 3,
            cols: 2,
        };
        assert!(matches!(Failure::from(conv), Failure::Numerical(_)));
        assert!(matches!(
            Failure::from(SpcaError::Config("x".into())),
            Failure::Usage(_)
        ));
        assert!(matches!(
            Failure::from(SpcaError::ZeroMatrix),
            Failure::Usage(_)
        ));
    }
}
