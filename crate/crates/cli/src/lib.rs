//! Command-line harness over `rvq-core`.
//!
//! Every subcommand is a thin layer over the library; the experiment drivers
//! (`eval`, `oracle-check`, `bench`) are also exposed as functions so tests can
//! call them in-process.

pub mod cmd;
pub mod data;
pub mod report;

use std::ffi::OsString;
use std::fmt;

use clap::{Args, Parser, Subcommand};

pub use cmd::bench::{run_bench, BenchConfig};
pub use cmd::eval::{run_eval, EvalConfig};
pub use cmd::oracle::{run_oracle_check, OracleConfig, OracleSummary};

/// Exit status for usage errors (bad flags, oversized oracle requests).
pub const EXIT_USAGE: i32 = 2;
/// Exit status for runtime and data errors.
pub const EXIT_RUNTIME: i32 = 1;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(e) => write!(f, "error: {e:#}"),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "rvq",
    version,
    about = "Residual vector quantization with beam-search encoding"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for parallel work (default: all cores).
    #[arg(long, global = true, env = "RVQ_THREADS")]
    pub threads: Option<usize>,
    /// Omit timing and other run-dependent fields from reports.
    #[arg(long, global = true)]
    pub stable: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write seeded random codebooks.
    GenCodebooks(cmd::codebooks::GenArgs),
    /// Fit codebooks with residual k-means.
    Train(cmd::codebooks::TrainArgs),
    /// Encode audio or vectors into code sequences.
    Encode(cmd::codec::EncodeArgs),
    /// Decode code sequences back into audio or vectors.
    Decode(cmd::codec::DecodeArgs),
    /// Sweep beam sizes and level counts and report error statistics.
    Eval(cmd::eval::EvalArgs),
    /// Check beam search against exhaustive search on small random instances.
    OracleCheck(cmd::oracle::OracleArgs),
    /// Time sequential and parallel batch encoding.
    Bench(cmd::bench::BenchArgs),
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let g = &cli.global;
    match cli.command {
        Command::GenCodebooks(a) => cmd::codebooks::gen(g, a),
        Command::Train(a) => cmd::codebooks::train(g, a),
        Command::Encode(a) => cmd::codec::encode(g, a),
        Command::Decode(a) => cmd::codec::decode(g, a),
        Command::Eval(a) => cmd::eval::cmd(g, a),
        Command::OracleCheck(a) => cmd::oracle::cmd(g, a),
        Command::Bench(a) => cmd::bench::cmd(g, a),
    }
}
