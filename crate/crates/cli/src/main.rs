mod commands;
mod config;
mod tables;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Failure classes, each with its own exit code.
#[derive(Debug, PartialEq)]
pub enum CliError {
    /// Bad arguments, config or input files: exit 1.
    Usage(String),
    /// A run failed, diverged or did not recover the table: exit 2.
    Run(String),
    /// A verification check failed: exit 3.
    Verify(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Run(_) => 2,
            CliError::Verify(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Run(m) => write!(f, "run failed: {m}"),
            CliError::Verify(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl From<cayley_core::Error> for CliError {
    fn from(e: cayley_core::Error) -> Self {
        use cayley_core::Error as E;
        match e {
            E::Diverged { .. } | E::ProbeFailed { .. } | E::Io(_) => CliError::Run(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "cayley", version, about = "Cayley-table completion by flatness-regularized tensor factorization")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// key=value config file; command-line settings override it.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Number of seeds per grid cell (seeds 0..N).
    #[arg(long, global = true, value_name = "N")]
    pub seeds: Option<u64>,
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Worker threads for restarts and sweeps.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Any config key, e.g. --set lr=0.02. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

/// Table selection shared by the commands: `FAMILY [PARAMS]`, e.g.
/// `cyclic 6`, `cyclic 6,8,10`, `cyclic 3..16`, `product 2x3`,
/// `nonassoc 5` (seeded by --table-seed, else --seed), `file table.json`.
#[derive(Args, Debug, Clone, Default)]
pub struct TableArgs {
    pub family: Option<String>,
    pub params: Option<String>,
    #[arg(long, value_name = "N")]
    pub table_seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a table file and print its algebraic properties.
    Gen {
        #[command(flatten)]
        table: TableArgs,
        /// json or text.
        #[arg(long)]
        format: Option<String>,
    },
    /// Train on one table; exit 0 iff the decoded table is exact.
    Train {
        #[command(flatten)]
        table: TableArgs,
        /// Number of observed cells (default: all).
        #[arg(long)]
        m: Option<usize>,
        /// Observed fraction of cells, rounded up; alternative to --m.
        #[arg(long)]
        fraction: Option<f64>,
        /// Also write the trained factors as a hex-float checkpoint.
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
    /// Recovery-rate sweep over observation counts; resumable CSV.
    Sweep {
        #[command(flatten)]
        table: TableArgs,
        /// abs:M1,M2 | nlogn:C1,C2 | frac:F1,F2
        #[arg(long)]
        grid: Option<String>,
        /// Comma list of tensor and mc:ENCODING:R:WEIGHT_DECAY.
        #[arg(long)]
        methods: Option<String>,
        /// Stop each table at the first m reaching the recovery threshold.
        #[arg(long)]
        stop_at_threshold: bool,
    },
    /// Multi-restart flatness probe at full observation.
    Landscape {
        #[command(flatten)]
        table: TableArgs,
        /// Restarts per table.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Matrix-completion baseline runs; same CSV schema as sweep.
    Baseline {
        #[command(flatten)]
        table: TableArgs,
        /// Comma list of observed-cell counts.
        #[arg(long)]
        m: Option<String>,
        /// ordinal, onehot or both.
        #[arg(long)]
        encoding: Option<String>,
        /// Comma list of rank budgets.
        #[arg(long)]
        r: Option<String>,
        /// Comma list of weight decays.
        #[arg(long)]
        weight_decay: Option<String>,
    },
    /// Rank of table encodings, by SVD and exact integer elimination.
    Rank {
        #[command(flatten)]
        table: TableArgs,
        #[arg(long)]
        encoding: Option<String>,
    },
    /// Run the self-verification suite; exit 3 on any failed check.
    Verify,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
