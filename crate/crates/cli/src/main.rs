mod commands;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use iface_core::Error;

#[derive(Debug, Parser)]
#[command(
    name = "iface",
    version,
    about = "Minimal situation-aware sensor interfaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Instance file (JSON), `chain`, or `grid118:cfg1` .. `grid118:cfg4`.
    #[arg(long, global = true, default_value = "chain")]
    pub instance: String,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Size of the worker pool; defaults to the number of cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Maximum number of cached Γ values.
    #[arg(long, global = true)]
    pub cache_cap: Option<usize>,
    /// Which machines keep their input in configuration 4, counted from one.
    #[arg(long, global = true, value_enum, default_value_t = Parity::Odd)]
    pub parity: Parity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Parity {
    Odd,
    Even,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Level {
    High,
    Mid,
    None,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Γ(S) and Γ(S ∪ S_task) for a list of sensor ids.
    Gamma {
        /// Comma-separated sensor ids; empty means the empty set.
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        ids: String,
    },
    /// S_reduced and the reduced awareness family.
    Enumerate {
        #[arg(long)]
        aggressive_prune: bool,
        /// Materialise up to this many members of the full family.
        #[arg(long)]
        expand_limit: Option<usize>,
    },
    /// Minimum aware interface for a trust level.
    Solve {
        /// Defaults to the value stored in the instance file.
        #[arg(long)]
        k_trust: Option<usize>,
        /// Complete one minimum awareness set instead of all of them.
        #[arg(long)]
        alt_heuristic: bool,
        #[arg(long)]
        aggressive_prune: bool,
    },
    /// The 118-bus experiment matrix.
    Grid {
        /// Run one configuration (1-4); all four otherwise.
        #[arg(long)]
        config: Option<u8>,
        /// Run one trust level; all three otherwise.
        #[arg(long, value_enum)]
        level: Option<Level>,
        /// Explicit trust level; overrides `--level`.
        #[arg(long)]
        k_trust: Option<usize>,
        /// Also run the configuration-4 cells that enumerate 2^22 subsets.
        #[arg(long)]
        include_long: bool,
        #[arg(long)]
        alt_heuristic: bool,
        #[arg(long)]
        aggressive_prune: bool,
    },
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Input(_) | Error::Domain(_) | Error::Infeasible { .. } => EXIT_USAGE,
        Error::Numerical(_) => EXIT_NUMERICAL,
        Error::Dimension(_)
        | Error::InvalidInstance(_)
        | Error::Parse { .. }
        | Error::Case(_)
        | Error::Io(_)
        | Error::Json(_) => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    if let Some(n) = cli.common.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("the global pool is configured once");
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
