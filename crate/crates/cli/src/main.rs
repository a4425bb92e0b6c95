//! `phicgc`: batch harness around the core solver.
//!
//! Subcommands:
//!   run    — execute one JSON experiment config: 1-grid baseline plus the
//!            configured multilevel run; writes a CSV and a Markdown table.
//!   verify — invariant suite (fast or full), one status line per check.
//!   table  — merge experiment CSVs into a single table (markdown or csv).
//!
//! Exit codes: 0 success; 1 failed verification; 2 invalid config/input;
//! 3 solver failure. `PHICGC_THREADS` caps internal data parallelism.

mod config;
mod report;
mod verify;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "phicgc", version, about = "Krylov phi-function solver with coarse-grid correction: experiment harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config (JSON) and write report.csv / report.md
    Run {
        /// Path to the experiment config JSON
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the invariant verification suite
    Verify {
        /// fast: seconds-scale release gate; full: adds the bound and slope checks
        #[arg(long, value_enum, default_value_t = Suite::Fast)]
        suite: Suite,
        /// Run only the named check (see the suite output for names)
        #[arg(long)]
        check: Option<String>,
    },
    /// Merge experiment CSVs and print them as one table
    Table {
        /// CSV files produced by `phicgc run`
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        /// Output format
        #[arg(long, value_enum, default_value_t = Format::Md)]
        format: Format,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Fast,
    Full,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Md,
    Csv,
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Command::Run { config } => report::cmd_run(&config),
        Command::Verify { suite, check } => verify::cmd_verify(suite, check.as_deref()),
        Command::Table { inputs, format } => report::cmd_table(&inputs, format),
    };
    std::process::exit(code);
}
