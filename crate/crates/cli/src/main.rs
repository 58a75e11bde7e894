//! `boolgrow`: classify connectives, predict and iterate growth processes, dump spectra and run
//! the numerical checks.
//!
//! Exit codes: 0 success, 1 malformed input, 2 size cap or work budget exceeded, 3 a check failed
//! under `verify --ci`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Debug, Parser)]
#[command(name = "boolgrow", version, about = "Growth processes on random Boolean formulas")]
struct Cli {
    /// Worker threads; output bytes do not depend on it.
    #[arg(long, global = true, env = "BOOLGROW_THREADS")]
    threads: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Write to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Structural properties, polynomial, fixed point and convergence class of a connective.
    Classify(ConnectiveArg),
    /// Predicted limiting distribution.
    Predict(ProcessArgs),
    /// Exact iteration with periodic snapshots.
    Iterate {
        #[command(flatten)]
        process: ProcessArgs,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        /// Snapshot interval; the final step is always included.
        #[arg(long, default_value_t = 1)]
        every: usize,
    },
    /// Monte Carlo estimate from random formulas of a fixed depth.
    Sample {
        #[command(flatten)]
        process: ProcessArgs,
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long)]
        seed: u64,
        /// Also print the first few sampled formulas.
        #[arg(long)]
        emit_formula: bool,
    },
    /// Walsh-Hadamard spectra of a saved distribution or of an exact run.
    Spectrum {
        /// JSON written by `iterate` or `sample`, or a bare snapshot.
        #[arg(long = "in", conflicts_with_all = ["n", "support", "steps"])]
        input: Option<PathBuf>,
        /// Connective for the bound column when reading `--in`.
        #[arg(long)]
        connective: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        support: Option<String>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = 1)]
        every: usize,
    },
    /// Theoretical iteration count and explicit bound constants.
    Bounds {
        #[command(flatten)]
        process: ProcessArgs,
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
    },
    /// Run the lemma and prediction checks.
    Verify {
        #[arg(long, default_value_t = 4)]
        kmax: usize,
        #[arg(long, default_value_t = 2)]
        nmax: usize,
        /// Exit with status 3 if any check fails.
        #[arg(long)]
        ci: bool,
    },
    /// Distance of exact iterates from the predicted limit.
    Converge {
        #[command(flatten)]
        process: ProcessArgs,
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
        #[arg(long, default_value_t = 40)]
        steps: usize,
    },
}

#[derive(Debug, Args)]
pub struct ConnectiveArg {
    /// Preset name, inline JSON `{"arity":3,"truth_table":"8e"}`, or a path to such a file.
    #[arg(long)]
    connective: String,
}

#[derive(Debug, Args)]
pub struct ProcessArgs {
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    connective: ConnectiveArg,
    /// Comma list from proj, neg, const0, const1; proj is always included.
    #[arg(long, default_value = "proj")]
    support: String,
}

pub enum Failure {
    Malformed(String),
    Cap(String),
    Verify(String),
}

impl From<boolgrow::Error> for Failure {
    fn from(e: boolgrow::Error) -> Self {
        if e.is_cap() {
            Failure::Cap(e.to_string())
        } else {
            Failure::Malformed(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Malformed(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Malformed(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(cli.command, cli.format).and_then(|text| write_output(cli.out.as_deref(), &text)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Malformed(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Cap(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Verify(report)) => {
            let _ = write_output(cli.out.as_deref(), &report);
            eprintln!("error: verification failed");
            ExitCode::from(3)
        }
    }
}

fn write_output(path: Option<&std::path::Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}
