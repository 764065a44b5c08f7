mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use report::Format;

#[derive(Parser, Debug)]
#[command(name = "soergel", version, about = "Kazhdan-Lusztig data, Soergel bimodule decompositions and Lefschetz checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Args, Debug, Clone)]
pub struct Opts {
    /// Preset: A<n>, B<n>, H3, H4, I2:<m>.
    #[arg(long = "type", global = true, value_name = "NAME")]
    pub kind: Option<String>,
    /// Coxeter matrix file (JSON, or whitespace-separated rows with 0 for ∞).
    #[arg(long, global = true, value_name = "FILE")]
    pub matrix: Option<PathBuf>,
    #[arg(long, global = true, value_name = "WORD")]
    pub x: Option<String>,
    #[arg(long, global = true, value_name = "WORD")]
    pub y: Option<String>,
    #[arg(long, global = true, value_name = "WORD")]
    pub z: Option<String>,
    /// Scan every element (or pair, or triple).
    #[arg(long, global = true)]
    pub exhaustive: bool,
    /// Length bound for element enumeration.
    #[arg(long, global = true, value_name = "N")]
    pub max_length: Option<usize>,
    /// Lefschetz scalars, comma separated (`1,1`, `3/2`).
    #[arg(long, global = true, value_name = "LIST")]
    pub a: Option<String>,
    #[arg(long, global = true, value_enum, default_value = "text")]
    pub format: Format,
    /// KL table cache file; read when present.
    #[arg(long, global = true, value_name = "FILE")]
    pub cache: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Stop an exhaustive scan at the first failure.
    #[arg(long, global = true)]
    pub fail_fast: bool,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// KL polynomials h_{y,x} for all y ≤ x.
    Kl,
    /// Structure constants μ_{x,y}^z of C_x C_y.
    Mu,
    /// Quantum-number decomposition of μ_{x,y}^z (one triple or --exhaustive).
    Unimodal,
    /// Left, right and two-sided cells.
    Cells,
    /// The a-function.
    Afn,
    /// γ_{x,y}^z (top coefficients of μ).
    Gamma,
    /// J-ring checks: a-function, associativity, cyclicity, units.
    Jcheck,
    /// Decompose B_x B_y (or the Bott-Samelson word --x with --bs).
    Decompose {
        /// Treat --x as a Bott-Samelson word, one factor per letter.
        #[arg(long)]
        bs: bool,
    },
    /// Relative hard Lefschetz for B_x B_y.
    Rhl,
    /// Relative Hodge-Riemann for B_x B_y.
    Rhr,
    /// Hodge-Riemann for a product of several elements (--x "12,21,1").
    RhrMulti,
    /// Splitting matrix of B_x B_s by straightening; with --y also the form formula.
    Splitcheck,
    /// Signatures of block Lefschetz Gram matrices for random symmetric R.
    Blocksig {
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Save, load or inspect a KL table cache.
    Cache {
        #[arg(value_parser = ["save", "load", "inspect"])]
        action: String,
    },
}

/// Errors by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad input (exit 2).
    Parse(String),
    /// A size cap was exceeded (exit 3).
    Cap(String),
    /// Anything else that stopped the run (exit 1).
    Other(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.opts.workers {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match commands::run(&cli.command, &cli.opts) {
        Ok(rep) => {
            print!("{}", rep.emit(cli.opts.format));
            if rep.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(f) => {
            let (code, msg) = match f {
                Failure::Parse(m) => (2, m),
                Failure::Cap(m) => (3, m),
                Failure::Other(m) => (1, m),
            };
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
