use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use convex_ldp_cli::run::{execute, Command, Options};

#[derive(Parser)]
#[command(name = "convex-ldp", version, about = "Dominating points and rare-event rates for Gaussian block maxima")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Solve for the dominating point and report the rate
    Dominate(Common),
    /// Report the rate functions along the ladder
    Rate(Common),
    /// Crude, importance-sampled and exact estimates at the largest n
    Estimate(Common),
    /// Per-rung estimates as CSV plus slope fits against the rate
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it
    #[arg(long)]
    threads: Option<usize>,
    /// Disable the importance-sampling mean shift
    #[arg(long)]
    zero_shift: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, c) = match cli.command {
        Sub::Dominate(c) => (Command::Dominate, c),
        Sub::Rate(c) => (Command::Rate, c),
        Sub::Estimate(c) => (Command::Estimate, c),
        Sub::Verify(c) => (Command::Verify, c),
    };
    let options = Options { config: c.config, seed: c.seed, out: c.out, threads: c.threads, zero_shift: c.zero_shift };
    match execute(command, &options) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("convex-ldp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
