use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use specdec_grid::cli::{run, Command, RunSpec};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    GenModels,
    Decode,
    Bench,
    Verify,
}

/// Speculative decoding on toy token grids.
#[derive(Debug, Parser)]
#[command(name = "specdec-grid", version)]
struct Args {
    #[arg(value_enum)]
    command: Cmd,

    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Override a config key, e.g. `--set decode.tau=0.001`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let spec = RunSpec {
        command: match args.command {
            Cmd::GenModels => Command::GenModels,
            Cmd::Decode => Command::Decode,
            Cmd::Bench => Command::Bench,
            Cmd::Verify => Command::Verify,
        },
        config: args.config,
        out: args.out,
        overrides: args.overrides,
    };
    match run(&spec) {
        Ok(outcome) => {
            println!("{}", outcome.message);
            for path in &outcome.written {
                println!("  {}", path.display());
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
