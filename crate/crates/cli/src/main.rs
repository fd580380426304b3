use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wcchaos_cli::{effective_config, load_config, run, CliError, Command, Overrides};

/// Wilson–Cowan networks with electrical coupling and their mean-field limit.
#[derive(Parser)]
#[command(name = "wcchaos", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the mean/variance ODEs; writes meanfield.csv and summary.json.
    Meanfield(Common),
    /// Simulate the finite network; writes network.csv.
    Network(Common),
    /// ODE means plus sampled mean-field paths; writes figure1_means.csv and figure1_paths.csv.
    Figure1(Common),
    /// Coupled network/limit distance over an n ladder; writes convergence.csv and report.json.
    Converge(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run config (a previous meta.json also works).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn execute(command: Command, args: Common) -> Result<Vec<PathBuf>, CliError> {
    let config = load_config(&args.config)?;
    let config = effective_config(
        config,
        &Overrides {
            seed: args.seed,
            out: args.out,
        },
    )?;
    run(command, &config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Meanfield(a) => (Command::MeanField, a),
        Cmd::Network(a) => (Command::Network, a),
        Cmd::Figure1(a) => (Command::Figure1, a),
        Cmd::Converge(a) => (Command::Converge, a),
    };
    match execute(command, args) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
