use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jacobi_decay::cli::{exit_code, load_config, run, EXIT_OK};

#[derive(Parser)]
#[command(name = "jacobi-decay", version, about = "Resolvent decay and barrier numerics for Jacobi matrices")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV, manifest and optional gnuplot script.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Parse and check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = match args.command {
        Command::Validate { config } => match load_config(&config) {
            Ok(c) => {
                println!("ok: {}", c.experiment.name());
                EXIT_OK
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        },
        Command::Run { config, out_dir } => match load_config(&config).and_then(|c| run(&c, &out_dir)) {
            Ok(outcome) => {
                for f in &outcome.files {
                    println!("{}", f.display());
                }
                if !outcome.verified {
                    eprintln!("verification failed");
                }
                outcome.exit_code()
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        },
    };
    ExitCode::from(code as u8)
}
