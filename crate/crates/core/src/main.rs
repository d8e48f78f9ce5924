use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ergodic_explore::config::parse_config;
use ergodic_explore::export::fmt_g17;
use ergodic_explore::output::{exit, run_command, RunOptions};

#[derive(Parser)]
#[command(name = "ergodic-explore", about = "Ergodic exploration of Gaussian-mixture targets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_steps: Option<u64>,
        #[arg(long, num_args = 2, value_names = ["NX", "NY"])]
        grid: Option<Vec<usize>>,
        /// Override a config key, e.g. `--set robot.v_max=5` or `--set v_max=5`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Check a config file and report every problem found.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the version.
    Version,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            config,
            out,
            max_steps,
            grid,
            set,
        } => {
            let opts = RunOptions {
                config,
                out,
                max_steps,
                grid: grid.map(|g| (g[0], g[1])),
                overrides: set,
            };
            match run_command(&opts) {
                Ok(s) => {
                    println!(
                        "V {} -> {} over {} cycles in {:.2}s",
                        s.initial_v.map(fmt_g17).unwrap_or_default(),
                        s.final_v.map(fmt_g17).unwrap_or_default(),
                        s.cycles,
                        s.seconds
                    );
                    println!("wrote {} files to {}", s.artifacts.len(), opts.out.display());
                    exit::OK
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
        Command::Validate { config } => match parse_config(&config, &[]) {
            Ok(_) => {
                println!("{}: ok", config.display());
                exit::OK
            }
            Err(e) => {
                eprintln!("{e}");
                exit::INVALID_CONFIG
            }
        },
        Command::Version => {
            println!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
            exit::OK
        }
    };
    ExitCode::from(code as u8)
}
