use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use cmat::bench::{self, ControllerKind, ExperimentConfig, Overrides, OUTPUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "cmat", version, about = "Cyclic platoon scheduling benchmark")]
struct Cli {
    /// Simulated horizon in seconds, replacing the config value.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Seed for Poisson arrivals, replacing the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweep rows.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory, replacing the config value.
    #[arg(long, global = true, env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep every configured controller and write the CSV and plot data.
    Run { config: PathBuf },
    /// Print the timing table of a schedule file.
    Explain { schedule: PathBuf },
    /// Build one controller at a demand multiplier and save it as a schedule file.
    Solve {
        config: PathBuf,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "cmat")]
        controller: ControllerKind,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    let overrides = Overrides {
        horizon: cli.horizon,
        seed: cli.seed,
        workers: cli.workers,
        output_dir: cli.output_dir,
    };
    match cli.command {
        Command::Run { config } => {
            let report = bench::run(&config, &overrides).with_context(|| format!("running {}", config.display()))?;
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            if report.success() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("{} rows failed", report.errors);
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Explain { schedule } => {
            print!("{}", bench::explain_file(&schedule)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve {
            config,
            beta,
            out,
            controller,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            overrides.apply(&mut cfg)?;
            let file = bench::solve_schedule(&cfg, beta, controller)?;
            file.write(&out)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
