use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rbmm_cli::{experiment, gendata, load_config, probe, CliError};

/// Riemannian block majorization-minimization experiments.
#[derive(Parser)]
#[command(name = "rbmm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured application and write traces plus summary.json.
    Run(Common),
    /// Run the diagnostics suite and write probes.json.
    Probe(Common),
    /// Write the synthetic data of each trial.
    GenData(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `out_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn execute(cli: Cli) -> Result<ExitCode, CliError> {
    let (Command::Run(c) | Command::Probe(c) | Command::GenData(c)) = &cli.command;
    let cfg = load_config(&c.config, c.seed, c.out.clone())?;
    match cli.command {
        Command::Run(_) => {
            let s = experiment::run_experiment(&cfg)?;
            for t in &s.trials {
                println!(
                    "trial {} cycles {} objective {:.12e} {} {:.3e}",
                    t.trial, t.cycles, t.final_objective, t.error_metric.name, t.error_metric.value
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Probe(_) => {
            let (reports, ok) = probe::run_probes(&cfg)?;
            for r in &reports {
                println!("{} {} max {:.3e}", if r.pass { "pass" } else { "FAIL" }, r.quantity, r.max);
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::GenData(_) => {
            for p in gendata::gen_data(&cfg)? {
                println!("{}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("rbmm: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
