//! Experiment CLI. Worker threads follow `RAYON_NUM_THREADS`.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use netmpg::harness::{emit_plots, load_config, run_experiment, sweep_kappa, verify, ExperimentConfig};

#[derive(Parser)]
#[command(name = "netmpg", version, about = "Truncated independent NPG for networked Markov potential games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train once and write convergence.csv.
    Run(ConfigArgs),
    /// Train over a list of κ values and write epsilon_vs_kappa.csv.
    Sweep(ConfigArgs),
    /// Run every certificate on an oracle-scale instance.
    Verify(ConfigArgs),
    /// Render SVGs from the CSVs in an artifact directory.
    Plot { dir: PathBuf },
}

#[derive(Args)]
struct ConfigArgs {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    exact_advantages: bool,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = load_config(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
        }
        if self.exact_advantages {
            cfg.exact_advantages = true;
        }
        Ok(cfg)
    }
}

enum Outcome {
    Ok,
    CertificateFailure,
}

fn execute(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Run(args) => {
            let art = run_experiment(&args.load()?)?;
            println!("wrote {}", art.dir.display());
        }
        Command::Sweep(args) => {
            let (art, rows) = sweep_kappa(&args.load()?)?;
            for r in &rows {
                println!(
                    "kappa={} relative_error_pct={:.4} theoretical_bound={:.4}",
                    r.kappa, r.relative_error_pct, r.theoretical_bound
                );
            }
            println!("wrote {}", art.dir.display());
        }
        Command::Verify(args) => {
            let (art, report) = verify(&args.load()?)?;
            println!("wrote {}", art.certification.as_deref().unwrap_or(&art.dir).display());
            if !report.all_pass() {
                for c in report.failures() {
                    eprintln!(
                        "FAILED {} agent={:?} kappa={:?} max_gap={:e} bound={:e}",
                        c.name, c.agent, c.kappa, c.max_gap, c.bound
                    );
                }
                return Ok(Outcome::CertificateFailure);
            }
            println!("all {} certificates pass", report.certificates.len());
        }
        Command::Plot { dir } => {
            let files = emit_plots(&dir).with_context(|| format!("plotting {}", dir.display()))?;
            for f in files {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(Outcome::Ok)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CertificateFailure) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
