use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sync_mesh_cli::config::InitialConfig;
use sync_mesh_cli::run::output_dir;
use sync_mesh_cli::{analyze_to, simulate, validate, CliError, ExperimentConfig};

/// Simulate and analyse synchronizing oscillator networks.
///
/// Exit status: 0 on success, 1 on I/O or numerical failure, 2 for an
/// unreadable or invalid config, 3 when some trial missed its thresholds.
#[derive(Parser)]
#[command(name = "sync-mesh", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured trials and write CSV/JSON artifacts.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the number of trials.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the seed of a random initial condition.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Find equilibria and classify their stability.
    Analyze {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the coupling and bank, print the reports.
    Validate { config: PathBuf },
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Simulate { config, out, trials, seed } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                match &mut cfg.initial {
                    InitialConfig::Random { seed, .. } => *seed = s,
                    InitialConfig::Explicit { .. } => {
                        return Err(CliError::InvalidConfig("--seed needs a random initial condition".into()))
                    }
                }
            }
            let dir = output_dir(&cfg, out);
            let outcome = simulate(&cfg, &dir)?;
            let s = &outcome.summary;
            println!(
                "{}/{} trials synchronized; final dphi in [{:.3e}, {:.3e}], max frequency spread {:.3e}",
                s.successes, s.trials, s.min_final_dphi, s.max_final_dphi, s.max_final_frequency_spread
            );
            if let Some(eqs) = &outcome.equilibria {
                println!("{} equilibria written", eqs.len());
            }
            println!("artifacts in {}", dir.display());
            Ok(outcome.exit_code())
        }
        Command::Analyze { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = output_dir(&cfg, out);
            for r in analyze_to(&cfg, &dir)? {
                let mu: Vec<String> = r.mu.iter().map(|m| format!("{m:.6}")).collect();
                println!("mu = [{}]: {:?}", mu.join(", "), r.verdict);
            }
            Ok(0)
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (_, reports) = validate(&cfg)?;
            for r in reports {
                print!("{r}");
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
