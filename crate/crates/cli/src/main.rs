use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use leapfrog::verify::VerifyOptions;
use leapfrog_cli::config::{AnalyticConfig, BoundStatesConfig, RunConfig, ScarsConfig, ScatterConfig, ScenarioConfig, SweepConfig};
use leapfrog_cli::run::{self, Headlines};
use leapfrog_cli::CliError;

/// Simulate resonance-constrained fermions on a 1D lattice.
#[derive(Parser)]
#[command(name = "leapfrog", version)]
struct Cli {
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Reserved; every routine is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a product state and record observables.
    Evolve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Collide a 2-tuplet with an orphan and compare with the surrogate.
    Scatter {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Find localized eigenstates of an N-tuplet.
    Boundstates {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Count frozen product states.
    Scars {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Sweep U/J, the flux error or the detuning.
    Robustness {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Closed-form constants and the transmission integral.
    Analytic {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the numbered release checks.
    Verify {
        /// Comma-separated criterion numbers; all when omitted.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u32>,
        /// Override the analytic falloff used by the bound-state checks.
        #[arg(long)]
        falloff: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_or<C: RunConfig>(path: &Option<PathBuf>, fallback: C) -> Result<C, CliError> {
    match path {
        Some(p) => C::load(p),
        None => Ok(fallback),
    }
}

fn report(head: &Headlines, out: &Path) {
    for (k, v) in head {
        println!("{k}: {v}");
    }
    println!("written to {}", out.display());
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config { field: "--threads".into(), message: e.to_string() })?;
    }
    match cli.command {
        Command::Evolve { config, out } => report(&run::evolve_scenario(&ScenarioConfig::load(&config)?, &out)?, &out),
        Command::Scatter { config, out } => {
            report(&run::scatter(&load_or(&config, ScatterConfig::default())?, &out)?, &out)
        }
        Command::Boundstates { config, out } => {
            report(&run::bound_states(&BoundStatesConfig::load(&config)?, &out)?, &out)
        }
        Command::Scars { config, out } => report(&run::scars(&load_or(&config, ScarsConfig::default())?, &out)?, &out),
        Command::Robustness { config, out } => report(&run::sweep(&SweepConfig::load(&config)?, &out)?, &out),
        Command::Analytic { config, out } => {
            report(&run::analytic(&load_or(&config, AnalyticConfig::default())?, &out)?, &out)
        }
        Command::Verify { criteria, falloff, out } => {
            let mut options = VerifyOptions::default();
            if let Some(b) = falloff {
                options.falloff = b;
            }
            let result = run::verify(&criteria, &options, out.as_deref())?;
            for c in &result.criteria {
                let status = if c.passed { "PASS" } else { "FAIL" };
                println!("criterion {:>2} {:<28} {status} ({:.1} s)", c.id, c.title, c.seconds);
                for check in c.failed_checks() {
                    println!("    failed: {} = {}", check.name, check.value);
                }
                if let Some(e) = &c.error {
                    println!("    error: {e}");
                }
            }
            let failed = result.criteria.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(CliError::Verification { failed });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
