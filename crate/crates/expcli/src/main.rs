use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qcollide::config::{env_seed, load_config, DEFAULT_SEED, SEED_ENV};
use qcollide::presets::run_preset;
use qcollide::qmap::q_from_t2;
use qcollide::runner::run_to_dir;
use qcollide::CliResult;

#[derive(Parser)]
#[command(name = "qcollide", version, about = "Shuttle collision-model experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config (a previous manifest.json works too).
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Measure the ensemble-averaged state instead of averaging measures.
        #[arg(long)]
        average_state: bool,
    },
    /// Run one of the built-in experiments.
    Preset {
        name: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = SEED_ENV)]
        seed: Option<u64>,
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// Dephasing parameter q for a collision of duration t given T2.
    Qmap {
        /// Collision duration in seconds.
        #[arg(long)]
        t: f64,
        /// Coherence time in seconds.
        #[arg(long)]
        t2: f64,
    },
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run { config, out, average_state } => {
            let mut config = load_config(&config)?;
            config.average_state |= average_state;
            let layout = config.engine.layout()?;
            for warning in config.engine.schedule()?.warnings(&layout) {
                eprintln!("warning: {warning}");
            }
            let seed = config.resolved_seed(env_seed()?);
            let rows = run_to_dir(&config, seed, &out)?;
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::Preset { name, out, seed, realizations } => {
            let seed = seed.unwrap_or(DEFAULT_SEED);
            for (dir, rows) in run_preset(&name, &out, seed, realizations)? {
                eprintln!("wrote {} rows to {}", rows.len(), dir.display());
            }
        }
        Command::Qmap { t, t2 } => println!("{}", q_from_t2(t, t2)?),
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
