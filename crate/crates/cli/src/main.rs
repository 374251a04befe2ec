use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nonholo_cli::{commands, config};

/// Pulse-sequence synthesis for nonholonomic quantum control.
#[derive(Parser)]
#[command(name = "nonholo-ctl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that the configured Hamiltonian pair generates the full
    /// unitary group.
    Check {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Find a pulse sequence realizing the identity, the seed for synthesis.
    Identity {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// RNG seed (overrides the config's problem.rng_seed).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Synthesize a pulse sequence realizing the configured target gate.
    Synthesize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-simulate a sequence file against the configured system and target.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        sequence: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    let (config_path, out_override) = match &cli.command {
        Command::Check { config, out }
        | Command::Identity { config, out, .. }
        | Command::Synthesize { config, out, .. }
        | Command::Verify { config, out, .. } => (config.clone(), out.clone()),
    };
    let doc = config::load(&config_path)?;
    let out_dir = out_override.unwrap_or_else(|| PathBuf::from(&doc.output.dir));
    match cli.command {
        Command::Check { .. } => commands::cmd_check(&doc, &out_dir),
        Command::Identity { seed, .. } => commands::cmd_identity(&doc, &out_dir, seed),
        Command::Synthesize { seed, .. } => commands::cmd_synthesize(&doc, &out_dir, seed),
        Command::Verify { sequence, .. } => commands::cmd_verify(&doc, &out_dir, &sequence),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
