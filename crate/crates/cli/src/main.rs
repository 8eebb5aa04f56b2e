//! `trackhhl`: generate toy events, reconstruct tracks with the classical or
//! simulated-HHL solver, calibrate the threshold, and run the size studies.
//!
//! Exit status: 0 success, 2 configuration error, 3 data error, 4 numerical
//! error. Failures are printed to stderr as `{"error": {...}}`.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trackhhl::studies::SweepGrid;

use crate::commands::{parse_range, Study};
use crate::config::{ConfigArgs, HyperArgs, SolverMode};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "trackhhl",
    version,
    about = "Ising-model track reconstruction with classical and HHL solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write toy events and a manifest to --output
    Generate(ConfigArgs),
    /// Doublets → Ising system → solve → threshold → tracks → metrics
    Reconstruct(ConfigArgs),
    /// Estimate the activation threshold from a batch of events
    Calibrate(ConfigArgs),
    /// Matrix sparsity or condition-number sweep, as CSV
    Study {
        #[arg(value_enum)]
        which: StudyKind,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Register sizes (and optionally solver figures) over an event-size grid, as CSV
    HhlReport {
        #[command(flatten)]
        sweep: SweepArgs,
        /// Also run the solver: hhl-oracle or hhl-circuit
        #[arg(long, value_enum)]
        mode: Option<SolverMode>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum StudyKind {
    Sparsity,
    Kappa,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    hyper: HyperArgs,
    /// Particle counts, `a:b` inclusive or a single value
    #[arg(long)]
    particles: Option<String>,
    /// Layer counts, `a:b` inclusive or a single value
    #[arg(long)]
    layers: Option<String>,
    /// Event seeds, `a:b` inclusive or a single value
    #[arg(long, default_value = "0")]
    seed: String,
    /// CSV destination; stdout when omitted
    #[arg(long)]
    output: Option<PathBuf>,
}

impl SweepArgs {
    fn grid(&self, particles: &str, layers: &str) -> Result<SweepGrid, CliError> {
        let range = |s: &str| parse_range(s).map_err(CliError::config);
        let sizes = |s: &str| range(s).map(|v| v.into_iter().map(|x| x as usize).collect());
        Ok(SweepGrid {
            particles: sizes(self.particles.as_deref().unwrap_or(particles))?,
            layers: sizes(self.layers.as_deref().unwrap_or(layers))?,
            seeds: range(&self.seed)?,
        })
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(args) => commands::generate(&args.resolve()?),
        Command::Reconstruct(args) => commands::reconstruct(&args.resolve()?),
        Command::Calibrate(args) => commands::calibrate(&args.resolve()?),
        Command::Study { which, sweep } => {
            let hp = sweep.hyper.resolve()?.hp;
            let which = match which {
                StudyKind::Sparsity => Study::Sparsity,
                StudyKind::Kappa => Study::Kappa,
            };
            commands::study(
                which,
                &sweep.grid("2:10", "3:8")?,
                &hp,
                sweep.output.as_deref(),
            )
        }
        Command::HhlReport { sweep, mode } => {
            let hp = sweep.hyper.resolve()?.hp;
            let grid = sweep.grid("2:5", "3:4")?;
            let seed = grid.seeds.first().copied().unwrap_or(0);
            commands::hhl_report(
                &grid.layers,
                &grid.particles,
                seed,
                &hp,
                mode,
                sweep.output.as_deref(),
            )
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
