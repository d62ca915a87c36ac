//! sqzforge: design-and-analysis CLI for a modal-phase-matched
//! squeezed-light source.
//!
//! Exit codes: 0 success, 1 numeric/convergence failure, 2 input or
//! validation failure.

mod cfg;
mod cmd_cavity;
mod cmd_fit;
mod cmd_modes;
mod cmd_opo;
mod out;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sqzforge_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "sqzforge", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run-config file (strict key/value sections).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's out_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for stochastic synthesis (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker-pool bound for sweeps (overrides the config).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Suppress progress output on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Effective-index sweeps, phase-matching search, and field maps.
    Modes {
        /// Width sweep as start:step:count (overrides the config).
        #[arg(long)]
        widths: Option<String>,
    },
    /// Photorefractive scan ladders and resonance summaries.
    Cavity,
    /// Below-threshold OPO observables.
    Opo {
        #[command(subcommand)]
        sub: OpoCommand,
    },
    /// Model fits over trace CSVs.
    Fit {
        #[command(subcommand)]
        sub: FitCommand,
    },
}

#[derive(Subcommand, Debug)]
enum OpoCommand {
    /// Squeezing/anti-squeezing noise power at an operating point.
    Squeeze(cmd_opo::SqueezeArgs),
    /// Parametric-gain trace across a scanned pump resonance.
    Gain(cmd_opo::GainArgs),
    /// Oscillation threshold from measured gain factors.
    Threshold(cmd_opo::ThresholdArgs),
    /// Detection-efficiency budget.
    Budget(cmd_opo::BudgetArgs),
    /// Squeezing floor at the threshold limit for a given efficiency.
    Project(cmd_opo::ProjectArgs),
    /// Scanned-LO homodyne trace synthesis.
    Homodyne(cmd_opo::HomodyneArgs),
}

#[derive(Subcommand, Debug)]
enum FitCommand {
    /// Joint squeezing fit versus pump power.
    Power(cmd_fit::PowerArgs),
    /// Joint squeezing fit versus sideband frequency.
    Frequency(cmd_fit::FrequencyArgs),
    /// Resonance lineshape fit (Lorentzian or shark fin).
    Lineshape(cmd_fit::LineshapeArgs),
}

/// Commands that read the run config.
fn load_config(cli: &Cli) -> Result<cfg::RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs --config".into()))?;
    let mut run = cfg::RunConfig::load(path)?;
    if let Some(out) = &cli.out {
        run.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        run.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        run.jobs = Some(jobs);
    }
    Ok(run)
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Modes { widths } => {
            let run = load_config(cli)?;
            let widths = widths.as_deref().map(cfg::parse_widths).transpose()?;
            cmd_modes::run(&run, widths, cli.quiet)
        }
        Command::Cavity => {
            let run = load_config(cli)?;
            cmd_cavity::run(&run, cli.quiet)
        }
        Command::Opo { sub } => match sub {
            OpoCommand::Squeeze(args) => cmd_opo::squeeze(args, cli.out.as_deref(), cli.quiet),
            OpoCommand::Gain(args) => {
                let run = load_config(cli)?;
                cmd_opo::gain(&run, args, cli.quiet)
            }
            OpoCommand::Threshold(args) => cmd_opo::threshold(args),
            OpoCommand::Budget(args) => cmd_opo::budget(args),
            OpoCommand::Project(args) => cmd_opo::project(args),
            OpoCommand::Homodyne(args) => {
                let out = cli
                    .out
                    .clone()
                    .ok_or_else(|| Error::Config("homodyne needs --out".into()))?;
                cmd_opo::homodyne(&out, cli.seed.unwrap_or(1), args, cli.quiet)
            }
        },
        Command::Fit { sub } => {
            let out = cli
                .out
                .clone()
                .ok_or_else(|| Error::Config("fit commands need --out".into()))?;
            match sub {
                FitCommand::Power(args) => cmd_fit::power(args, &out, cli.quiet),
                FitCommand::Frequency(args) => cmd_fit::frequency(args, &out, cli.quiet),
                FitCommand::Lineshape(args) => cmd_fit::lineshape(args, &out, cli.quiet),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
