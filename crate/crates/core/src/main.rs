use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nsdb::config::{BumpConfig, ExperimentConfig, RunConfig};
use nsdb::experiments::{run_experiment, validate_config, DriverOptions};
use nsdb::Error;

#[derive(Parser)]
#[command(name = "nsdb", version, about = "Navier-Stokes-Darcy-Boussinesq simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.directory`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write every assembled system in matrix-market format to this directory.
    #[arg(long, value_name = "DIR")]
    dump_systems: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Single simulation with energy and snapshot output.
    Run(Common),
    /// Runs at xi, xi/2, xi/4, ...
    XiSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Runs at delta, delta/2, delta/4, ...
    DtRefine {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Twin runs from perturbed temperatures.
    Uniqueness {
        #[command(flatten)]
        common: Common,
        /// Perturbation amplitude; repeat for several.
        #[arg(long = "amplitude")]
        amplitudes: Vec<f64>,
    },
    /// Manufactured-solution convergence study.
    Mms(Common),
    /// Parses and checks a configuration without running it.
    ValidateConfig(Common),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Json(_)
        | Error::Parameter(_)
        | Error::BoundViolation { .. }
        | Error::MeshFormat(_) => 2,
        Error::Io(_) => 4,
        _ => 3,
    }
}

fn execute(command: Command) -> Result<bool, Error> {
    let (common, adjust): (Common, Box<dyn Fn(&mut RunConfig)>) = match command {
        Command::Run(c) => (c, Box::new(|cfg| cfg.experiment = ExperimentConfig::Run)),
        Command::XiSweep { common, levels } => (
            common,
            Box::new(move |cfg| {
                let current = match cfg.experiment {
                    ExperimentConfig::XiSweep { levels } => levels,
                    _ => 3,
                };
                cfg.experiment = ExperimentConfig::XiSweep { levels: levels.unwrap_or(current) };
            }),
        ),
        Command::DtRefine { common, levels } => (
            common,
            Box::new(move |cfg| {
                let current = match cfg.experiment {
                    ExperimentConfig::DtRefine { levels } => levels,
                    _ => 4,
                };
                cfg.experiment = ExperimentConfig::DtRefine { levels: levels.unwrap_or(current) };
            }),
        ),
        Command::Uniqueness { common, amplitudes } => (
            common,
            Box::new(move |cfg| {
                if !matches!(cfg.experiment, ExperimentConfig::Uniqueness { .. }) {
                    cfg.experiment = ExperimentConfig::Uniqueness {
                        amplitudes: vec![1e-6, 1e-5, 1e-4],
                        bump: BumpConfig { center: [0.5, 0.5], radius: 0.25 },
                        tolerance_pair: [1e-8, 1e-12],
                        compare_time: 1.0,
                    };
                }
                if let ExperimentConfig::Uniqueness { amplitudes: a, .. } = &mut cfg.experiment {
                    if !amplitudes.is_empty() {
                        *a = amplitudes.clone();
                    }
                }
            }),
        ),
        Command::Mms(c) => (
            c,
            Box::new(|cfg| {
                if !matches!(cfg.experiment, ExperimentConfig::Mms { .. }) {
                    cfg.experiment = ExperimentConfig::Mms { levels: vec![4, 8, 16] };
                }
            }),
        ),
        Command::ValidateConfig(c) => {
            let cfg = RunConfig::load(&c.config)?;
            validate_config(&cfg)?;
            if !c.quiet {
                println!("{} ok ({})", c.config.display(), cfg.hash());
            }
            return Ok(true);
        }
    };
    let mut cfg = RunConfig::load(&common.config)?;
    adjust(&mut cfg);
    let opts = DriverOptions { out: common.out, dump_systems: common.dump_systems, quiet: common.quiet };
    let outcome = run_experiment(&cfg, &opts)?;
    if !common.quiet {
        println!("{}: {}", outcome.report["kind"].as_str().unwrap_or("?"), if outcome.passed { "passed" } else { "FAILED" });
    }
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
