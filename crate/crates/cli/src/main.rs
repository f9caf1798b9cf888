//! `orderprop`: classify vector fields, test flow properties, compare linear
//! noise approximations and simulate diffusions from JSON model files.
//!
//! Exit status: 0 when the run completed (whatever the verdict), 2 on input
//! errors, 3 on numerical failures.

mod config;
mod error;
mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use orderprop_core::classify::OrderClass;
use orderprop_core::flow::FlowProperty;

use crate::config::{defaults, CommandConfig, RunConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "orderprop",
    version,
    about = "Stochastic-order propagation checks for ODEs, SDEs and reaction networks"
)]
struct Cli {
    /// Worker threads; 0 uses every core. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Budget {
    #[arg(long)]
    seed: Option<u64>,
    /// Sample points for the infinitesimal checks.
    #[arg(long)]
    samples: Option<usize>,
    /// Randomized trials for flow tests.
    #[arg(long)]
    pairs: Option<usize>,
    /// Euler–Maruyama paths.
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Time horizon T.
    #[arg(long)]
    horizon: Option<f64>,
    /// Step size; defaults to 1e-3·T.
    #[arg(long)]
    dt: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PropertyArg {
    Order,
    Convexity,
    Dirconvexity,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    Icx,
    Fd,
}

#[derive(Subcommand)]
enum Command {
    /// Check monotonicity and curvature conditions of a vector field.
    Classify {
        system: PathBuf,
        /// Comma-separated signs, input signs after `;`, e.g. `+,-;+`.
        #[arg(long, allow_hyphen_values = true)]
        order: Option<String>,
        #[command(flatten)]
        budget: Budget,
    },
    /// Test order, convexity or directional convexity of the flow on random trials.
    FlowTest {
        system: PathBuf,
        #[arg(long, value_enum)]
        property: PropertyArg,
        #[arg(long, allow_hyphen_values = true)]
        order: Option<String>,
        #[command(flatten)]
        budget: Budget,
    },
    /// Compare the LNA moment trajectories of two initial Gaussian laws.
    Lna {
        network: PathBuf,
        #[arg(long, num_args = 2, value_names = ["A", "B"], required = true)]
        compare: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "icx")]
        class: ClassArg,
        #[arg(long, allow_hyphen_values = true)]
        order: Option<String>,
        #[command(flatten)]
        budget: Budget,
    },
    /// Euler–Maruyama ensemble of a diffusion.
    Simulate {
        diffusion: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x0: Vec<f64>,
        /// Extra observation times.
        #[arg(long, value_delimiter = ',')]
        record: Vec<f64>,
        #[command(flatten)]
        budget: Budget,
    },
    /// Re-run a command from its emitted run configuration.
    Replay {
        config: PathBuf,
        /// Write to this directory instead of the recorded one.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn absolute(path: &Path) -> Result<PathBuf, CliError> {
    fs::canonicalize(path).map_err(|e| CliError::read(path, e))
}

fn build(budget: Budget, command: CommandConfig, tol: f64, horizon: f64) -> RunConfig {
    let horizon = budget.horizon.unwrap_or(horizon);
    RunConfig {
        command,
        seed: budget.seed.unwrap_or(defaults::SEED),
        samples: budget.samples.unwrap_or(defaults::SAMPLES),
        pairs: budget.pairs.unwrap_or(defaults::PAIRS),
        paths: budget.paths.unwrap_or(defaults::PATHS),
        tol: budget.tol.unwrap_or(tol),
        horizon,
        dt: budget.dt.unwrap_or(defaults::DT_FRACTION * horizon),
        out: budget.out.unwrap_or_else(|| defaults::OUT.into()),
    }
}

fn config_for(command: Command) -> Result<RunConfig, CliError> {
    Ok(match command {
        Command::Classify { system, order, budget } => build(
            budget,
            CommandConfig::Classify {
                system: absolute(&system)?,
                order: order.unwrap_or_default(),
            },
            defaults::TOL_CLASSIFY,
            defaults::HORIZON_FLOW,
        ),
        Command::FlowTest {
            system,
            property,
            order,
            budget,
        } => build(
            budget,
            CommandConfig::FlowTest {
                system: absolute(&system)?,
                order: order.unwrap_or_default(),
                property: match property {
                    PropertyArg::Order => FlowProperty::Order,
                    PropertyArg::Convexity => FlowProperty::Convexity,
                    PropertyArg::Dirconvexity => FlowProperty::DirectionalConvexity,
                },
            },
            defaults::TOL_FLOW,
            defaults::HORIZON_FLOW,
        ),
        Command::Lna {
            network,
            compare,
            class,
            order,
            budget,
        } => build(
            budget,
            CommandConfig::Lna {
                network: absolute(&network)?,
                compare: [absolute(&compare[0])?, absolute(&compare[1])?],
                class: match class {
                    ClassArg::Icx => OrderClass::Icx,
                    ClassArg::Fd => OrderClass::Fd,
                },
                order: order.unwrap_or_default(),
            },
            defaults::TOL_LNA,
            defaults::HORIZON_LNA,
        ),
        Command::Simulate {
            diffusion,
            x0,
            record,
            budget,
        } => build(
            budget,
            CommandConfig::Simulate {
                diffusion: absolute(&diffusion)?,
                x0,
                record,
            },
            defaults::TOL_SIMULATE,
            defaults::HORIZON_SIMULATE,
        ),
        Command::Replay { config, out } => {
            let text = fs::read_to_string(&config).map_err(|e| CliError::read(&config, e))?;
            let mut cfg = RunConfig::from_json(&text)?;
            if let Some(out) = out {
                cfg.out = out;
            }
            cfg
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("error: cannot start {} workers: {e}", cli.jobs);
            return ExitCode::from(error::EXIT_INPUT as u8);
        }
    }
    match config_for(cli.command).and_then(run::execute) {
        Ok((cfg, summary)) => {
            print!("{summary}");
            println!("outputs written to {}", cfg.out.display());
            ExitCode::from(error::EXIT_OK as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
