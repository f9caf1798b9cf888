//! The run configuration written next to every output, and the defaults table.

use std::path::PathBuf;

use orderprop_core::classify::OrderClass;
use orderprop_core::flow::FlowProperty;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Defaults shared by all commands.
pub mod defaults {
    pub const SEED: u64 = 42;
    pub const SAMPLES: usize = 10_000;
    pub const PAIRS: usize = 1_000;
    pub const PATHS: usize = 10_000;
    pub const TOL_CLASSIFY: f64 = 1e-6;
    pub const TOL_FLOW: f64 = 1e-7;
    pub const TOL_LNA: f64 = 1e-8;
    pub const TOL_SIMULATE: f64 = 1e-6;
    pub const HORIZON_FLOW: f64 = 10.0;
    pub const HORIZON_LNA: f64 = 5.0;
    pub const HORIZON_SIMULATE: f64 = 1.0;
    /// The step defaults to this fraction of the horizon.
    pub const DT_FRACTION: f64 = 1e-3;
    pub const OUT: &str = "orderprop-out";
    pub const FILE: &str = "run_config.json";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CommandConfig {
    Classify {
        system: PathBuf,
        order: String,
    },
    FlowTest {
        system: PathBuf,
        order: String,
        property: FlowProperty,
    },
    Lna {
        network: PathBuf,
        compare: [PathBuf; 2],
        class: OrderClass,
        order: String,
    },
    Simulate {
        diffusion: PathBuf,
        x0: Vec<f64>,
        record: Vec<f64>,
    },
}

/// Every resolved setting of a run. Budgets and tolerances a command does
/// not use still carry their defaults. The worker count is deliberately
/// absent: it never changes outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: CommandConfig,
    pub seed: u64,
    pub samples: usize,
    pub pairs: usize,
    pub paths: usize,
    pub tol: f64,
    pub horizon: f64,
    pub dt: f64,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        for (name, v) in [("samples", self.samples), ("pairs", self.pairs), ("paths", self.paths)] {
            if v == 0 {
                return Err(CliError::Input(format!("--{name} must be at least 1")));
            }
        }
        for (name, v) in [("tol", self.tol), ("horizon", self.horizon), ("dt", self.dt)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Input(format!(
                    "--{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("run config serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("invalid run config: {e}")))
    }
}
