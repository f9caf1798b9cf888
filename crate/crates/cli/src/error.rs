use std::io;
use std::path::Path;

use orderprop_core::classify::ClassifyError;
use orderprop_core::expr::SystemError;
use orderprop_core::flow::FlowError;
use orderprop_core::lna::LnaError;
use orderprop_core::orders::OrderError;
use orderprop_core::stoch::StochError;
use thiserror::Error;

/// Exit status of a run.
pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    pub fn read(path: &Path, e: io::Error) -> Self {
        CliError::Input(format!("cannot read {}: {e}", path.display()))
    }

    pub fn write(path: &Path, e: io::Error) -> Self {
        CliError::Input(format!("cannot write {}: {e}", path.display()))
    }
}

impl From<SystemError> for CliError {
    fn from(e: SystemError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<OrderError> for CliError {
    fn from(e: OrderError) -> Self {
        match e {
            OrderError::Dimension { .. } | OrderError::BadSign(_) => CliError::Input(e.to_string()),
            OrderError::Asymmetric(_) | OrderError::NotPsd(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ClassifyError> for CliError {
    fn from(e: ClassifyError) -> Self {
        match e {
            ClassifyError::Order(o) => o.into(),
            ClassifyError::EmptyBudget => CliError::Input(e.to_string()),
            ClassifyError::Evaluation { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        match e {
            FlowError::Order(o) => o.into(),
            FlowError::BlowUp { .. } | FlowError::Evaluation { .. } | FlowError::Trial { .. } => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<StochError> for CliError {
    fn from(e: StochError) -> Self {
        match e {
            StochError::Order(o) => o.into(),
            StochError::Grid(g) => g.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<LnaError> for CliError {
    fn from(e: LnaError) -> Self {
        match e {
            LnaError::Order(o) => o.into(),
            LnaError::Grid(g) => g.into(),
            LnaError::NegativeRate { .. } | LnaError::Evaluation { .. } | LnaError::Jacobian { .. } => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}
