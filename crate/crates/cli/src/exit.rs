//! Exit codes and the error type every command returns.

use std::fmt;
use std::process::ExitCode;

use chg_core::model_io::{ModelError, TableError};
use chg_core::solver::SolveError;
use chg_core::GraphError;
use chg_microgrid::MicrogridError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    NoPath = 2,
    Invalid = 3,
    Evaluation = 4,
    Usage = 5,
}

#[derive(Debug)]
pub struct Failure {
    pub status: Status,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            status: Status::Usage,
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self {
            status: Status::Invalid,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.status as u8)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        let status = match e {
            SolveError::NoPath { .. } | SolveError::UnknownNode(_) => Status::NoPath,
            SolveError::IterationLimit(_) | SolveError::FiringLimit(_) | SolveError::AllRunsFailed { .. } => {
                Status::Evaluation
            }
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        let status = match e {
            ModelError::Io { .. } => Status::Usage,
            _ => Status::Invalid,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        Self::invalid(e.to_string())
    }
}

impl From<TableError> for Failure {
    fn from(e: TableError) -> Self {
        let status = match e {
            TableError::Io { .. } => Status::Usage,
            _ => Status::Invalid,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

impl From<MicrogridError> for Failure {
    fn from(e: MicrogridError) -> Self {
        match e {
            MicrogridError::Solve(e) => e.into(),
            MicrogridError::Graph(e) => e.into(),
            MicrogridError::SpecInvariantViolation(_) => Self::invalid(e.to_string()),
            MicrogridError::ContractViolation(_) | MicrogridError::MissingTable(_) => {
                Self::usage(e.to_string())
            }
            MicrogridError::Malformed(_) => Self {
                status: Status::Evaluation,
                message: e.to_string(),
            },
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::usage(e.to_string())
    }
}
