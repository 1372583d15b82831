//! Microgrid case study on the constraint hypergraph engine.
//!
//! A [`GridSpec`] lists the actors (PV arrays, batteries, generators,
//! loads, buildings, utility feeders) and how they are wired.
//! [`build_microgrid_chg`] turns it into a hypergraph whose per-frame
//! chain runs timing, data lookup, supplies and demands, failures,
//! dispatch, and battery and fuel integration. [`run_scenario`] solves
//! that chain over a number of hourly frames.

pub mod actors;
pub mod build;
pub mod builtins;
pub mod dispatch;
pub mod failure;
pub mod grid;
pub mod invariants;
pub mod scenario;
pub mod timing;

use thiserror::Error;

pub use build::{build_microgrid_chg, synthetic_tables, InstantiationReport, MicrogridModel};
pub use builtins::{microgrid_registry, register_builtins};
pub use dispatch::{dispatch, Dispatch, DispatchProblem};
pub use failure::failure_step;
pub use grid::{ActorKind, ActorSpec, GridSpec, StartDate};
pub use scenario::{run_scenario, run_scenario_with, GridState, InvariantViolation, ScenarioRun};
pub use timing::{is_leap_year, timing, Timing};

/// Metadata key holding the JSON [`GridSpec`] of an exported model.
pub const SPEC_METADATA_KEY: &str = "microgrid";

#[derive(Debug, Error)]
pub enum MicrogridError {
    #[error("invalid grid: {0}")]
    SpecInvariantViolation(String),
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("table '{0}' is required but was not supplied")]
    MissingTable(String),
    #[error("unexpected solver output: {0}")]
    Malformed(String),
    #[error(transparent)]
    Solve(#[from] chg_core::solver::SolveError),
    #[error(transparent)]
    Graph(#[from] chg_core::graph::GraphError),
}

/// Recovers the grid description stored in an exported model.
pub fn spec_from_metadata(graph: &chg_core::Hypergraph) -> Result<GridSpec, MicrogridError> {
    let text = graph.metadata().get(SPEC_METADATA_KEY).ok_or_else(|| {
        MicrogridError::SpecInvariantViolation(format!("model has no '{SPEC_METADATA_KEY}' metadata"))
    })?;
    let spec: GridSpec = serde_json::from_str(text)
        .map_err(|e| MicrogridError::SpecInvariantViolation(format!("bad grid description: {e}")))?;
    spec.validate()?;
    Ok(spec)
}
