//! Simulation composition: cost-ordered search over hyperpaths.
//!
//! Starting from measured and initial values, candidate firings are taken in
//! order of nondecreasing tree cost (ties by edge id, then iteration). Every
//! candidate is evaluated when popped: the viability predicate first, then
//! the relation. The first value cached for a (node, iteration) is final.

mod engine;
mod trace;
mod tree;

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::expr::Registry;
use crate::graph::Hypergraph;
use crate::model_io::TableStore;
use crate::value::Value;

pub use trace::{trace_to_json_lines, TraceLevel, TraceRecord, TraceStatus};
pub use tree::{Origin, ReplayError, SolutionTree, Step};

pub type Inputs = BTreeMap<String, Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverConfig {
    pub rng_seed: u64,
    /// Frames 0..max_iterations may be written.
    pub max_iterations: u64,
    /// Edge evaluations allowed per solve.
    pub max_firings: u64,
    pub trace_level: TraceLevel,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rng_seed: 0,
            max_iterations: 10_000,
            max_firings: 1_000_000,
            trace_level: TraceLevel::None,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("no path to '{target}'{}", iteration.map(|i| format!(" at iteration {i}")).unwrap_or_default())]
    NoPath { target: String, iteration: Option<u64> },
    #[error("iteration limit of {0} frames reached")]
    IterationLimit(u64),
    #[error("firing limit of {0} edge evaluations reached")]
    FiringLimit(u64),
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("all {runs} runs failed; last error: {last}")]
    AllRunsFailed { runs: usize, last: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub value: Value,
    pub tree: SolutionTree,
    /// Edge evaluations performed, rejections included.
    pub firings: u64,
    pub trace: Vec<TraceRecord>,
}

impl QueryResult {
    pub fn total_cost(&self) -> f64 {
        self.tree.total_cost()
    }

    pub fn explain(&self) -> String {
        self.tree.explain()
    }
}

/// Values of several nodes over consecutive frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSeries {
    pub targets: Vec<String>,
    /// `rows[frame][k]` is the value of `targets[k]` at `frame`.
    pub rows: Vec<Vec<Value>>,
    pub firings: u64,
    pub trace: Vec<TraceRecord>,
}

impl FrameSeries {
    pub fn column(&self, target: &str) -> Option<impl Iterator<Item = &Value>> {
        let k = self.targets.iter().position(|t| t == target)?;
        Some(self.rows.iter().map(move |r| &r[k]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub runs: usize,
    pub failures: usize,
    pub mean: f64,
    /// Population variance of the successful samples.
    pub variance: f64,
    pub min: f64,
    pub max: f64,
    /// Successful samples in run order; booleans coded 0/1.
    pub samples: Vec<f64>,
}

/// Solver bound to a builtin registry and a table store.
#[derive(Debug, Clone)]
pub struct Solver {
    registry: Arc<Registry>,
    tables: Arc<TableStore>,
}

impl Default for Solver {
    fn default() -> Self {
        Self::new(Registry::core(), TableStore::new())
    }
}

impl Solver {
    pub fn new(registry: Registry, tables: TableStore) -> Self {
        Self {
            registry: Arc::new(registry),
            tables: Arc::new(tables),
        }
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn tables(&self) -> &TableStore {
        &self.tables
    }

    pub fn solve(
        &self,
        graph: &Hypergraph,
        target: &str,
        inputs: &Inputs,
        config: &SolverConfig,
    ) -> Result<QueryResult, SolveError> {
        let out = engine::run(self, graph, inputs, config, &[target], None)?;
        let tree = SolutionTree::extract(&out.steps, out.found[0], out.costs[0]);
        Ok(QueryResult {
            value: tree.root().value.clone(),
            tree,
            firings: out.firings,
            trace: out.trace,
        })
    }

    /// Values of `target` at iterations `0..frames`.
    pub fn solve_series(
        &self,
        graph: &Hypergraph,
        target: &str,
        inputs: &Inputs,
        config: &SolverConfig,
        frames: u64,
    ) -> Result<Vec<(u64, Value)>, SolveError> {
        let series = self.solve_frames(graph, &[target], inputs, config, frames)?;
        Ok(series
            .rows
            .into_iter()
            .enumerate()
            .map(|(i, mut row)| (i as u64, row.remove(0)))
            .collect())
    }

    /// Values of every target at iterations `0..frames`, from one search.
    pub fn solve_frames(
        &self,
        graph: &Hypergraph,
        targets: &[&str],
        inputs: &Inputs,
        config: &SolverConfig,
        frames: u64,
    ) -> Result<FrameSeries, SolveError> {
        let out = engine::run(self, graph, inputs, config, targets, Some(frames))?;
        let rows = out
            .found
            .chunks(targets.len().max(1))
            .map(|chunk| chunk.iter().map(|&s| out.steps[s].value.clone()).collect())
            .collect();
        Ok(FrameSeries {
            targets: targets.iter().map(|t| t.to_string()).collect(),
            rows,
            firings: out.firings,
            trace: out.trace,
        })
    }

    /// Solves `runs` times with seeds `rng_seed + k`, in parallel.
    pub fn monte_carlo(
        &self,
        graph: &Hypergraph,
        target: &str,
        inputs: &Inputs,
        config: &SolverConfig,
        runs: usize,
    ) -> Result<MonteCarloSummary, SolveError> {
        engine::ensure_node(graph, target)?;
        let outcomes: Vec<Result<f64, String>> = (0..runs)
            .into_par_iter()
            .map(|k| {
                let cfg = config.with_seed(config.rng_seed.wrapping_add(k as u64));
                let r = self
                    .solve(graph, target, inputs, &cfg)
                    .map_err(|e| e.to_string())?;
                r.value
                    .as_sample()
                    .ok_or_else(|| format!("{} value is not numeric", r.value.type_name()))
            })
            .collect();
        let mut samples = Vec::with_capacity(runs);
        let mut last = String::from("no runs requested");
        for o in outcomes {
            match o {
                Ok(x) => samples.push(x),
                Err(e) => last = e,
            }
        }
        if samples.is_empty() {
            return Err(SolveError::AllRunsFailed { runs, last });
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let variance = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Ok(MonteCarloSummary {
            runs,
            failures: runs - samples.len(),
            mean,
            variance,
            min: samples.iter().copied().fold(f64::INFINITY, f64::min),
            max: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            samples,
        })
    }
}

/// [`Solver::solve`] with the core builtins and no tables.
pub fn solve(
    graph: &Hypergraph,
    target: &str,
    inputs: &Inputs,
    config: &SolverConfig,
) -> Result<QueryResult, SolveError> {
    Solver::default().solve(graph, target, inputs, config)
}

pub fn solve_series(
    graph: &Hypergraph,
    target: &str,
    inputs: &Inputs,
    config: &SolverConfig,
    frames: u64,
) -> Result<Vec<(u64, Value)>, SolveError> {
    Solver::default().solve_series(graph, target, inputs, config, frames)
}

pub fn monte_carlo(
    graph: &Hypergraph,
    target: &str,
    inputs: &Inputs,
    config: &SolverConfig,
    runs: usize,
) -> Result<MonteCarloSummary, SolveError> {
    Solver::default().monte_carlo(graph, target, inputs, config, runs)
}
