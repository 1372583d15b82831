use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use super::engine::{evaluate_edge, Rejection};
use super::Solver;
use crate::expr::Bindings;
use crate::graph::Hypergraph;
use crate::value::Value;

#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    /// Supplied as a query input.
    Measured,
    /// The node's own initial value.
    Initial,
    Fired {
        edge: String,
        /// Frame the edge read; advancing edges write the next one.
        frame: u64,
        weight: f64,
        /// Parameter name and the index of the step that bound it.
        inputs: Vec<(String, usize)>,
    },
}

/// One cached (node, iteration) value and how it was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub node: String,
    pub iteration: u64,
    pub value: Value,
    pub origin: Origin,
}

/// Derivation of a solved value.
///
/// Steps are stored once per (node, iteration) in dependency order, root
/// last. The tree they describe is obtained by unfolding shared steps; its
/// total cost counts every unfolded firing.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionTree {
    steps: Vec<Step>,
    total_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error("edge '{0}' is not in the graph")]
    MissingEdge(String),
    #[error("edge '{edge}' at iteration {frame} is not viable on its recorded inputs")]
    NotViable { edge: String, frame: u64 },
    #[error("edge '{edge}' at iteration {frame} failed: {message}")]
    Evaluation {
        edge: String,
        frame: u64,
        message: String,
    },
    #[error("edge '{edge}' at iteration {frame} produced {found}, recorded {recorded}")]
    Mismatch {
        edge: String,
        frame: u64,
        recorded: Value,
        found: Value,
    },
}

impl SolutionTree {
    /// Extracts the steps reachable from `root`, renumbered in post-order.
    pub(super) fn extract(all: &[Step], root: usize, total_cost: f64) -> Self {
        let mut order = Vec::new();
        let mut seen = HashSet::new();
        let mut stack = vec![(root, false)];
        while let Some((i, expanded)) = stack.pop() {
            if expanded {
                order.push(i);
                continue;
            }
            if !seen.insert(i) {
                continue;
            }
            stack.push((i, true));
            if let Origin::Fired { inputs, .. } = &all[i].origin {
                for (_, child) in inputs.iter().rev() {
                    if !seen.contains(child) {
                        stack.push((*child, false));
                    }
                }
            }
        }
        let renumber: HashMap<usize, usize> =
            order.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let steps = order
            .iter()
            .map(|&old| {
                let mut step = all[old].clone();
                if let Origin::Fired { inputs, .. } = &mut step.origin {
                    for (_, child) in inputs.iter_mut() {
                        *child = renumber[child];
                    }
                }
                step
            })
            .collect();
        SolutionTree { steps, total_cost }
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn root(&self) -> &Step {
        self.steps.last().expect("a tree has a root")
    }

    pub fn total_cost(&self) -> f64 {
        self.total_cost
    }

    /// Distinct firings, one per (node, iteration) produced by an edge.
    pub fn firings(&self) -> impl Iterator<Item = &Step> {
        self.steps
            .iter()
            .filter(|s| matches!(s.origin, Origin::Fired { .. }))
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Step> {
        self.steps
            .iter()
            .filter(|s| !matches!(s.origin, Origin::Fired { .. }))
    }

    /// Indented rendering, one line per step; repeated subtrees are printed once.
    pub fn explain(&self) -> String {
        let mut out = String::new();
        let mut printed = HashSet::new();
        let mut stack = vec![(self.steps.len() - 1, 0usize)];
        while let Some((i, depth)) = stack.pop() {
            let step = &self.steps[i];
            let pad = "  ".repeat(depth);
            match &step.origin {
                Origin::Measured => {
                    let _ = writeln!(out, "{pad}{} = {} (measured, cost 0)", step.node, step.value);
                }
                Origin::Initial => {
                    let _ = writeln!(out, "{pad}{} = {} (initial, cost 0)", step.node, step.value);
                }
                Origin::Fired { edge, .. } if !printed.insert(i) => {
                    let _ = writeln!(out, "{pad}{} = {} <- {edge} (see above)", step.node, step.value);
                }
                Origin::Fired {
                    edge,
                    frame,
                    weight,
                    inputs,
                } => {
                    let bound: Vec<String> = inputs
                        .iter()
                        .map(|(p, s)| format!("{p}={}", self.steps[*s].value))
                        .collect();
                    let _ = writeln!(
                        out,
                        "{pad}{} = {} <- {edge} @{frame} [{}] weight {weight}",
                        step.node,
                        step.value,
                        bound.join(", ")
                    );
                    for (_, child) in inputs.iter().rev() {
                        stack.push((*child, depth + 1));
                    }
                }
            }
        }
        out
    }

    /// Re-executes every firing in order and checks the recorded values bitwise.
    pub fn replay(&self, graph: &Hypergraph, solver: &Solver, rng_seed: u64) -> Result<Value, ReplayError> {
        for step in &self.steps {
            let Origin::Fired {
                edge, frame, inputs, ..
            } = &step.origin
            else {
                continue;
            };
            let e = graph
                .edge(edge)
                .ok_or_else(|| ReplayError::MissingEdge(edge.clone()))?;
            let bindings: Bindings = inputs
                .iter()
                .map(|(p, s)| (p.clone(), self.steps[*s].value.clone()))
                .collect();
            let found = evaluate_edge(solver, rng_seed, e, &bindings, *frame).map_err(|r| match r {
                Rejection::NotViable => ReplayError::NotViable {
                    edge: edge.clone(),
                    frame: *frame,
                },
                Rejection::Error(message) => ReplayError::Evaluation {
                    edge: edge.clone(),
                    frame: *frame,
                    message,
                },
            })?;
            if found != step.value {
                return Err(ReplayError::Mismatch {
                    edge: edge.clone(),
                    frame: *frame,
                    recorded: step.value.clone(),
                    found,
                });
            }
        }
        Ok(self.root().value.clone())
    }
}
