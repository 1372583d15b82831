//! Constraint hypergraph (CHG) engine.
//!
//! Nodes hold system state variables, hyperedges hold the functions relating
//! them. The [`solver`] composes simulations on demand: given known inputs it
//! searches for the cheapest chain of edge firings that determines a queried
//! node, evaluating every edge it encounters.

pub mod expr;
pub mod graph;
pub mod model_io;
pub mod solver;
pub mod value;

pub use graph::{
    merge, theoretical_edge_capacity, GraphBuilder, GraphError, Hyperedge, Hypergraph, Node, Relation,
    ValidationIssue, ValidationReport,
};
pub use value::{TableHandle, Value};
