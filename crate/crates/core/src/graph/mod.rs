//! Hypergraph data model: nodes, hyperedges and the operations that build,
//! check and combine graphs.
//!
//! A [`Hypergraph`] is an immutable value. `add_node`, `add_edge` and
//! `set_input` return a new graph and never touch existing members, so a
//! previously computed solution can always be replayed against the extended
//! graph. [`GraphBuilder`] applies the same checks in place for bulk
//! construction.

mod merge;
mod relation;
mod validate;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::value::Value;

pub use merge::merge;
pub use relation::{Relation, RelationError};
pub use validate::{ValidationIssue, ValidationReport};

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub label: String,
    pub description: String,
    pub unit: Option<String>,
    /// Measured or configured value; solving this node returns it at zero cost.
    pub initial: Option<Value>,
    pub domain_hint: Option<Vec<Value>>,
}

impl Node {
    pub fn new(id: impl Into<String>) -> Self {
        let id = id.into();
        Self {
            label: id.clone(),
            id,
            description: String::new(),
            unit: None,
            initial: None,
            domain_hint: None,
        }
    }

    pub fn label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = Some(unit.into());
        self
    }

    pub fn initial(mut self, value: impl Into<Value>) -> Self {
        self.initial = Some(value.into());
        self
    }

    pub fn domain(mut self, values: Vec<Value>) -> Self {
        self.domain_hint = Some(values);
        self
    }

    fn admits(&self, value: &Value) -> bool {
        self.domain_hint.as_ref().is_none_or(|d| d.contains(value))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperedge {
    pub id: String,
    /// Parameter name -> source node id.
    pub sources: BTreeMap<String, String>,
    pub target: String,
    pub relation: Relation,
    pub viability: Option<Relation>,
    pub weight: f64,
    /// Reads frame `i`, writes the target at frame `i + 1`.
    pub advances: bool,
}

impl Hyperedge {
    /// Edge with weight 1 and no sources yet.
    pub fn new(id: impl Into<String>, target: impl Into<String>, relation: Relation) -> Self {
        Self {
            id: id.into(),
            sources: BTreeMap::new(),
            target: target.into(),
            relation,
            viability: None,
            weight: 1.0,
            advances: false,
        }
    }

    pub fn source(mut self, param: impl Into<String>, node: impl Into<String>) -> Self {
        self.sources.insert(param.into(), node.into());
        self
    }

    pub fn weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn advancing(mut self) -> Self {
        self.advances = true;
        self
    }

    pub fn viable_when(mut self, predicate: Relation) -> Self {
        self.viability = Some(predicate);
        self
    }

    pub fn uses_iteration(&self) -> bool {
        self.relation.uses_iteration() || self.viability.as_ref().is_some_and(Relation::uses_iteration)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("duplicate id '{0}'")]
    DuplicateId(String),
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("edge '{edge}' has negative or non-finite weight {weight}")]
    NegativeWeight { edge: String, weight: f64 },
    #[error("edge '{edge}' references unbound parameter '{param}'")]
    UnboundParameter { edge: String, param: String },
    #[error("edge '{0}' targets one of its own sources without advancing the frame")]
    SelfTargetWithoutAdvance(String),
    #[error("edge '{0}' has no sources")]
    EmptySources(String),
    #[error("value {value} is outside the domain of node '{node}'")]
    DomainViolation { node: String, value: Value },
    #[error("shared node '{g2}' -> '{g1}' is incompatible: {reason}")]
    IncompatibleSharedNode { g1: String, g2: String, reason: String },
    #[error("shared node '{node}' has conflicting initial values {left} and {right}")]
    ConflictingInitials { node: String, left: Value, right: Value },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Hypergraph {
    nodes: BTreeMap<String, Node>,
    edges: BTreeMap<String, Hyperedge>,
    metadata: BTreeMap<String, String>,
}

impl Hypergraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assembles a graph without checking edge endpoints or parameters.
    ///
    /// Only id uniqueness is enforced. Run [`Hypergraph::validate`] on the
    /// result; the model loader uses this to resolve includes before checking.
    pub fn from_parts(
        nodes: Vec<Node>,
        edges: Vec<Hyperedge>,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self, GraphError> {
        let mut g = Hypergraph {
            metadata,
            ..Self::default()
        };
        for n in nodes {
            if g.nodes.contains_key(&n.id) {
                return Err(GraphError::DuplicateId(n.id));
            }
            g.nodes.insert(n.id.clone(), n);
        }
        for e in edges {
            if g.edges.contains_key(&e.id) {
                return Err(GraphError::DuplicateId(e.id));
            }
            g.edges.insert(e.id.clone(), e);
        }
        Ok(g)
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl ExactSizeIterator<Item = &Hyperedge> {
        self.edges.values()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn edge(&self, id: &str) -> Option<&Hyperedge> {
        self.edges.get(id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    pub fn add_node(&self, node: Node) -> Result<Self, GraphError> {
        let mut g = self.clone();
        g.insert_node(node)?;
        Ok(g)
    }

    pub fn add_edge(&self, edge: Hyperedge) -> Result<Self, GraphError> {
        let mut g = self.clone();
        g.insert_edge(edge)?;
        Ok(g)
    }

    /// Couples a measured value to a node.
    pub fn set_input(&self, node_id: &str, value: Value) -> Result<Self, GraphError> {
        let mut g = self.clone();
        g.assign_initial(node_id, value)?;
        Ok(g)
    }

    fn insert_node(&mut self, node: Node) -> Result<(), GraphError> {
        if self.nodes.contains_key(&node.id) {
            return Err(GraphError::DuplicateId(node.id));
        }
        if let Some(v) = &node.initial {
            if !node.admits(v) {
                return Err(GraphError::DomainViolation {
                    node: node.id,
                    value: v.clone(),
                });
            }
        }
        self.nodes.insert(node.id.clone(), node);
        Ok(())
    }

    fn insert_edge(&mut self, edge: Hyperedge) -> Result<(), GraphError> {
        self.check_edge(&edge)?;
        self.edges.insert(edge.id.clone(), edge);
        Ok(())
    }

    fn assign_initial(&mut self, node_id: &str, value: Value) -> Result<(), GraphError> {
        let node = self
            .nodes
            .get_mut(node_id)
            .ok_or_else(|| GraphError::UnknownNode(node_id.to_owned()))?;
        if !node.admits(&value) {
            return Err(GraphError::DomainViolation {
                node: node_id.to_owned(),
                value,
            });
        }
        node.initial = Some(value);
        Ok(())
    }

    fn check_edge(&self, edge: &Hyperedge) -> Result<(), GraphError> {
        if self.edges.contains_key(&edge.id) {
            return Err(GraphError::DuplicateId(edge.id.clone()));
        }
        if !(edge.weight >= 0.0 && edge.weight.is_finite()) {
            return Err(GraphError::NegativeWeight {
                edge: edge.id.clone(),
                weight: edge.weight,
            });
        }
        if edge.sources.is_empty() {
            return Err(GraphError::EmptySources(edge.id.clone()));
        }
        for node in edge.sources.values().chain([&edge.target]) {
            if !self.nodes.contains_key(node) {
                return Err(GraphError::UnknownNode(node.clone()));
            }
        }
        if let Some(param) = unbound_param(edge) {
            return Err(GraphError::UnboundParameter {
                edge: edge.id.clone(),
                param: param.to_owned(),
            });
        }
        if !edge.advances && edge.sources.values().any(|s| *s == edge.target) {
            return Err(GraphError::SelfTargetWithoutAdvance(edge.id.clone()));
        }
        Ok(())
    }

    /// Ids of edges that write `node`.
    pub fn edges_into<'a>(&'a self, node: &'a str) -> impl Iterator<Item = &'a Hyperedge> + 'a {
        self.edges.values().filter(move |e| e.target == node)
    }
}

fn unbound_param(edge: &Hyperedge) -> Option<&str> {
    edge.relation
        .params()
        .into_iter()
        .chain(edge.viability.iter().flat_map(Relation::params))
        .find(|p| !edge.sources.contains_key(*p))
}

/// In-place construction with the same checks as the immutable operations.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    graph: Hypergraph,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_graph(graph: Hypergraph) -> Self {
        Self { graph }
    }

    pub fn node(&mut self, node: Node) -> Result<&mut Self, GraphError> {
        self.graph.insert_node(node)?;
        Ok(self)
    }

    pub fn edge(&mut self, edge: Hyperedge) -> Result<&mut Self, GraphError> {
        self.graph.insert_edge(edge)?;
        Ok(self)
    }

    pub fn input(&mut self, node_id: &str, value: Value) -> Result<&mut Self, GraphError> {
        self.graph.assign_initial(node_id, value)?;
        Ok(self)
    }

    pub fn metadata(&mut self, key: impl Into<String>, value: impl Into<String>) -> &mut Self {
        self.graph.metadata.insert(key.into(), value.into());
        self
    }

    pub fn contains_node(&self, id: &str) -> bool {
        self.graph.nodes.contains_key(id)
    }

    pub fn build(self) -> Hypergraph {
        self.graph
    }
}

/// Upper bound on the number of distinct (source set, target) edges over `n`
/// variables: the sum over source-set sizes `i` of `(n - i) * C(n, i)`.
/// Overflows `u128` somewhere above n = 120.
pub fn theoretical_edge_capacity(n: u32) -> u128 {
    let n = u128::from(n);
    let mut total = 0u128;
    let mut binom = 1u128; // C(n, 0)
    for i in 1..n {
        binom = binom * (n - i + 1) / i;
        let term = (n - i).checked_mul(binom).expect("edge capacity overflow");
        total = total.checked_add(term).expect("edge capacity overflow");
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn on_off() -> Vec<Value> {
        vec![Value::text("on"), Value::text("off")]
    }

    fn lightbulb_nodes() -> Hypergraph {
        Hypergraph::new()
            .add_node(Node::new("light1").domain(on_off()))
            .unwrap()
            .add_node(Node::new("light2").domain(on_off()))
            .unwrap()
    }

    fn toggle(id: &str, from: &str, to: &str) -> Hyperedge {
        Hyperedge::new(id, to, Relation::expr(r#"if(x == "on", "off", "on")"#).unwrap()).source("x", from)
    }

    #[test]
    fn add_node_and_duplicates() {
        let g = Hypergraph::new().add_node(Node::new("light1")).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(
            g.add_node(Node::new("light1")).unwrap_err(),
            GraphError::DuplicateId("light1".into())
        );
        let g = lightbulb_nodes();
        let ids: Vec<_> = g.nodes().map(|n| n.id.as_str()).collect();
        assert_eq!(ids, ["light1", "light2"]);
    }

    #[test]
    fn add_edge_contract() {
        let g = lightbulb_nodes();
        let g2 = g.add_edge(toggle("f", "light2", "light1")).unwrap();
        assert_eq!(g2.edge_count(), 1);
        // the original value is untouched
        assert_eq!(g.edge_count(), 0);

        let err = g
            .add_edge(toggle("f", "light2", "light1").weight(-1.0))
            .unwrap_err();
        assert!(matches!(err, GraphError::NegativeWeight { .. }));

        let err = g
            .add_edge(Hyperedge::new("loop", "light1", Relation::identity("x")).source("x", "light1"))
            .unwrap_err();
        assert_eq!(err, GraphError::SelfTargetWithoutAdvance("loop".into()));
        assert!(g
            .add_edge(
                Hyperedge::new("loop", "light1", Relation::identity("x"))
                    .source("x", "light1")
                    .advancing()
            )
            .is_ok());

        let err = g.add_edge(toggle("f", "light9", "light1")).unwrap_err();
        assert_eq!(err, GraphError::UnknownNode("light9".into()));

        let err = g
            .add_edge(Hyperedge::new("f", "light1", Relation::expr("not y").unwrap()).source("x", "light2"))
            .unwrap_err();
        assert!(matches!(err, GraphError::UnboundParameter { param, .. } if param == "y"));

        let err = g2.add_edge(toggle("f", "light1", "light2")).unwrap_err();
        assert_eq!(err, GraphError::DuplicateId("f".into()));
    }

    #[test]
    fn viability_parameters_must_be_bound() {
        let g = lightbulb_nodes();
        let e = toggle("f", "light2", "light1").viable_when(Relation::expr("z").unwrap());
        assert!(matches!(g.add_edge(e), Err(GraphError::UnboundParameter { .. })));
    }

    #[test]
    fn set_input_contract() {
        let g = lightbulb_nodes();
        let measured = g.set_input("light2", Value::text("on")).unwrap();
        assert_eq!(measured.node("light2").unwrap().initial, Some(Value::text("on")));
        assert_eq!(g.node("light2").unwrap().initial, None);
        assert_eq!(
            g.set_input("missing", Value::Int(1)).unwrap_err(),
            GraphError::UnknownNode("missing".into())
        );
        assert!(matches!(
            g.set_input("light2", Value::text("dim")),
            Err(GraphError::DomainViolation { .. })
        ));
        assert!(matches!(
            Hypergraph::new().add_node(Node::new("x").domain(on_off()).initial("dim")),
            Err(GraphError::DomainViolation { .. })
        ));
    }

    /// Brute force: count (non-empty proper source subset, target outside it) pairs.
    fn capacity_by_enumeration(n: u32) -> u128 {
        let mut count = 0;
        for subset in 1u32..(1 << n) {
            if subset.count_ones() == n {
                continue;
            }
            count += u128::from(n - subset.count_ones());
        }
        count
    }

    #[test]
    fn edge_capacity_matches_enumeration() {
        assert_eq!(theoretical_edge_capacity(1), 0);
        assert_eq!(theoretical_edge_capacity(2), 2);
        assert_eq!(theoretical_edge_capacity(3), 9);
        for n in 1..=12 {
            assert_eq!(theoretical_edge_capacity(n), capacity_by_enumeration(n), "n={n}");
        }
    }
}
