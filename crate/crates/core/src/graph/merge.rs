use std::collections::{BTreeMap, BTreeSet};

use super::{GraphError, Hypergraph, Node};

/// Combines two graphs along shared variables.
///
/// `shared` maps g2 node ids onto the g1 nodes they denote. Other g2 ids that
/// collide with g1 get a `#2`, `#3`, ... suffix. Edge references in g2 that
/// name no g2 node are carried over unchanged.
pub fn merge(
    g1: &Hypergraph,
    g2: &Hypergraph,
    shared: &BTreeMap<String, String>,
) -> Result<Hypergraph, GraphError> {
    let mut out = g1.clone();
    let mut images = BTreeSet::new();
    for (id2, id1) in shared {
        let n2 = g2.node(id2).ok_or_else(|| GraphError::UnknownNode(id2.clone()))?;
        let n1 = g1.node(id1).ok_or_else(|| GraphError::UnknownNode(id1.clone()))?;
        if !images.insert(id1.as_str()) {
            return Err(incompatible(id1, id2, "another node is already mapped onto it"));
        }
        let merged = unify(n1, n2)?;
        out.nodes.insert(id1.clone(), merged);
    }

    let mut rename: BTreeMap<&str, String> = shared.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
    for n in g2.nodes().filter(|n| !shared.contains_key(&n.id)) {
        let id = fresh_id(&n.id, |c| out.nodes.contains_key(c));
        rename.insert(&n.id, id.clone());
        out.nodes.insert(id.clone(), Node { id, ..n.clone() });
    }

    let mapped = |node: &String| rename.get(node.as_str()).cloned().unwrap_or_else(|| node.clone());
    for e in g2.edges() {
        let id = fresh_id(&e.id, |c| out.edges.contains_key(c));
        let mut edge = e.clone();
        edge.id = id.clone();
        edge.target = mapped(&e.target);
        for node in edge.sources.values_mut() {
            *node = mapped(node);
        }
        out.edges.insert(id, edge);
    }

    for (k, v) in g2.metadata() {
        out.metadata.entry(k.clone()).or_insert_with(|| v.clone());
    }
    Ok(out)
}

fn incompatible(g1: &str, g2: &str, reason: impl Into<String>) -> GraphError {
    GraphError::IncompatibleSharedNode {
        g1: g1.to_owned(),
        g2: g2.to_owned(),
        reason: reason.into(),
    }
}

fn unify(n1: &Node, n2: &Node) -> Result<Node, GraphError> {
    let mut out = n1.clone();
    match (&n1.unit, &n2.unit) {
        (Some(a), Some(b)) if a != b => {
            return Err(incompatible(&n1.id, &n2.id, format!("unit '{a}' vs '{b}'")));
        }
        (None, Some(b)) => out.unit = Some(b.clone()),
        _ => {}
    }
    match (&n1.domain_hint, &n2.domain_hint) {
        (Some(a), Some(b)) if a != b => {
            return Err(incompatible(&n1.id, &n2.id, "domain hints differ"));
        }
        (None, Some(b)) => out.domain_hint = Some(b.clone()),
        _ => {}
    }
    match (&n1.initial, &n2.initial) {
        (Some(a), Some(b)) if a != b => {
            return Err(GraphError::ConflictingInitials {
                node: n1.id.clone(),
                left: a.clone(),
                right: b.clone(),
            });
        }
        (None, Some(b)) => out.initial = Some(b.clone()),
        _ => {}
    }
    if let Some(v) = &out.initial {
        if !out.admits(v) {
            return Err(GraphError::DomainViolation {
                node: out.id.clone(),
                value: v.clone(),
            });
        }
    }
    Ok(out)
}

fn fresh_id(base: &str, taken: impl Fn(&str) -> bool) -> String {
    if !taken(base) {
        return base.to_owned();
    }
    (2..)
        .map(|k| format!("{base}#{k}"))
        .find(|c| !taken(c))
        .expect("unbounded suffix search")
}
