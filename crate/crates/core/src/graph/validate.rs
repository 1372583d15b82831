use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::Hypergraph;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ValidationIssue {
    DanglingReference {
        edge: String,
        node: String,
    },
    UnboundParameter {
        edge: String,
        param: String,
    },
    /// Neither an edge endpoint nor carrying an initial value.
    UnreachableNode(String),
    /// Strongly connected node set closed by non-advancing edges only.
    /// Legal (each node is still cached once per frame) and so a warning.
    NoAdvanceCycle(Vec<String>),
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationIssue::DanglingReference { edge, node } => {
                write!(f, "dangling reference: edge '{edge}' names missing node '{node}'")
            }
            ValidationIssue::UnboundParameter { edge, param } => {
                write!(f, "unbound parameter: edge '{edge}' uses '{param}'")
            }
            ValidationIssue::UnreachableNode(n) => {
                write!(f, "unreachable node: '{n}' has no edges and no initial value")
            }
            ValidationIssue::NoAdvanceCycle(nodes) => {
                write!(f, "cycle without advancing edge: {}", nodes.join(" -> "))
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
    pub warnings: Vec<ValidationIssue>,
}

impl ValidationReport {
    /// True when the graph is well-formed; warnings do not count.
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        for warning in &self.warnings {
            writeln!(f, "warning: {warning}")?;
        }
        Ok(())
    }
}

impl Hypergraph {
    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();
        let mut touched = BTreeSet::new();
        for e in self.edges() {
            for node in e.sources.values().chain([&e.target]) {
                touched.insert(node.as_str());
                if self.node(node).is_none() {
                    issues.push(ValidationIssue::DanglingReference {
                        edge: e.id.clone(),
                        node: node.clone(),
                    });
                }
            }
            let mut seen = BTreeSet::new();
            for p in e
                .relation
                .params()
                .into_iter()
                .chain(e.viability.iter().flat_map(|v| v.params()))
            {
                if !e.sources.contains_key(p) && seen.insert(p) {
                    issues.push(ValidationIssue::UnboundParameter {
                        edge: e.id.clone(),
                        param: p.to_owned(),
                    });
                }
            }
        }
        for n in self.nodes() {
            if n.initial.is_none() && !touched.contains(n.id.as_str()) {
                issues.push(ValidationIssue::UnreachableNode(n.id.clone()));
            }
        }
        let warnings = non_advancing_cycles(self)
            .into_iter()
            .map(ValidationIssue::NoAdvanceCycle)
            .collect();
        ValidationReport { issues, warnings }
    }
}

/// Tarjan's algorithm over the source -> target relation of non-advancing edges.
fn non_advancing_cycles(g: &Hypergraph) -> Vec<Vec<String>> {
    let mut adj: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for e in g.edges().filter(|e| !e.advances) {
        for s in e.sources.values() {
            adj.entry(s.as_str()).or_default().insert(e.target.as_str());
        }
    }

    struct State<'a> {
        adj: &'a BTreeMap<&'a str, BTreeSet<&'a str>>,
        index: BTreeMap<&'a str, usize>,
        low: BTreeMap<&'a str, usize>,
        stack: Vec<&'a str>,
        on_stack: BTreeSet<&'a str>,
        out: Vec<Vec<String>>,
    }

    fn connect<'a>(st: &mut State<'a>, v: &'a str) {
        let i = st.index.len();
        st.index.insert(v, i);
        st.low.insert(v, i);
        st.stack.push(v);
        st.on_stack.insert(v);
        let adj = st.adj;
        for &w in adj.get(v).into_iter().flatten() {
            if !st.index.contains_key(w) {
                connect(st, w);
                let lw = st.low[w];
                let lv = st.low.get_mut(v).unwrap();
                *lv = (*lv).min(lw);
            } else if st.on_stack.contains(w) {
                let iw = st.index[w];
                let lv = st.low.get_mut(v).unwrap();
                *lv = (*lv).min(iw);
            }
        }
        if st.low[v] == st.index[v] {
            let mut comp = Vec::new();
            loop {
                let w = st.stack.pop().unwrap();
                st.on_stack.remove(w);
                comp.push(w.to_owned());
                if w == v {
                    break;
                }
            }
            let self_loop = adj.get(v).is_some_and(|s| s.contains(v));
            if comp.len() > 1 || self_loop {
                comp.sort();
                st.out.push(comp);
            }
        }
    }

    let mut st = State {
        adj: &adj,
        index: BTreeMap::new(),
        low: BTreeMap::new(),
        stack: Vec::new(),
        on_stack: BTreeSet::new(),
        out: Vec::new(),
    };
    for &v in adj.keys() {
        if !st.index.contains_key(v) {
            connect(&mut st, v);
        }
    }
    st.out.sort();
    st.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Hyperedge, Node, Relation};

    fn chain(ids: &[&str], edges: &[(&str, &str, &str, bool)]) -> Hypergraph {
        let nodes = ids.iter().map(|id| Node::new(*id)).collect();
        let edges = edges
            .iter()
            .map(|(id, s, t, adv)| {
                let e = Hyperedge::new(*id, *t, Relation::identity("x")).source("x", *s);
                if *adv {
                    e.advancing()
                } else {
                    e
                }
            })
            .collect();
        Hypergraph::from_parts(nodes, edges, BTreeMap::new()).unwrap()
    }

    /// Oracle: a node lies on a cycle iff some DFS from it returns to it.
    fn on_cycle_by_dfs(g: &Hypergraph, start: &str) -> bool {
        let mut stack = vec![start.to_owned()];
        let mut seen = BTreeSet::new();
        while let Some(v) = stack.pop() {
            for e in g
                .edges()
                .filter(|e| !e.advances && e.sources.values().any(|s| *s == v))
            {
                if e.target == start {
                    return true;
                }
                if seen.insert(e.target.clone()) {
                    stack.push(e.target.clone());
                }
            }
        }
        false
    }

    #[test]
    fn well_formed_graph_has_empty_report() {
        let g = chain(
            &["light1", "light2"],
            &[
                ("f", "light2", "light1", false),
                ("f_inv", "light1", "light2", false),
            ],
        );
        let report = g.validate();
        assert!(report.is_empty(), "{report}");
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn dangling_reference_reported() {
        let g = chain(&["a"], &[("e", "a", "gone", false)]);
        assert_eq!(
            g.validate().issues,
            [ValidationIssue::DanglingReference {
                edge: "e".into(),
                node: "gone".into()
            }]
        );
    }

    #[test]
    fn unbound_and_unreachable_reported() {
        let e = Hyperedge::new("e", "b", Relation::expr("x + y").unwrap()).source("x", "a");
        let g = Hypergraph::from_parts(
            vec![
                Node::new("a"),
                Node::new("b"),
                Node::new("island"),
                Node::new("m").initial(1i64),
            ],
            vec![e],
            BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(
            g.validate().issues,
            [
                ValidationIssue::UnboundParameter {
                    edge: "e".into(),
                    param: "y".into()
                },
                ValidationIssue::UnreachableNode("island".into()),
            ]
        );
    }

    #[test]
    fn non_advancing_cycle_matches_dfs_oracle() {
        let g = chain(
            &["a", "b", "c", "d"],
            &[
                ("ab", "a", "b", false),
                ("ba", "b", "a", false),
                ("bc", "b", "c", false),
                ("cd", "c", "d", false),
                ("dc", "d", "c", true),
            ],
        );
        let cycles = non_advancing_cycles(&g);
        assert_eq!(cycles, [vec!["a".to_owned(), "b".to_owned()]]);
        for n in ["a", "b", "c", "d"] {
            let flagged = cycles.iter().any(|c| c.iter().any(|m| m == n));
            assert_eq!(flagged, on_cycle_by_dfs(&g, n), "{n}");
        }
        assert!(g
            .validate()
            .warnings
            .contains(&ValidationIssue::NoAdvanceCycle(vec!["a".into(), "b".into()])));
    }
}
