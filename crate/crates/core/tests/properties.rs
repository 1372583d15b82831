use std::collections::BTreeMap;

use chg_core::model_io::{model_from_str, model_to_string, Column, ColumnType, Table, TableStore};
use chg_core::solver::{solve, Inputs, Origin, SolveError, Solver, SolverConfig};
use chg_core::{merge, Hyperedge, Hypergraph, Node, Relation, ValidationIssue, Value};
use proptest::prelude::*;

/// (target, sources, weight) over node indices; sources precede the target.
type EdgeSpec = (usize, Vec<usize>, u8);

fn dag_edges(nodes: usize, max_edges: usize) -> impl Strategy<Value = Vec<EdgeSpec>> {
    let edge = (1..nodes).prop_flat_map(|t| {
        (
            Just(t),
            proptest::sample::subsequence((0..t).collect::<Vec<_>>(), 1..=t.min(3)),
            0u8..4,
        )
    });
    proptest::collection::vec(edge, 0..=max_edges)
}

fn build(nodes: usize, edges: &[EdgeSpec]) -> Hypergraph {
    let mut g = Hypergraph::new();
    for i in 0..nodes {
        g = g.add_node(Node::new(format!("n{i}"))).unwrap();
    }
    for (k, (t, srcs, w)) in edges.iter().enumerate() {
        g = g
            .add_edge(edge(&format!("e{k:02}"), *t, srcs, f64::from(*w)))
            .unwrap();
    }
    g
}

fn edge(id: &str, t: usize, srcs: &[usize], w: f64) -> Hyperedge {
    let body: Vec<String> = srcs.iter().map(|s| format!("p{s}")).collect();
    let mut e = Hyperedge::new(
        id,
        format!("n{t}"),
        Relation::expr(&format!("1 + {}", body.join(" + "))).unwrap(),
    )
    .weight(w);
    for s in srcs {
        e = e.source(format!("p{s}"), format!("n{s}"));
    }
    e
}

/// Minimum tree cost by recursion over every derivation, `None` if underivable.
fn oracle_cost(node: usize, inputs: &[usize], edges: &[EdgeSpec]) -> Option<f64> {
    if inputs.contains(&node) {
        return Some(0.0);
    }
    edges
        .iter()
        .filter(|(t, _, _)| *t == node)
        .filter_map(|(_, srcs, w)| {
            srcs.iter()
                .map(|s| oracle_cost(*s, inputs, edges))
                .sum::<Option<f64>>()
                .map(|c| c + f64::from(*w))
        })
        .min_by(f64::total_cmp)
}

fn measured(inputs: &[usize]) -> Inputs {
    inputs
        .iter()
        .map(|i| (format!("n{i}"), Value::Int(*i as i64)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn solve_is_cost_optimal(nodes in 2usize..=6, edges in dag_edges(6, 10), extra_input in any::<bool>()) {
        let edges: Vec<EdgeSpec> = edges.into_iter().filter(|(t, _, _)| *t < nodes).collect();
        let g = build(nodes, &edges);
        let inputs: Vec<usize> = if extra_input { vec![0, 1] } else { vec![0] };
        let target = nodes - 1;
        let result = solve(&g, &format!("n{target}"), &measured(&inputs), &SolverConfig::default());
        match oracle_cost(target, &inputs, &edges) {
            Some(best) => {
                let r = result.unwrap();
                prop_assert_eq!(r.total_cost(), best);
                prop_assert_eq!(r.tree.replay(&g, &Solver::default(), 0).unwrap(), r.value);
            }
            None => prop_assert!(matches!(result, Err(SolveError::NoPath { .. })), "{:?}", result),
        }
    }

    #[test]
    fn insertion_order_does_not_matter(edges in dag_edges(6, 10), rot in 0usize..10) {
        let g1 = build(6, &edges);
        let mut rotated = edges.clone();
        if !rotated.is_empty() {
            let k = rot % rotated.len();
            rotated.rotate_left(k);
        }
        // ids travel with their edges
        let mut g2 = Hypergraph::new();
        for i in (0..6).rev() {
            g2 = g2.add_node(Node::new(format!("n{i}"))).unwrap();
        }
        let n = edges.len().max(1);
        for (j, (t, srcs, w)) in rotated.iter().enumerate() {
            let k = (j + rot % n) % n;
            g2 = g2.add_edge(edge(&format!("e{k:02}"), *t, srcs, f64::from(*w))).unwrap();
        }
        prop_assert_eq!(&g1, &g2);
        prop_assert_eq!(model_to_string(&g1).unwrap(), model_to_string(&g2).unwrap());
        let cfg = SolverConfig::default();
        prop_assert_eq!(solve(&g1, "n5", &measured(&[0]), &cfg), solve(&g2, "n5", &measured(&[0]), &cfg));
    }

    #[test]
    fn adding_edges_is_monotone(edges in dag_edges(6, 8), extra in dag_edges(6, 3)) {
        let g = build(6, &edges);
        let cfg = SolverConfig::default();
        let Ok(before) = solve(&g, "n5", &measured(&[0]), &cfg) else { return Ok(()); };
        let mut h = g.clone();
        for (k, (t, srcs, w)) in extra.iter().enumerate() {
            let next = h.add_edge(edge(&format!("x{k}"), *t, srcs, f64::from(*w))).unwrap();
            // structural side-effect freedom
            for e in h.edges() {
                prop_assert_eq!(Some(e), next.edge(&e.id));
            }
            for n in h.nodes() {
                prop_assert_eq!(Some(n), next.node(&n.id));
            }
            h = next;
        }
        let after = solve(&h, "n5", &measured(&[0]), &cfg).unwrap();
        prop_assert!(after.total_cost() <= before.total_cost());
        prop_assert_eq!(before.tree.replay(&h, &Solver::default(), 0).unwrap(), before.value);
    }

    #[test]
    fn inputs_on_target_are_trivial_loops(edges in dag_edges(6, 10), v in any::<i64>()) {
        let g = build(6, &edges);
        let inputs: Inputs = [("n5".to_owned(), Value::Int(v))].into();
        let r = solve(&g, "n5", &inputs, &SolverConfig::default()).unwrap();
        prop_assert_eq!(r.total_cost(), 0.0);
        prop_assert_eq!(&r.value, &Value::Int(v));
        prop_assert_eq!(r.tree.firings().count(), 0);
    }

    #[test]
    fn viability_soundness(threshold in -3i64..6, start in -3i64..6) {
        let g = Hypergraph::new()
            .add_node(Node::new("x")).unwrap()
            .add_node(Node::new("y")).unwrap()
            .add_edge(Hyperedge::new("cheap", "y", Relation::expr("x * 2").unwrap())
                .source("x", "x")
                .viable_when(Relation::expr(&format!("x > {threshold}")).unwrap())).unwrap()
            .add_edge(Hyperedge::new("dear", "y", Relation::expr("x - 1").unwrap()).source("x", "x").weight(5.0)).unwrap();
        let inputs: Inputs = [("x".to_owned(), Value::Int(start))].into();
        let r = solve(&g, "y", &inputs, &SolverConfig::default()).unwrap();
        let expected = if start > threshold { start * 2 } else { start - 1 };
        prop_assert_eq!(&r.value, &Value::Int(expected));
        prop_assert!(r.tree.replay(&g, &Solver::default(), 0).is_ok());
    }

    #[test]
    fn advancing_edges_write_later_frames(limit in 0i64..40) {
        let g = Hypergraph::new()
            .add_node(Node::new("c").initial(0i64)).unwrap()
            .add_node(Node::new("limit")).unwrap()
            .add_node(Node::new("done")).unwrap()
            .add_edge(Hyperedge::new("tick", "c", Relation::expr("c + 1").unwrap()).source("c", "c").advancing()).unwrap()
            .add_edge(Hyperedge::new("exit", "done", Relation::identity("c"))
                .source("c", "c").source("limit", "limit")
                .viable_when(Relation::expr("c == limit").unwrap())).unwrap();
        let inputs: Inputs = [("limit".to_owned(), Value::Int(limit))].into();
        let r = solve(&g, "done", &inputs, &SolverConfig::default()).unwrap();
        prop_assert_eq!(&r.value, &Value::Int(limit));
        for step in r.tree.steps() {
            if let Origin::Fired { edge, frame, .. } = &step.origin {
                if edge == "tick" {
                    prop_assert_eq!(step.iteration, frame + 1);
                } else {
                    prop_assert_eq!(step.iteration, *frame);
                }
            }
        }
    }
}

/// Random operation sequences over a small id space.
#[derive(Debug, Clone)]
enum Op {
    AddNode(u8),
    AddEdge(u8, Vec<u8>, u8, bool),
    SetInput(u8, i64),
    Merge(Vec<u8>, Vec<(u8, u8)>),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0u8..8).prop_map(Op::AddNode),
        (
            0u8..8,
            proptest::collection::vec(0u8..8, 1..3),
            0u8..6,
            any::<bool>()
        )
            .prop_map(|(t, s, w, a)| Op::AddEdge(t, s, w, a)),
        (0u8..8, -5i64..5).prop_map(|(n, v)| Op::SetInput(n, v)),
        (
            proptest::collection::vec(0u8..8, 0..4),
            proptest::collection::vec((0u8..8, 0u8..8), 0..3)
        )
            .prop_map(|(n, s)| Op::Merge(n, s)),
    ]
}

fn apply(g: &Hypergraph, op: &Op, serial: usize) -> Option<Hypergraph> {
    match op {
        Op::AddNode(i) => g.add_node(Node::new(format!("v{i}"))).ok(),
        Op::AddEdge(t, srcs, w, adv) => {
            let mut e = Hyperedge::new(
                format!("h{serial}"),
                format!("v{t}"),
                Relation::expr("0").unwrap(),
            )
            .weight(f64::from(*w) - 1.0);
            for s in srcs {
                e = e.source(format!("q{s}"), format!("v{s}"));
            }
            if *adv {
                e = e.advancing();
            }
            g.add_edge(e).ok()
        }
        Op::SetInput(n, v) => g.set_input(&format!("v{n}"), Value::Int(*v)).ok(),
        Op::Merge(nodes, shared) => {
            let mut other = Hypergraph::new();
            for n in nodes {
                other = other.add_node(Node::new(format!("v{n}"))).ok()?;
            }
            let map: BTreeMap<String, String> = shared
                .iter()
                .map(|(a, b)| (format!("v{a}"), format!("v{b}")))
                .collect();
            merge(g, &other, &map).ok()
        }
    }
}

proptest! {
    #[test]
    fn referential_integrity_survives_any_sequence(ops in proptest::collection::vec(op(), 0..30)) {
        let mut g = Hypergraph::new();
        for (k, op) in ops.iter().enumerate() {
            if let Some(next) = apply(&g, op, k) {
                g = next;
            }
            let issues = g.validate().issues;
            prop_assert!(
                !issues.iter().any(|i| matches!(i, ValidationIssue::DanglingReference { .. } | ValidationIssue::UnboundParameter { .. })),
                "{:?}", issues
            );
            for e in g.edges() {
                prop_assert!(e.weight >= 0.0);
                prop_assert!(e.advances || !e.sources.values().any(|s| *s == e.target));
            }
        }
    }

    #[test]
    fn merge_counts_and_identity(edges in dag_edges(6, 6), k in 0usize..5, pick in proptest::collection::vec(0usize..6, 0..5)) {
        let g1 = build(6, &edges);
        prop_assert_eq!(merge(&g1, &Hypergraph::new(), &BTreeMap::new()).unwrap(), g1.clone());

        let mut g2 = Hypergraph::new();
        for i in 0..k {
            g2 = g2.add_node(Node::new(format!("m{i}"))).unwrap();
        }
        let mut shared = BTreeMap::new();
        let mut used = std::collections::BTreeSet::new();
        for (i, p) in pick.iter().enumerate().take(k) {
            if used.insert(*p) {
                shared.insert(format!("m{i}"), format!("n{p}"));
            }
        }
        let m = merge(&g1, &g2, &shared).unwrap();
        prop_assert_eq!(m.node_count(), g1.node_count() + g2.node_count() - shared.len());
    }

    #[test]
    fn documents_round_trip(edges in dag_edges(6, 10), init in proptest::option::of(-100i64..100), real in -1e6f64..1e6) {
        let mut g = build(6, &edges)
            .with_metadata("name", "random")
            .add_node(Node::new("r").unit("kW").label("Real node").description("a, \"quoted\" one").initial(real)).unwrap()
            .add_node(Node::new("t").domain(vec![Value::text("on"), Value::text("off")])).unwrap();
        if let Some(v) = init {
            g = g.set_input("n0", Value::Int(v)).unwrap();
        }
        g = g.add_edge(Hyperedge::new("adv", "r", Relation::builtin("max", &["x", "y"]))
            .source("x", "r").source("y", "n0").advancing()
            .viable_when(Relation::expr("x < 10").unwrap())).unwrap();
        let text = model_to_string(&g).unwrap();
        let back = model_from_str(&text).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(model_to_string(&back).unwrap(), text);
    }

    #[test]
    fn lookup_agrees_with_row_scan(keys in proptest::collection::vec(0i64..20, 1..40), probe in 0i64..25) {
        let rows: Vec<Vec<Value>> = keys.iter().enumerate()
            .map(|(i, k)| vec![Value::Int(*k), Value::Real(i as f64 * 0.5)])
            .collect();
        let table = Table::new("t", vec![
            Column { name: "k".into(), ty: ColumnType::Integer },
            Column { name: "v".into(), ty: ColumnType::Real },
        ], rows.clone()).unwrap();
        let mut store = TableStore::new();
        store.insert(table);
        let scan = rows.iter().find(|r| r[0] == Value::Int(probe)).map(|r| r[1].clone());

        let g = Hypergraph::new()
            .add_node(Node::new("table").initial(Value::Table(chg_core::TableHandle::new("t")))).unwrap()
            .add_node(Node::new("key")).unwrap()
            .add_node(Node::new("out")).unwrap()
            .add_edge(Hyperedge::new("q", "out", Relation::expr("lookup(tb, \"k\", key, \"v\")").unwrap())
                .source("tb", "table").source("key", "key")).unwrap();
        let inputs: Inputs = [("key".to_owned(), Value::Int(probe))].into();
        let solver = Solver::new(chg_core::expr::Registry::core(), store);
        let got = solver.solve(&g, "out", &inputs, &SolverConfig::default()).ok().map(|r| r.value);
        prop_assert_eq!(got, scan);
    }
}
