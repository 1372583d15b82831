//! Cost-ordered hyperpath search with eager edge evaluation.
//!
//! Nodes are split statically into invariant nodes, which hold one value at
//! frame 0 visible from every frame, and iterating nodes, which hold one
//! value per frame. A node iterates when an advancing edge writes it, or when
//! a non-advancing edge writes it from an iterating source or from the frame
//! index itself.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};

use super::trace::{TraceLevel, TraceRecord, TraceStatus};
use super::tree::{Origin, Step};
use super::{Inputs, SolveError, Solver, SolverConfig};
use crate::expr::{Bindings, EvalContext};
use crate::graph::{Hyperedge, Hypergraph};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Frames {
    /// Reads and writes frame 0 only.
    Zero,
    /// All sources invariant, but the edge runs once per existing frame.
    Every,
    /// Runs at the frame of its iterating sources.
    Source,
}

struct Plan<'g> {
    nodes: Vec<&'g str>,
    index: HashMap<&'g str, usize>,
    iterating: Vec<bool>,
    /// Edges in id order; `None` sources mark an edge with dangling references.
    edges: Vec<&'g Hyperedge>,
    sources: Vec<Option<Vec<(&'g str, usize)>>>,
    targets: Vec<Option<usize>>,
    frames: Vec<Frames>,
    consumers: Vec<Vec<usize>>,
    every_frame: Vec<usize>,
}

impl<'g> Plan<'g> {
    fn new(graph: &'g Hypergraph) -> Self {
        let nodes: Vec<&str> = graph.nodes().map(|n| n.id.as_str()).collect();
        let index: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let edges: Vec<&Hyperedge> = graph.edges().collect();
        let sources: Vec<Option<Vec<(&str, usize)>>> = edges
            .iter()
            .map(|e| {
                e.sources
                    .iter()
                    .map(|(p, n)| index.get(n.as_str()).map(|&i| (p.as_str(), i)))
                    .collect()
            })
            .collect();
        let targets: Vec<Option<usize>> = edges
            .iter()
            .map(|e| index.get(e.target.as_str()).copied())
            .collect();

        let mut iterating = vec![false; nodes.len()];
        loop {
            let mut changed = false;
            for (i, e) in edges.iter().enumerate() {
                let (Some(t), Some(src)) = (targets[i], &sources[i]) else {
                    continue;
                };
                if !iterating[t]
                    && (e.advances || e.uses_iteration() || src.iter().any(|&(_, s)| iterating[s]))
                {
                    iterating[t] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        let mut consumers = vec![Vec::new(); nodes.len()];
        let mut frames = Vec::with_capacity(edges.len());
        let mut every_frame = Vec::new();
        for (i, e) in edges.iter().enumerate() {
            let kind = match (targets[i], &sources[i]) {
                (Some(t), Some(src)) => {
                    for &(_, s) in src {
                        if !consumers[s].contains(&i) {
                            consumers[s].push(i);
                        }
                    }
                    if src.iter().any(|&(_, s)| iterating[s]) {
                        Frames::Source
                    } else if iterating[t] || e.advances || e.uses_iteration() {
                        every_frame.push(i);
                        Frames::Every
                    } else {
                        Frames::Zero
                    }
                }
                _ => Frames::Zero,
            };
            frames.push(kind);
        }
        Plan {
            nodes,
            index,
            iterating,
            edges,
            sources,
            targets,
            frames,
            consumers,
            every_frame,
        }
    }

    fn key(&self, node: usize, frame: u64) -> (usize, u64) {
        (node, if self.iterating[node] { frame } else { 0 })
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    cost: f64,
    edge: usize,
    frame: u64,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Edge indices follow id order, so this is (cost, edge id, frame).
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.edge.cmp(&other.edge))
            .then(self.frame.cmp(&other.frame))
    }
}

struct Entry {
    cost: f64,
    step: usize,
}

/// What the search must cache before it stops.
pub(super) enum Goal {
    AnyFrame(usize),
    Frames { nodes: Vec<usize>, count: u64 },
}

pub(super) struct Outcome {
    pub steps: Vec<Step>,
    /// Step index of each goal entry: one for `AnyFrame`, else `[frame][node]`.
    pub found: Vec<usize>,
    pub costs: Vec<f64>,
    pub firings: u64,
    pub trace: Vec<TraceRecord>,
}

struct Search<'s, 'g> {
    plan: &'s Plan<'g>,
    solver: &'s Solver,
    config: &'s SolverConfig,
    cache: HashMap<(usize, u64), Entry>,
    steps: Vec<Step>,
    heap: BinaryHeap<Reverse<Candidate>>,
    queued: HashSet<(usize, u64)>,
    max_frame: u64,
    /// Frames at or past this are never written; a series needs none of them.
    horizon: u64,
    firings: u64,
    limit_hit: bool,
    trace: Vec<TraceRecord>,
}

impl Search<'_, '_> {
    fn try_queue(&mut self, edge: usize, frame: u64) {
        if self.queued.contains(&(edge, frame)) {
            return;
        }
        let Some(src) = &self.plan.sources[edge] else {
            return;
        };
        let mut cost = self.plan.edges[edge].weight;
        for &(_, s) in src {
            match self.cache.get(&self.plan.key(s, frame)) {
                Some(entry) => cost += entry.cost,
                None => return,
            }
        }
        self.queued.insert((edge, frame));
        self.heap.push(Reverse(Candidate { cost, edge, frame }));
    }

    fn on_cached(&mut self, node: usize, frame: u64) {
        let plan = self.plan;
        if frame > self.max_frame {
            let old = self.max_frame;
            self.max_frame = frame;
            for f in old + 1..=frame {
                for &e in &plan.every_frame {
                    self.try_queue(e, f);
                }
            }
        }
        for &e in &plan.consumers[node] {
            match plan.frames[e] {
                Frames::Zero => self.try_queue(e, 0),
                Frames::Source if plan.iterating[node] => self.try_queue(e, frame),
                Frames::Source | Frames::Every => {
                    for f in 0..=self.max_frame {
                        self.try_queue(e, f);
                    }
                }
            }
        }
    }

    fn record(
        &mut self,
        edge: usize,
        frame: u64,
        status: TraceStatus,
        cost: f64,
        value: Option<&Value>,
        message: Option<String>,
    ) {
        let keep = match self.config.trace_level {
            TraceLevel::None => false,
            TraceLevel::Values => status == TraceStatus::Fired,
            TraceLevel::Full => true,
        };
        if keep {
            self.trace.push(TraceRecord {
                edge: self.plan.edges[edge].id.clone(),
                iteration: frame,
                status,
                cost,
                value: value.cloned(),
                message,
            });
        }
    }

    /// Pops and evaluates one candidate; returns the newly cached key, if any.
    fn step(&mut self, c: Candidate) -> Result<Option<(usize, u64)>, SolveError> {
        let plan = self.plan;
        let edge = plan.edges[c.edge];
        let write = c.frame + u64::from(edge.advances);
        if write >= self.horizon {
            self.limit_hit |= write >= self.config.max_iterations;
            return Ok(None);
        }
        let target = plan.targets[c.edge].expect("queued edges have targets");
        let key = plan.key(target, write);
        if self.cache.contains_key(&key) {
            self.record(c.edge, c.frame, TraceStatus::CacheOccupied, c.cost, None, None);
            return Ok(None);
        }
        if self.firings >= self.config.max_firings {
            return Err(SolveError::FiringLimit(self.config.max_firings));
        }
        self.firings += 1;

        let src = plan.sources[c.edge].as_ref().expect("queued edges have sources");
        let mut bindings = Bindings::new();
        let mut inputs = Vec::with_capacity(src.len());
        for &(param, s) in src {
            let entry = &self.cache[&plan.key(s, c.frame)];
            bindings.insert(param.to_owned(), self.steps[entry.step].value.clone());
            inputs.push((param.to_owned(), entry.step));
        }

        match evaluate_edge(self.solver, self.config.rng_seed, edge, &bindings, c.frame) {
            Ok(value) => {
                self.record(c.edge, c.frame, TraceStatus::Fired, c.cost, Some(&value), None);
                self.steps.push(Step {
                    node: edge.target.clone(),
                    iteration: key.1,
                    value,
                    origin: Origin::Fired {
                        edge: edge.id.clone(),
                        frame: c.frame,
                        weight: edge.weight,
                        inputs,
                    },
                });
                self.cache.insert(
                    key,
                    Entry {
                        cost: c.cost,
                        step: self.steps.len() - 1,
                    },
                );
                Ok(Some(key))
            }
            Err(rejection) => {
                let (status, message) = match rejection {
                    Rejection::NotViable => (TraceStatus::NotViable, None),
                    Rejection::Error(m) => (TraceStatus::EvalError, Some(m)),
                };
                self.record(c.edge, c.frame, status, c.cost, None, message);
                Ok(None)
            }
        }
    }
}

pub(super) enum Rejection {
    NotViable,
    Error(String),
}

/// Viability first, then the relation; both see the same bindings and frame.
pub(super) fn evaluate_edge(
    solver: &Solver,
    seed: u64,
    edge: &Hyperedge,
    bindings: &Bindings,
    frame: u64,
) -> Result<Value, Rejection> {
    let tables = solver.tables();
    let registry = solver.registry();
    if let Some(pred) = &edge.viability {
        let key = format!("{}?viable", edge.id);
        let ctx = EvalContext {
            bindings,
            rng_seed: seed,
            edge_id: &key,
            iteration: frame,
            tables,
            registry,
        };
        match pred.evaluate(&ctx) {
            Ok(Value::Bool(true)) => {}
            Ok(Value::Bool(false)) => return Err(Rejection::NotViable),
            Ok(other) => {
                return Err(Rejection::Error(format!(
                    "viability yielded {} instead of boolean",
                    other.type_name()
                )))
            }
            Err(e) => return Err(Rejection::Error(e.to_string())),
        }
    }
    let ctx = EvalContext {
        bindings,
        rng_seed: seed,
        edge_id: &edge.id,
        iteration: frame,
        tables,
        registry,
    };
    edge.relation
        .evaluate(&ctx)
        .map_err(|e| Rejection::Error(e.to_string()))
}

pub(super) fn ensure_node(graph: &Hypergraph, id: &str) -> Result<(), SolveError> {
    graph
        .node(id)
        .map(|_| ())
        .ok_or_else(|| SolveError::UnknownNode(id.to_owned()))
}

pub(super) fn run(
    solver: &Solver,
    graph: &Hypergraph,
    inputs: &Inputs,
    config: &SolverConfig,
    targets: &[&str],
    frames: Option<u64>,
) -> Result<Outcome, SolveError> {
    for id in targets.iter().copied().chain(inputs.keys().map(String::as_str)) {
        ensure_node(graph, id)?;
    }
    let plan = Plan::new(graph);
    let target_idx: Vec<usize> = targets.iter().map(|t| plan.index[t]).collect();
    let goal = match frames {
        None => Goal::AnyFrame(target_idx[0]),
        Some(count) => Goal::Frames {
            nodes: target_idx,
            count,
        },
    };

    let mut search = Search {
        plan: &plan,
        solver,
        config,
        cache: HashMap::new(),
        steps: Vec::new(),
        heap: BinaryHeap::new(),
        queued: HashSet::new(),
        max_frame: 0,
        horizon: frames.map_or(config.max_iterations, |n| n.min(config.max_iterations)),
        firings: 0,
        limit_hit: false,
        trace: Vec::new(),
    };

    let mut seeded = Vec::new();
    for (i, node) in graph.nodes().enumerate() {
        let (value, origin) = match (inputs.get(&node.id), &node.initial) {
            (Some(v), _) => (v.clone(), Origin::Measured),
            (None, Some(v)) => (v.clone(), Origin::Initial),
            (None, None) => continue,
        };
        search.steps.push(Step {
            node: node.id.clone(),
            iteration: 0,
            value,
            origin,
        });
        search.cache.insert(
            (i, 0),
            Entry {
                cost: 0.0,
                step: search.steps.len() - 1,
            },
        );
        seeded.push(i);
    }

    let mut pending: HashSet<(usize, u64)> = HashSet::new();
    if let Goal::Frames { nodes, count } = &goal {
        for &n in nodes {
            for f in 0..*count {
                pending.insert(plan.key(n, f));
            }
        }
    }
    let reached =
        |search: &Search<'_, '_>, pending: &HashSet<(usize, u64)>, key: Option<(usize, u64)>| match &goal {
            Goal::AnyFrame(t) => match key {
                Some(k) => k.0 == *t,
                None => search.cache.contains_key(&(*t, 0)),
            },
            Goal::Frames { .. } => pending.is_empty(),
        };
    pending.retain(|k| !search.cache.contains_key(k));

    if !reached(&search, &pending, None) {
        for &i in &seeded {
            search.on_cached(i, 0);
        }
        loop {
            let Some(Reverse(c)) = search.heap.pop() else {
                return Err(exhausted(&search, &goal, &pending));
            };
            if let Some(key) = search.step(c)? {
                pending.remove(&key);
                if reached(&search, &pending, Some(key)) {
                    break;
                }
                search.on_cached(key.0, key.1);
            }
        }
    }

    let (found, costs) = match &goal {
        Goal::AnyFrame(t) => {
            let entry = search
                .cache
                .iter()
                .filter(|(k, _)| k.0 == *t)
                .map(|(_, e)| e)
                .next()
                .expect("goal reached");
            (vec![entry.step], vec![entry.cost])
        }
        Goal::Frames { nodes, count } => {
            let mut found = Vec::new();
            let mut costs = Vec::new();
            for f in 0..*count {
                for &n in nodes {
                    let e = &search.cache[&plan.key(n, f)];
                    found.push(e.step);
                    costs.push(e.cost);
                }
            }
            (found, costs)
        }
    };
    Ok(Outcome {
        steps: search.steps,
        found,
        costs,
        firings: search.firings,
        trace: search.trace,
    })
}

fn exhausted(search: &Search<'_, '_>, goal: &Goal, pending: &HashSet<(usize, u64)>) -> SolveError {
    if search.limit_hit {
        return SolveError::IterationLimit(search.config.max_iterations);
    }
    let (node, frame) = match goal {
        Goal::AnyFrame(t) => (*t, None),
        Goal::Frames { .. } => {
            let &(n, f) = pending
                .iter()
                .min_by_key(|(n, f)| (*f, *n))
                .expect("pending goal");
            (n, Some(f))
        }
    };
    SolveError::NoPath {
        target: search.plan.nodes[node].to_owned(),
        iteration: frame,
    }
}
