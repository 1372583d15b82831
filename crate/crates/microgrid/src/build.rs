//! Instantiates the microgrid hypergraph from a [`GridSpec`].
//!
//! Node ids follow the catalog naming, with per-actor entries suffixed by
//! the actor name (`supply pv`, `charge level battery`, `clinic receives
//! from pv`). Every edge has weight 0: each node has a single producer
//! (or a pair gated by mutually exclusive viability), so there is no
//! preference to express.

use std::collections::BTreeMap;
use std::fmt;

use chg_core::graph::{GraphBuilder, GraphError, Hyperedge, Hypergraph, Node, Relation};
use chg_core::model_io::{
    generate_synthetic_building_load, generate_synthetic_solar, BuildingLoadParams, TableStore,
};
use chg_core::{TableHandle, Value};

use crate::grid::{ActorKind, ActorSpec, GridSpec};
use crate::MicrogridError;

pub const SOLAR_TABLE: &str = "solar";
pub const BUILDING_TABLE: &str = "building";
/// Key column shared by every hourly table.
pub const HOUR_KEY: &str = "hour_index";
/// Value column of the solar table.
pub const SUNLIGHT_COLUMN: &str = "ghi";
/// Benefit assigned to building demand, below the demo load's.
pub const BUILDING_BENEFIT: f64 = 0.5;
/// Peak irradiance of the synthetic solar table, W/m².
pub const SYNTHETIC_PEAK: f64 = 1000.0;

/// The node every run solves for.
pub const STATE_VECTOR: &str = "state vector";

/// Node and edge counts by catalog section.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InstantiationReport {
    pub nodes: BTreeMap<String, usize>,
    pub edges: BTreeMap<String, usize>,
}

impl InstantiationReport {
    pub fn node_total(&self) -> usize {
        self.nodes.values().sum()
    }

    pub fn edge_total(&self) -> usize {
        self.edges.values().sum()
    }
}

impl fmt::Display for InstantiationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<28} {:>6} {:>6}", "category", "nodes", "edges")?;
        let mut categories: Vec<&String> = self.nodes.keys().chain(self.edges.keys()).collect();
        categories.sort();
        categories.dedup();
        for c in categories {
            writeln!(
                f,
                "{c:<28} {:>6} {:>6}",
                self.nodes.get(c).copied().unwrap_or(0),
                self.edges.get(c).copied().unwrap_or(0)
            )?;
        }
        writeln!(
            f,
            "{:<28} {:>6} {:>6}",
            "total",
            self.node_total(),
            self.edge_total()
        )
    }
}

pub struct MicrogridModel {
    pub graph: Hypergraph,
    pub report: InstantiationReport,
}

/// Id of a per-actor catalog node.
pub fn actor_node(entry: &str, actor: &str) -> String {
    format!("{entry} {actor}")
}

struct Builder {
    graph: GraphBuilder,
    report: InstantiationReport,
    category: String,
    /// Edges wait until every node exists, since sections reference each other.
    edges: Vec<Hyperedge>,
}

impl Builder {
    fn section(&mut self, category: impl Into<String>) {
        self.category = category.into();
    }

    fn node(
        &mut self,
        id: &str,
        unit: &str,
        description: &str,
        initial: Option<Value>,
    ) -> Result<(), GraphError> {
        let mut node = Node::new(id).description(description);
        if !unit.is_empty() {
            node = node.unit(unit);
        }
        if let Some(v) = initial {
            node = node.initial(v);
        }
        self.graph.node(node)?;
        *self.report.nodes.entry(self.category.clone()).or_default() += 1;
        Ok(())
    }

    fn constant(
        &mut self,
        id: &str,
        unit: &str,
        description: &str,
        v: impl Into<Value>,
    ) -> Result<(), GraphError> {
        self.node(id, unit, description, Some(v.into()))
    }

    fn derived(&mut self, id: &str, unit: &str, description: &str) -> Result<(), GraphError> {
        self.node(id, unit, description, None)
    }

    fn edge(&mut self, edge: Hyperedge) -> Result<(), GraphError> {
        self.edges.push(edge.weight(0.0));
        *self.report.edges.entry(self.category.clone()).or_default() += 1;
        Ok(())
    }

    /// Edge `id` writing `target` with `body`, binding each `(param, node)`.
    fn expr(
        &mut self,
        id: &str,
        target: &str,
        body: &str,
        sources: &[(&str, &str)],
    ) -> Result<(), GraphError> {
        let relation = Relation::expr(body).expect("builder expressions parse");
        let edge = sources
            .iter()
            .fold(Hyperedge::new(id, target, relation), |e, (p, n)| e.source(*p, *n));
        self.edge(edge)
    }
}

fn tuple<T: Into<Value> + Clone>(items: &[T]) -> Value {
    Value::Tuple(items.iter().cloned().map(Into::into).collect())
}

/// Builds the hypergraph for `spec`.
pub fn build_microgrid_chg(spec: &GridSpec) -> Result<MicrogridModel, MicrogridError> {
    spec.validate()?;
    let mut b = Builder {
        graph: GraphBuilder::new(),
        report: InstantiationReport::default(),
        category: String::new(),
        edges: Vec::new(),
    };
    constants(&mut b)?;
    settings(&mut b, spec)?;
    timing(&mut b, spec)?;
    general(&mut b, spec)?;
    for (i, actor) in spec.actors.iter().enumerate() {
        general_actor(&mut b, spec, i)?;
        match actor {
            ActorSpec::Pv { .. } => pv(&mut b, actor)?,
            ActorSpec::Bess { .. } => bess(&mut b, actor)?,
            ActorSpec::Generator { .. } => generator(&mut b, actor)?,
            ActorSpec::Load { .. } => load(&mut b, actor, spec.load_scale)?,
            ActorSpec::Building { .. } => building(&mut b, actor)?,
            ActorSpec::Utility { .. } => utility(&mut b, actor)?,
        }
    }
    let mut graph = b.graph;
    for edge in b.edges {
        graph.edge(edge)?;
    }
    let spec_json = serde_json::to_string(spec).expect("grid specs serialize");
    graph.metadata(crate::SPEC_METADATA_KEY, spec_json);
    for table in spec.required_tables() {
        graph.metadata(
            format!("{}{table}", chg_core::model_io::TABLE_PREFIX),
            format!("{table}.csv"),
        );
    }
    Ok(MicrogridModel {
        graph: graph.build(),
        report: b.report,
    })
}

fn constants(b: &mut Builder) -> Result<(), GraphError> {
    b.section("constants");
    b.constant("days in year", "day", "Number of days in a year", 365i64)?;
    b.constant(
        "days in leap year",
        "day",
        "Number of days in a leap year",
        366i64,
    )?;
    b.constant("hours in day", "hr", "Number of hours in a day", 24i64)?;
    b.derived("hours in year", "hr", "Number of hours in a year")?;
    b.derived("hours in leap year", "hr", "Number of hours in a leap year")?;
    b.constant("seconds in minute", "s", "Number of seconds in a minute", 60i64)?;
    b.constant("minutes in hour", "min", "Number of minutes in an hour", 60i64)?;
    b.derived("seconds in hour", "s", "Number of seconds in an hour")?;
    b.constant(
        "tolerance",
        "",
        "Float tolerance",
        crate::invariants::POWER_TOLERANCE,
    )?;
    b.expr(
        "calc hours in year",
        "hours in year",
        "d * h",
        &[("d", "days in year"), ("h", "hours in day")],
    )?;
    b.expr(
        "calc hours in leap year",
        "hours in leap year",
        "d * h",
        &[("d", "days in leap year"), ("h", "hours in day")],
    )?;
    b.expr(
        "calc seconds in hour",
        "seconds in hour",
        "s * m",
        &[("s", "seconds in minute"), ("m", "minutes in hour")],
    )
}

fn settings(b: &mut Builder, spec: &GridSpec) -> Result<(), GraphError> {
    b.section("general settings");
    b.constant(
        "use random date",
        "",
        "True if the start date is set randomly",
        spec.use_random_date,
    )?;
    b.constant(
        "has random failure",
        "",
        "True if random failure is allowed",
        spec.has_random_failure,
    )?;
    b.constant(
        "island mode",
        "",
        "True if all utility grids are disconnected",
        spec.island_mode,
    )?;
    b.constant(
        "min year",
        "year",
        "Minimum year of simulation data",
        spec.min_year,
    )?;
    b.constant(
        "max year",
        "year",
        "Maximum year of simulation data",
        spec.max_year,
    )
}

fn timing(b: &mut Builder, spec: &GridSpec) -> Result<(), GraphError> {
    b.section("timing");
    b.constant("time", "s", "Total seconds passed during simulation", 0i64)?;
    b.constant(
        "time step",
        "s",
        "Seconds since last time calculation",
        i64::from(spec.time_step),
    )?;
    b.derived("time step hours", "hr", "Length of one frame in hours")?;
    let fixed = |v: i64| (!spec.use_random_date).then_some(Value::Int(v));
    b.node(
        "start year",
        "year",
        "Starting year for simulation",
        fixed(spec.start.year),
    )?;
    b.node(
        "start day",
        "day",
        "Starting day for simulation (1-366)",
        fixed(spec.start.day),
    )?;
    b.node(
        "start hour",
        "hr",
        "Starting hour for simulation (0-23)",
        fixed(spec.start.hour),
    )?;
    b.derived("calendar", "", "Calendar position of the current frame")?;
    b.derived("hour", "hr", "Current hour (0-23)")?;
    b.derived("day", "day", "Current day of the year (1-366)")?;
    b.derived("year", "year", "Current year")?;
    b.derived("elapsed minutes", "min", "Number of minutes that have passed")?;
    b.derived("elapsed hours", "hr", "Number of hours that have passed")?;
    b.derived(
        "num leap years",
        "year",
        "Number of leap years entered since the start year",
    )?;
    b.derived("is leap year", "", "True if the current year is a leap year")?;
    b.derived("hour index", "hr", "Current hour of the year (1-8784)")?;

    b.edge(
        Hyperedge::new("advance time", "time", Relation::expr("t + dt").expect("parses"))
            .source("t", "time")
            .source("dt", "time step")
            .advancing(),
    )?;
    b.expr(
        "calc time step hours",
        "time step hours",
        "dt / s",
        &[("dt", "time step"), ("s", "seconds in hour")],
    )?;
    let random = Relation::expr("r").expect("parses");
    b.edge(
        Hyperedge::new(
            "draw start year",
            "start year",
            Relation::expr("lo + floor(uniform(0, 1) * (hi - lo + 1))").expect("parses"),
        )
        .source("lo", "min year")
        .source("hi", "max year")
        .source("r", "use random date")
        .viable_when(random.clone()),
    )?;
    b.edge(
        Hyperedge::new(
            "draw start day",
            "start day",
            Relation::expr("1 + floor(uniform(0, 1) * if(is_leap_year(y), dl, d))").expect("parses"),
        )
        .source("y", "start year")
        .source("d", "days in year")
        .source("dl", "days in leap year")
        .source("r", "use random date")
        .viable_when(random.clone()),
    )?;
    b.edge(
        Hyperedge::new(
            "draw start hour",
            "start hour",
            Relation::expr("floor(uniform(0, 1) * h)").expect("parses"),
        )
        .source("h", "hours in day")
        .source("r", "use random date")
        .viable_when(random),
    )?;
    b.expr(
        "calc calendar",
        "calendar",
        "timing(t, y, d, h)",
        &[
            ("t", "time"),
            ("y", "start year"),
            ("d", "start day"),
            ("h", "start hour"),
        ],
    )?;
    let fields = crate::builtins::TIMING_FIELDS;
    for (i, field) in fields.iter().enumerate() {
        b.expr(
            &format!("read {field}"),
            field,
            &format!("at(c, {i})"),
            &[("c", "calendar")],
        )?;
    }
    b.expr(
        "calc elapsed minutes",
        "elapsed minutes",
        "t / s",
        &[("t", "time"), ("s", "seconds in minute")],
    )
}

fn general(b: &mut Builder, spec: &GridSpec) -> Result<(), GraphError> {
    b.section("general simulation");
    let names: Vec<&str> = spec.names();
    b.derived(STATE_VECTOR, "kW", "State from each actor on the grid")?;
    b.constant("names", "", "Ordered names of actors on the grid", tuple(&names))?;
    b.derived(
        "failing actors",
        "",
        "Failure status of each actor, in name order",
    )?;
    b.derived("is islanded", "", "True if the utility grid is disconnected")?;
    let matrix = Value::Tuple(spec.connectivity.iter().map(|row| tuple(row)).collect());
    b.constant(
        "connectivity matrix",
        "",
        "Cell ij: actor i receives from actor j",
        matrix,
    )?;
    b.derived("dispatch", "", "Merit-order dispatch of the current frame")?;
    b.derived("unmet critical", "kW", "Critical demand left unserved")?;
    b.derived("shed load", "kW", "Demand left unserved")?;

    let params: Vec<String> = (0..names.len()).map(|i| format!("f{i}")).collect();
    let failing: Vec<String> = names.iter().map(|n| actor_node("is failing", n)).collect();
    let sources: Vec<(&str, &str)> = params
        .iter()
        .map(String::as_str)
        .zip(failing.iter().map(String::as_str))
        .collect();
    b.expr(
        "collect failing actors",
        "failing actors",
        &format!("tuple({})", params.join(", ")),
        &sources,
    )?;

    // islanded when cut off, or when every utility is down
    let utilities: Vec<usize> = (0..names.len())
        .filter(|&i| spec.actors[i].kind() == ActorKind::Utility)
        .collect();
    let mut islanded_sources = vec![("island", "island mode")];
    let down = if utilities.is_empty() {
        "true".to_owned()
    } else {
        let terms: Vec<&str> = utilities.iter().map(|&i| params[i].as_str()).collect();
        for &i in &utilities {
            islanded_sources.push((params[i].as_str(), failing[i].as_str()));
        }
        terms.join(" and ")
    };
    b.expr(
        "calc is islanded",
        "is islanded",
        &format!("island or ({down})"),
        &islanded_sources,
    )?;

    let supply: Vec<String> = names.iter().map(|n| actor_node("supply tuple", n)).collect();
    let demand: Vec<String> = names.iter().map(|n| actor_node("demand tuple", n)).collect();
    let s_params: Vec<String> = (0..names.len()).map(|i| format!("s{i}")).collect();
    let d_params: Vec<String> = (0..names.len()).map(|i| format!("d{i}")).collect();
    let mut args = vec!["names", "conn", "islanded", "failing"];
    args.extend(s_params.iter().map(String::as_str));
    args.extend(d_params.iter().map(String::as_str));
    let mut edge = Hyperedge::new("dispatch", "dispatch", Relation::builtin("dispatch", &args))
        .source("names", "names")
        .source("conn", "connectivity matrix")
        .source("islanded", "is islanded")
        .source("failing", "failing actors");
    for (p, n) in s_params.iter().zip(&supply).chain(d_params.iter().zip(&demand)) {
        edge = edge.source(p, n);
    }
    b.edge(edge)?;
    for (i, field) in crate::builtins::DISPATCH_FIELDS.iter().enumerate() {
        if matches!(*field, "flows" | "critical flows") {
            continue;
        }
        b.expr(
            &format!("read {field}"),
            field,
            &format!("at(d, {i})"),
            &[("d", "dispatch")],
        )?;
    }
    Ok(())
}

fn general_actor(b: &mut Builder, spec: &GridSpec, i: usize) -> Result<(), GraphError> {
    let actor = &spec.actors[i];
    let x = actor.name();
    let kind = actor.kind();
    let id = |entry: &str| actor_node(entry, x);
    b.section(format!("actor {x}"));

    b.constant(&id("name"), "", &format!("Label for {x}"), x)?;
    b.derived(&id("state"), "kW", "Power receiving (-) or providing (+)")?;
    b.expr(
        &format!("read state {x}"),
        &id("state"),
        &format!("at(v, {i})"),
        &[("v", STATE_VECTOR)],
    )?;

    if kind == ActorKind::Utility {
        b.derived(
            &id("is connected"),
            "",
            &format!("True if {x} is connected to grid"),
        )?;
        b.expr(
            &format!("connect {x}"),
            &id("is connected"),
            "not island",
            &[("island", "island mode")],
        )?;
    } else {
        let wired = (0..spec.actors.len()).any(|j| spec.connectivity[i][j] || spec.connectivity[j][i]);
        b.constant(
            &id("is connected"),
            "",
            &format!("True if {x} is connected to grid"),
            wired,
        )?;
    }

    for (j, other) in spec.actors.iter().enumerate() {
        if i == j {
            continue;
        }
        let y = other.name();
        let receives = format!("{x} receives from {y}");
        let receiving = format!("{x} receiving from {y}");
        b.derived(&receives, "", &format!("True if {x} receives power from {y}"))?;
        b.derived(
            &receiving,
            "",
            &format!("True if {x} is actively receiving from {y}"),
        )?;
        b.expr(
            &format!("read {receives}"),
            &receives,
            &format!("at(at(m, {i}), {j})"),
            &[("m", "connectivity matrix")],
        )?;
        b.expr(
            &format!("calc {receiving}"),
            &receiving,
            &format!("at(at(at(d, 2), {i}), {j}) > tol"),
            &[("d", "dispatch"), ("tol", "tolerance")],
        )?;
    }

    let failing = id("is failing");
    b.constant(&failing, "", &format!("True if {x} is failing"), false)?;
    b.constant(
        &id("prob failing"),
        "",
        &format!("Probability of {x} failing"),
        spec.prob_failing[i],
    )?;
    b.constant(
        &id("prob fixed"),
        "",
        &format!("Probability of failing {x} getting fixed"),
        spec.prob_fixed[i],
    )?;
    b.edge(
        Hyperedge::new(
            format!("fail {x}"),
            failing.clone(),
            Relation::builtin("failure_step", &["f", "pf", "px"]),
        )
        .source("f", failing.clone())
        .source("pf", id("prob failing"))
        .source("px", id("prob fixed"))
        .source("random", "has random failure")
        .viable_when(Relation::expr("random").expect("parses"))
        .advancing(),
    )?;
    b.edge(
        Hyperedge::new(format!("hold {x}"), failing.clone(), Relation::identity("f"))
            .source("f", failing.clone())
            .source("random", "has random failure")
            .viable_when(Relation::expr("not random").expect("parses"))
            .advancing(),
    )?;

    // entries an actor kind never produces are fixed at zero
    let fixed: &[&str] = match kind {
        ActorKind::Pv => &["cost", "req demand", "max demand", "benefit"],
        ActorKind::Bess => &["req demand", "benefit"],
        ActorKind::Generator | ActorKind::Utility => &["req demand", "max demand", "benefit"],
        ActorKind::Load => &["supply", "cost"],
        ActorKind::Building => &["supply", "cost", "req demand"],
    };
    let entry = |b: &mut Builder, name: &str, unit: &str, description: String| {
        let initial = fixed.contains(&name).then_some(Value::Real(0.0));
        b.node(&id(name), unit, &description, initial)
    };
    entry(b, "supply", "kW", format!("Current energy that {x} can supply"))?;
    entry(b, "cost", "$/kWh", format!("Cost of generating {x}'s supply"))?;
    entry(
        b,
        "req demand",
        "kW",
        format!("Minimum power required for {x} to operate"),
    )?;
    entry(b, "max demand", "kW", format!("Maximum power {x} can receive"))?;
    entry(b, "benefit", "$/kWh", format!("Benefit of meeting {x}'s demand"))?;
    b.constant(
        &id("is cost per unit"),
        "",
        "True if supply cost is per unit vs. lump",
        true,
    )?;
    b.derived(
        &id("supply tuple"),
        "",
        &format!("Values for calculating {x} supply"),
    )?;
    b.expr(
        &format!("pack supply {x}"),
        &id("supply tuple"),
        &format!("tuple(\"{}\", s, c, on, unit)", kind.code()),
        &[
            ("s", &id("supply")),
            ("c", &id("cost")),
            ("on", &id("is connected")),
            ("unit", &id("is cost per unit")),
        ],
    )?;
    b.derived(
        &id("demand tuple"),
        "",
        &format!("Values for calculating {x}'s demand"),
    )?;
    b.expr(
        &format!("pack demand {x}"),
        &id("demand tuple"),
        "tuple(r, m, v)",
        &[
            ("r", &id("req demand")),
            ("m", &id("max demand")),
            ("v", &id("benefit")),
        ],
    )?;
    Ok(())
}

fn pv(b: &mut Builder, actor: &ActorSpec) -> Result<(), GraphError> {
    let ActorSpec::Pv {
        name,
        area,
        efficiency,
    } = actor
    else {
        unreachable!("pv actor")
    };
    if !b.graph.contains_node("sunlight") {
        b.section("sunlight");
        b.constant("sunlight directory", "", "Directory for solar data", ".")?;
        b.constant(
            "sunlight filename",
            "",
            "Filename for sunlight CSV file",
            format!("{SOLAR_TABLE}.csv"),
        )?;
        b.constant(
            "sunlight data",
            "",
            "Yearly sunlight values by hour",
            Value::Table(TableHandle::new(SOLAR_TABLE)),
        )?;
        b.constant(
            "sunlight data label",
            "",
            "Name of column for sunlight data",
            SUNLIGHT_COLUMN,
        )?;
        b.derived("sunlight", "Wh/m2", "Energy from sun for a specific hour")?;
        b.expr(
            "read sunlight",
            "sunlight",
            &format!("lookup(t, \"{HOUR_KEY}\", h, col)"),
            &[
                ("t", "sunlight data"),
                ("h", "hour index"),
                ("col", "sunlight data label"),
            ],
        )?;
    }
    b.section(format!("actor {name}"));
    let id = |entry: &str| actor_node(entry, name);
    b.constant(&id("area"), "m2", &format!("Area of {name}"), *area)?;
    b.constant(
        &id("efficiency"),
        "",
        &format!("Efficiency of {name}"),
        *efficiency,
    )?;
    b.expr(
        &format!("calc supply {name}"),
        &id("supply"),
        "pv_supply(i, a, eta)",
        &[("i", "sunlight"), ("a", &id("area")), ("eta", &id("efficiency"))],
    )
}

fn bess(b: &mut Builder, actor: &ActorSpec) -> Result<(), GraphError> {
    let ActorSpec::Bess {
        name,
        charge_capacity,
        starting_level,
        charge_efficiency,
        max_output,
        max_charge_rate,
        scarcity_factor,
        trickle_prop,
        base_cost,
    } = actor
    else {
        unreachable!("bess actor")
    };
    let id = |entry: &str| actor_node(entry, name);
    b.constant(
        &id("charge level"),
        "kWh",
        &format!("Amount of charge in {name}"),
        *starting_level,
    )?;
    b.constant(
        &id("charge capacity"),
        "kWh",
        &format!("Max charge {name} can hold"),
        *charge_capacity,
    )?;
    b.constant(
        &id("charge efficiency"),
        "",
        "Efficiency of converting power to SOC",
        *charge_efficiency,
    )?;
    b.constant(
        &id("max output"),
        "kW",
        &format!("Maximum power {name} can output"),
        *max_output,
    )?;
    b.constant(
        &id("max charge rate"),
        "kW",
        &format!("Maximum power {name} can receive"),
        *max_charge_rate,
    )?;
    b.constant(
        &id("scarcity factor"),
        "",
        &format!("Cost gain of using depleted {name}"),
        *scarcity_factor,
    )?;
    b.constant(
        &id("trickle prop"),
        "",
        "SOC to reduce to trickle charge",
        *trickle_prop,
    )?;
    b.constant(
        &id("base cost"),
        "$/kWh",
        &format!("Cost of {name}'s energy when full"),
        *base_cost,
    )?;
    b.derived(&id("is charging"), "", &format!("True if {name} is charging"))?;
    b.derived(&id("soc"), "", &format!("State of charge for {name}"))?;

    b.edge(
        Hyperedge::new(
            format!("integrate {name}"),
            id("charge level"),
            Relation::expr("at(bess_step(level, cap, p, eta, out, rate, dt), 0)").expect("parses"),
        )
        .source("level", id("charge level"))
        .source("cap", id("charge capacity"))
        .source("p", id("state"))
        .source("eta", id("charge efficiency"))
        .source("out", id("max output"))
        .source("rate", id("max charge rate"))
        .source("dt", "time step hours")
        .advancing(),
    )?;
    b.expr(
        &format!("calc soc {name}"),
        &id("soc"),
        "level / cap",
        &[("level", &id("charge level")), ("cap", &id("charge capacity"))],
    )?;
    b.expr(
        &format!("calc is charging {name}"),
        &id("is charging"),
        "p < 0",
        &[("p", &id("state"))],
    )?;
    b.expr(
        &format!("calc supply {name}"),
        &id("supply"),
        "bess_supply(level, out, dt)",
        &[
            ("level", &id("charge level")),
            ("out", &id("max output")),
            ("dt", "time step hours"),
        ],
    )?;
    b.expr(
        &format!("price {name}"),
        &id("cost"),
        "bess_cost(base, k, soc)",
        &[
            ("base", &id("base cost")),
            ("k", &id("scarcity factor")),
            ("soc", &id("soc")),
        ],
    )?;
    b.expr(
        &format!("calc max demand {name}"),
        &id("max demand"),
        "trickle_headroom(level, cap, eta, rate, trickle, dt)",
        &[
            ("level", &id("charge level")),
            ("cap", &id("charge capacity")),
            ("eta", &id("charge efficiency")),
            ("rate", &id("max charge rate")),
            ("trickle", &id("trickle prop")),
            ("dt", "time step hours"),
        ],
    )
}

fn generator(b: &mut Builder, actor: &ActorSpec) -> Result<(), GraphError> {
    let ActorSpec::Generator {
        name,
        fuel_capacity,
        starting_fuel,
        max_output,
        max_consumption,
        cost,
        prob_refueling,
    } = actor
    else {
        unreachable!("generator actor")
    };
    let id = |entry: &str| actor_node(entry, name);
    b.constant(
        &id("next refuel hour"),
        "hr",
        &format!("Next hour {name} will be refueled"),
        -1i64,
    )?;
    b.constant(
        &id("prob refueling"),
        "",
        &format!("Probability of refueling {name} during the day"),
        *prob_refueling,
    )?;
    b.constant(
        &id("fuel level"),
        "L",
        &format!("Amount of fuel in {name}"),
        *starting_fuel,
    )?;
    b.derived(&id("out of fuel"), "", &format!("True if {name} is out of fuel"))?;
    b.constant(
        &id("starting fuel level"),
        "L",
        &format!("Starting fuel level in {name}"),
        *starting_fuel,
    )?;
    b.constant(
        &id("fuel capacity"),
        "L",
        &format!("Max amount of fuel in {name}"),
        *fuel_capacity,
    )?;
    b.constant(
        &id("max output"),
        "kW",
        &format!("Max power {name} can output"),
        *max_output,
    )?;
    b.derived(&id("consumption"), "L", &format!("Fuel consumption for {name}"))?;
    b.constant(
        &id("max consumption"),
        "L/h",
        &format!("Max fuel consumption for {name}"),
        *max_consumption,
    )?;
    b.derived(
        &id("refuel now"),
        "",
        &format!("True if {name} is refueled this frame"),
    )?;
    b.derived(
        &id("generator step"),
        "",
        &format!("Fuel update of {name} over the frame"),
    )?;

    b.expr(
        &format!("calc refuel now {name}"),
        &id("refuel now"),
        "next >= 0 and hours >= next",
        &[("next", &id("next refuel hour")), ("hours", "elapsed hours")],
    )?;
    b.edge(
        Hyperedge::new(
            format!("schedule refuel {name}"),
            id("next refuel hour"),
            Relation::builtin("next_refuel_hour", &["next", "hours", "dt", "p"]),
        )
        .source("next", id("next refuel hour"))
        .source("hours", "elapsed hours")
        .source("dt", "time step hours")
        .source("p", id("prob refueling"))
        .advancing(),
    )?;
    b.expr(
        &format!("calc generator step {name}"),
        &id("generator step"),
        "generator_step(fuel, p, out, burn, dt, refuel, cap)",
        &[
            ("fuel", &id("fuel level")),
            ("p", &id("state")),
            ("out", &id("max output")),
            ("burn", &id("max consumption")),
            ("dt", "time step hours"),
            ("refuel", &id("refuel now")),
            ("cap", &id("fuel capacity")),
        ],
    )?;
    b.edge(
        Hyperedge::new(
            format!("burn {name}"),
            id("fuel level"),
            Relation::expr("at(step, 0)").expect("parses"),
        )
        .source("step", id("generator step"))
        .advancing(),
    )?;
    b.expr(
        &format!("calc consumption {name}"),
        &id("consumption"),
        "at(step, 2)",
        &[("step", &id("generator step"))],
    )?;
    b.expr(
        &format!("calc out of fuel {name}"),
        &id("out of fuel"),
        "fuel <= 0",
        &[("fuel", &id("fuel level"))],
    )?;
    b.expr(
        &format!("calc supply {name}"),
        &id("supply"),
        "generator_supply(fuel, out, burn, dt)",
        &[
            ("fuel", &id("fuel level")),
            ("out", &id("max output")),
            ("burn", &id("max consumption")),
            ("dt", "time step hours"),
        ],
    )?;
    b.constant(
        &id("unit cost"),
        "$/kWh",
        &format!("Price of {name}'s energy"),
        *cost,
    )?;
    b.expr(
        &format!("price {name}"),
        &id("cost"),
        "c",
        &[("c", &id("unit cost"))],
    )
}

fn load(b: &mut Builder, actor: &ActorSpec, scale: f64) -> Result<(), GraphError> {
    let ActorSpec::Load {
        name,
        normal_load,
        critical_load,
        benefit,
    } = actor
    else {
        unreachable!("load actor")
    };
    let id = |entry: &str| actor_node(entry, name);
    b.constant(
        &id("normal load"),
        "kW",
        &format!("Normal load (demand) of {name}"),
        normal_load * scale,
    )?;
    b.constant(
        &id("critical load"),
        "kW",
        &format!("Critical load (demand) of {name}"),
        critical_load * scale,
    )?;
    b.constant(
        &id("unit benefit"),
        "$/kWh",
        &format!("Value of serving {name}"),
        *benefit,
    )?;
    b.expr(
        &format!("calc req demand {name}"),
        &id("req demand"),
        "c",
        &[("c", &id("critical load"))],
    )?;
    b.expr(
        &format!("calc max demand {name}"),
        &id("max demand"),
        "n",
        &[("n", &id("normal load"))],
    )?;
    b.expr(
        &format!("calc benefit {name}"),
        &id("benefit"),
        "v",
        &[("v", &id("unit benefit"))],
    )
}

fn building(b: &mut Builder, actor: &ActorSpec) -> Result<(), GraphError> {
    let ActorSpec::Building {
        name,
        load_table,
        normal_key,
        lights_key,
        equipment_key,
    } = actor
    else {
        unreachable!("building actor")
    };
    if !b.graph.contains_node("load directory") {
        let here = std::mem::replace(&mut b.category, "building data".into());
        b.constant("load directory", "", "Directory for building load CSV data", ".")?;
        b.category = here;
    }
    let id = |entry: &str| actor_node(entry, name);
    b.constant(&id("type"), "", &format!("Type of {name}"), "commercial")?;
    b.constant(
        &id("load data"),
        "",
        &format!("Hourly load table for {name}"),
        Value::Table(TableHandle::new(load_table.as_str())),
    )?;
    b.constant(
        &id("building filename"),
        "",
        &format!("Filename for {name} load CSV data"),
        format!("{load_table}.csv"),
    )?;
    b.constant(
        &id("normal key"),
        "",
        "Normal load column in CSV data",
        normal_key.as_str(),
    )?;
    b.constant(
        &id("lights key"),
        "",
        "Lights load column in CSV data",
        lights_key.as_str(),
    )?;
    b.constant(
        &id("equipment key"),
        "",
        "Equipment load column in CSV data",
        equipment_key.as_str(),
    )?;
    for (entry, key, what) in [
        ("normal load", "normal key", "Normal"),
        ("lights load", "lights key", "Lights"),
        ("equipment load", "equipment key", "Equipment"),
    ] {
        b.derived(&id(entry), "kW", &format!("{what} load of {name}"))?;
        b.expr(
            &format!("read {entry} {name}"),
            &id(entry),
            &format!("lookup(t, \"{HOUR_KEY}\", h, col)"),
            &[("t", &id("load data")), ("h", "hour index"), ("col", &id(key))],
        )?;
    }
    b.expr(
        &format!("calc max demand {name}"),
        &id("max demand"),
        "n",
        &[("n", &id("normal load"))],
    )?;
    b.constant(
        &id("unit benefit"),
        "$/kWh",
        &format!("Value of serving {name}"),
        BUILDING_BENEFIT,
    )?;
    b.expr(
        &format!("calc benefit {name}"),
        &id("benefit"),
        "v",
        &[("v", &id("unit benefit"))],
    )
}

fn utility(b: &mut Builder, actor: &ActorSpec) -> Result<(), GraphError> {
    let ActorSpec::Utility {
        name,
        cost,
        max_import,
    } = actor
    else {
        unreachable!("utility actor")
    };
    let id = |entry: &str| actor_node(entry, name);
    b.constant(
        &id("max import"),
        "kW",
        &format!("Most power {name} can deliver"),
        *max_import,
    )?;
    b.constant(
        &id("unit cost"),
        "$/kWh",
        &format!("Price of {name}'s energy"),
        *cost,
    )?;
    b.expr(
        &format!("calc supply {name}"),
        &id("supply"),
        "m",
        &[("m", &id("max import"))],
    )?;
    b.expr(
        &format!("price {name}"),
        &id("cost"),
        "c",
        &[("c", &id("unit cost"))],
    )
}

/// Synthetic tables for every table `spec` needs, one leap year long.
pub fn synthetic_tables(spec: &GridSpec, seed: u64) -> TableStore {
    let hours = chg_core::model_io::synthetic::HOURS_PER_LEAP_YEAR;
    let mut store = TableStore::new();
    for (k, name) in spec.required_tables().into_iter().enumerate() {
        let table_seed = seed.wrapping_add(k as u64);
        let table = if name == SOLAR_TABLE {
            generate_synthetic_solar(hours, table_seed, SYNTHETIC_PEAK, 0.1)
        } else {
            let generated =
                generate_synthetic_building_load(hours, table_seed, BuildingLoadParams::default());
            chg_core::model_io::Table::new(&name, generated.columns().to_vec(), generated.rows().to_vec())
                .expect("same shape")
        };
        store.insert(table);
    }
    store
}
