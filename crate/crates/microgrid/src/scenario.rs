use std::fmt;

use chg_core::model_io::{Column, ColumnType, Table, TableStore};
use chg_core::solver::{Inputs, Solver, SolverConfig};
use chg_core::Value;

use crate::build::{actor_node, build_microgrid_chg, synthetic_tables, InstantiationReport, STATE_VECTOR};
use crate::builtins::{bid_from_value, dispatch_from_value, microgrid_registry, offer_from_value};
use crate::dispatch::{dispatch, Bid, Dispatch, DispatchProblem, Offer};
use crate::grid::{ActorKind, ActorSpec, GridSpec};
use crate::invariants::{self, POWER_TOLERANCE};
use crate::MicrogridError;

/// Grid state over one frame, with the dispatch inputs that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub iteration: u64,
    pub hour_index: i64,
    /// kW per actor, providing positive and receiving negative.
    pub state_vector: Vec<f64>,
    pub failing: Vec<bool>,
    /// Per battery, at the start of the frame.
    pub soc: Vec<f64>,
    /// Per generator, L at the start of the frame.
    pub fuel_level: Vec<f64>,
    /// Per generator, whether it is refilled at the end of the frame.
    pub refueling: Vec<bool>,
    pub unmet_critical: f64,
    pub shed: f64,
    pub islanded: bool,
    pub offers: Vec<Offer>,
    pub bids: Vec<Bid>,
    pub dispatch: Dispatch,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub spec: GridSpec,
    pub frames: Vec<GridState>,
    pub firings: u64,
    pub report: InstantiationReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantViolation {
    pub frame: u64,
    pub rule: &'static str,
    pub message: String,
}

impl fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "frame {}: {}: {}", self.frame, self.rule, self.message)
    }
}

fn actors_of(spec: &GridSpec, kind: ActorKind) -> Vec<&str> {
    spec.actors
        .iter()
        .filter(|a| a.kind() == kind)
        .map(ActorSpec::name)
        .collect()
}

/// Runs `hours` frames on synthetic solar and building data seeded by `seed`.
pub fn run_scenario(spec: &GridSpec, hours: u64, seed: u64) -> Result<ScenarioRun, MicrogridError> {
    let config = SolverConfig::default().with_seed(seed);
    run_scenario_with(spec, hours, &config, synthetic_tables(spec, seed))
}

/// Runs `hours` frames with the given solver settings and tables.
pub fn run_scenario_with(
    spec: &GridSpec,
    hours: u64,
    config: &SolverConfig,
    tables: TableStore,
) -> Result<ScenarioRun, MicrogridError> {
    if hours == 0 {
        return Err(MicrogridError::ContractViolation(
            "a scenario needs at least one hour".into(),
        ));
    }
    let model = build_microgrid_chg(spec)?;
    for name in spec.required_tables() {
        if tables.get(&name).is_none() {
            return Err(MicrogridError::MissingTable(name));
        }
    }
    let solver = Solver::new(microgrid_registry(), tables);

    let names = spec.names();
    let batteries = actors_of(spec, ActorKind::Bess);
    let generators = actors_of(spec, ActorKind::Generator);
    let mut targets: Vec<String> = [
        STATE_VECTOR,
        "dispatch",
        "hour index",
        "is islanded",
        "failing actors",
    ]
    .map(String::from)
    .to_vec();
    targets.extend(names.iter().map(|n| actor_node("supply tuple", n)));
    targets.extend(names.iter().map(|n| actor_node("demand tuple", n)));
    targets.extend(batteries.iter().map(|n| actor_node("soc", n)));
    targets.extend(generators.iter().map(|n| actor_node("fuel level", n)));
    targets.extend(generators.iter().map(|n| actor_node("refuel now", n)));
    let target_refs: Vec<&str> = targets.iter().map(String::as_str).collect();

    let series = solver.solve_frames(&model.graph, &target_refs, &Inputs::new(), config, hours)?;
    let n = names.len();
    let frames = series
        .rows
        .iter()
        .enumerate()
        .map(|(k, row)| frame(k as u64, row, n, batteries.len(), generators.len()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ScenarioRun {
        spec: spec.clone(),
        frames,
        firings: series.firings,
        report: model.report,
    })
}

fn frame(
    k: u64,
    row: &[Value],
    n: usize,
    batteries: usize,
    generators: usize,
) -> Result<GridState, MicrogridError> {
    let bad = |what: &str| MicrogridError::Malformed(format!("frame {k}: {what}"));
    let reals = |vals: &[Value], what: &str| -> Result<Vec<f64>, MicrogridError> {
        vals.iter().map(|v| v.as_f64().ok_or_else(|| bad(what))).collect()
    };
    let d = dispatch_from_value(&row[1]).map_err(|e| bad(&e.to_string()))?;
    let state_vector = reals(
        row[0].as_tuple().ok_or_else(|| bad("state vector"))?,
        "state vector",
    )?;
    let failing = row[4]
        .as_tuple()
        .ok_or_else(|| bad("failing actors"))?
        .iter()
        .map(|v| v.as_bool().ok_or_else(|| bad("failing actors")))
        .collect::<Result<Vec<_>, _>>()?;
    let mut at = 5;
    let mut take = |count: usize| {
        let slice = &row[at..at + count];
        at += count;
        slice
    };
    let offers = take(n)
        .iter()
        .map(offer_from_value)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| bad(&e.to_string()))?;
    let bids = take(n)
        .iter()
        .map(bid_from_value)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| bad(&e.to_string()))?;
    let soc = reals(take(batteries), "soc")?;
    let fuel_level = reals(take(generators), "fuel level")?;
    let refueling = take(generators)
        .iter()
        .map(|v| v.as_bool().ok_or_else(|| bad("refuel now")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GridState {
        iteration: k,
        hour_index: row[2].as_i64().ok_or_else(|| bad("hour index"))?,
        state_vector,
        failing,
        soc,
        fuel_level,
        refueling,
        unmet_critical: d.unmet_critical,
        shed: d.shed,
        islanded: row[3].as_bool().ok_or_else(|| bad("is islanded"))?,
        offers,
        bids,
        dispatch: d,
    })
}

impl ScenarioRun {
    pub fn names(&self) -> Vec<&str> {
        self.spec.names()
    }

    pub fn batteries(&self) -> Vec<&str> {
        actors_of(&self.spec, ActorKind::Bess)
    }

    pub fn generators(&self) -> Vec<&str> {
        actors_of(&self.spec, ActorKind::Generator)
    }

    /// Power series of one actor, kW per frame.
    pub fn power(&self, actor: &str) -> Option<Vec<f64>> {
        let i = self.spec.index_of(actor)?;
        Some(self.frames.iter().map(|f| f.state_vector[i]).collect())
    }

    /// One row per frame: hour, hour index, power per actor, soc per
    /// battery, fuel per generator, failure flags, unmet critical demand.
    pub fn to_table(&self) -> Table {
        let col = |name: String, ty| Column { name, ty };
        let names = self.names();
        let mut columns = vec![
            col("hour".into(), ColumnType::Integer),
            col("hour_index".into(), ColumnType::Integer),
        ];
        columns.extend(names.iter().map(|n| col(format!("{n}_kw"), ColumnType::Real)));
        columns.extend(
            self.batteries()
                .iter()
                .map(|n| col(format!("{n}_soc"), ColumnType::Real)),
        );
        columns.extend(
            self.generators()
                .iter()
                .map(|n| col(format!("{n}_fuel_l"), ColumnType::Real)),
        );
        columns.extend(
            names
                .iter()
                .map(|n| col(format!("{n}_failing"), ColumnType::Boolean)),
        );
        columns.push(col("unmet_critical_kw".into(), ColumnType::Real));
        let rows = self
            .frames
            .iter()
            .map(|f| {
                let mut row = vec![Value::Int(f.iteration as i64), Value::Int(f.hour_index)];
                row.extend(f.state_vector.iter().map(|&x| Value::Real(x)));
                row.extend(f.soc.iter().map(|&x| Value::Real(x)));
                row.extend(f.fuel_level.iter().map(|&x| Value::Real(x)));
                row.extend(f.failing.iter().map(|&b| Value::Bool(b)));
                row.push(Value::Real(f.unmet_critical));
                row
            })
            .collect();
        Table::new("microgrid", columns, rows).expect("rows match columns")
    }

    /// Every invariant violation across the run; empty when all hold.
    pub fn check_invariants(&self) -> Vec<InvariantViolation> {
        let mut out = Vec::new();
        let names: Vec<String> = self.names().into_iter().map(String::from).collect();
        let capacities: Vec<f64> = self
            .spec
            .actors
            .iter()
            .filter_map(|a| match a {
                ActorSpec::Generator { fuel_capacity, .. } => Some(*fuel_capacity),
                _ => None,
            })
            .collect();
        for (k, f) in self.frames.iter().enumerate() {
            let mut flag = |rule: &'static str, r: Result<(), String>| {
                if let Err(message) = r {
                    out.push(InvariantViolation {
                        frame: k as u64,
                        rule,
                        message,
                    });
                }
            };
            let problem = DispatchProblem {
                names: &names,
                offers: &f.offers,
                bids: &f.bids,
                connectivity: &self.spec.connectivity,
                island_mode: f.islanded,
                failing: &f.failing,
            };
            let replayed = dispatch(&problem);
            flag(
                "dispatch replay",
                if replayed == f.dispatch && replayed.state_vector == f.state_vector {
                    Ok(())
                } else {
                    Err("graph dispatch differs from direct dispatch".into())
                },
            );
            flag("power balance", invariants::power_balance(&f.dispatch));
            flag(
                "failure coupling",
                invariants::failure_coupling(&problem, &f.dispatch),
            );
            flag("merit order", invariants::merit_order(&problem, &f.dispatch));
            flag("criticality", invariants::criticality(&problem, &f.dispatch));
            flag(
                "generator engagement",
                invariants::generator_engagement(&problem, &f.dispatch),
            );
            for &soc in &f.soc {
                flag(
                    "soc bounds",
                    if (0.0..=1.0).contains(&soc) {
                        Ok(())
                    } else {
                        Err(format!("soc {soc}"))
                    },
                );
            }
            for (g, &fuel) in f.fuel_level.iter().enumerate() {
                flag(
                    "fuel bounds",
                    if (0.0..=capacities[g] + POWER_TOLERANCE).contains(&fuel) {
                        Ok(())
                    } else {
                        Err(format!("fuel {fuel} L outside [0, {}]", capacities[g]))
                    },
                );
                if let Some(next) = self.frames.get(k + 1) {
                    let rose = next.fuel_level[g] > fuel;
                    flag(
                        "fuel monotonic",
                        if rose && !f.refueling[g] {
                            Err(format!(
                                "fuel rose from {fuel} to {} without a refuel",
                                next.fuel_level[g]
                            ))
                        } else {
                            Ok(())
                        },
                    );
                }
            }
        }
        out
    }
}
