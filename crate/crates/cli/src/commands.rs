use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chg_core::model_io::{
    load_csv_table, load_model, save_model, Column, ColumnType, LoadedModel, Table, TableStore, TABLE_PREFIX,
};
use chg_core::solver::{Inputs, Solver, SolverConfig};
use chg_core::{merge, Value};
use chg_microgrid::build::{BUILDING_TABLE, HOUR_KEY, SOLAR_TABLE, SUNLIGHT_COLUMN};
use chg_microgrid::{microgrid_registry, spec_from_metadata, synthetic_tables, GridSpec};

use crate::exit::Failure;
use crate::inputs::{parse_inputs, split_pair};
use crate::plot::{line_chart, Series};
use crate::{
    Command, ExportArgs, Format, GridSource, MergeArgs, MicrogridCommand, MonteCarloArgs, Outcome, Query,
    RunArgs, Scenario, SeriesArgs, SolveArgs,
};

/// Overrides the solver's firing cap.
pub const MAX_FIRINGS_VAR: &str = "CHG_MAX_FIRINGS";

pub fn run(command: Command) -> Outcome {
    match command {
        Command::Solve(args) => solve(args),
        Command::Series(args) => series(args),
        Command::Validate { model } => validate(&model),
        Command::Merge(args) => merge_models(args),
        Command::Montecarlo(args) => montecarlo(args),
        Command::Microgrid(MicrogridCommand::Run(args)) => microgrid_run(args),
        Command::Microgrid(MicrogridCommand::Export(args)) => microgrid_export(args),
    }
}

fn config(seed: u64) -> Result<SolverConfig, Failure> {
    let mut config = SolverConfig::default().with_seed(seed);
    if let Ok(raw) = std::env::var(MAX_FIRINGS_VAR) {
        config.max_firings = raw.trim().parse().map_err(|_| {
            Failure::usage(format!(
                "{MAX_FIRINGS_VAR} must be a non-negative integer, got '{raw}'"
            ))
        })?;
    }
    Ok(config)
}

struct Prepared {
    model: LoadedModel,
    solver: Solver,
    inputs: Inputs,
    config: SolverConfig,
}

fn prepare(query: &Query) -> Result<Prepared, Failure> {
    let model = load_model(&query.model)?;
    let inputs = parse_inputs(&query.inputs, &query.input_types)?;
    let solver = Solver::new(microgrid_registry(), model.tables.clone());
    Ok(Prepared {
        model,
        solver,
        inputs,
        config: config(query.seed)?,
    })
}

fn write_out(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::usage(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

/// One typed column when every value shares a scalar type, text otherwise.
fn value_column(name: &str, values: &[Value]) -> (Column, Vec<Value>) {
    let ty = match values.first() {
        Some(Value::Int(_)) => ColumnType::Integer,
        Some(Value::Real(_)) => ColumnType::Real,
        Some(Value::Bool(_)) => ColumnType::Boolean,
        _ => ColumnType::Text,
    };
    let same = values.iter().all(|v| {
        matches!(
            (ty, v),
            (ColumnType::Integer, Value::Int(_))
                | (ColumnType::Real, Value::Real(_))
                | (ColumnType::Boolean, Value::Bool(_))
        )
    });
    let column = |ty| Column {
        name: name.to_owned(),
        ty,
    };
    if same && ty != ColumnType::Text {
        (column(ty), values.to_vec())
    } else {
        let text = values.iter().map(|v| Value::text(v.to_string())).collect();
        (column(ColumnType::Text), text)
    }
}

fn solve(args: SolveArgs) -> Outcome {
    let p = prepare(&args.query)?;
    let target = &args.query.target;
    let result = p.solver.solve(&p.model.graph, target, &p.inputs, &p.config)?;
    let text = match args.format {
        Format::Text => {
            let mut s = format!("{}\n", result.value);
            if args.explain {
                s.push_str(&result.explain());
            }
            s
        }
        Format::Csv => {
            let (value, cells) = value_column("value", std::slice::from_ref(&result.value));
            let columns = vec![
                Column {
                    name: "node".into(),
                    ty: ColumnType::Text,
                },
                value,
            ];
            let rows = vec![vec![Value::text(target.as_str()), cells[0].clone()]];
            let mut s = Table::new("solve", columns, rows)
                .expect("two cells per row")
                .to_csv_string();
            if args.explain {
                s.push_str(&result.explain());
            }
            s
        }
        Format::Structured => {
            let mut doc = serde_json::json!({
                "target": target,
                "value": result.value,
                "total_cost": result.total_cost(),
                "firings": result.firings,
            });
            if args.explain {
                doc["explanation"] = result.explain().into();
            }
            format!(
                "{}\n",
                serde_json::to_string_pretty(&doc).expect("JSON values serialize")
            )
        }
    };
    write_out(None, &ensure_newline(text))
}

fn ensure_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn series(args: SeriesArgs) -> Outcome {
    if args.frames == 0 {
        return Err(Failure::usage("--frames must be at least 1"));
    }
    let p = prepare(&args.query)?;
    let target = &args.query.target;
    let values = p
        .solver
        .solve_series(&p.model.graph, target, &p.inputs, &p.config, args.frames)?;
    let (iterations, values): (Vec<Value>, Vec<Value>) =
        values.into_iter().map(|(i, v)| (Value::Int(i as i64), v)).unzip();
    let (value_col, cells) = value_column("value", &values);
    let columns = vec![
        Column {
            name: "iteration".into(),
            ty: ColumnType::Integer,
        },
        value_col,
    ];
    let rows = iterations
        .into_iter()
        .zip(cells)
        .map(|(i, v)| vec![i, v])
        .collect();
    let table = Table::new("series", columns, rows).expect("two cells per row");
    if let Some(plot) = &args.plot {
        let points = values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.as_sample().map(|y| (i as f64, y)).ok_or_else(|| {
                    Failure::usage(format!("cannot plot {} values of '{target}'", v.type_name()))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let svg = line_chart(
            target,
            "iteration",
            target,
            &[Series {
                label: target,
                points,
            }],
        );
        write_out(Some(plot), &svg)?;
    }
    write_out(args.out.as_deref(), &table.to_csv_string())
}

fn validate(model: &Path) -> Outcome {
    let loaded = load_model(model)?;
    let report = loaded.graph.validate();
    if report.is_empty() {
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
        write_out(None, "OK\n")
    } else {
        write_out(None, &ensure_newline(report.to_string()))?;
        Err(Failure::invalid(format!("{} is not valid", model.display())))
    }
}

fn merge_models(args: MergeArgs) -> Outcome {
    let a = load_model(&args.first)?;
    let b = load_model(&args.second)?;
    let shared: BTreeMap<String, String> = if args.shares.is_empty() {
        b.graph
            .nodes()
            .filter(|n| a.graph.node(&n.id).is_some())
            .map(|n| (n.id.clone(), n.id.clone()))
            .collect()
    } else {
        args.shares
            .iter()
            .map(|s| split_pair(s).map(|(k, v)| (k.to_owned(), v.to_owned())))
            .collect::<Result<_, _>>()?
    };
    let mut graph = merge(&a.graph, &b.graph, &shared)?;
    // tables travel with the merged model, written beside it
    let mut tables = b.tables;
    tables.extend_missing(&a.tables);
    let dir = parent_dir(&args.out);
    for name in tables.names() {
        let file = format!("{name}.csv");
        tables
            .get(name)
            .expect("listed table")
            .save_csv(&dir.join(&file))?;
        graph = graph.with_metadata(format!("{TABLE_PREFIX}{name}"), file);
    }
    save_model(&graph, &args.out)?;
    Ok(())
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn montecarlo(args: MonteCarloArgs) -> Outcome {
    if args.runs == 0 {
        return Err(Failure::usage("--runs must be at least 1"));
    }
    let p = prepare(&args.query)?;
    let s = p.solver.monte_carlo(
        &p.model.graph,
        &args.query.target,
        &p.inputs,
        &p.config,
        args.runs,
    )?;
    let real = |x: f64| Value::Real(x).to_string();
    let text = format!(
        "runs {}\nfailures {}\nmean {}\nvariance {}\nmin {}\nmax {}\n",
        s.runs,
        s.failures,
        real(s.mean),
        real(s.variance),
        real(s.min),
        real(s.max)
    );
    write_out(None, &text)
}

/// The grid description and the tables it was shipped with, if any.
fn grid(source: &GridSource) -> Result<(GridSpec, Option<TableStore>), Failure> {
    let (mut spec, tables) = match (&source.spec, &source.model) {
        (Some(path), _) => {
            let text =
                fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            let spec: GridSpec = serde_json::from_str(&text)
                .map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
            (spec, None)
        }
        (None, Some(path)) => {
            let loaded = load_model(path)?;
            (spec_from_metadata(&loaded.graph)?, Some(loaded.tables))
        }
        (None, None) => (GridSpec::demo(true), None),
    };
    if let Some(s) = source.scenario {
        spec.island_mode = matches!(s, Scenario::Islanded);
    }
    spec.validate()?;
    Ok((spec, tables))
}

fn measured(path: &Path, name: &str, columns: &[&str]) -> Result<Table, Failure> {
    let table = load_csv_table(path, name)?;
    if let Some(missing) = columns.iter().find(|c| table.column_index(c).is_none()) {
        return Err(Failure::usage(format!(
            "{}: missing column '{missing}' (expected {})",
            path.display(),
            columns.join(", ")
        )));
    }
    Ok(table)
}

fn microgrid_run(args: RunArgs) -> Outcome {
    if args.hours == 0 {
        return Err(Failure::usage("--hours must be at least 1"));
    }
    let (spec, shipped) = grid(&args.grid)?;
    let mut tables = TableStore::new();
    if let Some(path) = &args.solar {
        tables.insert(measured(path, SOLAR_TABLE, &[HOUR_KEY, SUNLIGHT_COLUMN])?);
    }
    if let Some(path) = &args.load {
        let building = spec.actors.iter().find_map(|a| match a {
            chg_microgrid::ActorSpec::Building {
                load_table,
                normal_key,
                lights_key,
                equipment_key,
                ..
            } => Some((
                load_table.as_str(),
                [
                    HOUR_KEY,
                    normal_key.as_str(),
                    lights_key.as_str(),
                    equipment_key.as_str(),
                ],
            )),
            _ => None,
        });
        let (name, columns) = match building {
            Some(found) => found,
            None => (
                BUILDING_TABLE,
                [HOUR_KEY, "normal_kw", "lights_kw", "equipment_kw"],
            ),
        };
        tables.insert(measured(path, name, &columns)?);
    }
    if let Some(shipped) = &shipped {
        tables.extend_missing(shipped);
    }
    tables.extend_missing(&synthetic_tables(&spec, args.seed));

    let run = chg_microgrid::run_scenario_with(&spec, args.hours, &config(args.seed)?, tables)?;
    if args.report {
        eprint!("{}", run.report);
    }
    let violations = run.check_invariants();
    for v in violations.iter().take(10) {
        eprintln!("warning: {v}");
    }
    if let Some(plot) = &args.plot {
        let names = run.names();
        let series: Vec<Series<'_>> = names
            .iter()
            .map(|n| Series {
                label: n,
                points: run
                    .power(n)
                    .expect("actor of this run")
                    .into_iter()
                    .enumerate()
                    .map(|(h, p)| (h as f64, p))
                    .collect(),
            })
            .collect();
        let title = if spec.island_mode {
            "islanded grid"
        } else {
            "connected grid"
        };
        write_out(Some(plot), &line_chart(title, "hour", "power (kW)", &series))?;
    }
    write_out(args.out.as_deref(), &run.to_table().to_csv_string())
}

fn microgrid_export(args: ExportArgs) -> Outcome {
    let (spec, shipped) = grid(&args.grid)?;
    let model = chg_microgrid::build_microgrid_chg(&spec)?;
    let mut tables = shipped.unwrap_or_default();
    tables.extend_missing(&synthetic_tables(&spec, args.seed));
    let dir = parent_dir(&args.out);
    for name in spec.required_tables() {
        let table = tables.get(&name).expect("required tables are generated");
        table.save_csv(&dir.join(format!("{name}.csv")))?;
    }
    save_model(&model.graph, &args.out)?;
    Ok(())
}
