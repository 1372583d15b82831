use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chg_core::model_io::load_csv_table;

fn models() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn model(name: &str) -> String {
    models().join(name).display().to_string()
}

fn chg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chg"))
        .args(args)
        .env_remove("CHG_MAX_FIRINGS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn counter_mapping() {
    let o = chg(&[
        "solve",
        "--model",
        &model("counters.chg"),
        "--target",
        "counter1",
        "--input",
        "counter2=1",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "0\n");
}

#[test]
fn trivial_loop_costs_nothing() {
    let lb = model("lightbulb.chg");
    let o = chg(&[
        "solve",
        "--model",
        &lb,
        "--target",
        "light1",
        "--input",
        "light1=on",
        "--format",
        "structured",
    ]);
    assert_eq!(code(&o), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["value"], "on");
    assert_eq!(doc["total_cost"], 0.0);
    assert_eq!(doc["firings"], 0);
}

#[test]
fn structured_output_reports_cost_and_firings() {
    let lb = model("lightbulb.chg");
    let o = chg(&[
        "solve",
        "--model",
        &lb,
        "--target",
        "light1",
        "--input",
        "light2=on",
        "--format",
        "structured",
        "--explain",
    ]);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["value"], "off");
    assert_eq!(doc["total_cost"], 1.0);
    assert!(doc["firings"].as_u64().unwrap() >= 1);
    assert!(doc["explanation"].as_str().unwrap().contains("<- f @0"));
}

#[test]
fn csv_format() {
    let o = chg(&[
        "solve",
        "--model",
        &model("counters.chg"),
        "--target",
        "counter1",
        "--input",
        "counter2=0",
        "--format",
        "csv",
    ]);
    assert_eq!(stdout(&o), "node,value\ncounter1,1\n");
}

#[test]
fn unknown_target_is_no_path() {
    let o = chg(&["solve", "--model", &model("lightbulb.chg"), "--target", "light9"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("light9"));
}

#[test]
fn unreachable_target_is_no_path() {
    let o = chg(&["solve", "--model", &model("lightbulb.chg"), "--target", "light1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn bad_usage_exits_five() {
    assert_eq!(code(&chg(&["solve", "--model", &model("lightbulb.chg")])), 5);
    assert_eq!(
        code(&chg(&["solve", "--model", "/no/such.chg", "--target", "x"])),
        5
    );
    assert_eq!(
        code(&chg(&[
            "solve",
            "--model",
            &model("counters.chg"),
            "--target",
            "counter1",
            "--input",
            "junk"
        ])),
        5
    );
    assert_eq!(code(&chg(&["frobnicate"])), 5);
    assert_eq!(code(&chg(&["--help"])), 0);
}

#[test]
fn input_type_override() {
    let cost = model("cost.chg");
    let o = chg(&[
        "solve",
        "--model",
        &cost,
        "--target",
        "pv_power",
        "--input",
        "irradiance=500",
        "--input-type",
        "irradiance=real",
    ]);
    assert_eq!(stdout(&o), "2.0\n");
    let o = chg(&[
        "solve",
        "--model",
        &cost,
        "--target",
        "pv_power",
        "--input",
        "irradiance=x",
        "--input-type",
        "irradiance=real",
    ]);
    assert_eq!(code(&o), 5);
}

#[test]
fn firing_cap_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_chg"))
        .args([
            "series",
            "--model",
            &model("fibonacci.chg"),
            "--target",
            "current",
            "--frames",
            "50",
        ])
        .env("CHG_MAX_FIRINGS", "5")
        .output()
        .unwrap();
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    let o = Command::new(env!("CARGO_BIN_EXE_chg"))
        .args([
            "solve",
            "--model",
            &model("counters.chg"),
            "--target",
            "counter1",
            "--input",
            "counter2=1",
        ])
        .env("CHG_MAX_FIRINGS", "lots")
        .output()
        .unwrap();
    assert_eq!(code(&o), 5);
}

#[test]
fn invalid_model_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.chg");
    std::fs::write(
        &path,
        r#"{"schema_version": "1", "nodes": [{"id": "a"}],
            "edges": [{"id": "e", "target": "a", "sources": {"x": "b"}, "relation": {"kind": "expr", "body": "x"}}]}"#,
    )
    .unwrap();
    let p = path.display().to_string();
    assert_eq!(code(&chg(&["validate", "--model", &p])), 3);
    assert_eq!(code(&chg(&["solve", "--model", &p, "--target", "a"])), 3);
    std::fs::write(&path, "{ not json").unwrap();
    assert_eq!(code(&chg(&["validate", "--model", &p])), 3);
}

#[test]
fn validate_well_formed() {
    let o = chg(&["validate", "--model", &model("lightbulb.chg")]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "OK\n");
}

#[test]
fn series_fibonacci() {
    let o = chg(&[
        "series",
        "--model",
        &model("fibonacci.chg"),
        "--target",
        "current",
        "--frames",
        "6",
    ]);
    assert_eq!(stdout(&o), "iteration,value\n0,1\n1,1\n2,2\n3,3\n4,5\n5,8\n");
}

#[test]
fn one_frame_series_matches_solve() {
    let args = [
        "--model",
        &model("cost.chg"),
        "--target",
        "operating_cost",
        "--input",
        "irradiance=400.0",
    ];
    let series = stdout(&chg(&[&["series", "--frames", "1"][..], &args].concat()));
    let solved = stdout(&chg(&[&["solve"][..], &args].concat()));
    assert_eq!(series, format!("iteration,value\n0,{solved}"));
}

#[test]
fn series_plot_is_svg() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("fib.svg");
    let csv = dir.path().join("fib.csv");
    let o = chg(&[
        "series",
        "--model",
        &model("fibonacci.chg"),
        "--target",
        "current",
        "--frames",
        "10",
        "--out",
        &csv.display().to_string(),
        "--plot",
        &svg.display().to_string(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&svg).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    let root = doc.root_element();
    assert_eq!(root.tag_name().name(), "svg");
    assert_eq!(root.attribute("width"), Some("800"));
    assert_eq!(root.attribute("height"), Some("400"));
    assert!(doc.descendants().any(|n| n.has_tag_name("polyline")));
    assert!(doc.descendants().any(|n| n.text() == Some("current")));
    assert_eq!(load_csv_table(&csv, "fib").unwrap().row_count(), 10);
}

#[test]
fn merge_then_solve_across_models() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("merged.chg").display().to_string();
    let o = chg(&["merge", &model("weather.chg"), &model("cost.chg"), "-o", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = chg(&[
        "solve",
        "--model",
        &out,
        "--target",
        "operating_cost",
        "--input",
        "cloud_cover=0.5",
    ]);
    assert_eq!(stdout(&o), "0.375\n");
}

#[test]
fn merge_with_explicit_share() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.chg").display().to_string();
    let o = chg(&[
        "merge",
        &model("weather.chg"),
        &model("cost.chg"),
        "-o",
        &out,
        "--share",
        "irradiance=clear_sky",
    ]);
    assert_eq!(code(&o), 0);
    // the cost model now reads the clear-sky value as its irradiance
    let o = chg(&["solve", "--model", &out, "--target", "pv_power"]);
    assert_eq!(stdout(&o), "4.0\n");
}

#[test]
fn montecarlo_single_run_equals_solve() {
    let args = [
        "--model",
        &model("cost.chg"),
        "--target",
        "operating_cost",
        "--input",
        "irradiance=300.0",
        "--seed",
        "4",
    ];
    let solved = stdout(&chg(&[&["solve"][..], &args].concat()));
    let mc = stdout(&chg(&[&["montecarlo", "--runs", "1"][..], &args].concat()));
    let v = solved.trim();
    assert_eq!(
        mc,
        format!("runs 1\nfailures 0\nmean {v}\nvariance 0.0\nmin {v}\nmax {v}\n")
    );
}

#[test]
fn montecarlo_summarises_failures_chain() {
    let o = chg(&[
        "montecarlo",
        "--model",
        &model("failure.chg"),
        "--target",
        "failing",
        "--runs",
        "20",
        "--seed",
        "1",
    ]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.starts_with("runs 20\nfailures 0\n"), "{text}");
}

#[test]
fn microgrid_week() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("week.csv");
    let svg = dir.path().join("week.svg");
    let o = chg(&[
        "microgrid",
        "run",
        "--scenario",
        "islanded",
        "--hours",
        "168",
        "--seed",
        "3",
        "--out",
        &csv.display().to_string(),
        "--plot",
        &svg.display().to_string(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stderr.is_empty(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = load_csv_table(&csv, "week").unwrap();
    assert_eq!(table.row_count(), 168);
    let names: Vec<&str> = table.columns().iter().map(|c| c.name.as_str()).collect();
    for col in [
        "hour",
        "pv_kw",
        "utility_kw",
        "battery_soc",
        "generator_fuel_l",
        "clinic_failing",
    ] {
        assert!(names.contains(&col), "{col}");
    }
    let doc_text = std::fs::read_to_string(&svg).unwrap();
    let doc = roxmltree::Document::parse(&doc_text).unwrap();
    assert_eq!(
        doc.descendants().filter(|n| n.has_tag_name("polyline")).count(),
        6
    );
}

#[test]
fn microgrid_zero_hours_is_usage_error() {
    assert_eq!(
        code(&chg(&[
            "microgrid",
            "run",
            "--scenario",
            "islanded",
            "--hours",
            "0"
        ])),
        5
    );
}

#[test]
fn microgrid_replays_measured_data() {
    let dir = tempfile::tempdir().unwrap();
    let solar = dir.path().join("solar.csv");
    let load = dir.path().join("load.csv");
    let start = (152 - 1) * 24 + 1;
    let mut s = String::from("hour_index,ghi\n");
    let mut l = String::from("hour_index,normal_kw,lights_kw,equipment_kw\n");
    for h in start..start + 4 {
        s.push_str(&format!("{h},0.0\n"));
        l.push_str(&format!("{h},0.7,0.2,0.3\n"));
    }
    std::fs::write(&solar, s).unwrap();
    std::fs::write(&load, l).unwrap();
    let o = chg(&[
        "microgrid",
        "run",
        "--scenario",
        "connected",
        "--hours",
        "4",
        "--solar",
        &solar.display().to_string(),
        "--load",
        &load.display().to_string(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = chg_core::model_io::Table::from_reader("run", o.stdout.as_slice()).unwrap();
    let office = table.column_index("office_kw").unwrap();
    let pv = table.column_index("pv_kw").unwrap();
    for row in table.rows() {
        assert_eq!(row[pv].as_f64(), Some(0.0));
        let failing = row[table.column_index("office_failing").unwrap()]
            .as_bool()
            .unwrap();
        if !failing {
            assert_eq!(row[office].as_f64(), Some(-0.7));
        }
    }
    // data that stops short of the run leaves the later frames underivable
    let o = chg(&[
        "microgrid",
        "run",
        "--scenario",
        "connected",
        "--hours",
        "6",
        "--solar",
        &solar.display().to_string(),
    ]);
    assert_eq!(code(&o), 2);
    std::fs::write(&solar, "hour,sun\n1,2.0\n").unwrap();
    let o = chg(&[
        "microgrid",
        "run",
        "--hours",
        "2",
        "--solar",
        &solar.display().to_string(),
    ]);
    assert_eq!(code(&o), 5);
}

#[test]
fn exported_grid_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.chg").display().to_string();
    let o = chg(&[
        "microgrid",
        "export",
        "--scenario",
        "connected",
        "-o",
        &path,
        "--seed",
        "2",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("solar.csv").exists());
    assert_eq!(stdout(&chg(&["validate", "--model", &path])), "OK\n");
    let o = chg(&["solve", "--model", &path, "--target", "state vector"]);
    assert_eq!(code(&o), 0);
    let from_model = chg(&[
        "microgrid",
        "run",
        "--model",
        &path,
        "--hours",
        "24",
        "--seed",
        "2",
    ]);
    let direct = chg(&[
        "microgrid",
        "run",
        "--scenario",
        "connected",
        "--hours",
        "24",
        "--seed",
        "2",
    ]);
    assert_eq!(code(&from_model), 0);
    assert_eq!(from_model.stdout, direct.stdout);
}

#[test]
fn grid_description_from_json() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("grid.json");
    let mut grid = chg_microgrid::GridSpec::demo(false);
    grid.load_scale = 2.0;
    std::fs::write(&spec, serde_json::to_string(&grid).unwrap()).unwrap();
    let o = chg(&[
        "microgrid",
        "run",
        "--spec",
        &spec.display().to_string(),
        "--hours",
        "2",
    ]);
    assert_eq!(code(&o), 0);
    let table = chg_core::model_io::Table::from_reader("run", o.stdout.as_slice()).unwrap();
    assert_eq!(
        table.rows()[0][table.column_index("clinic_kw").unwrap()].as_f64(),
        Some(-6.0)
    );
    grid.connectivity.pop();
    std::fs::write(&spec, serde_json::to_string(&grid).unwrap()).unwrap();
    let o = chg(&[
        "microgrid",
        "run",
        "--spec",
        &spec.display().to_string(),
        "--hours",
        "2",
    ]);
    assert_eq!(code(&o), 3);
}
