mod common;

use entfix::bnb::{solve, Clock, RunStatus, SolverConfig};
use entfix::lapgen::{generate, LapParams};
use entfix::model::Model;
use entfix::mps::{load_instance, parse_groups, parse_mps, read_run_log, write_groups, write_mps, write_run_log, LogEvent};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn round_trip(model: &Model) -> Model {
    let mut back = parse_mps(&write_mps(model)).unwrap();
    back.groups = parse_groups(&write_groups(model), &back).unwrap();
    back
}

#[test]
fn write_then_parse_round_trips_exactly() {
    let params = LapParams {
        deadhead_cost: Some(0.5),
        ..LapParams::default()
    };
    let inst = generate(&params).unwrap();
    let back = round_trip(&inst.model);
    assert_eq!(back, inst.model);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let mut m = common::random_group_mip(&mut rng, 12, 4, 8);
        m.variables[0].upper = 1.0;
        // Canonical form: zero coefficients are not written, rows come back
        // in column order.
        m.objective.retain(|t| t.1 != 0.0);
        for c in &mut m.constraints {
            c.terms.retain(|t| t.1 != 0.0);
            c.terms.sort_by_key(|t| t.0);
        }
        assert_eq!(round_trip(&m), m);
    }
}

#[test]
fn generated_files_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        generate(&LapParams::default()).unwrap().write_files(dir.path()).unwrap();
    }
    for ext in ["mps", "groups.json", "meta.json"] {
        let name = format!("lap_w01.{ext}");
        let x = std::fs::read(a.path().join(&name)).unwrap();
        let y = std::fs::read(b.path().join(&name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let model = load_instance(&a.path().join("lap_w01")).unwrap();
    assert_eq!(model.groups.len(), 60);
    std::fs::remove_file(a.path().join("lap_w01.groups.json")).unwrap();
    let err = load_instance(&a.path().join("lap_w01.mps")).unwrap_err();
    assert!(err.to_string().contains("no one-hot groups declared"));
}

fn two_incumbent_model() -> Model {
    // Groups {0,1} and {2,3}; rounding finds the worse point first.
    let text = "NAME two
ROWS
 N obj
 E g0
 E g1
 L side
COLUMNS
    a0 obj -1 g0 1
    a0 side 1
    a1 obj -3 g0 1
    a1 side 2
    b0 obj -2 g1 1
    b0 side 1
    b1 obj 0 g1 1
RHS
    RHS g0 1 g1 1
    RHS side 2.5
BOUNDS
 BV BND a0
 BV BND a1
 BV BND b0
 BV BND b1
ENDATA
";
    let mut m = parse_mps(text).unwrap();
    let groups = r#"{"groups":[
        {"object":"g0","classes":[{"k":0,"var":"a0"},{"k":1,"var":"a1"}]},
        {"object":"g1","classes":[{"k":0,"var":"b0"},{"k":1,"var":"b1"}]}]}"#;
    m.groups = parse_groups(groups, &m).unwrap();
    assert!(m.validate().is_empty());
    m
}

#[test]
fn run_log_lines_and_round_trip() {
    let m = two_incumbent_model();
    let rec = solve(&m, &SolverConfig::default(), &mut ()).unwrap();
    let mut buf = Vec::new();
    let n = write_run_log(&rec, Clock::Node, &mut buf).unwrap();
    assert_eq!(n, buf.len());
    let text = String::from_utf8(buf.clone()).unwrap();
    let kinds: Vec<String> = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["type"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(kinds.iter().filter(|k| *k == "incumbent").count(), rec.incumbents.len());
    assert_eq!(kinds.last().unwrap(), "summary");
    assert_eq!(kinds.iter().filter(|k| *k == "summary").count(), 1);

    let log = read_run_log(&text).unwrap();
    assert_eq!(log.summary.best_objective, rec.best_objective);
    assert_eq!(log.incumbents().count(), rec.incumbents.len());
    assert!(log.events.iter().all(|e| !matches!(e, LogEvent::Summary(_))));

    let rerun = solve(&m, &SolverConfig::default(), &mut ()).unwrap();
    let mut again = Vec::new();
    write_run_log(&rerun, Clock::Node, &mut again).unwrap();
    assert_eq!(buf, again);
}

#[test]
fn empty_run_logs_no_solution() {
    let m = two_incumbent_model();
    let cfg = SolverConfig {
        node_limit: 1,
        rounding_heuristic: false,
        ..SolverConfig::default()
    };
    let rec = solve(&m, &cfg, &mut ()).unwrap();
    assert_eq!(rec.status, RunStatus::NoSolution);
    let mut buf = Vec::new();
    write_run_log(&rec, Clock::Node, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.contains("\"status\":\"no_solution\""));
}
