use std::path::Path;
use std::process::{Command, Output};

fn entfix(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entfix"))
        .current_dir(dir)
        .env_remove("ENTFIX_OUT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &[&str] = &["--trains", "20", "--periods", "28", "--seed", "5"];

fn gen_small(dir: &Path, out: &str, weeks: &str) {
    let mut args = vec!["gen", "--weeks", weeks, "--out", out];
    args.extend_from_slice(SMALL);
    let o = entfix(dir, &args);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn gen_writes_identical_instance_triples() {
    let tmp = tempfile::tempdir().unwrap();
    gen_small(tmp.path(), "a", "3");
    gen_small(tmp.path(), "b", "3");
    let mut names: Vec<_> = std::fs::read_dir(tmp.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 9);
    assert!(names.contains(&"lap_w03.groups.json".to_string()));
    for n in &names {
        let x = std::fs::read(tmp.path().join("a").join(n)).unwrap();
        let y = std::fs::read(tmp.path().join("b").join(n)).unwrap();
        assert_eq!(x, y, "{n}");
    }

    let o = entfix(tmp.path(), &["gen", "--weeks", "0"]);
    assert_eq!(o.status.code(), Some(64));
    assert!(stderr(&o).contains("--weeks"));
}

#[test]
fn train_then_solve_under_each_policy() {
    let tmp = tempfile::tempdir().unwrap();
    gen_small(tmp.path(), "inst", "2");

    let o = entfix(tmp.path(), &["train", "inst/lap_w01.mps", "--out", "model"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("training time"));
    assert!(tmp.path().join("model/forest.json").exists());
    let dataset = std::fs::read_to_string(tmp.path().join("model/train_dataset.csv")).unwrap();
    assert!(dataset.lines().count() > 1);

    let o = entfix(tmp.path(), &["solve", "inst/lap_w02", "--policy", "tp:tau=0.5"]);
    assert_eq!(o.status.code(), Some(64), "{}", stderr(&o));
    assert!(stderr(&o).contains("--model"));

    let o = Command::new(env!("CARGO_BIN_EXE_entfix"))
        .current_dir(tmp.path())
        .env("ENTFIX_OUT", "runs")
        .args(["solve", "inst/lap_w02", "--policy", "baseline", "--nodes", "20000"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let log = std::fs::read_to_string(tmp.path().join("runs/lap_w02.baseline.jsonl")).unwrap();
    assert!(log.lines().any(|l| l.contains(r#""type":"incumbent""#)));

    for policy in ["sp:n=5", "tp:tau=0.5"] {
        let o = entfix(
            tmp.path(),
            &["solve", "inst/lap_w02", "--policy", policy, "--model", "model/forest.json", "--log", "run.jsonl"],
        );
        assert_eq!(o.status.code(), Some(0), "{policy}: {}", stderr(&o));
        let log = std::fs::read_to_string(tmp.path().join("run.jsonl")).unwrap();
        let first_incumbent = log.lines().position(|l| l.contains(r#""type":"incumbent""#)).unwrap();
        if let Some(first_fix) = log.lines().position(|l| l.contains(r#""type":"fix""#)) {
            assert!(first_fix > first_incumbent);
        }
        assert!(log.lines().last().unwrap().contains(r#""type":"summary""#));
    }
}

#[test]
fn missing_sidecar_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    gen_small(tmp.path(), "inst", "1");
    std::fs::remove_file(tmp.path().join("inst/lap_w01.groups.json")).unwrap();
    let o = entfix(tmp.path(), &["train", "inst/lap_w01.mps"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no one-hot groups declared"), "{}", stderr(&o));
}

#[test]
fn infeasible_instance_exits_with_no_solution() {
    let tmp = tempfile::tempdir().unwrap();
    // One object with two classes, and a side row demanding both.
    let mps = "NAME clash
ROWS
 N obj
 E pick
 G both
COLUMNS
    a obj 1 pick 1
    a both 1
    b obj 2 pick 1
    b both 1
RHS
    RHS pick 1 both 2
BOUNDS
 BV BND a
 BV BND b
ENDATA
";
    let groups = r#"{"groups":[{"object":"pick","classes":[{"k":0,"var":"a"},{"k":1,"var":"b"}]}]}"#;
    std::fs::write(tmp.path().join("clash.mps"), mps).unwrap();
    std::fs::write(tmp.path().join("clash.groups.json"), groups).unwrap();
    let o = entfix(tmp.path(), &["solve", "clash.mps"]);
    assert_eq!(o.status.code(), Some(2), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("no_solution"));
}

#[test]
fn bench_flags_override_config_and_report_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{"weeks": 5, "lap": {"trains": 20, "periods": 28, "deadhead_cost": 0.5},
                  "solver": {"node_limit": 2000}}"#;
    std::fs::write(tmp.path().join("bench.json"), cfg).unwrap();
    let o = entfix(
        tmp.path(),
        &["bench", "--config", "bench.json", "--weeks", "2", "--policies", "sp:n=1,tp:tau=0.5", "--out", "b"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let logs = std::fs::read_dir(tmp.path().join("b/logs")).unwrap().count();
    assert_eq!(logs, 2 * 3);
    let resolved = std::fs::read_to_string(tmp.path().join("b/bench.json")).unwrap();
    assert!(resolved.contains(r#""weeks": 2"#));
    assert!(resolved.contains(r#""node_limit": 2000"#));

    let report = tmp.path().join("b/report.csv");
    let first = std::fs::read(&report).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 3);
    assert!(text.starts_with("instance,policy,seed,PI,PIR,"));
    let o = Command::new(env!("CARGO_BIN_EXE_entfix"))
        .current_dir(tmp.path())
        .env("ENTFIX_OUT", "b")
        .arg("report")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(&report).unwrap(), first);

    let o = entfix(tmp.path(), &["bench", "--weeks", "0", "--out", "c"]);
    assert_eq!(o.status.code(), Some(64));
}
