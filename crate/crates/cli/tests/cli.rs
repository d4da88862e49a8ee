use std::process::{Command, Output};

use ybl_core::{CheckReport, Verdict};

fn ybl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ybl"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env_remove("YBL_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn certify_passes_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("c.json");
    let csv = dir.path().join("c.csv");
    let o = ybl(&["certify", "--json", json.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).lines().last().unwrap().starts_with("PASS"));

    let report = CheckReport::from_json(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report.command, "certify");
    assert_eq!(report.verdict, Verdict::Pass);
    assert_eq!(report.timestamp, "2023-11-14T22:13:20Z");
    assert_eq!(report.parameters["n_min"], 25);

    let raw: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    for key in ["command", "version", "timestamp", "parameters", "verdict", "checks"] {
        assert!(raw.get(key).is_some(), "missing {key}");
    }
    let check = &raw["checks"][0];
    for key in ["name", "verdict", "lhs", "rhs", "tolerance", "provenance"] {
        assert!(check.get(key).is_some(), "missing check field {key}");
    }

    let table = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(table.lines().count(), 28);
    assert!(table.lines().next().unwrap().starts_with("n,"));
}

#[test]
fn json_to_stdout_and_quiet_mode() {
    let o = ybl(&["certify", "--n-min", "30", "--n-max", "30", "--json", "-"]);
    assert_eq!(o.status.code(), Some(0));
    let report = CheckReport::from_json(&stdout(&o)).unwrap();
    assert_eq!(report.parameters["n_max"], 30);

    let q = ybl(&["certify", "--n-min", "30", "--n-max", "30", "-q"]);
    assert_eq!(stdout(&q).lines().count(), 1);
}

#[test]
fn output_is_deterministic_under_a_fixed_epoch() {
    let args = ["sphere-check", "--n", "6", "--samples", "20000", "--seed", "5", "--json", "-"];
    let a = ybl(&args);
    let b = ybl(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn thread_count_does_not_change_results() {
    let args = ["sphere-check", "--n", "6", "--samples", "20000", "--json", "-"];
    let one = Command::new(env!("CARGO_BIN_EXE_ybl"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env("YBL_THREADS", "1")
        .output()
        .unwrap();
    let three = Command::new(env!("CARGO_BIN_EXE_ybl"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env("YBL_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, three.stdout);
}

#[test]
fn invalid_thread_count_is_a_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_ybl")).args(["certify"]).env("YBL_THREADS", "0").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_and_parameter_errors_exit_with_two() {
    assert_eq!(ybl(&["certify", "--n-min", "30", "--n-max", "29"]).status.code(), Some(2));
    assert_eq!(ybl(&["certify", "--n-min", "14", "--n-max", "14"]).status.code(), Some(2));
    assert_eq!(ybl(&["profile", "--steps", "2"]).status.code(), Some(2));
    assert_eq!(ybl(&["metric-check", "--lambda", "0.3"]).status.code(), Some(2));
    assert_eq!(ybl(&["bubble-check", "--n", "2"]).status.code(), Some(2));
    assert_eq!(ybl(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn dimensions_past_the_range_are_informational() {
    let o = ybl(&["certify", "--n-min", "52", "--n-max", "53", "--json", "-"]);
    assert_eq!(o.status.code(), Some(0));
    let report = CheckReport::from_json(&stdout(&o)).unwrap();
    assert!(report.checks.iter().all(|c| c.verdict == Verdict::Info));
}

#[test]
fn profile_and_bubble_commands_pass() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("p.csv");
    let o = ybl(&["profile", "--csv", csv.to_str().unwrap(), "-q"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let table = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(table.lines().count(), 302);
    assert!(table.starts_with("eps,F,"));

    let b = ybl(&["bubble-check", "--n", "25", "-q"]);
    assert_eq!(b.status.code(), Some(0), "{}", stdout(&b));
}

#[test]
fn a_grid_coarser_than_the_basin_fails() {
    let o = ybl(&["profile", "--steps", "101"]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("FAIL interior grid-local minima"));
    assert!(text.contains("grid spacing exceeds the width of the basin"));
}
