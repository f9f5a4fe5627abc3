//! Behavior of the command-line surface: output contracts and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_faircause"))
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn data(rel: &str) -> String {
    workspace_root()
        .join("data")
        .join(rel)
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("faircause-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn dsep_reports_both_verdicts() {
    let graph = data("graphs/dp.graph");
    let sep = run(&["dsep", "--graph", &graph, "A", "Yhat"]);
    assert_eq!(sep.status.code(), Some(0));
    assert_eq!(stdout(&sep), "d-separated: true\n");

    let opened = run(&["dsep", "--graph", &graph, "A", "Yhat", "Y"]);
    assert_eq!(opened.status.code(), Some(0));
    assert_eq!(stdout(&opened), "d-separated: false\n");
}

#[test]
fn dsep_exit_codes() {
    let graph = data("graphs/dp.graph");
    let unknown = run(&["dsep", "--graph", &graph, "A", "Nope"]);
    assert_eq!(unknown.status.code(), Some(3));

    let malformed = scratch("bad.graph");
    std::fs::write(&malformed, "A -> Y extra tokens\n").unwrap();
    let parse = run(&["dsep", "--graph", malformed.to_str().unwrap(), "A", "Y"]);
    assert_eq!(parse.status.code(), Some(2));

    let missing = run(&["dsep", "--graph", "/nonexistent/file.graph", "A", "Y"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn audit_emits_schema_conforming_json() {
    let csv = scratch("audit_input.csv");
    let sim = run(&[
        "simulate",
        "--scm",
        &data("hiring.scm.json"),
        "--n",
        "100000",
        "--seed",
        "7",
        "--output",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(sim.status.code(), Some(0));

    let out = run(&[
        "audit",
        csv.to_str().unwrap(),
        "--sensitive",
        "A",
        "--truth",
        "Y",
        "--prediction",
        "Yhat",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();

    // Every field the schema requires is present, and nothing else.
    let schema: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(workspace_root().join("schemas/metric_report.schema.json"))
            .unwrap(),
    )
    .unwrap();
    let required: Vec<&str> = schema["required"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    let keys: Vec<&str> = report
        .as_object()
        .unwrap()
        .keys()
        .map(String::as_str)
        .collect();
    for field in &required {
        assert!(keys.contains(field), "missing {field}");
    }
    assert_eq!(keys.len(), required.len());

    // The hiring chain satisfies equalized odds alone, and the sampled
    // gaps sit within 0.01 of the exact ones.
    assert_eq!(report["satisfied"]["dp"], false);
    assert_eq!(report["satisfied"]["eo"], true);
    assert_eq!(report["satisfied"]["pp"], false);
    assert_eq!(report["preconditions_met"], true);
    assert!((report["dp_gap"].as_f64().unwrap() - 0.0525).abs() <= 0.01);
    assert!(report["eo_gap"].as_f64().unwrap() <= 0.01);
    assert!((report["pp_gap"].as_f64().unwrap() - 20.0 / 507.0).abs() <= 0.01);
}

#[test]
fn audit_missing_role_and_schema_violations() {
    let csv = scratch("roles.csv");
    std::fs::write(&csv, "A,Yhat\n0,1\n1,0\n").unwrap();
    let missing = run(&[
        "audit",
        csv.to_str().unwrap(),
        "--sensitive",
        "A",
        "--truth",
        "Y",
        "--prediction",
        "Yhat",
    ]);
    assert_eq!(missing.status.code(), Some(4));

    let bad = scratch("bad.csv");
    std::fs::write(&bad, "A,Y,Yhat\n0,one,1\n").unwrap();
    let parse = run(&[
        "audit",
        bad.to_str().unwrap(),
        "--sensitive",
        "A",
        "--truth",
        "Y",
        "--prediction",
        "Yhat",
    ]);
    assert_eq!(parse.status.code(), Some(2));
}

#[test]
fn audit_single_row_is_degenerate() {
    let csv = scratch("single.csv");
    std::fs::write(&csv, "A,Y,Yhat\n0,1,1\n").unwrap();
    let out = run(&[
        "audit",
        csv.to_str().unwrap(),
        "--sensitive",
        "A",
        "--truth",
        "Y",
        "--prediction",
        "Yhat",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["dp_gap"], 0.0);
    assert_eq!(report["eo_gap"], 0.0);
    assert_eq!(report["pp_gap"], 0.0);
    assert_eq!(report["preconditions_met"], false);
}

#[test]
fn audit_csv_format() {
    let csv = scratch("fmt.csv");
    std::fs::write(
        &csv,
        "A,Y,Yhat,weight\n0,1,1,6\n0,0,0,4\n1,1,1,3\n1,0,0,7\n",
    )
    .unwrap();
    let out = run(&[
        "audit",
        csv.to_str().unwrap(),
        "--sensitive",
        "A",
        "--truth",
        "Y",
        "--prediction",
        "Yhat",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("dp_gap,eo_gap,pp_gap,calibration_dep,bias_dep,"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn scan_verdict_and_flag_validation() {
    let out = run(&[
        "scan",
        "--resolution",
        "10",
        "--epsilon",
        "1e-6",
        "--tau",
        "0.05",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let verdict: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(verdict["tested"], 19_448);
    assert_eq!(verdict["multi_satisfying"], 0);
    assert_eq!(verdict["grid_resolution"], 10);
    assert!(!verdict["trivial_witnesses"].as_array().unwrap().is_empty());

    // Tolerance too loose relative to tau: rejected up front.
    let loose = run(&[
        "scan",
        "--resolution",
        "10",
        "--epsilon",
        "0.04",
        "--tau",
        "0.05",
    ]);
    assert_eq!(loose.status.code(), Some(2));

    let out_of_range = run(&["scan", "--resolution", "41"]);
    assert_eq!(out_of_range.status.code(), Some(2));
    let too_small = run(&["scan", "--resolution", "9"]);
    assert_eq!(too_small.status.code(), Some(2));
}

#[test]
fn simulate_then_audit_round_trip() {
    let csv = scratch("sim.csv");
    let sim = run(&[
        "simulate",
        "--scm",
        &data("hiring.scm.json"),
        "--n",
        "2000",
        "--seed",
        "11",
        "--output",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(sim.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("A,Y,Yhat,weight\n"));
    let total: u64 = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 2000);
}

#[test]
fn sweep_writes_one_row_per_gate() {
    let out_path = scratch("sweep.csv");
    let out = run(&[
        "sweep",
        "--scm",
        &data("hiring.scm.json"),
        "--policy",
        &data("policy_shared.json"),
        "--gates",
        "0,0.5,1",
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "gate,dp_gap,eo_gap,pp_gap,dp_given_c0,eo_given_yc"
    );
    assert_eq!(lines.len(), 4);
    let gates: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(gates.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn sweep_rejects_bad_inputs() {
    let out_path = scratch("sweep_bad.csv");
    let unsorted = run(&[
        "sweep",
        "--scm",
        &data("hiring.scm.json"),
        "--policy",
        &data("policy_shared.json"),
        "--gates",
        "0.5,0.2",
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(unsorted.status.code(), Some(2));

    let bad_policy = scratch("bad_policy.json");
    std::fs::write(
        &bad_policy,
        "{\"gate\": {\"0\": 1.5, \"1\": 0.0}, \"fairness_policy\": [0.5, 0.5]}",
    )
    .unwrap();
    let invalid = run(&[
        "sweep",
        "--scm",
        &data("hiring.scm.json"),
        "--policy",
        bad_policy.to_str().unwrap(),
        "--gates",
        "0,1",
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(invalid.status.code(), Some(2));
}
