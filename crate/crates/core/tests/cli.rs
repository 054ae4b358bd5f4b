use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn wequiv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wequiv"))
        .args(args)
        .env_remove("WEQUIV_BUDGET_PARTITIONS")
        .env_remove("WEQUIV_BUDGET_CANON")
        .output()
        .expect("the binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = wequiv(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

#[test]
fn distance_reports_value_and_tail() {
    let v = json(&["distance", "--a", &data("swap.json"), "--b", &data("fix.json")]);
    assert_eq!(v["command"], "distance");
    assert_eq!(v["value"], 0.03125);
    assert_eq!(v["truncation_bound"], 0.3125);
    assert_eq!(v["cut"], 4);
    assert_eq!(v["mode"], "points");
    assert_eq!(v["seed"], 0);
    assert_eq!(v["a"], "swap");
    assert_eq!(v["strategy"], "exhaustive");

    let s = json(&["sdistance", "--a", &data("swap.json"), "--b", &data("fix.json"), "--cut", "3"]);
    assert_eq!(s["mode"], "hulls");
    assert_eq!(s["truncation_bound"], 0.5);
    assert!(s["value"].as_f64().unwrap() <= 0.03125);
}

#[test]
fn output_is_sorted_pretty_json_with_newline() {
    let out = wequiv(&["type", "--a", &data("cycle4.json")]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.ends_with("}\n"));
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(text, serde_json::to_string_pretty(&v).unwrap() + "\n");
    assert_eq!(v["type"][0]["form"], serde_json::json!([[1, 2, 3, 0]]));
    assert_eq!(v["type"][0]["weight"], "1");
}

#[test]
fn containment_names_a_witness() {
    let v = json(&["contain", "--a", &data("fix.json"), "--b", &data("swap.json")]);
    assert_eq!(v["defect"], 0.5);
    assert_eq!(v["witness"], serde_json::json!([0, 1]));
}

#[test]
fn cloud_csv_layout() {
    let out = wequiv(&["cloud", "--a", &data("swap.json"), "--n", "2", "--k", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "m_0_0_0,m_0_0_1,m_0_1_0,m_0_1_1,m_1_0_0,m_1_0_1,m_1_1_0,m_1_1_1,witness");
    assert_eq!(rows.len(), 4);
    assert!(rows.contains(&"0.5,0,0,0.5,0,0.5,0.5,0,0 1"));
    assert!(text.lines().any(|l| l.starts_with('#') && l.contains("seed=0")));
}

#[test]
fn claim1_writes_deviations() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("dev.csv");
    let v = json(&[
        "claim1",
        "--a",
        &data("cycle256.json"),
        "--trials",
        "12",
        "--seed",
        "5",
        "--deviations-csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(v["window_size"], 3);
    assert_eq!(v["seed"], 5);
    let devs = v["max_deviation_per_trial"].as_array().unwrap();
    assert_eq!(devs.len(), 12);
    let written = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = written.lines().collect();
    assert_eq!(lines.len(), 13);
    for (line, d) in lines[1..].iter().zip(devs) {
        let value: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(value, d.as_f64().unwrap());
    }
}

#[test]
fn probes_and_axioms_pass_on_fixtures() {
    let v = json(&["axioms", "--a", &data("swap.json"), "--b", &data("fix.json"), "--cut", "3", "--t", "1/3,1/2"]);
    assert_eq!(v["report"]["pass"], true);
    let v = json(&[
        "probe",
        "--suite",
        "contraction",
        "--a",
        &data("swap.json"),
        "--b",
        &data("fix.json"),
        "--c",
        &data("cycle4.json"),
    ]);
    assert_eq!(v["report"]["pass"], true);
    let v = json(&["probe", "--suite", "self-combination", "--a", &data("swap.json")]);
    assert_eq!(v["report"]["pass"], true);
    assert_eq!(v["stable_defect"], 0.0);
}

#[test]
fn exit_codes() {
    assert_eq!(wequiv(&["distance", "--a", &data("swap.json")]).status.code(), Some(1));
    assert_eq!(wequiv(&["distance", "--a", "/nonexistent.json", "--b", &data("fix.json")]).status.code(), Some(1));
    assert_eq!(wequiv(&["distance", "--a", &data("swap.json"), "--b", &data("fix.json"), "--cut", "1"]).status.code(), Some(1));
    assert_eq!(wequiv(&["--help"]).status.code(), Some(0));

    let out = wequiv(&["--budget-partitions", "10", "distance", "--a", &data("cycle4.json"), "--b", &data("fix.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("2^4 labelings"));
    let out = Command::new(env!("CARGO_BIN_EXE_wequiv"))
        .args(["distance", "--a", &data("cycle4.json"), "--b", &data("fix.json")])
        .env("WEQUIV_BUDGET_PARTITIONS", "10")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = wequiv(&[
        "probe",
        "--suite",
        "self-combination",
        "--a",
        &data("cycle4.json"),
        "--strategy",
        "random",
        "--samples",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["report"]["pass"], false);
    assert!(v["report"]["max_violation"].as_f64().unwrap() > 1e-6);
}

#[test]
fn output_is_identical_across_thread_counts() {
    let commands: Vec<Vec<String>> = vec![
        vec!["distance".into(), "--a".into(), data("cycle4.json"), "--b".into(), data("swap.json")],
        vec!["sdistance".into(), "--a".into(), data("cycle4.json"), "--b".into(), data("fix.json")],
        vec!["cloud".into(), "--a".into(), data("cycle4.json"), "--n".into(), "3".into()],
        vec!["--strategy".into(), "random".into(), "--samples".into(), "50".into(), "--seed".into(), "9".into(),
             "cloud".into(), "--a".into(), data("cycle256.json"), "--n".into(), "2".into()],
        vec!["claim1".into(), "--a".into(), data("cycle256.json"), "--trials".into(), "40".into(), "--seed".into(), "3".into()],
    ];
    for cmd in commands {
        let run = |threads: &str| {
            let mut args: Vec<&str> = vec!["--threads", threads];
            args.extend(cmd.iter().map(String::as_str));
            let out = wequiv(&args);
            assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
            out.stdout
        };
        let one = run("1");
        assert_eq!(run("2"), one, "{cmd:?}");
        assert_eq!(run("8"), one, "{cmd:?}");
    }
}
