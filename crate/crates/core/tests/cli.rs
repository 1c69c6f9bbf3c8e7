mod common;

use std::fs;

use common::{assets, factorial, validate};
use serde_json::Value;

fn smokers() -> String {
    assets().join("ahluwalia.json").display().to_string()
}

fn stdout_json(out: &std::process::Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn analyze_reports_every_effect() {
    let out = factorial(&["analyze", &smokers(), "--seed", "7", "--draws", "20000"]);
    let report = stdout_json(&out);
    validate("analysis_report.schema.json", &report).unwrap();
    let effects = report["effects"].as_array().unwrap();
    assert_eq!(effects.len(), 3);
    let e2 = &effects[1];
    assert_eq!(e2["effect"], 2);
    assert!((e2["neyman"]["point"].as_f64().unwrap() - 0.082).abs() < 5e-4);
    assert!((e2["neyman"]["lower"].as_f64().unwrap() - 0.035).abs() < 1e-3);
    assert!((e2["neyman"]["upper"].as_f64().unwrap() - 0.129).abs() < 1e-3);
    assert_eq!(report["seed"], 7);
}

#[test]
fn analyze_is_reproducible() {
    let args = ["analyze", &smokers(), "--seed", "7", "--draws", "20000", "--rho", "0,0.5", "--sweep-draws", "2000"];
    let a = factorial(&args);
    let b = factorial(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    validate("analysis_report.schema.json", &stdout_json(&a)).unwrap();
}

#[test]
fn missing_seed_is_echoed_for_replay() {
    let first = stdout_json(&factorial(&["analyze", &smokers(), "--draws", "5000", "--effects", "1"]));
    let seed = first["seed"].as_u64().unwrap().to_string();
    let replay = stdout_json(&factorial(&["analyze", &smokers(), "--draws", "5000", "--effects", "1", "--seed", &seed]));
    assert_eq!(first, replay);
}

#[test]
fn analyze_zero_successes() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("zeros.json");
    fs::write(&input, r#"{"K": 2, "n": [40, 40, 40, 40], "n_obs": [0, 0, 0, 0]}"#).unwrap();
    let report = stdout_json(&factorial(&["analyze", input.to_str().unwrap(), "--seed", "1", "--draws", "5000"]));
    for e in report["effects"].as_array().unwrap() {
        assert_eq!(e["neyman"]["variance"].as_f64().unwrap(), 0.0);
        assert!(e["bayes_indep"]["variance"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn csv_input_matches_json_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("smokers.csv");
    fs::write(&input, "arm,size,successes\n1,189,13\n2,188,29\n3,189,19\n4,189,34\n").unwrap();
    let from_csv = stdout_json(&factorial(&["analyze", input.to_str().unwrap(), "--from-csv", "--seed", "3", "--draws", "5000"]));
    let from_json = stdout_json(&factorial(&["analyze", &smokers(), "--seed", "3", "--draws", "5000"]));
    assert_eq!(from_csv["effects"], from_json["effects"]);
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"K\": 2,\n \"n\": [10, 10, 10],\n \"n_obs\": [1, 1, 1]}").unwrap();
    let out = factorial(&["analyze", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("4 arm sizes"));

    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{\"K\": 2,\n \"n\": [10, 10, 10, 10],\n \"n_obs\": [1, 1, 1, x]}").unwrap();
    let out = factorial(&["analyze", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let csv = dir.path().join("bad.csv");
    fs::write(&csv, "1,10,1\n2,10,one\n").unwrap();
    let out = factorial(&["analyze", csv.to_str().unwrap(), "--from-csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2:"), "{}", String::from_utf8_lossy(&out.stderr));

    for args in [
        vec!["analyze", "/nonexistent/input.json"],
        vec!["analyze", &smokers(), "--effects", "4"],
        vec!["analyze", &smokers(), "--level", "1.5"],
        vec!["analyze", &smokers(), "--draws", "10"],
        vec!["sensitivity", &smokers(), "--effect", "2", "--grid", "1.2"],
        vec!["gen-cases", "--units", "0", "--seed", "1"],
        vec!["analyze", "--no-such-flag"],
    ] {
        assert_eq!(factorial(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn oversized_draws_exit_3() {
    let out = factorial(&["analyze", &smokers(), "--draws", "1000000000", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sensitivity_single_point_matches_independent_interval() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("summary.json");
    let out = factorial(&[
        "sensitivity", &smokers(), "--effect", "2", "--grid", "0", "--draws", "50000", "--seed", "4",
        "--json", json.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "rho,lower,upper,width");
    assert_eq!(lines.len(), 2);
    let fields: Vec<f64> = lines[1].split(',').map(|f| f.parse().unwrap()).collect();

    let summary: Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    validate("sensitivity_report.schema.json", &summary).unwrap();

    let indep = stdout_json(&factorial(&["analyze", &smokers(), "--effects", "2", "--seed", "4"]));
    let b = &indep["effects"][0]["bayes_indep"];
    assert!((fields[1] - b["lower"].as_f64().unwrap()).abs() < 0.003);
    assert!((fields[2] - b["upper"].as_f64().unwrap()).abs() < 0.003);
}

#[test]
fn sensitivity_with_custom_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let gamma = dir.path().join("gamma.csv");
    fs::write(&gamma, "0,0.5,0.5,0.5\n0.5,0,0.5,0.5\n0.5,0.5,0,0.5\n0.5,0.5,0.5,0\n").unwrap();
    let out = factorial(&["sensitivity", &smokers(), "--effect", "1", "--gamma", gamma.to_str().unwrap(), "--draws", "5000", "--seed", "2"]);
    let summary = stdout_json(&out);
    validate("sensitivity_report.schema.json", &summary).unwrap();
    assert_eq!(summary["grid_points"], 0);
    assert!(summary["conservative"].get("rho").is_none());
}

#[test]
fn gen_cases_rows_sum_to_units() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = factorial(&["gen-cases", "--count", "100", "--units", "800", "--seed", "9", "--out", path.to_str().unwrap()]);
        assert!(out.status.success());
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("D0000,"));
    let rows: Vec<u64> = lines.map(|l| l.split(',').map(|x| x.parse::<u64>().unwrap()).sum()).collect();
    assert_eq!(rows.len(), 100);
    assert!(rows.iter().all(|&s| s == 800));
}

#[test]
fn simulate_toy_cases() {
    let dir = tempfile::tempdir().unwrap();
    let cases = dir.path().join("toy.csv");
    fs::write(
        &cases,
        "# three tiny populations\n\
         2,2,2,2,0,0,0,0,2,2,2,2,0,0,0,0\n\
         1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1\n\
         4,0,0,0,0,0,0,0,0,0,0,0,0,0,0,12\n",
    )
    .unwrap();
    let config = dir.path().join("toy.json");
    fs::write(
        &config,
        r#"{"cases": "unused.csv", "arms": [4, 4, 4, 4], "effect": 1, "replications": 50,
            "methods": ["neyman"], "seed": 5}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = factorial(&[
        "simulate", config.to_str().unwrap(), "--cases", cases.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap(),
    ]);
    let summary = stdout_json(&out);
    validate("simulation_summary.schema.json", &summary).unwrap();
    assert_eq!(summary["cases"], 3);
    assert_eq!(summary["summary"][0]["method"], "neyman");
    let coverage = fs::read_to_string(out_dir.join("coverage.csv")).unwrap();
    let lines: Vec<&str> = coverage.lines().collect();
    assert_eq!(lines[0], "case_id,method,coverage,mean_width");
    assert_eq!(lines.len(), 4);
    let written: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(written, summary);
}

#[test]
fn simulate_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(&config, r#"{"cases": "x.csv", "arms": [4, 4, 4, 4], "effect": 1, "replications": 5, "methods": ["neyman"], "seed": 1, "typo": 1}"#).unwrap();
    assert_eq!(factorial(&["simulate", config.to_str().unwrap()]).status.code(), Some(2));
    fs::write(&config, r#"{"cases": "x.csv", "arms": [4, 4, 4, 4], "effect": 1, "replications": 5, "methods": ["bayes-sensitivity"], "seed": 1}"#).unwrap();
    assert_eq!(factorial(&["simulate", config.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn thread_count_does_not_change_output() {
    let args = ["sensitivity", &smokers(), "--effect", "2", "--grid", "0:0.3:0.1", "--draws", "2000", "--seed", "8"];
    let one = factorial(&[&["--threads", "1"][..], &args].concat());
    let four = factorial(&[&["--threads", "4"][..], &args].concat());
    assert!(one.status.success());
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(one.stderr, four.stderr);
    let env = std::process::Command::new(env!("CARGO_BIN_EXE_factorial"))
        .args(args)
        .env("FACTORIAL_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(env.stdout, one.stdout);
}
