use std::path::Path;
use std::process::{Command, Output};

fn etp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_etp"))
        .args(args)
        .output()
        .expect("spawn etp")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn synth_writes_valid_outputs_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let res = etp(&[
            "synth", "--seed", "9", "--out", arg(out), "--strategy", "wasserstein-prior",
            "--epsilon", "0.5", "--replicates", "3", "--synthetic", "6,3,2",
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    for file in ["replicates.csv", "metrics.csv", "contraction.csv", "panel.csv", "summary.json"] {
        assert_eq!(read(&a.join(file)), read(&b.join(file)), "{file} differs");
    }
    assert!(read(&a.join("replicates.csv")).starts_with("replicate,month,county,cases,deaths\n"));
    let res = etp(&[
        "validate", "--panel", arg(&a.join("panel.csv")), "--replicates", arg(&a.join("replicates.csv")),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn synth_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{"strategy": "postprocess", "epsilon": 1.0, "replicates": 2, "seed": 0,
            "input": {"synthetic": {"counties": 4, "months": 2, "seed": 1}}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let res = etp(&["synth", "--seed", "3", "--config", arg(&config), "--out", arg(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary: serde_json::Value = serde_json::from_str(&read(&out.join("summary.json"))).unwrap();
    assert_eq!(summary["config"]["seed"], 3);
    assert_eq!(summary["config"]["strategy"], "postprocess");
}

#[test]
fn synth_requires_seed() {
    let dir = tempfile::tempdir().unwrap();
    let res = etp(&["synth", "--out", arg(dir.path()), "--strategy", "postprocess", "--epsilon", "1"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn invalid_budget_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let res = etp(&["synth", "--seed", "1", "--out", arg(dir.path()), "--strategy", "postprocess", "--epsilon=0"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn validate_reports_bad_rows() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("panel.csv");
    std::fs::write(&panel, "county,month,cases,deaths\n0,0,5,1\n1,0,2,3\n").unwrap();
    let res = etp(&["validate", "--panel", arg(&panel)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 3"));
}

#[test]
fn postprocess_meets_total() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("noisy.csv");
    std::fs::write(&input, "county,cases,deaths\n0,4.6,1.2\n1,-1.5,0.4\n2,7.1,8.3\n").unwrap();
    let res = etp(&["postprocess", "--input", arg(&input), "--total", "10", "--out", arg(dir.path())]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = read(&dir.path().join("postprocessed.csv"));
    let mut total = 0;
    for line in text.lines().skip(1) {
        let v: Vec<u64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v[2] <= v[1]);
        total += v[1];
    }
    assert_eq!(total, 10);
}

#[test]
fn delta_z_corner() {
    let dir = tempfile::tempdir().unwrap();
    let res = etp(&["delta-z", "--n", "5,20", "--z0", "0", "--z1", "1", "--out", arg(dir.path())]);
    assert!(res.status.success());
    let text = read(&dir.path().join("delta_z_grid.csv"));
    let values: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(3).unwrap()).collect();
    assert_eq!(values, ["5", "20"]);
}

#[test]
fn inference_commands() {
    let dir = tempfile::tempdir().unwrap();
    let res = etp(&["infer-rejection", "--y", "4", "--draws", "500", "--seed", "2", "--out", arg(dir.path())]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(read(&dir.path().join("posterior_rejection.csv")).lines().count(), 501);

    let res = etp(&[
        "infer-importance", "--y", "4", "--m", "2000", "--proposal", "uniform", "--seed", "2", "--out",
        arg(dir.path()),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary: serde_json::Value = serde_json::from_str(&read(&dir.path().join("importance_summary.json"))).unwrap();
    let mean = summary["posterior_mean"].as_f64().unwrap();
    assert!(mean > 0.2 && mean < 0.8);
}

#[test]
fn exhausted_budget_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let res = etp(&[
        "infer-rejection", "--y", "4", "--draws", "100", "--max-proposals", "10", "--seed", "2", "--out",
        arg(dir.path()),
    ]);
    assert_eq!(res.status.code(), Some(4));
}

#[test]
fn impossible_release_exhausts_budget() {
    let dir = tempfile::tempdir().unwrap();
    let res = etp(&[
        "infer-rejection", "--y", "40", "--epsilon", "inf", "--draws", "10", "--max-proposals", "100000", "--seed",
        "2", "--out", arg(dir.path()),
    ]);
    assert_eq!(res.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&res.stderr).contains("accepted 0 of 10"));
}

#[test]
fn experiments_write_json() {
    let dir = tempfile::tempdir().unwrap();
    let d = arg(dir.path());
    for args in [
        vec!["experiment", "manifold", "--d1", "6", "--d2", "2", "--reps", "200", "--seed", "1", "--out", d],
        vec!["experiment", "kng-rate", "--n", "50,200,800", "--reps", "50", "--seed", "1", "--out", d],
        vec!["experiment", "power", "--reps", "500", "--seed", "1", "--out", d],
    ] {
        let res = etp(&args);
        assert!(res.status.success(), "{args:?}: {}", String::from_utf8_lossy(&res.stderr));
    }
    for name in ["experiment_manifold.json", "experiment_kng_rate.json", "experiment_power.json"] {
        let _: serde_json::Value = serde_json::from_str(&read(&dir.path().join(name))).unwrap();
    }
}
