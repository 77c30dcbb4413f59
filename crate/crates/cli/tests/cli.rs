use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pileup-rate"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn config(dir: &Path, overrides: Value) -> PathBuf {
    let mut cfg = json!({
        "case": "I",
        "lambda_grid": [0.1, 0.2],
        "events_per_signal": 12,
        "replications": 2,
        "sigma": 1.0,
        "shape_grid": {
            "theta1": {"from": 1.0, "to": 2.0, "step": 1.0},
            "theta2": {"from": 1.0, "to": 2.0, "step": 1.0},
            "tau": 12
        },
        "pipeline": {"path_factor": 0.8},
        "seed": 3
    });
    for (k, v) in overrides.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sim_writes_every_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), json!({}));
    let out = dir.path().join("out");
    let o = run(&["sim", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let records = std::fs::read_to_string(out.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 1 + 4);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 4);
    assert!(out.join("scatter_lambda_opt.csv").exists());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), json!({"lambda_grid": [0.1], "replications": 1}));
    let read = |name: &str, seed: Option<&str>| {
        let out = dir.path().join(name);
        let mut args = vec!["sim", "--config", s(&cfg), "--out", s(&out)];
        if let Some(seed) = seed {
            args.extend(["--seed", seed]);
        }
        assert!(run(&args).status.success());
        std::fs::read_to_string(out.join("records.csv")).unwrap()
    };
    let base = read("a", None);
    assert_eq!(base, read("b", Some("3")));
    assert_ne!(base, read("c", Some("4")));
}

#[test]
fn synthetic_signal_round_trips_through_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), json!({}));
    let signal = dir.path().join("signal.csv");
    let truth = dir.path().join("truth.csv");
    let o = run(&[
        "synth",
        "--config",
        s(&cfg),
        "--lambda",
        "0.1",
        "--signal",
        s(&signal),
        "--truth",
        s(&truth),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(signal.with_extension("json").exists());

    let report = dir.path().join("report.json");
    let o = run(&[
        "estimate",
        "--config",
        s(&cfg),
        "--signal",
        s(&signal),
        "--truth",
        s(&truth),
        "--lambda-true",
        "0.1",
        "--out",
        s(&report),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(v["lambda_hat"].as_f64().unwrap() > 0.0);
    assert!(v["lambda_opt"].as_f64().unwrap() > 0.0);
    assert_eq!(
        v["t_hat"].as_array().unwrap().len() as u64,
        v["m_hat"].as_u64().unwrap()
    );

    let o = run(&["solve", "--config", s(&cfg), "--signal", s(&signal), "--r", "2.0"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["kkt_violation"].as_f64().unwrap() <= 1e-8);

    let o = run(&[
        "bounds",
        "--config",
        s(&cfg),
        "--signal",
        s(&signal),
        "--truth",
        s(&truth),
        "--lambda-true",
        "0.1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["bounds"]["eta_theoretical"]["status"], "applicable");
}

#[test]
fn dict_dump_writes_shapes_and_profile() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), json!({}));
    let out = dir.path().join("dict");
    let o = run(&["dict", "dump", "--config", s(&cfg), "--samples", "64", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let profile = std::fs::read_to_string(out.join("profile.csv")).unwrap();
    assert_eq!(profile.lines().count(), 1 + 2 * 12 + 1);
    let shapes = std::fs::read_to_string(out.join("shapes.csv")).unwrap();
    assert_eq!(shapes.lines().count(), 1 + 4 * 12);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out.join("dictionary.json")).unwrap()).unwrap();
    assert_eq!(v["p"], 4);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(
        run(&["sim", "--config", s(&bad), "--out", s(&out)]).status.code(),
        Some(2)
    );

    let invalid = config(dir.path(), json!({"replications": 0}));
    assert_eq!(
        run(&["sim", "--config", s(&invalid), "--out", s(&out)]).status.code(),
        Some(2)
    );

    let missing = dir.path().join("missing.json");
    assert_eq!(
        run(&["sim", "--config", s(&missing), "--out", s(&out)]).status.code(),
        Some(3)
    );

    let cfg = config(dir.path(), json!({"pipeline": {"solver": {"max_sweeps": 1}}}));
    let signal = dir.path().join("signal.csv");
    let truth = dir.path().join("truth.csv");
    assert!(run(&[
        "synth",
        "--config",
        s(&cfg),
        "--lambda",
        "0.2",
        "--signal",
        s(&signal),
        "--truth",
        s(&truth)
    ])
    .status
    .success());
    let o = run(&["solve", "--config", s(&cfg), "--signal", s(&signal), "--r", "0.01"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));

    let malformed = dir.path().join("malformed.csv");
    std::fs::write(&malformed, "index,value\n0,1.0\n1,oops\n").unwrap();
    let o = run(&[
        "estimate",
        "--config",
        s(&cfg),
        "--signal",
        s(&malformed),
        "--dt",
        "1",
        "--sigma",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn odd_length_signal_is_padded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), json!({"pipeline": {"r": {"fixed": 0.5}}}));
    let signal = dir.path().join("odd.csv");
    let mut text = String::from("index,value\n");
    for i in 0..41 {
        text.push_str(&format!("{i},{}\n", if i == 10 { 30.0 } else { 0.0 }));
    }
    std::fs::write(&signal, text).unwrap();
    let o = run(&[
        "estimate",
        "--config",
        s(&cfg),
        "--signal",
        s(&signal),
        "--dt",
        "1",
        "--sigma",
        "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("padded"));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["n_samples"], 42);
}
