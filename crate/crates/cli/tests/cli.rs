use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn wdro() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_wdro"));
    c.env_remove("WDRO_SEED");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr)
        .unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {}", String::from_utf8_lossy(&out.stderr)))
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn missing_config_exits_one() {
    let out = wdro().args(["eval", "--config", "missing.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "IoError");
}

#[test]
fn calibrate_from_flags() {
    let out = wdro()
        .args([
            "calibrate",
            "--rule",
            "cor4",
            "--n",
            "100",
            "--t",
            "1",
            "--tau",
            "1",
            "--r-star",
            "0.01",
        ])
        .output()
        .unwrap();
    let v = stdout_json(&out);
    assert!((v["result"]["rho"].as_f64().unwrap() - 0.8).abs() < 1e-12);
    assert_eq!(v["config"]["inputs"]["n"], 100);
}

#[test]
fn numerical_failure_exits_two() {
    // the gradient rule needs n ≥ 8σ²t
    let out = wdro()
        .args([
            "calibrate",
            "--rule",
            "cor3",
            "--n",
            "7",
            "--t",
            "1",
            "--tau",
            "1",
            "--sigma",
            "1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stderr_json(&out)["error"], "MinSampleSize");
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"schema_version":1,"rule":"thm1","inputs":{"n":10,"t":1,"tau":1},"extra":0}"#,
    )
    .unwrap();
    let out = wdro().args(["calibrate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "JsonError");
}

#[test]
fn certify_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("twopoint.json");
    let mut reports = Vec::new();
    for (k, jobs) in ["1", "2"].iter().enumerate() {
        let out_dir = dir.path().join(format!("run{k}"));
        let out = wdro()
            .args(["certify", "--config"])
            .arg(&cfg)
            .args(["--seed", "7", "--jobs", jobs, "--format", "both", "--out"])
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        for f in ["coverage.csv", "tail.csv"] {
            assert!(out_dir.join(f).exists(), "{f}");
        }
        reports.push(std::fs::read(out_dir.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let v: serde_json::Value = serde_json::from_slice(&reports[0]).unwrap();
    assert_eq!(v["config"]["seed"], 7);
}

#[test]
fn env_seed_wins_over_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = wdro()
        .env("WDRO_SEED", "11")
        .args(["certify", "--config"])
        .arg(configs().join("twopoint.json"))
        .args(["--seed", "7", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(v["config"]["seed"], 11);
}

#[test]
fn refuses_to_overwrite_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("nested/out");
    let run = |force: bool| {
        let mut c = wdro();
        c.args([
            "calibrate",
            "--rule",
            "thm1",
            "--n",
            "100",
            "--t",
            "2",
            "--tau",
            "2",
            "--out",
        ])
        .arg(&out_dir);
        if force {
            c.arg("--force");
        }
        c.output().unwrap()
    };
    assert!(run(false).status.success());
    let again = run(false);
    assert_eq!(again.status.code(), Some(1));
    assert_eq!(stderr_json(&again)["error"], "OutputExists");
    assert!(run(true).status.success());
}

#[test]
fn eval_example_config() {
    let out = wdro()
        .args(["eval", "--config"])
        .arg(configs().join("eval_quadratic.json"))
        .output()
        .unwrap();
    let v = stdout_json(&out);
    assert!((v["result"]["robust"]["robust_loss"].as_f64().unwrap() - 4.0).abs() < 1e-9);
    // defaults are echoed
    assert_eq!(v["config"]["domain"]["support"], "unbounded");
}

#[test]
fn solve_reads_csv_data() {
    let out = wdro()
        .args(["solve", "--config"])
        .arg(configs().join("solve_newsvendor.json"))
        .output()
        .unwrap();
    let v = stdout_json(&out);
    assert_eq!(v["config"]["max_iter"], 10000);
    assert!(v["result"]["robust_objective"].as_f64().unwrap() >= v["result"]["nominal_objective"].as_f64().unwrap());
}

#[test]
fn non_finite_csv_rows_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.csv"), "x,y\n1,2\n3,NaN\n").unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"problem":{"kind":"newsvendor","h":1,"b":1,"radius":1},"data":{"csv":"d.csv"},"rho":0.1}"#,
    )
    .unwrap();
    let out = wdro().args(["solve", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "DataError");
    assert!(err["message"].as_str().unwrap().contains("row 2"), "{err}");
}

#[test]
fn rate_function_csv() {
    let out = wdro()
        .args(["rate-function", "--format", "csv", "--config"])
        .arg(configs().join("rate_twopoint.json"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("epsilon,rate,t_opt"));
    // beyond the range of the loss the rate is infinite and the bound vanishes
    let last = lines.last().unwrap();
    assert!(last.contains(",inf,"), "{last}");
}
