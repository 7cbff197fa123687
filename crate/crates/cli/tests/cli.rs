use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

type Edit = Box<dyn FnOnce(&mut Value)>;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_torque-track"))
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn simulate(config: &Path, out: &Path) -> Output {
    bin()
        .arg("simulate")
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

/// The bundled pendulum step scenario with `edit` applied to its JSON.
fn edited_step(dir: &Path, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v: Value =
        serde_json::from_str(&std::fs::read_to_string(scenario("pendulum_step.json")).unwrap())
            .unwrap();
    edit(&mut v);
    write(dir, "edited.json", &v.to_string())
}

#[test]
fn tune_reports_the_constant_and_gains() {
    let out = run(&["tune", "--ts", "1.0", "--json"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    let p = v["settling_constant"].as_f64().unwrap();
    assert!((p - 5.8339).abs() < 1e-4);
    let row = &v["joints"][0];
    assert!((row["omega0"].as_f64().unwrap() - 5.8339).abs() < 1e-4);
    assert!((row["kp"].as_f64().unwrap() - 34.034).abs() < 1e-3);
    assert!((row["kv"].as_f64().unwrap() - 11.668).abs() < 1e-3);

    let out = run(&["tune", "--ts", "0.5", "--ts", "2.0", "--json"]);
    let v = stdout_json(&out);
    let w = |i: usize| v["joints"][i]["omega0"].as_f64().unwrap();
    assert_eq!(w(0) / w(1), 4.0);

    let out = run(&["tune", "--ts", "0.5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("P = 5.8339"), "{text}");
}

#[test]
fn tune_rejects_nonpositive_times() {
    for bad in ["-1", "0"] {
        let out = run(&["tune", "--ts", bad]);
        assert_eq!(out.status.code(), Some(1));
        assert!(stderr(&out).contains("ts"), "{}", stderr(&out));
    }
    assert_eq!(run(&["tune"]).status.code(), Some(1));
}

#[test]
fn simulate_pendulum_step_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("trace.csv");
    let svg = dir.path().join("plot.svg");
    let out = bin()
        .args(["simulate", "--config"])
        .arg(scenario("pendulum_step.json"))
        .arg("--out")
        .arg(&csv)
        .arg("--plot")
        .arg(&svg)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["status"], "ok");
    let joint = &v["summary"]["joints"][0];
    let settle = joint["settling_time"].as_f64().unwrap();
    assert!((settle / 0.5 - 1.0).abs() <= 0.03, "{settle}");
    // window stops at the pulse
    assert!(v["summary"]["window_end"].as_f64().unwrap() < 2.0);

    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,q1,qdot1,qd1,qddotd1,eps1,u1,u_raw1,energy"
    );
    assert_eq!(lines.count(), 50_001);
    let svg = std::fs::read_to_string(&svg).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
}

#[test]
fn simulate_saturated_task_reports_not_settled() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(
        &scenario("pendulum_saturated.json"),
        &dir.path().join("t.csv"),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["summary"]["joints"][0]["settling_time"], "not settled");
    assert_eq!(
        v["summary"]["joints"][0]["peak_torque"].as_f64().unwrap(),
        0.1
    );
}

#[test]
fn simulate_config_errors_exit_one_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let cases: Vec<(Edit, &str)> = vec![
        (Box::new(|v| v["sim"]["h"] = 0.01.into()), "control_period"),
        (Box::new(|v| v["sim"]["tend"] = 1.0.into()), "tend"),
        (
            Box::new(|v| v["model"]["links"][0]["mass"] = (-1.0).into()),
            "links[0].mass",
        ),
        (
            Box::new(|v| v["controller"]["ts"] = serde_json::json!([0.5, 0.5])),
            "controller.ts",
        ),
        (
            Box::new(|v| v["sim"]["initial_state"]["q"] = serde_json::json!([0.0, 0.0])),
            "sim.initial_state.q",
        ),
        (
            Box::new(|v| v["trajectory"]["kind"] = "spline".into()),
            "trajectory",
        ),
        (
            Box::new(|v| v["trajectory"]["steps"][1]["target"] = serde_json::json!([0.0, 1.0])),
            "trajectory.steps[1].target",
        ),
        (
            Box::new(|v| v["sim"]["perturbations"][0]["joint"] = 3.into()),
            "sim.perturbations[0].joint",
        ),
        (
            Box::new(|v| {
                v["controller"] = serde_json::json!({"gains": {"kp": [[1.0]], "kv": [2.0]}})
            }),
            "controller.gains.kp",
        ),
    ];
    for (edit, key) in cases {
        let config = edited_step(dir.path(), edit);
        let out = simulate(&config, &csv);
        assert_eq!(out.status.code(), Some(1), "{key}: {}", stderr(&out));
        assert!(stderr(&out).contains(key), "{key}: {}", stderr(&out));
    }
    let out = simulate(&dir.path().join("missing.json"), &csv);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_divergence_exits_two_with_partial_trace() {
    let dir = tempfile::tempdir().unwrap();
    let config = edited_step(dir.path(), |v| {
        v["controller"]["ts"] = 0.01.into();
        v["sim"]["h"] = 1e-3.into();
        v["sim"]["control_period"] = 1e-2.into();
        v["sim"]["t_end"] = 50.0.into();
    });
    let csv = dir.path().join("t.csv");
    let out = simulate(&config, &csv);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["status"], "diverged");
    let rows = std::fs::read_to_string(&csv).unwrap().lines().count() - 1;
    assert!(rows > 0 && rows < 50_001, "{rows}");
}

#[test]
fn simulate_uses_output_paths_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = edited_step(dir.path(), |v| {
        v["sim"]["t_end"] = 0.1.into();
        v["outputs"]["csv"] = "from_config.csv".into();
        v["outputs"]["plot"] = "from_config.svg".into();
    });
    let out = bin()
        .arg("simulate")
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("from_config.csv").exists());
    assert!(dir.path().join("from_config.svg").exists());
}

fn sweep(dir: &Path, body: &str) -> (Output, Vec<Vec<String>>) {
    let config = write(dir, "sweep.json", body);
    let out_dir = dir.join("out");
    let out = bin()
        .arg("sweep")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    let table = std::fs::read_to_string(out_dir.join("sweep.csv"))
        .unwrap_or_default()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (out, table)
}

fn column(table: &[Vec<String>], name: &str) -> Vec<String> {
    let i = table[0].iter().position(|c| c == name).unwrap();
    table[1..].iter().map(|r| r[i].clone()).collect()
}

fn numbers(col: Vec<String>) -> Vec<f64> {
    col.iter().map(|s| s.parse().unwrap()).collect()
}

#[test]
fn sweep_settling_times() {
    let dir = tempfile::tempdir().unwrap();
    let base = scenario("pendulum_step.json");
    let body = format!(
        r#"{{"base": {:?}, "parameter": "ts", "values": [1.0, 0.2, 0.5]}}"#,
        base
    );
    let (out, table) = sweep(dir.path(), &body);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(numbers(column(&table, "ts")), vec![0.2, 0.5, 1.0]);
    for (ts, settle) in [0.2, 0.5, 1.0]
        .iter()
        .zip(numbers(column(&table, "settling_time1")))
    {
        assert!((settle / ts - 1.0).abs() <= 0.03, "{ts}: {settle}");
    }
    for k in 0..3 {
        assert!(dir.path().join(format!("out/variant_{k:03}.json")).exists());
    }
}

#[test]
fn sweep_torque_limits() {
    let dir = tempfile::tempdir().unwrap();
    let (out, table) = sweep(
        dir.path(),
        &std::fs::read_to_string(scenario("sweeps/torque_limit.json"))
            .unwrap()
            .replace(
                "../pendulum_step.json",
                scenario("pendulum_step.json").to_str().unwrap(),
            ),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(column(&table, "torque_limit").last().unwrap(), "none");
    let peaks = numbers(column(&table, "peak_torque1"));
    assert!(peaks.windows(2).all(|w| w[0] <= w[1]), "{peaks:?}");
    let settle = column(&table, "settling_time1");
    assert_eq!(settle[0], "not settled");
    assert_ne!(settle.last().unwrap(), "not settled");
}

#[test]
fn sweep_mass_scale_degrades_monotonically() {
    let dir = tempfile::tempdir().unwrap();
    let base = scenario("pendulum_quintic.json");
    let body = format!(
        r#"{{"base": {:?}, "parameter": "mass_scale", "values": [1.2, 1.0, 1.1]}}"#,
        base
    );
    let (out, table) = sweep(dir.path(), &body);
    assert!(out.status.success(), "{}", stderr(&out));
    let dev = numbers(column(&table, "oracle_deviation1"));
    assert!(dev[0] < dev[1] && dev[1] < dev[2], "{dev:?}");
}

#[test]
fn sweep_records_failed_variants() {
    let dir = tempfile::tempdir().unwrap();
    let base = edited_step(dir.path(), |v| {
        v["sim"]["h"] = 1e-3.into();
        v["sim"]["control_period"] = 1e-2.into();
        v["sim"]["t_end"] = 50.0.into();
        v["sim"]["perturbations"] = serde_json::json!([]);
    });
    let body = format!(
        r#"{{"base": {:?}, "parameter": "ts", "values": [0.01, 2.0]}}"#,
        base
    );
    let (out, table) = sweep(dir.path(), &body);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(column(&table, "status"), vec!["diverged", "ok"]);
    assert!(!column(&table, "failed_at")[0].is_empty());
}

#[test]
fn sweep_config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let base = scenario("pendulum_step.json");
    for (body, key) in [
        (
            format!(r#"{{"base": {base:?}, "parameter": "ts", "values": [0.5, -1.0]}}"#),
            "values[0]",
        ),
        (
            format!(r#"{{"base": {base:?}, "parameter": "ts", "values": [null]}}"#),
            "values[0]",
        ),
        (
            format!(r#"{{"base": {base:?}, "parameter": "gravity", "values": [1.0]}}"#),
            "parameter",
        ),
        (
            format!(r#"{{"base": {base:?}, "parameter": "ts", "values": []}}"#),
            "values",
        ),
        (
            r#"{"base": "nowhere.json", "parameter": "ts", "values": [1.0]}"#.to_string(),
            "nowhere.json",
        ),
    ] {
        let (out, _) = sweep(dir.path(), &body);
        assert_eq!(out.status.code(), Some(1), "{body}: {}", stderr(&out));
        assert!(stderr(&out).contains(key), "{key}: {}", stderr(&out));
    }
}

#[test]
fn bundled_sweeps_run() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["ts", "mass_scale", "control_period"] {
        let out_dir = dir.path().join(name);
        let out = bin()
            .arg("sweep")
            .arg("--config")
            .arg(scenario(&format!("sweeps/{name}.json")))
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "{name}: {}", stderr(&out));
        assert!(out_dir.join("sweep.csv").exists());
    }
}

#[test]
fn bundled_scenarios_run() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["pendulum_quintic", "twolink_quintic", "pendulum_mismatch"] {
        let out = simulate(
            &scenario(&format!("{name}.json")),
            &dir.path().join(format!("{name}.csv")),
        );
        assert!(out.status.success(), "{name}: {}", stderr(&out));
        assert_eq!(stdout_json(&out)["status"], "ok");
    }
}

#[test]
fn validate_default_models_pass() {
    let out = run(&["validate", "--samples", "200"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    for n in ["1-link", "2-link", "3-link"] {
        assert!(text.contains(n));
    }
    assert!(!text.contains("FAIL"));
    assert!(text.contains("passive energy conserved"));
}

#[test]
fn validate_model_files() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"links": [{"mass": -1.0, "length": 1.0, "com_distance": 0.5}]}"#,
    );
    let out = bin()
        .arg("validate")
        .arg("--config")
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("links[0].mass"), "{}", stderr(&out));

    let damped = write(
        dir.path(),
        "damped.json",
        r#"{"links": [
            {"mass": 1.0, "length": 1.0, "com_distance": 0.5, "inertia_com": 0.1, "damping": 0.3},
            {"mass": 0.5, "length": 0.8, "com_distance": 0.4, "inertia_com": 0.05, "damping": 0.1}
        ]}"#,
    );
    let out = bin()
        .args(["validate", "--samples", "100", "--config"])
        .arg(&damped)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("passive energy nonincreasing"), "{text}");
    assert!(!text.contains("passive energy conserved"));
}
