use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_slowload")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn convex() -> Value {
    serde_json::from_str(&std::fs::read_to_string(configs().join("convex_play.json")).unwrap()).unwrap()
}

fn exec(args: &[&str], cfg: Option<&Value>, dir: &Path) -> Output {
    let mut cmd = Command::new(bin());
    cmd.args(args).arg("--out").arg(dir.join("out"));
    if let Some(c) = cfg {
        let p = dir.join("cfg.json");
        std::fs::write(&p, serde_json::to_string(c).unwrap()).unwrap();
        cmd.arg("--config").arg(p);
    }
    cmd.output().unwrap()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|_| panic!("unstructured stderr: {}", String::from_utf8_lossy(&o.stderr)))
}

fn read_json(p: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn minimal_run_writes_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = convex();
    cfg["run"] = json!({"epsilon": 0.1});
    let o = exec(&["run"], Some(&cfg), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,u_1,v_1,w_1,E,R_step,slack");
    // T/τ + 1 rows with τ = ε²/4 = 0.0025
    assert_eq!(lines.count(), 401);
    let last = csv.lines().last().unwrap();
    assert!(last.starts_with("1.0000000000000000e0,"));
    let s = read_json(dir.path().join("out/summary.json"));
    assert_eq!(s["seed"], 0);
    assert_eq!(s["schema_version"], 1);
    assert!(s["diagnostics"]["max_fenchel_young"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn asymmetric_matrix_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = convex();
    cfg["model"]["energy"] = json!({
        "kind": "quadratic_tracking",
        "stiffness": "identity",
        "loading": {"kind": "ramp", "start": [0.0, 0.0], "rate": [1.0, 0.0]}
    });
    cfg["model"]["dissipation"] = json!({"kind": "symmetric_l1", "weights": [1.0, 1.0]});
    cfg["model"]["mass"] = json!([[1.0, 0.5], [0.0, 1.0]]);
    cfg["initial"] = json!({"u0": [0.0, 0.0], "u1": [0.0, 0.0]});
    let o = exec(&["run"], Some(&cfg), dir.path());
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_json(&o);
    assert_eq!(e["error"], "config");
    assert_eq!(e["field"], "model.mass");
    assert!(e["message"].as_str().unwrap().contains("symmetric"));
}

#[test]
fn schema_violations_point_at_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = convex();
    cfg["model"]["dissipation"]["weights"] = json!([1.0, "x"]);
    let o = exec(&["run"], Some(&cfg), dir.path());
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_json(&o);
    assert!(e["field"].as_str().unwrap().starts_with("model.dissipation"));
    assert!(e["message"].as_str().unwrap().contains("line"));

    let mut cfg = convex();
    cfg["schema_version"] = json!(7);
    let o = exec(&["run"], Some(&cfg), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["field"], "schema_version");

    let mut cfg = convex();
    cfg["model"]["colour"] = json!("red");
    assert_eq!(exec(&["run"], Some(&cfg), dir.path()).status.code(), Some(2));

    let mut cfg = convex();
    cfg["initial"]["u1_scaling"] = json!({"rule": "eps_power", "exponent": -1.0});
    let o = exec(&["run"], Some(&cfg), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["field"], "initial.u1_scaling.exponent");

    let p = dir.path().join("broken.json");
    std::fs::write(&p, "{\"schema_version\": 1, \"model\": ").unwrap();
    let o = Command::new(bin()).args(["run", "--config"]).arg(&p).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    stderr_json(&o);

    let o = Command::new(bin()).args(["run"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["field"], "--config");
}

#[test]
fn delta_rule_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = convex();
    cfg["run"] = json!({"epsilon": 0.1});
    cfg["sweep"]["delta"] = json!("tau");
    let o = exec(&["run"], Some(&cfg), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let s = read_json(dir.path().join("out/summary.json"));
    assert_eq!(s["meta"]["delta_rule"], "tau");
    assert_eq!(s["meta"]["delta"], s["meta"]["tau"]);
    let eff = s["meta"]["epsilon_eff"].as_f64().unwrap();
    assert!((eff - (0.01f64 + 0.0025).sqrt()).abs() < 1e-15);
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = convex();
    cfg["run"] = json!({"epsilon": 0.05});
    let read = |n: &str| std::fs::read(dir.path().join("out").join(n)).unwrap();
    assert_eq!(exec(&["run", "--seed", "3"], Some(&cfg), dir.path()).status.code(), Some(0));
    let (a, b) = (read("summary.json"), read("trajectory.csv"));
    assert_eq!(exec(&["run", "--seed", "3"], Some(&cfg), dir.path()).status.code(), Some(0));
    assert_eq!(a, read("summary.json"));
    assert_eq!(b, read("trajectory.csv"));
    assert_eq!(read_json(dir.path().join("out/summary.json"))["seed"], 3);
    let leftovers: Vec<_> = std::fs::read_dir(dir.path().join("out"))
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn sweep_writes_runs_and_mismatch_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = convex();
    cfg["sweep"]["epsilons"] = json!([0.1, 0.05, 0.025]);
    let o = exec(&["sweep", "--threads", "2"], Some(&cfg), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for i in 0..3 {
        assert!(dir.path().join(format!("out/run_{i:02}.csv")).exists());
    }
    let table = std::fs::read_to_string(dir.path().join("out/mismatch.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(table.starts_with("epsilon,tau,delta,bar_hat,tilde_hat_rate,ratio_position,ratio_rate"));
    let s = read_json(dir.path().join("out/sweep.json"));
    assert_eq!(s["runs"].as_array().unwrap().len(), 3);

    let o = exec(&["plotdata", dir.path().join("out").to_str().unwrap()], None, dir.path());
    assert_eq!(o.status.code(), Some(0));
    let tidy = std::fs::read_to_string(dir.path().join("out/tidy.csv")).unwrap();
    assert!(tidy.starts_with("source,key,key_value,variable,value\n"));
    assert!(tidy.contains("run_02,t,"));
    let o = exec(&["plotdata", "/nonexistent/artifact.csv"], None, dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cost_of_equal_states_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = convex();
    cfg["cost"] = json!({"t": 0.3, "u1": [0.2], "u2": [0.2], "lambdas": [4.0], "random_starts": 2});
    let o = exec(&["cost", "--seed", "11"], Some(&cfg), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let c = read_json(dir.path().join("out/cost.json"));
    assert_eq!(c["cost"].as_f64().unwrap(), 0.0);
    assert_eq!(c["seed"], 11);

    cfg["cost"] = json!({"t": 0.3, "u1": [0.2]});
    let o = exec(&["cost"], Some(&cfg), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["field"], "cost.u2");
}

#[test]
fn verdict_needs_a_vanishing_step_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = convex();
    cfg["sweep"]["tau"] = json!({"rule": "fixed", "value": 0.001});
    let o = exec(&["verdict"], Some(&cfg), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["field"], "sweep.tau");
}

#[test]
fn leaving_the_validity_box_is_a_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: Value =
        serde_json::from_str(&std::fs::read_to_string(configs().join("double_well_v0.json")).unwrap()).unwrap();
    cfg["model"]["energy"]["validity_box"] = json!(1.0);
    cfg["run"] = json!({"epsilon": 0.1});
    let o = exec(&["run"], Some(&cfg), dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["error"], "solver");
}

#[test]
fn double_well_verdicts_split_by_viscosity() {
    for (file, class) in [("double_well_v0.json", "IVV"), ("double_well_v1.json", "IBV")] {
        let dir = tempfile::tempdir().unwrap();
        let o = Command::new(bin())
            .args(["verdict", "--config"])
            .arg(configs().join(file))
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let v = read_json(dir.path().join("verdict.json"));
        assert_eq!(v["classification"], class);
        assert_eq!(v["per_jump"].as_array().unwrap().len(), 1);
        for key in ["residual_max", "per_jump", "classification"] {
            assert!(v.get(key).is_some());
        }
        let j = &v["per_jump"][0];
        for key in ["t", "gap", "cost", "bracket"] {
            assert!(j.get(key).is_some());
        }
    }
}

#[test]
fn failed_verdict_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: Value =
        serde_json::from_str(&std::fs::read_to_string(configs().join("double_well_v1.json")).unwrap()).unwrap();
    cfg["tolerances"] = json!({"bracket": 1e-9});
    let o = exec(&["verdict"], Some(&cfg), dir.path());
    assert_eq!(o.status.code(), Some(4));
    let v = read_json(dir.path().join("out/verdict.json"));
    assert_eq!(v["classification"], "FAIL");
}
