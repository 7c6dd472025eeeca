use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn iface(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iface"))
        .args(args)
        .env_remove("IFACE_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = iface(args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn ids(v: &Value) -> Vec<u64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_u64().unwrap())
        .collect()
}

fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.retain(|k, _| !matches!(k.as_str(), "time_s" | "wall_time_ms" | "family_time_ms"));
            m.values_mut().for_each(strip_timing);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

#[test]
fn gamma_on_the_chain() {
    assert_eq!(
        json(&["gamma", "--instance", "chain", "--ids", "0,3"])["gamma"],
        4
    );
    let empty = json(&["gamma", "--instance", "chain", "--ids", ""]);
    assert_eq!(empty["gamma"], 0);
    let accel = json(&["gamma", "--instance", "chain", "--ids", "2"]);
    assert_eq!(
        (accel["gamma"].as_u64(), accel["gamma_union_task"].as_u64()),
        (Some(1), Some(2))
    );
}

#[test]
fn bad_ids_are_usage_errors() {
    for bad in ["4", "x", "-1"] {
        let out = iface(&["gamma", "--ids", bad]);
        assert_eq!(out.status.code(), Some(1), "ids {bad}");
    }
    assert_eq!(iface(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(iface(&["--help"]).status.code(), Some(0));
}

#[test]
fn enumerate_the_chain() {
    let r = json(&["enumerate", "--expand-limit", "1000"]);
    assert_eq!(r["family_size"], 6);
    assert_eq!(r["expanded_size"], 12);
    assert_eq!(ids(&r["s_reduced"]), [0, 1, 2]);
    let aggressive = json(&["enumerate", "--aggressive-prune", "--workers", "2"]);
    assert_eq!(aggressive["sitaware_reduced"], r["sitaware_reduced"]);
}

#[test]
fn solve_the_chain() {
    let r = json(&["solve", "--k-trust", "4"]);
    assert_eq!(r["cardinality"], 2);
    assert_eq!(r["solution"]["gamma_value"], 4);
    let high = json(&["solve", "--k-trust", "2"]);
    assert_eq!(high["solution"]["regime"], "high_trust_exact");
    // {s_p} and {s_v} tie; the lower id wins
    assert_eq!(ids(&high["solution"]["selected"]), [0]);

    let out = iface(&["solve", "--k-trust", "5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("legal range is [1, 4]"));
    assert_eq!(iface(&["solve"]).status.code(), Some(1));
}

#[test]
fn instance_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("two.json");
    // two states, input on the second; sensors on each state
    let inst = r#"{"A": [[0, 1], [0, 0]], "B": [[0], [1]],
                   "sensors": [[1, 0], [0, 1]], "task_sensor_ids": [1], "k_trust": 1}"#;
    std::fs::write(&path, inst).unwrap();
    let p = path.to_str().unwrap();
    let fam = json(&["enumerate", "--instance", p]);
    assert!(fam["sitaware_reduced"]
        .as_array()
        .unwrap()
        .iter()
        .any(|s| ids(s) == [1]));
    let sol = json(&["solve", "--instance", p]);
    assert_eq!(sol["k_trust"], 1);
    assert_eq!(sol["cardinality"], 1);

    let csv_out = dir.path().join("sol.csv");
    let out = iface(&[
        "solve",
        "--instance",
        p,
        "--format",
        "csv",
        "--out",
        csv_out.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv_out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("configuration,k_trust,regime,family_size,cardinality,delta,solution_ids,time_s")
    );
    assert!(lines.next().unwrap().contains(",1,high_trust_exact,"));
}

#[test]
fn malformed_instances_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"A": [[0]], "B": [[1]], "sensors": [[1]], "task_sensor_ids": [3], "k_trust": 1}"#,
    )
    .unwrap();
    assert_eq!(
        iface(&["gamma", "--instance", path.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        iface(&["gamma", "--instance", "/nonexistent/x.json"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        iface(&["gamma", "--instance", "grid118:cfg9"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn grid_config1_no_trust_selects_everything() {
    let r = json(&["solve", "--instance", "grid118:cfg1", "--k-trust", "108"]);
    assert_eq!(r["cardinality"], 54);
    let d = r["solution"]["bound_delta"].as_f64().unwrap();
    assert!((d - 4.99).abs() < 5e-3, "{d}");
}

#[test]
fn grid_config4_no_trust_cell() {
    let r = json(&["grid", "--config", "4", "--level", "none"]);
    let cell = &r["configurations"][0]["cells"][0];
    assert_eq!(cell["status"], "done");
    assert_eq!(cell["cardinality"], 28);
    let gated = json(&["grid", "--config", "4", "--level", "high"]);
    assert_eq!(
        gated["configurations"][0]["cells"][0]["status"],
        "skipped_long"
    );
}

#[test]
fn runs_are_reproducible() {
    let args = ["grid", "--config", "2", "--workers", "3"];
    let (mut a, mut b) = (json(&args), json(&args));
    strip_timing(&mut a);
    strip_timing(&mut b);
    assert_eq!(a, b);
    let cells = &a["configurations"][0]["cells"];
    assert_eq!(cells[0]["regime"], "high_trust_exact");
    assert_eq!(cells[1]["k_trust"], 24);
    let task = ids(&a["configurations"][0]["task"]);
    let mut expect: Vec<u64> = (0..5).chain(task).collect();
    expect.sort_unstable();
    assert_eq!(ids(&cells[1]["selected"]), expect);
}

fn with_data_dir(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iface"))
        .args(args)
        .env("IFACE_DATA_DIR", dir)
        .output()
        .expect("binary runs")
}

#[test]
fn data_dir_override() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["grid", "--config", "1", "--level", "none"];
    assert_eq!(with_data_dir(dir.path(), &args).status.code(), Some(2));

    // bus 3 hangs off nothing but bus 4, and neither has a machine
    let island = "bus 1 gen 1\nbus 2 gen 1\nbus 3 load 1\nbus 4 load 1\n\
                  branch 1 2 0 0.5 1\nbranch 3 4 0 0.5 1\ngen 1 1\ngen 2 1\n";
    std::fs::write(dir.path().join("case118.txt"), island).unwrap();
    let out = with_data_dir(dir.path(), &args);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
