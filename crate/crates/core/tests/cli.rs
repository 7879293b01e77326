use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use subsphere::{param_distance, SubsphereParams};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_subsphere"))
}

fn data_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bundled_dataset_recovers_truth() {
    let dir = tempfile::tempdir().unwrap();
    let truth_text = std::fs::read_to_string(data_file("concentric_k4_truth.json")).unwrap();
    let truth: SubsphereParams = subsphere::harness::from_versioned_json(&truth_text).unwrap();
    for loss in ["intrinsic", "extrinsic", "slicing", "naive"] {
        let out = dir.path().join(format!("{loss}.json"));
        let o = run(&["fit", s(&data_file("concentric_k4.csv")), "--loss", loss, "--out", s(&out)]);
        assert_eq!(o.status.code(), Some(0), "{loss}: {}", String::from_utf8_lossy(&o.stderr));
        let report = read_json(&out);
        assert_eq!(report["schema_version"], "1.0");
        assert_eq!(report["K"], 4);
        let fitted: SubsphereParams = serde_json::from_value(report["params"].clone()).unwrap();
        assert!(param_distance(&fitted, &truth).unwrap() < 1e-6, "{loss}");
    }
}

#[test]
fn malformed_row_exits_2_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    std::fs::write(&input, "obs_id,group_j,coord_0,coord_1,coord_2\n0,0,0,0,1\n1,0,0,x,1\n").unwrap();
    let o = run(&["fit", s(&input), "--out", s(&dir.path().join("out.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    let o = run(&["fit", s(&dir.path().join("missing.csv")), "--out", s(&dir.path().join("out.json"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn slicing_fit_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = run(&["fit", s(&data_file("concentric_k4.csv")), "--loss", "slicing", "--out", s(out)]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

fn simulate(dir: &Path, spec: &str, n: usize) -> PathBuf {
    let spec_path = dir.join("spec.json");
    std::fs::write(&spec_path, spec).unwrap();
    let out = dir.join(format!("data_{n}.csv"));
    let o = run(&["simulate", "--spec", s(&spec_path), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

const SPEC: &str = r#"{
  "schema_version": "1.0",
  "m": 2, "K": 2, "n": 120,
  "truth": {"center": [0.0, 0.6, 0.8], "radii": [0.5, 1.0]},
  "noise": {"family": "tangent_gaussian", "sigma": [0.1]},
  "seed": 17
}"#;

#[test]
fn asym_reports_region_and_test() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), SPEC, 0);
    let fit = dir.path().join("fit.json");
    assert!(run(&["fit", s(&data), "--out", s(&fit)]).status.success());
    let center: Vec<f64> = serde_json::from_value(read_json(&fit)["params"]["center"].clone()).unwrap();
    let axis = center.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",");
    let out = dir.path().join("asym.json");
    let o = run(&["asym", s(&data), s(&fit), "--level", "0.9", "--test-axis", &axis, "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&out);
    assert_eq!(v["test"]["p_value"], 1.0);
    assert_eq!(v["test"]["dof"], 2);
    let region = &v["region"];
    assert_eq!(region["level"], 0.9);
    assert!(region["chi2_quantile"].as_f64().unwrap() > 4.6);
    assert_eq!(region["ellipsoid_matrix"].as_array().unwrap().len(), 2);
    assert_eq!(region["boundary_points_on_sphere"].as_array().unwrap().len(), 64);
    let est = &v["estimate"];
    assert_eq!(est["nu"], 4);
    assert_eq!(est["A_hat"].as_array().unwrap().len(), 4);
    // an axis nearly orthogonal to the fit is rejected outright
    let o = run(&["asym", s(&data), s(&fit), "--test-axis", "1,0,0", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(read_json(&out)["test"]["p_value"].as_f64().unwrap() < 1e-12);
}

#[test]
fn degenerate_data_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("same.csv");
    let mut text = String::from("obs_id,group_j,coord_0,coord_1,coord_2\n");
    for i in 0..10 {
        text.push_str(&format!("{i},0,0.6,0,0.8\n"));
    }
    std::fs::write(&input, text).unwrap();
    let fit = dir.path().join("fit.json");
    let o = run(&["fit", s(&input), "--loss", "slicing", "--out", s(&fit)]);
    assert!(o.status.success());
    assert_eq!(read_json(&fit)["non_unique"], true);
    let o = run(&["asym", s(&input), s(&fit), "--out", s(&dir.path().join("asym.json"))]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Hessian singular"));
}

#[test]
fn unknown_schema_major_and_bad_spec_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, SPEC.replace("\"1.0\"", "\"2.0\"")).unwrap();
    let o = run(&["simulate", "--spec", s(&spec), "--out", s(&dir.path().join("x.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(&spec, SPEC.replace("[0.1]", "[-0.1]")).unwrap();
    let o = run(&["simulate", "--spec", s(&spec), "--out", s(&dir.path().join("x.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("noise"));
}

#[test]
fn simulate_is_byte_identical_and_fit_reads_it_back() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), SPEC, 1);
    let first = std::fs::read(&a).unwrap();
    let b = simulate(dir.path(), SPEC, 2);
    assert_eq!(first, std::fs::read(&b).unwrap());
    let lines = String::from_utf8(first).unwrap().lines().count();
    assert_eq!(lines, 1 + 120 * 2);
}

#[test]
fn minimal_mc_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("mc.json");
    std::fs::write(
        &config,
        r#"{
  "replicates": 1, "n_grid": [40], "K_grid": [2], "loss": "slicing",
  "template": {"center": [0.0, 0.0, 1.0], "radii_pattern": [0.5, 1.0],
               "noise": {"family": "von_mises_fisher", "kappa": [200.0]}},
  "seed": 3, "target": {"kind": "generator"}
}"#,
    )
    .unwrap();
    let out = dir.path().join("report.json");
    let rows = dir.path().join("rows.csv");
    let o = run(&["mc", "--config", s(&config), "--out", s(&out), "--csv-out", s(&rows)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("median_d"));
    let v = read_json(&out);
    assert_eq!(v["cells"].as_array().unwrap().len(), 1);
    assert_eq!(v["records"].as_array().unwrap().len(), 1);
    assert_eq!(std::fs::read_to_string(&rows).unwrap().lines().count(), 2);
}
