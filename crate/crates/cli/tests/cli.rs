//! End-to-end checks of the qsurf binary: exit codes, artifact layout, and
//! byte-identical reports for identical configs.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use qsurf_core::constructions::assemble_y;
use qsurf_core::grids::flat_grid;
use qsurf_core::report::canonical_json;
use qsurf_core::simplicial::mesh_graph;

fn qsurf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsurf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qsurf-cli-{}-{}", name, std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_canonical<T: serde::Serialize>(path: &PathBuf, value: &T) {
    let text = canonical_json(&serde_json::to_value(value).unwrap());
    fs::write(path, text).unwrap();
}

#[test]
fn snowsphere_writes_artifacts_and_reproduces() {
    let dir = scratch("snow");
    let out = dir.join("s1");
    let run1 = qsurf(&[
        "snowsphere",
        "--stage",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run1.status.success(), "{:?}", run1);
    assert!(out.join("complex.json").exists());
    assert!(out.join("snowsphere.obj").exists());
    assert!(out.join("report.json").exists());
    let report: serde_json::Value =
        serde_json::from_slice(&run1.stdout).expect("stdout is one JSON report");
    assert_eq!(report["result"]["squares"], 78);
    assert_eq!(report["result"]["triangles"], 156);
    let run2 = qsurf(&[
        "snowsphere",
        "--stage",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(run1.stdout, run2.stdout, "reports must be byte-identical");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn snowsphere_guard_is_an_input_error() {
    let dir = scratch("snow5");
    let run = qsurf(&[
        "snowsphere",
        "--stage",
        "5",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(2));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn verify_passes_on_the_flat_grid() {
    let dir = scratch("verify");
    let grid = flat_grid(3, 1.0);
    let path = dir.join("grid.json");
    write_canonical(&path, &grid.complex);
    let run = qsurf(&[
        "verify",
        "--complex",
        path.to_str().unwrap(),
        "--mesh-level",
        "2",
    ]);
    assert!(run.status.success(), "{:?}", run);
    let report: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(report["result"]["pass"], true);
    assert_eq!(report["result"]["certificate"]["k"], 6);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn approximate_self_target_passes_and_writes_bundle() {
    let dir = scratch("approx");
    let z = flat_grid(2, 1.0).complex;
    let own: Vec<f64> = z.edges().iter().map(|e| e.len).collect();
    let unit = assemble_y(&z, &own).unwrap();
    let mesh = mesh_graph(&unit.y, 2);
    let k = z.vertex_count();
    let nodes: Vec<usize> = (0..k).collect();
    let ids = (0..k).map(|i| i.to_string()).collect();
    let target = mesh.metric_on(&nodes, ids).unwrap();

    let z_path = dir.join("z.json");
    let t_path = dir.join("target.json");
    write_canonical(&z_path, &z);
    write_canonical(&t_path, &target);
    let out = dir.join("bundle");
    let run = qsurf(&[
        "approximate",
        "--complex",
        z_path.to_str().unwrap(),
        "--target",
        t_path.to_str().unwrap(),
        "--mesh-level",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{:?}", run);
    let report: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(report["result"]["pass"], true);
    let alpha = report["result"]["alpha"].as_f64().unwrap();
    assert!((alpha - 1.0).abs() < 1e-9, "self target runs at scale 1");
    assert!(out.join("y.json").exists());
    assert!(out.join("report.json").exists());

    // an undersized manual scale violates domination: input-level failure
    let bad = qsurf(&[
        "approximate",
        "--complex",
        z_path.to_str().unwrap(),
        "--target",
        t_path.to_str().unwrap(),
        "--alpha",
        "0.25",
        "--mesh-level",
        "2",
    ]);
    assert_eq!(bad.status.code(), Some(2), "{:?}", bad);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn modulus_rejects_a_bad_family_spec() {
    let dir = scratch("modfam");
    let grid = flat_grid(2, 1.0);
    let path = dir.join("grid.json");
    write_canonical(&path, &grid.complex);
    let fam = dir.join("family.json");
    fs::write(&fam, "{\"e\":[0],\"f\":[1],\"g\":\"everything\"}").unwrap();
    let run = qsurf(&[
        "modulus",
        "--complex",
        path.to_str().unwrap(),
        "--family",
        fam.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(2));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn modulus_runs_on_an_explicit_family() {
    let dir = scratch("mod");
    let grid = flat_grid(2, 1.0);
    let path = dir.join("grid.json");
    write_canonical(&path, &grid.complex);
    // opposite corners of the rhombus patch
    let e = grid.complex.vertex_count() - 1;
    let fam = dir.join("family.json");
    fs::write(&fam, format!("{{\"e\":[0],\"f\":[{}],\"g\":\"all\"}}", e)).unwrap();
    let run = qsurf(&[
        "modulus",
        "--complex",
        path.to_str().unwrap(),
        "--family",
        fam.to_str().unwrap(),
        "--mesh-level",
        "2",
        "--tol",
        "1e-2",
    ]);
    assert!(run.status.success(), "{:?}", run);
    let report: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    assert!(report["result"]["value"].as_f64().unwrap() > 0.0);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn distortion_of_identity_is_flat() {
    let dir = scratch("dist");
    let m = qsurf_core::FiniteMetric::from_coords2(&[[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 3.0]]);
    let path = dir.join("m.json");
    write_canonical(&path, &m);
    let run = qsurf(&[
        "distortion",
        "--src",
        path.to_str().unwrap(),
        "--dst",
        path.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{:?}", run);
    let report: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    let lambda = report["result"]["bilip"]["lambda"].as_f64().unwrap();
    assert_eq!(lambda, 1.0);
    let _ = fs::remove_dir_all(&dir);
}
