use std::f64::consts::TAU;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use manrom::harness::write_matrix;
use nalgebra::DMatrix;

const TINY: &str = r#"{
  "mesh": {"edge_length": 6.0, "divisions": 4, "pores": {"centers": [[2,2,2],[4,4,4]], "radius": 1.5}},
  "paths": {"n_train": 2, "n_val": 1, "steps": 2, "dH_lp": 0.03, "dH_ls": 0.015, "seed": 42},
  "methods": [
    {"name": "pod", "d": [1, 2]},
    {"name": "lem", "d": 2, "k": 2, "n_lin": 4}
  ]
}"#;

fn mor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mor")).args(args).output().expect("spawn mor")
}

fn tiny_config(dir: &Path) -> String {
    let p = dir.join("cfg.json");
    fs::write(&p, TINY).unwrap();
    p.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn campaign_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let out = tmp.path().join("out");
    let o = mor(&["campaign", "--config", &cfg, "--out", s(&out), "--threads", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,d,E_mean_pct,E_max_pct,wall_s,converged_paths");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("pod,1,"));
    assert!(lines[3].starts_with("lem_local,2,"));
    for l in &lines[1..] {
        assert!(l.ends_with(",3"), "{l}");
    }

    let r = mor(&["report", "--input", s(&out.join("report.csv"))]);
    assert!(r.status.success());
    assert!(String::from_utf8_lossy(&r.stdout).contains("lem_local"));
}

#[test]
fn missing_config_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mor(&["campaign", "--config", s(&tmp.path().join("nope.json")), "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(mor(&["mesh", "--out", s(tmp.path())]).status.code(), Some(2));
    assert_eq!(mor(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(mor(&[]).status.code(), Some(2));
}

#[test]
fn domain_error_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let o = mor(&["mesh", "--config", &cfg, "--out", s(tmp.path()), "--set", "mesh.pores={\"centers\":[[0,0,0]],\"radius\":1}"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    let line = err.lines().find(|l| l.starts_with("ERROR ")).expect("error line");
    assert!(line.starts_with("ERROR PoreTouchesBoundary: "), "{line}");
}

#[test]
fn mesh_and_paths_are_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let out = tmp.path().join("o");
    for cmd in ["mesh", "paths"] {
        assert!(mor(&[cmd, "--config", &cfg, "--out", s(&out)]).status.success());
    }
    let a = (fs::read(out.join("mesh.json")).unwrap(), fs::read(out.join("paths.json")).unwrap());
    for cmd in ["mesh", "paths"] {
        assert!(mor(&[cmd, "--config", &cfg, "--out", s(&out)]).status.success());
    }
    assert_eq!(a.0, fs::read(out.join("mesh.json")).unwrap());
    assert_eq!(a.1, fs::read(out.join("paths.json")).unwrap());
    let paths: serde_json::Value = serde_json::from_slice(&a.1).unwrap();
    assert_eq!(paths.as_array().unwrap().len(), 3);
}

#[test]
fn solve_train_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let out = tmp.path().join("o");
    let o = mor(&["solve", "--config", &cfg, "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let snaps = out.join("snapshots.mor");
    let bytes = fs::read(&snaps).unwrap();
    assert_eq!(&bytes[..4], b"MOR1");
    // 2 training paths x 2 steps plus the zero column
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 5);

    let models = tmp.path().join("models");
    let train = |dir: &Path| mor(&["train", "--config", &cfg, "--out", s(dir), "--snapshots", s(&snaps)]);
    assert!(train(&models).status.success());
    let first = fs::read(models.join("lem_local_d2").join("y.mor")).unwrap();
    assert!(train(&models).status.success());
    assert_eq!(first, fs::read(models.join("lem_local_d2").join("y.mor")).unwrap());

    let replay = tmp.path().join("replay");
    let o = mor(&[
        "rom-solve",
        "--config",
        &cfg,
        "--out",
        s(&replay),
        "--model",
        s(&models.join("pod_d2")),
        "--reference",
        s(&out.join("reference.mor")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("3/3 paths converged"));
    let trace = fs::read_to_string(replay.join("trace.csv")).unwrap();
    assert!(trace.starts_with("path_id,step,iterations,residual,wall_ms,cluster_seq"));
    assert_eq!(trace.lines().count(), 1 + 3 * 2);
}

#[test]
fn corrdim_on_circle() {
    let tmp = tempfile::tempdir().unwrap();
    let s_pts = 400;
    let u = DMatrix::from_fn(10, s_pts, |i, j| {
        let t = TAU * j as f64 / s_pts as f64;
        match i {
            0 => t.cos(),
            1 => t.sin(),
            _ => 0.0,
        }
    });
    let path = tmp.path().join("circle.mor");
    write_matrix(&path, &u).unwrap();
    let o = mor(&["corrdim", "--snapshots", s(&path), "--out", s(tmp.path())]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    let p: f64 = stdout.trim().strip_prefix("plateau ").unwrap().parse().unwrap();
    assert!((0.8..=1.2).contains(&p), "plateau {p}");
    let csv = fs::read_to_string(tmp.path().join("corrdim.csv")).unwrap();
    assert!(csv.starts_with("eps,p_cd,delta_sd,plateau"));
}
