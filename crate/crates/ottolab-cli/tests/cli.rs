//! End-to-end checks of the binary: flag handling, exit codes, output
//! plumbing, and the sidecar round trip.

use std::path::Path;
use std::process::{Command, Output};

fn ottolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ottolab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_torus_config(dir: &Path, out_csv: &Path) -> std::path::PathBuf {
    let path = dir.join("torus.cfg");
    std::fs::write(
        &path,
        format!(
            "model.gamma = 2.0\n\
             model.c = 1.0\n\
             grid.kind = periodic\n\
             grid.points = 64\n\
             grid.length = 6.283185307179586\n\
             weight.preset = zero\n\
             init.preset = uniform-perturbed\n\
             init.amplitude = 0.3\n\
             time.delta = 1.0\n\
             time.t_end = 1.1\n\
             time.dt = 0.00125\n\
             time.diagnostic_stride = 20\n\
             solver.scheme = spectral-rk4\n\
             output.path = {}\n",
            out_csv.display()
        ),
    )
    .unwrap();
    path
}

fn write_reference_config(dir: &Path, out_csv: &Path) -> std::path::PathBuf {
    let path = dir.join("reference.cfg");
    std::fs::write(
        &path,
        format!(
            "model.gamma = 2.0\n\
             model.c = 1.0\n\
             grid.kind = radial\n\
             grid.points = 512\n\
             grid.length = 4.0\n\
             weight.preset = zero\n\
             init.preset = barenblatt\n\
             time.delta = 1.0\n\
             time.t_end = 1.4\n\
             time.dt = 0.005\n\
             time.diagnostic_stride = 10\n\
             solver.scheme = central-upwind\n\
             output.path = {}\n",
            out_csv.display()
        ),
    )
    .unwrap();
    path
}

#[test]
fn malformed_config_is_rejected_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.csv");
    let cfg = write_torus_config(dir.path(), &out);
    let text = std::fs::read_to_string(&cfg).unwrap() + "grid.pionts = 32\n";
    std::fs::write(&cfg, text).unwrap();

    let run = ottolab(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2), "{run:?}");
    let err = String::from_utf8_lossy(&run.stderr);
    assert!(err.contains("grid.pionts"), "{err}");
    assert!(!out.exists(), "no output should be written for a bad config");
}

#[test]
fn oversized_step_keeps_partial_output_and_exits_as_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("partial.csv");
    let cfg = write_torus_config(dir.path(), &out);

    // a transition speed small enough that the damping bound rejects the
    // configured step as soon as the march starts
    let run = ottolab(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--override",
        "model.c=0.05",
        "--quiet",
    ]);
    assert_eq!(run.status.code(), Some(3), "{run:?}");
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 2, "header plus the initial row:\n{csv}");
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.with_extension("csv.json")).unwrap())
            .unwrap();
    assert!(sidecar["meta"]["error"].as_str().unwrap().contains("step"));
}

#[test]
fn sidecar_round_trips_as_a_config_and_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.csv");
    let cfg = write_torus_config(dir.path(), &first);
    let run = ottolab(&["simulate", "--config", cfg.to_str().unwrap(), "--quiet"]);
    assert_eq!(run.status.code(), Some(0), "{run:?}");

    let sidecar = dir.path().join("first.csv.json");
    let second = dir.path().join("second.csv");
    let rerun = ottolab(&[
        "simulate",
        "--config",
        sidecar.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(rerun.status.code(), Some(0), "{rerun:?}");
    let a = std::fs::read(&first).unwrap();
    let b = std::fs::read(&second).unwrap();
    assert_eq!(a, b, "round-tripped run differs");
}

#[test]
fn seed_is_recorded_without_touching_the_rows() {
    let dir = tempfile::tempdir().unwrap();
    let plain = dir.path().join("plain.csv");
    let cfg = write_torus_config(dir.path(), &plain);
    assert_eq!(
        ottolab(&["simulate", "--config", cfg.to_str().unwrap(), "--quiet"]).status.code(),
        Some(0)
    );
    let seeded = dir.path().join("seeded.csv");
    assert_eq!(
        ottolab(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            seeded.to_str().unwrap(),
            "--seed",
            "42",
            "--quiet",
        ])
        .status
        .code(),
        Some(0)
    );
    assert_eq!(
        std::fs::read(&plain).unwrap(),
        std::fs::read(&seeded).unwrap(),
        "the seed flag must not change the rows"
    );
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(seeded.with_extension("csv.json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["meta"]["seed"], serde_json::json!(42));
}

#[test]
fn wentropy_audit_passes_on_a_solver_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let cfg = write_torus_config(dir.path(), &out);
    assert_eq!(
        ottolab(&["simulate", "--config", cfg.to_str().unwrap(), "--quiet"]).status.code(),
        Some(0)
    );
    let audit = ottolab(&["wentropy", "--csv", out.to_str().unwrap()]);
    assert_eq!(audit.status.code(), Some(0), "{audit:?}");
    let doc: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&audit.stdout)).unwrap();
    assert_eq!(doc["pass"], serde_json::json!(true));
    assert_eq!(doc["stored_column_mismatch"], serde_json::json!(0.0));
}

#[test]
fn report_flags_a_corrupted_file_and_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ref.csv");
    let cfg = write_reference_config(dir.path(), &out);
    assert_eq!(
        ottolab(&["reference", "--config", cfg.to_str().unwrap(), "--quiet"]).status.code(),
        Some(0)
    );

    let clean = ottolab(&["report", out.to_str().unwrap()]);
    assert_eq!(clean.status.code(), Some(0), "{clean:?}");

    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut cols: Vec<String> = lines[4].split(',').map(String::from).collect();
    cols[8] = "1000".to_string();
    lines[4] = cols.join(",");
    std::fs::write(&out, lines.join("\n") + "\n").unwrap();

    let run = ottolab(&["report", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(4), "{run:?}");
    let doc: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&run.stdout)).unwrap();
    assert_eq!(doc["all_pass"], serde_json::json!(false));
}

#[test]
fn missing_sidecar_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ref.csv");
    let cfg = write_reference_config(dir.path(), &out);
    assert_eq!(
        ottolab(&["reference", "--config", cfg.to_str().unwrap(), "--quiet"]).status.code(),
        Some(0)
    );
    std::fs::remove_file(out.with_extension("csv.json")).unwrap();
    let run = ottolab(&["report", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2), "{run:?}");
}
