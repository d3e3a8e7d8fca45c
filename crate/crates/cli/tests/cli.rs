use std::path::Path;
use std::process::{Command, Output};

fn rheo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rheo"))
        .args(args)
        .env_remove("RHEO_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_RAMP: &str = "mode = dynamic\n\
    grid.cells = 4, 2\n\
    material.p_g = 4\n\
    initial.v = shear:0.2\n\
    loads.dirichlet.x2_min = 0, 0\n\
    loads.dirichlet.x2_max = 1, 0\n\
    loads.dirichlet.x2_max.amplitude = 0:0, 1:0.2\n\
    time.T = 0.06\n\
    time.dt0 = 0.02\n\
    output.every = 1\n";

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn verify_derivatives_passes() {
    let o = rheo(&["verify-derivatives", "--dim", "2", "--trials", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    for family in ["delta_y_phi", "delta_p_phi", "kv_stress", "kv_flow"] {
        assert!(out.contains(family), "{out}");
    }
}

#[test]
fn verify_derivatives_fails_on_an_impossible_tolerance() {
    let o = rheo(&["verify-derivatives", "--trials", "2", "--tol", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn verify_derivatives_rejects_other_dimensions() {
    assert_eq!(
        rheo(&["verify-derivatives", "--dim", "4"]).status.code(),
        Some(1)
    );
}

#[test]
fn audit_writes_table_and_summary_next_to_each_other() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("audit.csv");
    let o = rheo(&[
        "audit-hardening",
        "--profile",
        "tanh",
        "--ell",
        "1",
        "--width",
        "0.2",
        "--t-max",
        "100",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len(), 8);
    assert_eq!(header[0], "t");
    assert_eq!(text.lines().count(), 42);
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(
        summary.contains("\"grad_pdot\"") && summary.contains("\"bounded\""),
        "{summary}"
    );
    assert!(stdout(&o).contains("standard_grad_p"));
}

#[test]
fn audit_rejects_a_short_time_window() {
    let dir = tempfile::tempdir().unwrap();
    let o = rheo(&[
        "audit-hardening",
        "--t-max",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("decade"), "{}", stderr(&o));
}

#[test]
fn missing_config_exits_with_one() {
    let o = rheo(&["simulate", "--config", "/no/such/run.cfg"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/no/such/run.cfg"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_exits_with_one() {
    assert_eq!(rheo(&["simulate", "--bogus"]).status.code(), Some(1));
    assert_eq!(rheo(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn help_exits_with_zero() {
    assert_eq!(rheo(&["--help"]).status.code(), Some(0));
}

#[test]
fn invalid_config_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "bad.cfg",
        "material.p_g = 2\nmaterial.nu_h = 0\nnot_a_key = 1\n",
    );
    let o = rheo(&["simulate", "--config", &path]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("p_g must exceed d"), "{err}");
    assert!(err.contains("nu_h"), "{err}");
    assert!(err.contains("not_a_key"), "{err}");
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "run.cfg", SMALL_RAMP);
    let o = Command::new(env!("CARGO_BIN_EXE_rheo"))
        .args([
            "simulate",
            "--config",
            &path,
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .env("RHEO_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("RHEO_THREADS"));
}

#[test]
fn simulate_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "run.cfg", SMALL_RAMP);
    let out = dir.path().join("run");
    let o = rheo(&[
        "simulate",
        "--config",
        &path,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("steps: 3"), "{}", stdout(&o));
    for f in ["energy.csv", "fields_0.dump", "fields_3.dump"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let r = rheo(&["energy-report", "--run", out.to_str().unwrap()]);
    assert!(r.status.success(), "{}", stderr(&r));
    let text = stdout(&r);
    assert!(text.contains("rows: 4"), "{text}");
    assert!(text.contains("residual per unit time"), "{text}");
}

#[test]
fn energy_report_needs_a_run() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        rheo(&["energy-report", "--run", dir.path().to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn solver_failure_exits_with_two_and_leaves_a_dump() {
    let dir = tempfile::tempdir().unwrap();
    let text =
        SMALL_RAMP.replace("time.T = 0.06", "time.T = 1") + "solver.det_threshold = 0.99999\n";
    let path = write(dir.path(), "breach.cfg", &text);
    let out = dir.path().join("run");
    let o = rheo(&[
        "simulate",
        "--config",
        &path,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("fields_failed.dump"));
    assert!(out.join("fields_failed.dump").exists());
}
