//! End-to-end tests driving the `locelm` binary: exit codes, report/data
//! files, determinism, and the sweep behaviors the tool documents.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_locelm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Fresh scratch directory, unique per test case and process.
fn scratch(case: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("locelm-cli-{}-{case}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

/// Reference 1-D Helmholtz run configuration writing into `dir`.
fn helmholtz_reference(dir: &Path) -> String {
    format!(
        r#"{{
  "problem": "helmholtz1d",
  "spatial_counts": [4],
  "q": [100],
  "hidden_widths": [100],
  "r_m": 3.0,
  "grid": {{"spatial_points": 201}},
  "report_path": {:?},
  "data_path": {:?}
}}"#,
        dir.join("report.json"),
        dir.join("points.csv")
    )
}

/// Small, fast 1-D Helmholtz configuration (accuracy irrelevant).
fn helmholtz_small(dir: &Path, report: &str, data: &str) -> String {
    format!(
        r#"{{
  "problem": "helmholtz1d",
  "spatial_counts": [2],
  "q": [30],
  "hidden_widths": [40],
  "r_m": 3.0,
  "grid": {{"spatial_points": 51}},
  "report_path": {:?},
  "data_path": {:?}
}}"#,
        dir.join(report),
        dir.join(data)
    )
}

fn report_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Parse a sweep CSV into (value, max_error, rms_error) triples.
fn sweep_rows(path: &Path) -> Vec<(f64, f64, f64)> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("value,max_error,rms_error,solve_time"), "sweep header");
    lines
        .map(|line| {
            let cols: Vec<f64> =
                line.split(',').map(|c| c.parse().expect("numeric csv field")).collect();
            assert_eq!(cols.len(), 4, "row {line:?}");
            (cols[0], cols[1], cols[2])
        })
        .collect()
}

#[test]
fn problems_lists_every_id() {
    let out = run(&["problems"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    for id in [
        "helmholtz1d",
        "helmholtz2d",
        "advection1d",
        "wave2nd1d",
        "diffusion1d",
        "nlhelmholtz1d",
        "burgers1d",
    ] {
        assert!(text.contains(id), "missing {id} in:\n{text}");
    }
}

#[test]
fn solve_reference_helmholtz_meets_reported_accuracy() {
    let dir = scratch("h1ref");
    let cfg = write_config(&dir, "run.json", &helmholtz_reference(&dir));
    let out = run(&["solve", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let report = report_json(&dir.join("report.json"));
    assert_eq!(report["problem"], "helmholtz1d");
    assert_eq!(report["blocks"], 1);
    assert_eq!(report["has_time"], false);
    assert_eq!(report["grid_shape"], serde_json::json!([201]));
    assert_eq!(report["residual_costs"].as_array().unwrap().len(), 1);
    let max_error = report["max_error"].as_f64().unwrap();
    assert!(max_error <= 1e-6, "max error {max_error:.3e}");

    let data = fs::read_to_string(dir.join("points.csv")).unwrap();
    let lines: Vec<&str> = data.lines().collect();
    assert_eq!(lines[0], "x,computed,exact,abs_error");
    assert_eq!(lines.len(), 202, "header plus one row per grid point");
    assert!(lines[1].starts_with("0,"), "first row at x = 0: {}", lines[1]);
    assert!(lines[201].starts_with("8,"), "last row at x = 8: {}", lines[201]);
    for line in &lines[1..] {
        let fields: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(fields.len(), 4);
        assert!((fields[1] - fields[2]).abs() - fields[3] <= 1e-18 * fields[3].max(1.0));
    }
}

#[test]
fn solve_reruns_are_byte_identical() {
    let dir = scratch("determinism");
    for sub in ["a", "b"] {
        fs::create_dir_all(dir.join(sub)).unwrap();
    }
    let cfg_a = write_config(
        &dir,
        "a.json",
        &helmholtz_small(&dir, "a/report.json", "a/points.csv"),
    );
    let cfg_b = write_config(
        &dir,
        "b.json",
        &helmholtz_small(&dir, "b/report.json", "b/points.csv"),
    );
    assert_eq!(code(&run(&["solve", cfg_a.to_str().unwrap()])), 0);
    assert_eq!(code(&run(&["solve", cfg_b.to_str().unwrap()])), 0);

    let points_a = fs::read(dir.join("a/points.csv")).unwrap();
    let points_b = fs::read(dir.join("b/points.csv")).unwrap();
    assert_eq!(points_a, points_b, "point clouds differ between reruns");

    // Reports match except for the wall-clock field.
    let mut rep_a = report_json(&dir.join("a/report.json"));
    let mut rep_b = report_json(&dir.join("b/report.json"));
    for rep in [&mut rep_a, &mut rep_b] {
        rep.as_object_mut().unwrap().remove("solve_seconds");
    }
    assert_eq!(rep_a, rep_b);
}

#[test]
fn zero_subdomain_count_is_a_config_error_without_output() {
    let dir = scratch("zero-count");
    let cfg = write_config(
        &dir,
        "run.json",
        &format!(
            r#"{{
  "problem": "helmholtz1d",
  "spatial_counts": [0],
  "q": [30],
  "hidden_widths": [40],
  "r_m": 3.0,
  "report_path": {:?},
  "data_path": {:?}
}}"#,
            dir.join("report.json"),
            dir.join("points.csv")
        ),
    );
    let out = run(&["solve", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("spatial_counts"), "{}", stderr(&out));
    assert!(!dir.join("report.json").exists(), "no partial report on config error");
    assert!(!dir.join("points.csv").exists(), "no partial data on config error");
}

#[test]
fn missing_output_directory_is_a_config_error() {
    let dir = scratch("missing-dir");
    let body = helmholtz_small(&dir, "nope/report.json", "points.csv");
    let cfg = write_config(&dir, "run.json", &body);
    let out = run(&["solve", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("does not exist"), "{}", stderr(&out));
    assert!(!dir.join("points.csv").exists(), "no partial data on config error");
}

#[test]
fn steady_problem_rejects_time_fields() {
    let dir = scratch("steady-time");
    let cfg = write_config(
        &dir,
        "run.json",
        &format!(
            r#"{{
  "problem": "helmholtz1d",
  "t_final": 1.0,
  "spatial_counts": [2],
  "q": [30],
  "hidden_widths": [40],
  "r_m": 3.0,
  "report_path": {:?},
  "data_path": {:?}
}}"#,
            dir.join("report.json"),
            dir.join("points.csv")
        ),
    );
    let out = run(&["solve", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("steady"), "{}", stderr(&out));
}

#[test]
fn linear_solver_on_a_nonlinear_problem_is_a_solver_error() {
    let dir = scratch("nl-linear");
    let cfg = write_config(
        &dir,
        "run.json",
        &format!(
            r#"{{
  "problem": "nlhelmholtz1d",
  "spatial_counts": [2],
  "q": [30],
  "hidden_widths": [40],
  "r_m": 3.0,
  "report_path": {:?},
  "data_path": {:?}
}}"#,
            dir.join("report.json"),
            dir.join("points.csv")
        ),
    );
    let out = run(&["solve", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("nonlinear"), "{}", stderr(&out));
    assert!(!dir.join("report.json").exists());
    assert!(!dir.join("points.csv").exists());
}

#[test]
fn sweep_rejects_unknown_parameters() {
    let dir = scratch("bad-param");
    let cfg = write_config(&dir, "run.json", &helmholtz_small(&dir, "report.json", "sweep.csv"));
    let out = run(&["sweep", cfg.to_str().unwrap(), "--param", "banana", "--values", "1,2"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("q_per_direction"), "list of valid names: {}", stderr(&out));
    assert!(!dir.join("sweep.csv").exists());
}

#[test]
fn sweep_orders_rows_by_value() {
    let dir = scratch("sweep-order");
    let cfg = write_config(&dir, "run.json", &helmholtz_small(&dir, "report.json", "sweep.csv"));
    let out =
        run(&["sweep", cfg.to_str().unwrap(), "--param", "q_per_direction", "--values", "30,10,20"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = sweep_rows(&dir.join("sweep.csv"));
    let values: Vec<f64> = rows.iter().map(|r| r.0).collect();
    assert_eq!(values, [10.0, 20.0, 30.0], "rows ordered by swept value");
}

#[test]
fn single_value_sweep_matches_solve() {
    let dir = scratch("sweep-single");
    let solve_cfg =
        write_config(&dir, "solve.json", &helmholtz_small(&dir, "report.json", "points.csv"));
    let sweep_cfg =
        write_config(&dir, "sweep.json", &helmholtz_small(&dir, "unused.json", "sweep.csv"));
    assert_eq!(code(&run(&["solve", solve_cfg.to_str().unwrap()])), 0);
    let out =
        run(&["sweep", sweep_cfg.to_str().unwrap(), "--param", "q_per_direction", "--values", "30"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let rows = sweep_rows(&dir.join("sweep.csv"));
    assert_eq!(rows.len(), 1);
    let report = report_json(&dir.join("report.json"));
    assert_eq!(rows[0].0, 30.0);
    assert_eq!(rows[0].1, report["max_error"].as_f64().unwrap(), "max error differs");
    assert_eq!(rows[0].2, report["rms_error"].as_f64().unwrap(), "rms error differs");
}

#[test]
fn q_sweep_error_drops_four_orders_before_plateau() {
    let dir = scratch("sweep-q");
    let cfg = write_config(
        &dir,
        "run.json",
        &format!(
            r#"{{
  "problem": "helmholtz1d",
  "spatial_counts": [2],
  "q": [10],
  "hidden_widths": [200],
  "r_m": 3.0,
  "grid": {{"spatial_points": 201}},
  "data_path": {:?}
}}"#,
            dir.join("sweep.csv")
        ),
    );
    let out = run(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--param",
        "q_per_direction",
        "--values",
        "10,20,30,40,50,60,70,80,90,100",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = sweep_rows(&dir.join("sweep.csv"));
    assert_eq!(rows.len(), 10);
    let first = rows[0].1;
    let floor = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    assert!(
        first / floor >= 1e4,
        "error drop {:.1} orders (from {first:.3e} to {floor:.3e})",
        (first / floor).log10()
    );
}

#[test]
fn r_m_sweep_punishes_extreme_scales() {
    let dir = scratch("sweep-rm");
    let cfg = write_config(
        &dir,
        "run.json",
        &format!(
            r#"{{
  "problem": "helmholtz1d",
  "spatial_counts": [4],
  "q": [100],
  "hidden_widths": [100],
  "r_m": 1.0,
  "grid": {{"spatial_points": 201}},
  "data_path": {:?}
}}"#,
            dir.join("sweep.csv")
        ),
    );
    let out = run(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--param",
        "r_m",
        "--values",
        "0.01,0.5,1,2,3,5,100",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = sweep_rows(&dir.join("sweep.csv"));
    assert_eq!(rows.len(), 7);
    let tiny = rows.first().unwrap().1;
    let huge = rows.last().unwrap().1;
    let best_mid =
        rows[1..rows.len() - 1].iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    assert!(
        tiny >= 10.0 * best_mid && huge >= 10.0 * best_mid,
        "extremes {tiny:.3e}/{huge:.3e} vs best mid-range {best_mid:.3e}"
    );
}
