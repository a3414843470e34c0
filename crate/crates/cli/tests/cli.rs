use std::path::Path;
use std::process::{Command, Output};

use footstep_core::io::PlanDocument;
use footstep_core::ValidationReport;
use tempfile::TempDir;

fn footstep(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_footstep"))
        .args(args)
        .current_dir(dir)
        .env_remove("RUST_LOG")
        .output()
        .expect("run footstep")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_report(path: &Path) -> ValidationReport {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn plan_then_validate_round_trip() {
    let dir = TempDir::new().unwrap();
    let out = footstep(&["plan", "flat_ground", "--horizon", "1.5", "--dt", "0.15", "-o", "out"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for f in ["plan.json", "com.csv", "feet.csv", "plan.svg", "report.json"] {
        assert!(dir.path().join("out").join(f).exists(), "missing {f}");
    }
    let com = std::fs::read_to_string(dir.path().join("out/com.csv")).unwrap();
    assert_eq!(com.lines().count(), 11);

    let out = footstep(
        &["validate", "out/plan.json", "flat_ground", "--horizon", "1.5", "--report", "again.json"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}{}", stdout(&out), stderr(&out));
    let first = read_report(&dir.path().join("out/report.json"));
    let second = read_report(&dir.path().join("again.json"));
    assert!(first.violations.is_empty() && second.violations.is_empty());
    for (a, b) in [
        (first.max_accel, second.max_accel),
        (first.max_path_deviation, second.max_path_deviation),
        (first.max_kinematic_residual, second.max_kinematic_residual),
        (first.max_friction_excess, second.max_friction_excess),
        (first.max_linearization_angle, second.max_linearization_angle),
    ] {
        assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }
}

#[test]
fn unknown_scenario_lists_valid_names() {
    let dir = TempDir::new().unwrap();
    let out = footstep(&["plan", "moon_surface"], dir.path());
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("flat_ground") && err.contains("staircase_up"), "{err}");
}

#[test]
fn tight_tolerance_on_chasm_does_not_converge() {
    let dir = TempDir::new().unwrap();
    let out = footstep(&["plan", "chasm", "--tol", "0.001", "--horizon", "0.6", "-o", "out"], dir.path());
    assert_eq!(code(&out), 2, "{}{}", stdout(&out), stderr(&out));
}

#[test]
fn corrupted_plan_fails_validation() {
    let dir = TempDir::new().unwrap();
    let out = footstep(&["plan", "flat_ground", "-o", "out"], dir.path());
    assert_eq!(code(&out), 0);
    let path = dir.path().join("out/plan.json");
    let mut doc = PlanDocument::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let step = doc.plan.active_contacts.iter().position(|s| !s.is_empty()).unwrap();
    // a sideways push that no foothold can provide
    doc.plan.active_contacts[step][0].accel = footstep_core::Vec3::new(0.0, 25.0, 0.1);
    std::fs::write(&path, doc.to_json().unwrap()).unwrap();
    let out = footstep(&["validate", "out/plan.json", "flat_ground"], dir.path());
    assert_eq!(code(&out), 3, "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("Friction"), "{text}");
}

#[test]
fn mismatched_horizon_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&footstep(&["plan", "flat_ground", "-o", "out"], dir.path())), 0);
    let out = footstep(&["validate", "out/plan.json", "flat_ground", "--horizon", "3.0"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("dimension"), "{}", stderr(&out));
}

#[test]
fn svg_is_deterministic() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&footstep(&["plan", "flat_ground", "-o", "a"], dir.path())), 0);
    assert_eq!(code(&footstep(&["plan", "flat_ground", "-o", "b"], dir.path())), 0);
    let a = std::fs::read_to_string(dir.path().join("a/plan.svg")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("b/plan.svg")).unwrap();
    assert!(a.starts_with("<svg") && a.contains("polyline"));
    assert_eq!(a, b);
}

#[test]
fn scenario_file_drives_plan() {
    let dir = TempDir::new().unwrap();
    let out = footstep(&["scenario", "flat_ground", "--seed", "4", "-o", "flat.toml", "--env", "env.toml"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("flat.toml")).unwrap();
    assert!(text.contains("seed = 4") && text.contains("[planner]"), "{text}");
    let env = std::fs::read_to_string(dir.path().join("env.toml")).unwrap();
    assert!(footstep_core::io::environment_from_toml(&env).unwrap().len() > 10);
    let out = footstep(&["plan", "flat.toml", "--k", "12", "-o", "out"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doc = PlanDocument::from_json(&std::fs::read_to_string(dir.path().join("out/plan.json")).unwrap()).unwrap();
    assert_eq!(doc.config.k, 12);
}

#[test]
fn config_errors_are_reported() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "k = 20\ntol = \"wide\"\n").unwrap();
    let out = footstep(&["plan", "flat_ground", "--config", "bad.toml"], dir.path());
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("tol") && err.contains("line 2"), "{err}");

    let out = footstep(&["plan", "flat_ground", "--weights", "1,2,3"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("six values"));
}

#[test]
fn single_trial_bench_reports_zero_deviation() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_footstep"))
        .args([
            "bench", "--envs", "flat_ground", "--horizons", "1.5", "--ks", "10", "--sweep", "10,15", "--trials", "1",
            "-o", "report.json",
        ])
        .current_dir(dir.path())
        .env("PLANNER_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let cell = &report["cells"][0];
    assert_eq!(cell["std_time"], 0.0);
    assert_eq!(cell["trials"], 1);
    assert_eq!(report["machine"]["threads"], 1);
    assert!(report["sweep"]["slope"].is_number());
    assert!(stdout(&out).contains("| flat_ground | 1.5 | 10 | 10 |"));
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_footstep"))
        .args(["bench", "--trials", "1"])
        .current_dir(dir.path())
        .env("PLANNER_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}
