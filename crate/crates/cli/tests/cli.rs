use std::path::Path;
use std::process::{Command, Output};

fn selfsim(args: &[&str], env_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_selfsim"));
    cmd.args(args).env_remove("SELFSIM_OUTPUT_DIR");
    if let Some(dir) = env_dir {
        cmd.env("SELFSIM_OUTPUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn report(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn help_exits_zero() {
    assert_eq!(selfsim(&["--help"], None).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(selfsim(&["no-such-command"], None).status.code(), Some(1));
}

#[test]
fn barenblatt_writes_profile_fluxes_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = selfsim(&["--output-dir", d, "barenblatt", "-m", "2", "-N", "1", "-L", "4", "-n", "401"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("profile.csv").is_file());
    assert!(dir.path().join("fluxes.csv").is_file());
    let r = report(dir.path());
    assert_eq!(r["status"], "ok");
    assert!(r["metrics"]["mass[m=2]"].as_f64().unwrap() > 0.0);
}

#[test]
fn environment_variable_sets_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = selfsim(
        &["profile", "--network", "two_species", "--beta", "1", "--gamma", "2", "-d", "1,0.5", "--u-minus", "1", "--u-plus", "6", "-L", "8", "-n", "401"],
        Some(dir.path()),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(dir.path())["problem"], "rds_profile");
}

#[test]
fn even_node_count_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = selfsim(&["--output-dir", d, "barenblatt", "-m", "2", "-n", "400"], None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eckhaus_violation_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = selfsim(&["--output-dir", d, "profile", "--eta-minus", "0.7", "--eta-plus", "0.1"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Eckhaus"));
}

#[test]
fn solver_failure_exits_two_and_still_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(
        &config,
        r#"{"problem": "rds_profile",
            "network": {"network": "two_species", "beta": 1, "gamma": 2},
            "d": [1, 0.5], "u_minus": 1, "u_plus": 6, "L": 8, "n": 401, "max_iter": 1}"#,
    )
    .unwrap();
    let d = dir.path().to_str().unwrap();
    let out = selfsim(&["--output-dir", d, "profile", "--config", config.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    assert_eq!(r["status"], "failed");
    assert_eq!(r["error"]["kind"], "solver");
    assert!(!r["error"]["residual_history"].as_array().unwrap().is_empty());
}

#[test]
fn plot_renders_a_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("curve.csv");
    std::fs::write(&csv, "x,y\n0,1\n1,2\n2,0.5\n").unwrap();
    let svg = dir.path().join("curve.svg");
    let out = selfsim(&["plot", csv.to_str().unwrap(), "-o", svg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<svg"));
}

#[test]
fn check_suite_passes() {
    let out = selfsim(&["check"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(!stdout.contains("FAIL"));
}
