//! End-to-end checks of the `eslab` binary: exit codes, artifact layout,
//! byte-level determinism, and the prediction-versus-simulation gate.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn eslab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_eslab"))
}

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout_json(output: &Output) -> serde_json::Value {
    serde_json::from_slice(&output.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&output.stdout)
        )
    })
}

const SMALL_FLAT: &str = r#"
name = "small flat walk"

[landscape]
kind = "flat"
dim = 50
sigma_xi = 1.0

[es]
sigma = 0.02
alpha = 0.01
population = 30

[run]
method = "es"
steps = 200
trials = 40
seed = 5

[analysis]
fit = true

[validate]
checkpoints = [200]

[validate.tolerances]
"prop1.total_drift" = 0.05
"appc.d_eff_ratio" = 0.05
"#;

#[test]
fn predict_emits_full_scale_slope() {
    let output = run(eslab()
        .args(["predict", "--scenario"])
        .arg(scenario_path("full_scale.toml")));
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let json = stdout_json(&output);
    let slope = json["prop1.drift_slope"].as_f64().unwrap();
    assert!((slope - 75.42).abs() < 0.01, "slope {slope}");
    assert!((json["prop1.total_drift"].as_f64().unwrap() - 37_710.6).abs() < 5.0);
}

#[test]
fn simulate_writes_artifacts_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(tmp.path(), "flat.toml", SMALL_FLAT);

    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    for out in [&out_a, &out_b] {
        let output = run(eslab()
            .args(["simulate", "--quiet", "--scenario"])
            .arg(&scenario)
            .arg("--out")
            .arg(out));
        assert!(
            output.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    }

    for name in [
        "trial_0000.csv",
        "trial_0039.csv",
        "ensemble.csv",
        "summary.json",
        "scenario.toml",
    ] {
        let a = fs::read(out_a.join(name)).unwrap_or_else(|_| panic!("{name} missing"));
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }

    // the provenance line carries the scenario hash
    let ensemble = fs::read_to_string(out_a.join("ensemble.csv")).unwrap();
    assert!(
        ensemble.starts_with("# scenario_hash="),
        "missing provenance line"
    );

    // the thread count must not leak into the artifacts
    let out_t = tmp.path().join("t");
    let output = run(eslab()
        .args(["simulate", "--quiet", "--threads", "1", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(&out_t));
    assert!(output.status.success());
    assert_eq!(
        fs::read(out_a.join("ensemble.csv")).unwrap(),
        fs::read(out_t.join("ensemble.csv")).unwrap(),
        "aggregates depend on thread count"
    );

    // a different seed changes the data
    let out_c = tmp.path().join("c");
    let output = run(eslab()
        .args(["simulate", "--quiet", "--seed", "99", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(&out_c));
    assert!(output.status.success());
    assert_ne!(
        fs::read(out_a.join("trial_0000.csv")).unwrap(),
        fs::read(out_c.join("trial_0000.csv")).unwrap()
    );
}

#[test]
fn degenerate_single_step_run_records_zero_drift() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        tmp.path(),
        "degenerate.toml",
        r#"
[landscape]
kind = "flat"
dim = 4

[es]
sigma = 0.1
population = 8

[run]
method = "es"
steps = 1
trials = 1
"#,
    );
    let out = tmp.path().join("out");
    let output = run(eslab()
        .args(["simulate", "--quiet", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(&out));
    assert!(output.status.success());
    let trial = fs::read_to_string(out.join("trial_0000.csv")).unwrap();
    let drift: Vec<&str> = trial
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("step"))
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(
        drift,
        vec!["0", "0"],
        "noiseless flat landscape must not move"
    );
}

#[test]
fn validate_passes_and_perturbed_prediction_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(tmp.path(), "flat.toml", SMALL_FLAT);
    let output = run(eslab()
        .args(["validate", "--quiet", "--scenario"])
        .arg(&scenario));
    assert!(
        output.status.success(),
        "expected PASS, stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );

    // negative control: an ES run on a curved landscape compared against a
    // prediction whose frozen reward deviation is deliberately wrong
    let perturbed = write_scenario(
        tmp.path(),
        "perturbed.toml",
        r#"
[landscape]
kind = "quadratic"
dim = 50
rank = 10
lambda = 1.0
sigma_xi = 1.0

[init]
theta0 = 3.0

[es]
sigma = 0.4
alpha = 0.2
population = 30

# deliberately mis-frozen reward deviation: the predicted contraction is far
# too slow, so the predicted displacement misses the simulated one
[ou]
sigma = 0.4
alpha = 0.2
population = 30
sigma_r_fixed = 40.0

[run]
method = "es"
steps = 200
trials = 10
seed = 3

[validate]
checkpoints = [200]

[validate.tolerances]
"prop7.total_drift" = 0.05
"#,
    );
    let output = run(eslab().args(["validate", "--scenario"]).arg(&perturbed));
    assert_eq!(
        output.status.code(),
        Some(2),
        "perturbed prediction must FAIL validation"
    );
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("FAIL"), "mismatch not reported: {text}");
}

#[test]
fn validate_rejects_missing_tolerance() {
    let tmp = tempfile::tempdir().unwrap();
    let mut body = SMALL_FLAT.replace("\"appc.d_eff_ratio\" = 0.05\n", "");
    body = body.replace("\"prop1.total_drift\" = 0.05\n", "");
    let scenario = write_scenario(tmp.path(), "flat.toml", &body);
    let output = run(eslab().args(["validate", "--scenario"]).arg(&scenario));
    assert_eq!(output.status.code(), Some(1));
    let text = String::from_utf8_lossy(&output.stderr);
    assert!(text.contains("missing tolerance"), "stderr: {text}");
}

#[test]
fn simulate_reports_divergence_with_distinct_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        tmp.path(),
        "divergent.toml",
        r#"
[landscape]
kind = "quadratic"
dim = 2
spectrum = [300.0, 1.0]

[init]
theta0 = 1.0

[gd]
beta = 0.1

[run]
method = "gd"
steps = 100
trials = 1
"#,
    );
    let out = tmp.path().join("out");
    let output = run(eslab()
        .args(["simulate", "--quiet", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(&out));
    assert_eq!(output.status.code(), Some(3), "divergence must exit 3");
    // partial data still written
    assert!(out.join("trial_0000.csv").exists());
    assert!(out.join("summary.json").exists());
}

#[test]
fn fit_from_literal_slope_matches_stored_ratio() {
    let output = run(eslab().args([
        "fit",
        "--slope",
        "72.74",
        "--alpha",
        "7.5e-4",
        "--population",
        "30",
        "--dim",
        "4022468096",
    ]));
    assert!(output.status.success());
    let json = stdout_json(&output);
    let ratio = json["d_eff_ratio"].as_f64().unwrap();
    assert!((ratio - 0.964).abs() < 0.001, "ratio {ratio}");
}

#[test]
fn fit_from_simulated_curve_recovers_dimension() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(tmp.path(), "flat.toml", SMALL_FLAT);
    let out = tmp.path().join("out");
    let output = run(eslab()
        .args(["simulate", "--quiet", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(&out));
    assert!(output.status.success());

    let output = run(eslab()
        .args(["fit", "--scenario"])
        .arg(&scenario)
        .arg("--input")
        .arg(out.join("ensemble.csv")));
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let json = stdout_json(&output);
    let ratio = json["d_eff_ratio"].as_f64().unwrap();
    assert!((ratio - 1.0).abs() < 0.1, "ratio {ratio}");
    assert!(json["r_squared"].as_f64().unwrap() > 0.98);
}

#[test]
fn probe_recovers_trained_checkpoint_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        tmp.path(),
        "quad.toml",
        r#"
[landscape]
kind = "quadratic"
dim = 6
spectrum = [2.0, 1.0, 0.0, 0.0, 0.0, 0.0]

[init]
theta0 = 1.0

[es]
sigma = 0.1
population = 10

[gd]
beta = 0.2

[run]
method = "es"
steps = 30
trials = 1
seed = 9

[analysis]
probe_random_seeds = 2
"#,
    );
    let out = tmp.path().join("out");
    let output = run(eslab()
        .args(["probe", "--quiet", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(&out));
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let csv = fs::read_to_string(out.join("probe.csv")).unwrap();
    let labels: std::collections::BTreeSet<&str> = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("direction"))
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert!(labels.contains("es") && labels.contains("gd"));
    assert!(labels.contains("random_0") && labels.contains("random_1"));
}

#[test]
fn interpolate_between_stored_endpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        tmp.path(),
        "quad.toml",
        r#"
[landscape]
kind = "quadratic"
dim = 3
spectrum = [1.0, 1.0, 0.0]
"#,
    );
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    fs::write(&a, "value\n1.0\n0.0\n2.0\n").unwrap();
    fs::write(&b, "value\n0.0\n1.0\n-2.0\n").unwrap();
    let out = tmp.path().join("out");
    let output = run(eslab()
        .args(["interpolate", "--quiet", "--points", "5", "--scenario"])
        .arg(&scenario)
        .arg("--theta-a")
        .arg(&a)
        .arg("--theta-b")
        .arg(&b)
        .arg("--out")
        .arg(&out));
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let csv = fs::read_to_string(out.join("interpolation.csv")).unwrap();
    let rows: Vec<&str> = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("path"))
        .collect();
    assert_eq!(rows.len(), 5);
    // endpoints: R(a) = R(b) = -0.5
    assert!(rows[0].ends_with(",-0.5"), "row {}", rows[0]);
    assert!(rows[4].ends_with(",-0.5"), "row {}", rows[4]);
}

#[test]
fn hierarchy_command_reports_measurement_and_prediction() {
    let tmp = tempfile::tempdir().unwrap();
    let output = run(eslab()
        .args(["hierarchy", "--scenario"])
        .arg(scenario_path("quad_hierarchy.toml"))
        .args(["--seed", "77"])
        .arg("--out")
        .arg(tmp.path()));
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let json = stdout_json(&output);
    let diff = json["diff_sq_mean"].as_f64().unwrap();
    let predicted = json["predicted"]["diff_sq"].as_f64().unwrap();
    assert!(
        (diff - predicted).abs() / predicted < 0.15,
        "{diff} vs {predicted}"
    );
}

#[test]
fn usage_errors_exit_one() {
    let output = run(eslab().arg("predict"));
    assert_eq!(
        output.status.code(),
        Some(1),
        "missing --scenario must exit 1"
    );

    let output = run(eslab().arg("no-such-command"));
    assert_eq!(output.status.code(), Some(1));

    let output = run(eslab().args(["predict", "--scenario", "/nonexistent/file.toml"]));
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn thread_count_env_var_is_honored() {
    let output = run(eslab()
        .env("ESLAB_THREADS", "2")
        .args(["predict", "--scenario"])
        .arg(scenario_path("full_scale.toml")));
    assert!(output.status.success());
}
