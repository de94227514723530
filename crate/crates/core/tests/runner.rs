//! Runner-level contracts: scenario round-trips, artifact determinism, the
//! prediction key surface, and validation bookkeeping.

use std::path::PathBuf;

use eslab::report;
use eslab::runner::{self, RunOptions};
use eslab::theory;
use eslab::{Error, Scenario};

fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn every_shipped_scenario_parses_and_round_trips() {
    let mut count = 0;
    for entry in std::fs::read_dir(scenario_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        count += 1;
        let scenario = Scenario::from_path(&path)
            .unwrap_or_else(|e| panic!("{} failed to parse: {e}", path.display()));
        let reserialized = scenario.to_toml_string();
        let back = Scenario::from_toml_str(&reserialized, &path).unwrap();
        assert_eq!(scenario, back, "{} does not round-trip", path.display());
    }
    assert!(
        count >= 6,
        "expected the shipped scenario set, found {count}"
    );
}

#[test]
fn simulation_artifacts_are_byte_identical_across_runs() {
    let scenario = Scenario::from_path(scenario_dir().join("gd_spectrum.toml")).unwrap();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [&dir_a, &dir_b] {
        runner::simulate(
            &scenario,
            &RunOptions {
                out_dir: Some(dir.path().to_path_buf()),
                write: true,
                seed: None,
            },
        )
        .unwrap();
    }
    for name in ["trial_0000.csv", "ensemble.csv", "scenario.toml"] {
        let a = std::fs::read(dir_a.path().join(name)).unwrap();
        let b = std::fs::read(dir_b.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} not reproducible");
    }
}

#[test]
fn quadratic_prediction_keys_match_hand_formulas() {
    let toml = r#"
[landscape]
kind = "quadratic"
dim = 4
spectrum = [2.0, 1.0, 0.0, 0.0]
sigma_xi = 0.5

[init]
theta0 = [1.0, -1.0, 3.0, 0.0]

[es]
sigma = 0.2
alpha = 0.1
population = 25

[gd]
beta = 0.25

[run]
method = "es"
steps = 100
trials = 1
seed = 1

[record]
projections = [0, 1, 2]
"#;
    let scenario = Scenario::from_toml_str(toml, std::path::Path::new("inline")).unwrap();
    let p = runner::predictions(&scenario).unwrap();

    // sigma_R at theta0: v = (2, -1, 0, 0), |v|^2 = 5, tr Q^2 = 5
    let expect_sr = (0.04_f64 * 5.0 + 0.5 * 0.2_f64.powi(4) * 5.0 + 0.25).sqrt();
    let sr = p["prop3.sigma_r"].as_f64().unwrap();
    assert!((sr - expect_sr).abs() < 1e-12, "{sr} vs {expect_sr}");

    let mean_norm = p["prop3.mean_update_norm"].as_f64().unwrap();
    assert!((mean_norm - 0.1 * 0.2 * 5.0_f64.sqrt() / expect_sr).abs() < 1e-12);

    assert_eq!(p["landscape.rank"].as_f64().unwrap(), 2.0);
    assert_eq!(p["appc.d_eff_ratio"].as_f64().unwrap(), 0.5);

    // GD projections at the horizon
    let proj0 = p["prop5.projection_final[0]"].as_f64().unwrap();
    assert_eq!(proj0, theory::gd_projected(1.0, 0.25, 2.0, 100).value);
    assert!(p["prop5.stable[0]"].as_bool().unwrap());
    assert!(!p["prop5.stable[2]"].as_bool().unwrap()); // flat: frozen, not convergent

    // displacement decomposition present with both optimizer sections
    assert!(p.contains_key("prop7.total_drift"));
    assert!(p.contains_key("prop8.es_gd_diff_sq"));
    assert!((p["geometry.cosine_scale"].as_f64().unwrap() - (2.0f64 / 4.0).sqrt()).abs() < 1e-15);
}

#[test]
fn zero_step_prediction_is_zero_drift() {
    let toml = r#"
[landscape]
kind = "flat"
dim = 100
sigma_xi = 1.0

[es]
sigma = 0.02
population = 30

[run]
method = "es"
steps = 0
trials = 1
"#;
    let scenario = Scenario::from_toml_str(toml, std::path::Path::new("inline")).unwrap();
    let p = runner::predictions(&scenario).unwrap();
    assert_eq!(p["prop1.total_drift"].as_f64().unwrap(), 0.0);
    assert!(p["prop1.drift_slope"].as_f64().unwrap() > 0.0);
}

#[test]
fn missing_tolerance_is_a_configuration_error() {
    let toml = r#"
[landscape]
kind = "flat"
dim = 10
sigma_xi = 1.0

[es]
sigma = 0.02
population = 10

[run]
method = "es"
steps = 20
trials = 5

[analysis]
fit = true

[validate]
checkpoints = [20]

[validate.tolerances]
"prop1.total_drift" = 0.2
"#;
    let scenario = Scenario::from_toml_str(toml, std::path::Path::new("inline")).unwrap();
    let err = runner::validate(&scenario, &RunOptions::default()).unwrap_err();
    match err {
        Error::MissingTolerance(key) => assert_eq!(key, "appc.d_eff_ratio"),
        other => panic!("unexpected error {other:?}"),
    }
}

#[test]
fn ou_validation_covers_all_recorded_directions() {
    let scenario = Scenario::from_path(scenario_dir().join("ou_spectrum.toml")).unwrap();
    let report = runner::validate(&scenario, &RunOptions::default()).unwrap();
    // 6 directions x 3 checkpoints x (mean + variance) + 1 flat slope
    assert_eq!(report.rows.len(), 37);
    assert!(report.passed);
    let slope_rows: Vec<_> = report
        .rows
        .iter()
        .filter(|r| r.quantity.starts_with("prop4.flat_variance_slope"))
        .collect();
    assert_eq!(slope_rows.len(), 1);
    assert_eq!(slope_rows[0].quantity, "prop4.flat_variance_slope[0]");
}

#[test]
fn probe_artifacts_share_magnitude_grid_across_directions() {
    let scenario = Scenario::from_path(scenario_dir().join("quad_hierarchy.toml")).unwrap();
    let mut scenario = scenario;
    scenario.run.as_mut().unwrap().steps = 50;
    let output = runner::probe(&scenario, None, None, None, &RunOptions::default()).unwrap();
    let grids: Vec<&[f64]> = output
        .probes
        .iter()
        .map(|p| p.magnitudes.as_slice())
        .collect();
    for grid in &grids[1..] {
        assert_eq!(*grid, grids[0]);
    }
    // default grid reaches past the trained point and includes it exactly
    let primary_norm = output.summary["primary_norm"].as_f64().unwrap();
    assert!(output.probes[0].magnitudes.contains(&primary_norm));
    assert!(*output.probes[0].magnitudes.last().unwrap() > primary_norm);
    // labels: es + gd + 3 random controls
    assert_eq!(output.probes.len(), 5);
}

#[test]
fn interpolation_artifacts_written_atomically() {
    let scenario = Scenario::from_path(scenario_dir().join("quad_hierarchy.toml")).unwrap();
    let mut scenario = scenario;
    scenario.run.as_mut().unwrap().steps = 50;
    scenario.run.as_mut().unwrap().trials = 2;
    let dir = tempfile::tempdir().unwrap();
    runner::interpolate(
        &scenario,
        None,
        None,
        Some(5),
        &RunOptions {
            out_dir: Some(dir.path().to_path_buf()),
            write: true,
            seed: None,
        },
    )
    .unwrap();
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.contains(&"interpolation.csv".to_string()));
    assert!(names.contains(&"interpolation.json".to_string()));
    assert!(
        names.iter().all(|n| !n.ends_with(".tmp")),
        "temp files left behind: {names:?}"
    );
}

#[test]
fn rotated_basis_validation_is_consistent() {
    // prediction and simulation must both work in the eigenbasis; a basis
    // rotation changes neither the drift nor its closed form
    let toml = r#"
[landscape]
kind = "quadratic"
dim = 20
rank = 3
lambda = 1.5
sigma_xi = 1.0
basis = "random-rotation"
rotation_seed = 5

[init]
theta0 = 1.0

[es]
sigma = 0.4
alpha = 0.2
population = 30

[run]
method = "es"
steps = 150
trials = 30
seed = 19

[validate]
checkpoints = [150]

[validate.tolerances]
"prop7.total_drift" = 0.1
"#;
    let scenario = Scenario::from_toml_str(toml, std::path::Path::new("inline")).unwrap();
    let report = runner::validate(&scenario, &RunOptions::default()).unwrap();
    assert!(
        report.passed,
        "rotated-basis validation failed: {:#?}",
        report.rows
    );

    // same spectrum, canonical basis, initial point with the same eigen
    // coordinates: identical predictions
    let rotated_eigen = scenario.theta0_eigen().unwrap();
    let mut canonical = scenario.clone();
    canonical.landscape.basis = eslab::scenario::BasisSpec::Canonical;
    canonical.landscape.rotation_seed = None;
    canonical.init.theta0 = Some(eslab::scenario::Theta0Spec::Explicit(rotated_eigen));
    let p_rot = runner::predictions(&scenario).unwrap();
    let p_can = runner::predictions(&canonical).unwrap();
    for key in ["prop3.sigma_r", "prop7.total_drift", "prop7.signal_sq"] {
        let a = p_rot[key].as_f64().unwrap();
        let b = p_can[key].as_f64().unwrap();
        assert!(
            (a - b).abs() <= 1e-9 * b.abs().max(1.0),
            "{key}: {a} vs {b}"
        );
    }
}

#[test]
fn theta_artifacts_round_trip_through_probe_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let theta = vec![0.25, -1.5, 3.0, 1e-12];
    let path = dir.path().join("theta.csv");
    report::atomic_write(&path, report::theta_csv(&theta, "cafe").as_bytes()).unwrap();
    assert_eq!(report::read_theta_csv(&path).unwrap(), theta);
}
