//! Scenario-driven commands: closed-form prediction, Monte-Carlo simulation,
//! theory-versus-simulation validation, and the geometry analyses. The CLI is
//! a thin argument-parsing layer over these functions; they are equally
//! callable from tests and from the Python bindings.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::analysis::{
    self, ensemble_stats, fit_drift, hierarchy_measurement, interpolate_path, DriftFit,
    EnsembleStats, HierarchyMeasurement, InterpolationResult, ProbeResult,
};
use crate::error::{Error, Result};
use crate::landscape::{norm, Landscape};
use crate::optimizer::{run_trajectory, trial_rng, Method, RecordSpec, TrajectoryRecord};
use crate::report;
use crate::scenario::{LandscapeKind, MethodName, Scenario};
use crate::theory;

/// Cross-command options, typically fed by CLI flags.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Replaces the scenario's master seed.
    pub seed: Option<u64>,
    /// Replaces the scenario's output directory.
    pub out_dir: Option<PathBuf>,
    /// Write artifacts to disk; in-memory callers leave this off.
    pub write: bool,
}

impl RunOptions {
    pub fn master_seed(&self, scenario: &Scenario) -> u64 {
        self.seed
            .or_else(|| scenario.run.as_ref().map(|r| r.seed))
            .unwrap_or(0)
    }

    pub fn resolve_out_dir(&self, scenario: &Scenario) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| scenario.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn insert_num(map: &mut BTreeMap<String, Value>, key: impl Into<String>, value: f64) {
    map.insert(key.into(), json!(value));
}

/// Every closed-form quantity applicable to the scenario, as a flat
/// key-to-value map grouped into stable result families; see the README
/// for the full key table.
pub fn predictions(scenario: &Scenario) -> Result<BTreeMap<String, Value>> {
    scenario.check()?;
    let mut out = BTreeMap::new();
    let dim = scenario.landscape.dim;
    let steps = scenario.run.as_ref().map(|r| r.steps as u64);
    insert_num(&mut out, "landscape.dim", dim as f64);
    insert_num(&mut out, "landscape.sigma_xi", scenario.landscape.sigma_xi);

    let spectrum = scenario.spectrum();
    let theta0_eigen: Option<Vec<f64>> = match scenario.landscape.kind {
        LandscapeKind::Quadratic => Some(scenario.theta0_eigen()?),
        _ => None,
    };
    if let Some(spec) = &spectrum {
        let rank = spec.iter().filter(|l| **l != 0.0).count() as u64;
        insert_num(&mut out, "landscape.rank", rank as f64);
        insert_num(
            &mut out,
            "landscape.trace_q2",
            spec.iter().map(|l| l * l).sum(),
        );
    }

    if let Some(es) = scenario.es_config()? {
        let n = es.population as u64;
        insert_num(
            &mut out,
            "prop1.step_variance",
            theory::step_variance(es.alpha, n),
        );
        match scenario.landscape.kind {
            LandscapeKind::Flat => {
                insert_num(
                    &mut out,
                    "prop1.drift_slope",
                    theory::flat_drift_slope(es.alpha, dim, n),
                );
                if let Some(t) = steps {
                    insert_num(
                        &mut out,
                        "prop1.total_drift",
                        theory::flat_drift(es.alpha, t, dim, n),
                    );
                }
                insert_num(&mut out, "appc.d_eff_ratio", 1.0);
            }
            LandscapeKind::Linear => {
                let v = scenario.gradient_direction().expect("linear kind");
                let grad_norm = norm(&v);
                let sigma_xi = scenario.landscape.sigma_xi;
                let sr = theory::sigma_r_linear(es.sigma, grad_norm, sigma_xi)?;
                let s = theory::signal_fraction(es.sigma, grad_norm, sigma_xi)?;
                insert_num(&mut out, "prop2.sigma_r", sr);
                insert_num(&mut out, "prop2.signal_fraction", s);
                insert_num(
                    &mut out,
                    "prop2.mean_update_norm",
                    es.alpha * es.sigma * grad_norm / sr,
                );
                insert_num(&mut out, "prop2.rho", theory::rho_linear(s, n, dim)?);
                insert_num(
                    &mut out,
                    "prop2.isotropic_coeff",
                    theory::step_variance(es.alpha, n),
                );
                insert_num(
                    &mut out,
                    "prop2.rank1_coeff",
                    es.alpha * es.alpha * es.sigma * es.sigma / (n as f64 * sr * sr),
                );
            }
            LandscapeKind::Quadratic => {
                let spec = spectrum.as_ref().expect("quadratic kind");
                let theta0_eigen = theta0_eigen.as_ref().expect("quadratic kind");
                let v_eigen: Vec<f64> = spec.iter().zip(theta0_eigen).map(|(l, t)| l * t).collect();
                let grad_norm = norm(&v_eigen);
                let trace_q2: f64 = spec.iter().map(|l| l * l).sum();
                let sigma_xi = scenario.landscape.sigma_xi;
                let sr = theory::sigma_r_quadratic(es.sigma, grad_norm, trace_q2, sigma_xi)?;
                insert_num(&mut out, "prop3.sigma_r", sr);
                insert_num(
                    &mut out,
                    "prop3.mean_update_norm",
                    es.alpha * es.sigma * grad_norm / sr,
                );
                if let Ok(sr_lin) = theory::sigma_r_linear(es.sigma, grad_norm, sigma_xi) {
                    insert_num(&mut out, "prop3.sigma_r_linear_formula", sr_lin);
                    insert_num(&mut out, "prop3.mean_attenuation", sr_lin / sr);
                }
                if grad_norm > 0.0 {
                    insert_num(
                        &mut out,
                        "prop3.rho",
                        theory::rho_quadratic(&v_eigen, spec, es.sigma, n, sigma_xi)?,
                    );
                }
                let rank = spec.iter().filter(|l| **l != 0.0).count() as u64;
                if let Some(t) = steps {
                    // OU idealization with the reward deviation frozen at the
                    // initial point (or the [ou] section's explicit freeze)
                    let sigma_r_fixed = match scenario.ou_config()? {
                        Some(ou) => ou.sigma_r_fixed,
                        None => sr,
                    };
                    let decomp = theory::displacement_decomposition(
                        theta0_eigen,
                        spec,
                        es.alpha,
                        es.sigma,
                        n,
                        sigma_r_fixed,
                        t,
                    )?;
                    insert_num(&mut out, "prop7.signal_sq", decomp.signal_sq);
                    insert_num(&mut out, "prop7.diffusion_sq", decomp.diffusion_sq);
                    insert_num(&mut out, "prop7.total_drift", decomp.total_sq);
                    insert_num(
                        &mut out,
                        "prop8.es_gd_diff_sq",
                        theory::es_gd_difference_sq(es.alpha, t, dim, rank, n),
                    );
                }
                if rank >= 1 {
                    insert_num(
                        &mut out,
                        "geometry.cosine_scale",
                        theory::expected_cosine_scale(rank, dim)?,
                    );
                }
                insert_num(
                    &mut out,
                    "appc.d_eff_ratio",
                    (dim - rank) as f64 / dim as f64,
                );
            }
        }
    }

    if let (Some(ou), Some(spec)) = (scenario.ou_config()?, spectrum.as_ref()) {
        let theta0_eigen = theta0_eigen.as_ref().expect("quadratic kind");
        insert_num(&mut out, "prop4.sigma_r_fixed", ou.sigma_r_fixed);
        let n = ou.population as u64;
        for &k in &scenario.record.projections {
            let gamma = ou.contraction(spec[k]);
            insert_num(&mut out, format!("prop4.gamma[{k}]"), gamma);
            out.insert(
                format!("prop4.stability[{k}]"),
                json!(format!("{:?}", theory::stability_class(gamma))),
            );
            if let Some(t) = steps {
                insert_num(
                    &mut out,
                    format!("prop4.mean_final[{k}]"),
                    theory::ou_projected_mean(theta0_eigen[k], gamma, t),
                );
                insert_num(
                    &mut out,
                    format!("prop4.variance_final[{k}]"),
                    theory::ou_projected_variance(ou.alpha, n, gamma, t),
                );
            }
            if let Ok(asym) = theory::ou_asymptotic_variance(ou.alpha, n, gamma) {
                insert_num(&mut out, format!("prop4.asymptotic_variance[{k}]"), asym);
                insert_num(
                    &mut out,
                    format!("prop4.tau[{k}]"),
                    theory::convergence_timescale(gamma)?,
                );
            }
        }
    }

    if let (Some(gd), Some(spec)) = (scenario.gd_config()?, spectrum.as_ref()) {
        let theta0_eigen = theta0_eigen.as_ref().expect("quadratic kind");
        for &k in &scenario.record.projections {
            let gamma = 1.0 - gd.beta * spec[k];
            insert_num(&mut out, format!("prop5.gamma[{k}]"), gamma);
            out.insert(
                format!("prop5.stable[{k}]"),
                json!(spec[k] > 0.0 && spec[k] < 2.0 / gd.beta),
            );
            if let Some(t) = steps {
                insert_num(
                    &mut out,
                    format!("prop5.projection_final[{k}]"),
                    theory::gd_projected(theta0_eigen[k], gd.beta, spec[k], t).value,
                );
            }
        }
        if let Some(t) = steps {
            let gd_sq: f64 = theta0_eigen
                .iter()
                .zip(spec.iter())
                .map(|(proj, lambda)| {
                    let moved = 1.0 - (1.0 - gd.beta * lambda).powi(t as i32);
                    moved * moved * proj * proj
                })
                .sum();
            insert_num(&mut out, "prop6.gd_disp_sq", gd_sq);
        }
    }

    Ok(out)
}

/// Outcome of a simulation run over all trials.
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub records: Vec<TrajectoryRecord>,
    /// Pointwise statistics over the trials that completed every step.
    pub ensemble: Option<EnsembleStats>,
    pub fit: Option<DriftFit>,
    pub divergent_trials: usize,
    pub summary: Value,
    pub out_dir: Option<PathBuf>,
}

/// Runs every trial of the scenario's `[run]` method. Trials fan out across
/// threads; each owns an independent generator stream, and all reductions
/// happen in trial order after collection.
pub fn simulate(scenario: &Scenario, opts: &RunOptions) -> Result<SimulationOutput> {
    scenario.check()?;
    let run = scenario
        .run
        .clone()
        .ok_or_else(|| Error::InvalidScenario(vec!["missing [run] section".into()]))?;
    let method = scenario.method()?;
    let landscape = scenario.build_landscape()?;
    let noise = scenario.noise()?;
    let theta0 = scenario.theta0();
    let master_seed = opts.master_seed(scenario);
    let record_spec = scenario.record.clone();

    let records: Vec<TrajectoryRecord> = (0..run.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(master_seed, trial as u64);
            run_trajectory(
                &theta0,
                &landscape,
                &noise,
                &method,
                run.steps,
                &record_spec,
                &mut rng,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let complete: Vec<TrajectoryRecord> = records
        .iter()
        .filter(|r| r.diverged_at.is_none())
        .cloned()
        .collect();
    let divergent_trials = records.len() - complete.len();
    let ensemble = if complete.is_empty() {
        None
    } else {
        Some(ensemble_stats(&complete)?)
    };

    let fit = match (&ensemble, scenario.analysis.fit) {
        (Some(stats), true) => {
            let es = scenario.es_config()?;
            let alpha = match &method {
                Method::Es(cfg) => cfg.alpha,
                Method::Ou(cfg) => cfg.alpha,
                Method::Gd(_) => es.as_ref().map(|c| c.alpha).unwrap_or(1.0),
            };
            let population = match &method {
                Method::Es(cfg) => cfg.population as u64,
                Method::Ou(cfg) => cfg.population as u64,
                Method::Gd(_) => es.as_ref().map(|c| c.population as u64).unwrap_or(1),
            };
            Some(fit_drift(
                &stats.mean_drift,
                alpha,
                population,
                scenario.landscape.dim,
            )?)
        }
        _ => None,
    };

    let degenerate_steps: usize = records.iter().map(|r| r.degenerate_steps).sum();
    let hash = scenario.hash();
    let mut summary = json!({
        "scenario": scenario.name,
        "scenario_hash": hash,
        "method": method.name(),
        "steps": run.steps,
        "trials": run.trials,
        "seed": master_seed,
        "divergent_trials": divergent_trials,
        "degenerate_steps_total": degenerate_steps,
        "unstable_directions": records.first().map(|r| r.unstable_directions.clone()).unwrap_or_default(),
    });
    if let Some(stats) = &ensemble {
        let last = stats.mean_drift.len() - 1;
        summary["mean_drift_final"] = json!(stats.mean_drift[last]);
        summary["stderr_drift_final"] = json!(stats.stderr_drift[last]);
        let finals: Vec<Value> = scenario
            .record
            .projections
            .iter()
            .zip(&stats.directions)
            .map(|(k, dir)| {
                json!({
                    "index": k,
                    "mean_final": dir.mean[last],
                    "variance_final": dir.variance[last],
                })
            })
            .collect();
        summary["directions"] = json!(finals);
    }
    if let Some(f) = &fit {
        summary["fit"] = json!({
            "slope": f.slope,
            "r_squared": f.r_squared,
            "d_eff": f.d_eff,
            "d_eff_ratio": f.d_eff_ratio,
        });
    }

    let out_dir = if opts.write {
        let dir = opts.resolve_out_dir(scenario);
        write_simulation_artifacts(scenario, &records, &ensemble, &summary, &dir, &hash)?;
        Some(dir)
    } else {
        None
    };

    Ok(SimulationOutput {
        records,
        ensemble,
        fit,
        divergent_trials,
        summary,
        out_dir,
    })
}

fn write_simulation_artifacts(
    scenario: &Scenario,
    records: &[TrajectoryRecord],
    ensemble: &Option<EnsembleStats>,
    summary: &Value,
    dir: &Path,
    hash: &str,
) -> Result<()> {
    let directions = &scenario.record.projections;
    report::atomic_write(
        &dir.join("scenario.toml"),
        scenario.to_toml_string().as_bytes(),
    )?;
    for (i, record) in records.iter().enumerate() {
        let path = dir.join(format!("trial_{i:04}.csv"));
        report::atomic_write(
            &path,
            report::trajectory_csv(record, directions, hash).as_bytes(),
        )?;
        if let Some(theta) = &record.final_theta {
            let path = dir.join(format!("theta_final_{i:04}.csv"));
            report::atomic_write(&path, report::theta_csv(theta, hash).as_bytes())?;
        }
    }
    if let Some(stats) = ensemble {
        let path = dir.join("ensemble.csv");
        report::atomic_write(
            &path,
            report::ensemble_csv(stats, directions, hash).as_bytes(),
        )?;
    }
    report::write_json(&dir.join("summary.json"), summary)?;
    Ok(())
}

/// One predicted-versus-observed comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub quantity: String,
    pub predicted: f64,
    pub observed: f64,
    /// Relative tolerance from the scenario's `[validate.tolerances]`.
    pub tolerance: f64,
    /// Standard error of the observation, where one exists.
    pub stderr: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub rows: Vec<CheckRow>,
    pub passed: bool,
    pub divergent_trials: usize,
    pub summary: Value,
}

fn tolerance_for(key: &str, tolerances: &BTreeMap<String, f64>) -> Result<f64> {
    if let Some(t) = tolerances.get(key) {
        return Ok(*t);
    }
    let family = key.split(['[', '@']).next().unwrap_or(key);
    tolerances
        .get(family)
        .copied()
        .ok_or_else(|| Error::MissingTolerance(key.to_string()))
}

fn check(
    quantity: String,
    predicted: f64,
    observed: f64,
    tolerance: f64,
    stderr: Option<f64>,
    stderr_floor: f64,
) -> CheckRow {
    let err = (observed - predicted).abs();
    let mut pass = err <= tolerance * predicted.abs();
    if let Some(se) = stderr {
        if stderr_floor > 0.0 {
            pass = pass || err <= stderr_floor * se;
        }
    }
    CheckRow {
        quantity,
        predicted,
        observed,
        tolerance,
        stderr,
        pass,
    }
}

/// Simulates the scenario, predicts every paired closed form, and compares
/// at the tolerances pinned in `[validate]`. Every requested comparison must
/// have a tolerance; a missing one is a configuration error.
pub fn validate(scenario: &Scenario, opts: &RunOptions) -> Result<ValidationReport> {
    scenario.check()?;
    let vspec = scenario
        .validate
        .clone()
        .ok_or_else(|| Error::InvalidScenario(vec!["missing [validate] section".into()]))?;
    let run = scenario
        .run
        .clone()
        .ok_or_else(|| Error::InvalidScenario(vec!["missing [run] section".into()]))?;

    let sim = simulate(
        scenario,
        &RunOptions {
            write: false,
            ..opts.clone()
        },
    )?;
    let stats = sim.ensemble.as_ref().ok_or_else(|| {
        Error::InvalidScenario(vec!["every trial diverged; nothing to compare".into()])
    })?;
    let completed = stats.mean_drift.len() - 1;
    let dim = scenario.landscape.dim;
    let mut rows = Vec::new();
    let floor = vspec.stderr_floor;
    let tols = &vspec.tolerances;

    match run.method {
        MethodName::Es => {
            let es = scenario.es_config()?.expect("checked");
            let n = es.population as u64;
            match scenario.landscape.kind {
                LandscapeKind::Flat => {
                    let key = "prop1.total_drift";
                    rows.push(check(
                        key.into(),
                        theory::flat_drift(es.alpha, completed as u64, dim, n),
                        stats.mean_drift[completed],
                        tolerance_for(key, tols)?,
                        Some(stats.stderr_drift[completed]),
                        floor,
                    ));
                    if let Some(fit) = &sim.fit {
                        let key = "appc.d_eff_ratio";
                        rows.push(check(
                            key.into(),
                            1.0,
                            fit.d_eff_ratio,
                            tolerance_for(key, tols)?,
                            None,
                            floor,
                        ));
                    }
                }
                LandscapeKind::Quadratic => {
                    let spec = scenario.spectrum().expect("quadratic");
                    let theta0_eigen = scenario.theta0_eigen()?;
                    let sigma_r_fixed = match scenario.ou_config()? {
                        Some(ou) => ou.sigma_r_fixed,
                        None => scenario.sigma_r_at_start(es.sigma)?,
                    };
                    let decomp = theory::displacement_decomposition(
                        &theta0_eigen,
                        &spec,
                        es.alpha,
                        es.sigma,
                        n,
                        sigma_r_fixed,
                        completed as u64,
                    )?;
                    let key = "prop7.total_drift";
                    rows.push(check(
                        key.into(),
                        decomp.total_sq,
                        stats.mean_drift[completed],
                        tolerance_for(key, tols)?,
                        Some(stats.stderr_drift[completed]),
                        floor,
                    ));
                    if let Some(fit) = &sim.fit {
                        let rank = spec.iter().filter(|l| **l != 0.0).count() as u64;
                        let key = "appc.d_eff_ratio";
                        rows.push(check(
                            key.into(),
                            (dim - rank) as f64 / dim as f64,
                            fit.d_eff_ratio,
                            tolerance_for(key, tols)?,
                            None,
                            floor,
                        ));
                    }
                }
                LandscapeKind::Linear => {}
            }
        }
        MethodName::Ou => {
            let ou = scenario.ou_config()?.expect("checked");
            let spec = scenario.spectrum().ok_or_else(|| {
                Error::InvalidScenario(vec!["OU validation needs a quadratic landscape".into()])
            })?;
            let theta0 = scenario.theta0();
            let n = ou.population as u64;
            for (ki, &k) in scenario.record.projections.iter().enumerate() {
                let gamma = ou.contraction(spec[k]);
                let dir = &stats.directions[ki];
                for &t in &vspec.checkpoints {
                    if t > completed {
                        continue;
                    }
                    let key = format!("prop4.mean[{k}]@{t}");
                    rows.push(check(
                        key.clone(),
                        theory::ou_projected_mean(theta0[k], gamma, t as u64),
                        dir.mean[t],
                        tolerance_for(&key, tols)?,
                        Some(dir.mean_stderr[t]),
                        floor,
                    ));
                    let key = format!("prop4.variance[{k}]@{t}");
                    rows.push(check(
                        key.clone(),
                        theory::ou_projected_variance(ou.alpha, n, gamma, t as u64),
                        dir.variance[t],
                        tolerance_for(&key, tols)?,
                        Some(dir.variance_stderr[t]),
                        floor,
                    ));
                }
                if gamma == 1.0 {
                    // flat direction: ensemble variance grows linearly
                    let slope_fit = fit_drift(&dir.variance, ou.alpha, n, dim)?;
                    let key = format!("prop4.flat_variance_slope[{k}]");
                    rows.push(check(
                        key.clone(),
                        theory::step_variance(ou.alpha, n),
                        slope_fit.slope,
                        tolerance_for(&key, tols)?,
                        None,
                        floor,
                    ));
                }
            }
        }
        MethodName::Gd => {
            let gd = scenario.gd_config()?.expect("checked");
            let spec = scenario.spectrum().ok_or_else(|| {
                Error::InvalidScenario(vec!["GD validation needs a quadratic landscape".into()])
            })?;
            let theta0 = scenario.theta0();
            let record = &sim.records[0];
            for (ki, &k) in scenario.record.projections.iter().enumerate() {
                for &t in &vspec.checkpoints {
                    if t >= record.projections[ki].len() {
                        continue;
                    }
                    let key = format!("prop5.projection[{k}]@{t}");
                    rows.push(check(
                        key.clone(),
                        theory::gd_projected(theta0[k], gd.beta, spec[k], t as u64).value,
                        record.projections[ki][t],
                        tolerance_for(&key, tols)?,
                        None,
                        floor,
                    ));
                }
            }
        }
    }

    let passed = rows.iter().all(|r| r.pass);
    let table: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "quantity": r.quantity,
                "predicted": r.predicted,
                "observed": r.observed,
                "tolerance": r.tolerance,
                "stderr": r.stderr,
                "verdict": if r.pass { "PASS" } else { "FAIL" },
            })
        })
        .collect();
    let summary = json!({
        "scenario": scenario.name,
        "scenario_hash": scenario.hash(),
        "passed": passed,
        "divergent_trials": sim.divergent_trials,
        "checks": table,
    });
    if opts.write {
        let dir = opts.resolve_out_dir(scenario);
        report::write_json(&dir.join("validation.json"), &summary)?;
    }
    Ok(ValidationReport {
        rows,
        passed,
        divergent_trials: sim.divergent_trials,
        summary,
    })
}

/// Endpoints for interpolation / probing, either loaded from artifacts or
/// regenerated from the scenario's optimizer sections.
fn es_and_gd_endpoints(
    scenario: &Scenario,
    master_seed: u64,
    es_trial: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let run = scenario
        .run
        .clone()
        .ok_or_else(|| Error::InvalidScenario(vec!["missing [run] section".into()]))?;
    let es = scenario.es_config()?.ok_or_else(|| {
        Error::InvalidScenario(vec!["endpoint generation needs an [es] section".into()])
    })?;
    let gd = scenario.gd_config()?.ok_or_else(|| {
        Error::InvalidScenario(vec!["endpoint generation needs a [gd] section".into()])
    })?;
    let landscape = scenario.build_landscape()?;
    let noise = scenario.noise()?;
    let theta0 = scenario.theta0();
    let record = RecordSpec {
        projections: vec![],
        keep_final: true,
    };

    let mut rng = trial_rng(master_seed, es_trial);
    let es_rec = run_trajectory(
        &theta0,
        &landscape,
        &noise,
        &Method::Es(es),
        run.steps,
        &record,
        &mut rng,
    )?;
    let theta_es = es_rec
        .final_theta
        .ok_or_else(|| Error::InvalidScenario(vec!["ES trajectory diverged".into()]))?;

    let mut rng = trial_rng(master_seed, 0);
    let gd_rec = run_trajectory(
        &theta0,
        &landscape,
        &crate::landscape::NoiseModel::NONE,
        &Method::Gd(gd),
        run.steps,
        &record,
        &mut rng,
    )?;
    let theta_gd = gd_rec
        .final_theta
        .ok_or_else(|| Error::InvalidScenario(vec!["GD trajectory diverged".into()]))?;
    Ok((theta_es, theta_gd))
}

#[derive(Debug, Clone)]
pub struct InterpolateOutput {
    pub paths: Vec<InterpolationResult>,
    pub mean_barrier: f64,
    pub max_barrier: f64,
    pub summary: Value,
}

/// Interpolates between two stored parameter vectors, or between freshly
/// generated ES and GD endpoints (one path per ES trial) when none are given.
/// Rewards along the path are exact by construction.
pub fn interpolate(
    scenario: &Scenario,
    theta_a: Option<Vec<f64>>,
    theta_b: Option<Vec<f64>>,
    points: Option<usize>,
    opts: &RunOptions,
) -> Result<InterpolateOutput> {
    scenario.check()?;
    let landscape = scenario.build_landscape()?;
    let k_points = points.or(scenario.analysis.interpolate_points).unwrap_or(5);
    let master_seed = opts.master_seed(scenario);

    let paths: Vec<InterpolationResult> = match (theta_a, theta_b) {
        (Some(a), Some(b)) => vec![interpolate_path(&a, &b, &landscape, k_points)?],
        (None, None) => {
            let trials = scenario.run.as_ref().map(|r| r.trials).unwrap_or(1);
            (0..trials)
                .into_par_iter()
                .map(|trial| {
                    let (theta_es, theta_gd) =
                        es_and_gd_endpoints(scenario, master_seed, trial as u64 + 1)?;
                    interpolate_path(&theta_es, &theta_gd, &landscape, k_points)
                })
                .collect::<Result<Vec<_>>>()?
        }
        _ => {
            return Err(Error::InvalidScenario(vec![
                "provide both endpoint files or neither".into(),
            ]))
        }
    };

    let barriers: Vec<f64> = paths.iter().map(|p| p.barrier).collect();
    let mean_barrier = analysis::pairwise_sum(&barriers) / barriers.len() as f64;
    let max_barrier = barriers.iter().copied().fold(0.0_f64, f64::max);
    let summary = json!({
        "scenario": scenario.name,
        "scenario_hash": scenario.hash(),
        "points": k_points,
        "paths": paths.len(),
        "mean_barrier": mean_barrier,
        "max_barrier": max_barrier,
    });
    if opts.write {
        let dir = opts.resolve_out_dir(scenario);
        let hash = scenario.hash();
        let mut csv = String::from("# scenario_hash=");
        csv.push_str(&hash);
        csv.push_str(" units=coefficient=mixing reward=reward\npath,coefficient,reward\n");
        for (i, path) in paths.iter().enumerate() {
            for (c, r) in path.coefficients.iter().zip(&path.rewards) {
                csv.push_str(&format!("{i},{c},{r}\n"));
            }
        }
        report::atomic_write(&dir.join("interpolation.csv"), csv.as_bytes())?;
        report::write_json(&dir.join("interpolation.json"), &summary)?;
    }
    Ok(InterpolateOutput {
        paths,
        mean_barrier,
        max_barrier,
        summary,
    })
}

#[derive(Debug, Clone)]
pub struct ProbeOutput {
    pub probes: Vec<ProbeResult>,
    pub summary: Value,
}

/// Probes the reward along the ES update direction (and GD, when configured),
/// with random unit directions as controls, all at shared absolute
/// magnitudes. Defaults: base is the scenario's initial point, the directions
/// are freshly generated endpoint deltas, and the magnitude grid spans 1.5x
/// the ES displacement norm with an exact grid point at the trained
/// checkpoint.
pub fn probe(
    scenario: &Scenario,
    base: Option<Vec<f64>>,
    delta: Option<Vec<f64>>,
    magnitudes: Option<Vec<f64>>,
    opts: &RunOptions,
) -> Result<ProbeOutput> {
    scenario.check()?;
    let landscape = scenario.build_landscape()?;
    let master_seed = opts.master_seed(scenario);
    let theta0 = scenario.theta0();
    let base = base.unwrap_or_else(|| theta0.clone());

    let mut directions: Vec<(String, Vec<f64>)> = Vec::new();
    match delta {
        Some(d) => directions.push(("delta".into(), d)),
        None => {
            let (theta_es, theta_gd) = es_and_gd_endpoints(scenario, master_seed, 1)?;
            let es_delta: Vec<f64> = theta_es.iter().zip(&theta0).map(|(a, b)| a - b).collect();
            directions.push(("es".into(), es_delta));
            let gd_delta: Vec<f64> = theta_gd.iter().zip(&theta0).map(|(a, b)| a - b).collect();
            if norm(&gd_delta) > 0.0 {
                directions.push(("gd".into(), gd_delta));
            }
        }
    }

    let primary_norm = norm(&directions[0].1);
    let magnitudes = match magnitudes {
        Some(m) if !m.is_empty() => m,
        _ if !scenario.analysis.probe_magnitudes.is_empty() => {
            scenario.analysis.probe_magnitudes.clone()
        }
        _ => {
            // eighths of the primary displacement norm out to 1.5x; the
            // fraction 1 entry recovers the trained checkpoint exactly
            (0..=12).map(|i| i as f64 / 8.0 * primary_norm).collect()
        }
    };

    let mut probes = Vec::new();
    for (label, delta) in &directions {
        probes.push(analysis::directional_probe(
            &base,
            delta,
            &landscape,
            &magnitudes,
            label,
        )?);
    }
    for seed_idx in 0..scenario.analysis.probe_random_seeds {
        let dir =
            analysis::random_unit_direction(base.len(), master_seed ^ (0x9e3779b9 + seed_idx));
        probes.push(analysis::directional_probe(
            &base,
            &dir,
            &landscape,
            &magnitudes,
            format!("random_{seed_idx}"),
        )?);
    }

    let summary = json!({
        "scenario": scenario.name,
        "scenario_hash": scenario.hash(),
        "directions": probes.iter().map(|p| p.direction_label.clone()).collect::<Vec<_>>(),
        "magnitudes": magnitudes,
        "primary_norm": primary_norm,
    });
    if opts.write {
        let dir = opts.resolve_out_dir(scenario);
        report::atomic_write(
            &dir.join("probe.csv"),
            report::probe_csv(&probes, &scenario.hash()).as_bytes(),
        )?;
        report::write_json(&dir.join("probe.json"), &summary)?;
    }
    Ok(ProbeOutput { probes, summary })
}

#[derive(Debug, Clone)]
pub struct HierarchyOutput {
    pub measurement: HierarchyMeasurement,
    pub prediction: theory::HierarchyPrediction,
    pub summary: Value,
}

/// Measures the GD / ES / difference displacement hierarchy over the
/// scenario's trial budget and pairs it with the closed-form prediction.
pub fn hierarchy(scenario: &Scenario, opts: &RunOptions) -> Result<HierarchyOutput> {
    scenario.check()?;
    let run = scenario
        .run
        .clone()
        .ok_or_else(|| Error::InvalidScenario(vec!["missing [run] section".into()]))?;
    let es = scenario
        .es_config()?
        .ok_or_else(|| Error::InvalidScenario(vec!["hierarchy needs an [es] section".into()]))?;
    let gd = scenario
        .gd_config()?
        .ok_or_else(|| Error::InvalidScenario(vec!["hierarchy needs a [gd] section".into()]))?;
    let landscape = scenario.build_landscape()?;
    let noise = scenario.noise()?;
    let theta0 = scenario.theta0();
    let master_seed = opts.master_seed(scenario);

    let measurement = hierarchy_measurement(
        &theta0,
        &landscape,
        &noise,
        &es,
        &gd,
        run.steps,
        run.trials,
        master_seed,
    )?;

    let (spectrum, theta0_eigen) = match &landscape {
        Landscape::Quadratic(q) => (q.eigenvalues().to_vec(), q.eigen_coordinates(&theta0)),
        _ => (vec![0.0; theta0.len()], theta0.clone()),
    };
    let sigma_r_fixed = match scenario.ou_config()? {
        Some(ou) => ou.sigma_r_fixed,
        None => scenario.sigma_r_at_start(es.sigma)?,
    };
    let prediction = theory::hierarchy_prediction(
        &theta0_eigen,
        &spectrum,
        es.alpha,
        es.sigma,
        es.population as u64,
        sigma_r_fixed,
        gd.beta,
        run.steps as u64,
    )?;

    let summary = json!({
        "scenario": scenario.name,
        "scenario_hash": scenario.hash(),
        "trials_used": measurement.trials_used,
        "excluded_divergent": measurement.excluded_divergent,
        "gd_sq": measurement.gd_sq,
        "es_sq_mean": measurement.es_sq_mean,
        "diff_sq_mean": measurement.diff_sq_mean,
        "mean_cosine": measurement.mean_cosine(),
        "predicted": {
            "gd_sq": prediction.gd_sq_norm,
            "es_sq": prediction.es_sq_norm,
            "diff_sq": prediction.es_gd_diff_sq_norm,
            "cosine_scale": prediction.cosine_scale,
        },
    });
    if opts.write {
        let dir = opts.resolve_out_dir(scenario);
        let hash = scenario.hash();
        let mut csv = format!(
            "# scenario_hash={hash} units=es_sq=param^2 diff_sq=param^2 cosine=unitless\ntrial,es_sq,diff_sq,cosine\n"
        );
        for (i, (es_sq, diff_sq)) in measurement
            .es_sq_samples
            .iter()
            .zip(&measurement.diff_sq_samples)
            .enumerate()
        {
            let cosine = measurement
                .cosine_samples
                .as_ref()
                .and_then(|c| c.get(i))
                .map(|c| c.to_string())
                .unwrap_or_default();
            csv.push_str(&format!("{i},{es_sq},{diff_sq},{cosine}\n"));
        }
        report::atomic_write(&dir.join("hierarchy.csv"), csv.as_bytes())?;
        report::write_json(&dir.join("hierarchy.json"), &summary)?;
    }
    Ok(HierarchyOutput {
        measurement,
        prediction,
        summary,
    })
}

/// Drift fit from a stored curve artifact.
pub fn fit_from_csv(
    path: &Path,
    column: &str,
    alpha: f64,
    population: u64,
    dim: u64,
) -> Result<DriftFit> {
    let curve = report::read_csv_column(path, column)?;
    fit_drift(&curve, alpha, population, dim)
}
