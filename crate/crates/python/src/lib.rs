//! Python bindings: the landscapes, the three iterations, trajectory
//! running, the closed-form predictors, and the geometry analyses, exposed
//! as a flat `eslab_py` module.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use eslab::analysis;
use eslab::landscape::QuadraticLandscape;
use eslab::optimizer::{self, Method, RecordSpec, ZscoreMode};
use eslab::runner::{self, RunOptions};
use eslab::theory;
use eslab::{EsConfig, GdConfig, NoiseModel, OuConfig, Scenario};

fn to_py_err(e: eslab::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, value: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match value {
        serde_json::Value::Null => py.None().into_bound(py),
        serde_json::Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any()
            }
        }
        serde_json::Value::String(s) => s.into_pyobject(py)?.into_any(),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.into_any()
        }
    })
}

/// One of the three analytic reward surfaces.
#[pyclass(name = "Landscape")]
struct PyLandscape {
    inner: eslab::Landscape,
}

#[pymethods]
impl PyLandscape {
    /// Constant reward everywhere.
    #[staticmethod]
    fn flat(constant: f64, dim: usize) -> Self {
        PyLandscape {
            inner: eslab::Landscape::flat(constant, dim),
        }
    }

    /// Reward `-v . theta`.
    #[staticmethod]
    fn linear(v: Vec<f64>) -> Self {
        PyLandscape {
            inner: eslab::Landscape::linear(v),
        }
    }

    /// Reward `-1/2 sum lambda_k (u_k . theta)^2`; optionally with a seeded
    /// random orthogonal eigenbasis.
    #[staticmethod]
    #[pyo3(signature = (spectrum, rotation_seed=None))]
    fn quadratic(spectrum: Vec<f64>, rotation_seed: Option<u64>) -> Self {
        let inner = match rotation_seed {
            None => eslab::Landscape::quadratic(spectrum),
            Some(seed) => {
                eslab::Landscape::Quadratic(QuadraticLandscape::with_rotation(spectrum, seed))
            }
        };
        PyLandscape { inner }
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Number of nonzero eigenvalues; None for flat/linear landscapes.
    fn rank(&self) -> Option<usize> {
        match &self.inner {
            eslab::Landscape::Quadratic(q) => Some(q.rank()),
            _ => None,
        }
    }

    fn reward(&self, theta: Vec<f64>) -> PyResult<f64> {
        self.inner.reward(&theta).map_err(to_py_err)
    }

    fn gradient(&self, theta: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.gradient(&theta).map_err(to_py_err)
    }

    /// True reward plus Gaussian observation noise drawn from a fresh
    /// generator with the given seed.
    fn observe_reward(&self, theta: Vec<f64>, sigma_xi: f64, seed: u64) -> PyResult<f64> {
        let noise = NoiseModel::new(sigma_xi).map_err(to_py_err)?;
        let mut rng = optimizer::trial_rng(seed, 0);
        self.inner
            .observe_reward(&noise, &theta, &mut rng)
            .map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        match &self.inner {
            eslab::Landscape::Flat(f) => format!("Landscape.flat({}, dim={})", f.constant, f.dim),
            eslab::Landscape::Linear(l) => format!("Landscape.linear(dim={})", l.v.len()),
            eslab::Landscape::Quadratic(q) => {
                format!("Landscape.quadratic(dim={}, rank={})", q.dim(), q.rank())
            }
        }
    }
}

/// Everything recorded along one optimization run.
#[pyclass(name = "Trajectory")]
struct PyTrajectory {
    inner: eslab::TrajectoryRecord,
}

#[pymethods]
impl PyTrajectory {
    /// Squared distance from the initial point, one entry per step (0..=T).
    #[getter]
    fn drift_sq(&self) -> Vec<f64> {
        self.inner.drift_sq.clone()
    }

    /// One series per recorded direction.
    #[getter]
    fn projections(&self) -> Vec<Vec<f64>> {
        self.inner.projections.clone()
    }

    #[getter]
    fn reward_mean(&self) -> Vec<f64> {
        self.inner.reward_mean.clone()
    }

    #[getter]
    fn reward_std(&self) -> Vec<f64> {
        self.inner.reward_std.clone()
    }

    #[getter]
    fn diverged_at(&self) -> Option<usize> {
        self.inner.diverged_at
    }

    #[getter]
    fn degenerate_steps(&self) -> usize {
        self.inner.degenerate_steps
    }

    #[getter]
    fn unstable_directions(&self) -> Vec<usize> {
        self.inner.unstable_directions.clone()
    }

    #[getter]
    fn final_theta(&self) -> Option<Vec<f64>> {
        self.inner.final_theta.clone()
    }

    fn completed_steps(&self) -> usize {
        self.inner.completed_steps()
    }

    fn __repr__(&self) -> String {
        format!(
            "Trajectory(steps={}, diverged_at={:?})",
            self.inner.completed_steps(),
            self.inner.diverged_at
        )
    }
}

fn parse_zscore(mode: &str) -> PyResult<ZscoreMode> {
    match mode {
        "population" => Ok(ZscoreMode::Population),
        "unbiased" => Ok(ZscoreMode::Unbiased),
        other => Err(PyValueError::new_err(format!(
            "zscore must be \"population\" or \"unbiased\", got {other:?}"
        ))),
    }
}

/// Run a z-scored ES trajectory.
#[pyfunction]
#[pyo3(signature = (theta0, landscape, sigma, population, steps, *, alpha=None, sigma_xi=0.0,
                    seed=0, projections=None, keep_final=false, zscore="population"))]
#[allow(clippy::too_many_arguments)]
fn run_es(
    theta0: Vec<f64>,
    landscape: &PyLandscape,
    sigma: f64,
    population: usize,
    steps: usize,
    alpha: Option<f64>,
    sigma_xi: f64,
    seed: u64,
    projections: Option<Vec<usize>>,
    keep_final: bool,
    zscore: &str,
) -> PyResult<PyTrajectory> {
    let cfg = EsConfig {
        sigma,
        alpha: alpha.unwrap_or(sigma / 2.0),
        population,
        zscore: parse_zscore(zscore)?,
        seed,
    }
    .validated()
    .map_err(to_py_err)?;
    let noise = NoiseModel::new(sigma_xi).map_err(to_py_err)?;
    let record = RecordSpec {
        projections: projections.unwrap_or_default(),
        keep_final,
    };
    let mut rng = optimizer::trial_rng(seed, 0);
    let inner = optimizer::run_trajectory(
        &theta0,
        &landscape.inner,
        &noise,
        &Method::Es(cfg),
        steps,
        &record,
        &mut rng,
    )
    .map_err(to_py_err)?;
    Ok(PyTrajectory { inner })
}

/// Run a deterministic gradient-ascent trajectory.
#[pyfunction]
#[pyo3(signature = (theta0, landscape, beta, steps, *, projections=None, keep_final=false))]
fn run_gd(
    theta0: Vec<f64>,
    landscape: &PyLandscape,
    beta: f64,
    steps: usize,
    projections: Option<Vec<usize>>,
    keep_final: bool,
) -> PyResult<PyTrajectory> {
    let cfg = GdConfig::new(beta).map_err(to_py_err)?;
    let record = RecordSpec {
        projections: projections.unwrap_or_default(),
        keep_final,
    };
    let mut rng = optimizer::trial_rng(0, 0);
    let inner = optimizer::run_trajectory(
        &theta0,
        &landscape.inner,
        &NoiseModel::NONE,
        &Method::Gd(cfg),
        steps,
        &record,
        &mut rng,
    )
    .map_err(to_py_err)?;
    Ok(PyTrajectory { inner })
}

/// Run the OU idealization on the given spectrum.
#[pyfunction]
#[pyo3(signature = (theta0, spectrum, sigma, alpha, population, sigma_r_fixed, steps, *,
                    seed=0, projections=None, keep_final=false, noise_free=false))]
#[allow(clippy::too_many_arguments)]
fn run_ou(
    theta0: Vec<f64>,
    spectrum: Vec<f64>,
    sigma: f64,
    alpha: f64,
    population: usize,
    sigma_r_fixed: f64,
    steps: usize,
    seed: u64,
    projections: Option<Vec<usize>>,
    keep_final: bool,
    noise_free: bool,
) -> PyResult<PyTrajectory> {
    let cfg = OuConfig {
        sigma,
        alpha,
        population,
        sigma_r_fixed,
        noise_free,
        seed,
    }
    .validated()
    .map_err(to_py_err)?;
    let landscape = eslab::Landscape::quadratic(spectrum);
    let record = RecordSpec {
        projections: projections.unwrap_or_default(),
        keep_final,
    };
    let mut rng = optimizer::trial_rng(seed, 0);
    let inner = optimizer::run_trajectory(
        &theta0,
        &landscape,
        &NoiseModel::NONE,
        &Method::Ou(cfg),
        steps,
        &record,
        &mut rng,
    )
    .map_err(to_py_err)?;
    Ok(PyTrajectory { inner })
}

/// A single ES update from `theta`; returns the new point and a diagnostics
/// dict (reward_mean, reward_std, update_norm, z_sq_sum, degenerate).
#[pyfunction]
#[pyo3(signature = (theta, landscape, sigma, population, *, alpha=None, sigma_xi=0.0, seed=0))]
#[allow(clippy::too_many_arguments)]
fn es_step<'py>(
    py: Python<'py>,
    theta: Vec<f64>,
    landscape: &PyLandscape,
    sigma: f64,
    population: usize,
    alpha: Option<f64>,
    sigma_xi: f64,
    seed: u64,
) -> PyResult<(Vec<f64>, Bound<'py, PyDict>)> {
    let cfg = EsConfig {
        sigma,
        alpha: alpha.unwrap_or(sigma / 2.0),
        population,
        zscore: ZscoreMode::Population,
        seed,
    }
    .validated()
    .map_err(to_py_err)?;
    let noise = NoiseModel::new(sigma_xi).map_err(to_py_err)?;
    let mut rng = optimizer::trial_rng(seed, 0);
    let (next, diag) =
        optimizer::es_step(&theta, &landscape.inner, &noise, &cfg, &mut rng).map_err(to_py_err)?;
    let dict = PyDict::new(py);
    dict.set_item("reward_mean", diag.reward_mean)?;
    dict.set_item("reward_std", diag.reward_std)?;
    dict.set_item("update_norm", diag.update_norm)?;
    dict.set_item("z_sq_sum", diag.z_sq_sum)?;
    dict.set_item("degenerate", diag.degenerate)?;
    Ok((next, dict))
}

#[pyfunction]
fn flat_drift(alpha: f64, steps: u64, dim: u64, population: u64) -> f64 {
    theory::flat_drift(alpha, steps, dim, population)
}

#[pyfunction]
fn flat_drift_slope(alpha: f64, dim: u64, population: u64) -> f64 {
    theory::flat_drift_slope(alpha, dim, population)
}

#[pyfunction]
fn step_variance(alpha: f64, population: u64) -> f64 {
    theory::step_variance(alpha, population)
}

#[pyfunction]
fn sigma_r_linear(sigma: f64, grad_norm: f64, sigma_xi: f64) -> PyResult<f64> {
    theory::sigma_r_linear(sigma, grad_norm, sigma_xi).map_err(to_py_err)
}

#[pyfunction]
fn sigma_r_quadratic(
    sigma: f64,
    grad_norm: f64,
    trace_curvature_sq: f64,
    sigma_xi: f64,
) -> PyResult<f64> {
    theory::sigma_r_quadratic(sigma, grad_norm, trace_curvature_sq, sigma_xi).map_err(to_py_err)
}

#[pyfunction]
fn signal_fraction(sigma: f64, grad_norm: f64, sigma_xi: f64) -> PyResult<f64> {
    theory::signal_fraction(sigma, grad_norm, sigma_xi).map_err(to_py_err)
}

#[pyfunction]
fn rho_linear(signal: f64, population: u64, dim: u64) -> PyResult<f64> {
    theory::rho_linear(signal, population, dim).map_err(to_py_err)
}

#[pyfunction]
fn rho_quadratic(
    v_eigen: Vec<f64>,
    spectrum: Vec<f64>,
    sigma: f64,
    population: u64,
    sigma_xi: f64,
) -> PyResult<f64> {
    theory::rho_quadratic(&v_eigen, &spectrum, sigma, population, sigma_xi).map_err(to_py_err)
}

#[pyfunction]
fn ou_contraction(alpha: f64, sigma: f64, sigma_r_fixed: f64, eigenvalue: f64) -> f64 {
    theory::ou_contraction(alpha, sigma, sigma_r_fixed, eigenvalue)
}

#[pyfunction]
fn ou_projected_mean(initial_projection: f64, contraction: f64, steps: u64) -> f64 {
    theory::ou_projected_mean(initial_projection, contraction, steps)
}

#[pyfunction]
fn ou_projected_variance(alpha: f64, population: u64, contraction: f64, steps: u64) -> f64 {
    theory::ou_projected_variance(alpha, population, contraction, steps)
}

#[pyfunction]
fn ou_asymptotic_variance(alpha: f64, population: u64, contraction: f64) -> PyResult<f64> {
    theory::ou_asymptotic_variance(alpha, population, contraction).map_err(to_py_err)
}

#[pyfunction]
fn convergence_timescale(contraction: f64) -> PyResult<f64> {
    theory::convergence_timescale(contraction).map_err(to_py_err)
}

/// Projected GD iterate; returns (value, stable).
#[pyfunction]
fn gd_projected(initial_projection: f64, beta: f64, eigenvalue: f64, steps: u64) -> (f64, bool) {
    let p = theory::gd_projected(initial_projection, beta, eigenvalue, steps);
    (p.value, p.stable)
}

/// Signal / diffusion split of the expected squared ES displacement;
/// returns (signal_sq, diffusion_sq, total_sq).
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn displacement_decomposition(
    theta0_eigen: Vec<f64>,
    spectrum: Vec<f64>,
    alpha: f64,
    sigma: f64,
    population: u64,
    sigma_r_fixed: f64,
    steps: u64,
) -> PyResult<(f64, f64, f64)> {
    let d = theory::displacement_decomposition(
        &theta0_eigen,
        &spectrum,
        alpha,
        sigma,
        population,
        sigma_r_fixed,
        steps,
    )
    .map_err(to_py_err)?;
    Ok((d.signal_sq, d.diffusion_sq, d.total_sq))
}

#[pyfunction]
fn es_gd_difference_sq(alpha: f64, steps: u64, dim: u64, rank: u64, population: u64) -> f64 {
    theory::es_gd_difference_sq(alpha, steps, dim, rank, population)
}

#[pyfunction]
fn expected_cosine_scale(rank: u64, dim: u64) -> PyResult<f64> {
    theory::expected_cosine_scale(rank, dim).map_err(to_py_err)
}

#[pyfunction]
fn effective_dimension(slope: f64, alpha: f64, population: u64) -> f64 {
    theory::effective_dimension(slope, alpha, population)
}

fn fit_to_dict<'py>(py: Python<'py>, fit: &analysis::DriftFit) -> PyResult<Bound<'py, PyDict>> {
    let dict = PyDict::new(py);
    dict.set_item("slope", fit.slope)?;
    dict.set_item("r_squared", fit.r_squared)?;
    dict.set_item("d_eff", fit.d_eff)?;
    dict.set_item("d_eff_ratio", fit.d_eff_ratio)?;
    Ok(dict)
}

/// No-intercept drift regression on a curve indexed by step.
#[pyfunction]
fn fit_drift<'py>(
    py: Python<'py>,
    drift_curve: Vec<f64>,
    alpha: f64,
    population: u64,
    dim: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let fit = analysis::fit_drift(&drift_curve, alpha, population, dim).map_err(to_py_err)?;
    fit_to_dict(py, &fit)
}

/// Effective dimension from an externally supplied slope.
#[pyfunction]
fn fit_from_slope<'py>(
    py: Python<'py>,
    slope: f64,
    alpha: f64,
    population: u64,
    dim: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let fit = analysis::DriftFit::from_slope(slope, alpha, population, dim);
    fit_to_dict(py, &fit)
}

/// On/off-manifold split of squared displacement over update samples.
#[pyfunction]
fn manifold_projection_stats(samples: Vec<Vec<f64>>, direction: Vec<f64>) -> PyResult<(f64, f64)> {
    let split = analysis::manifold_projection_stats(&samples, &direction).map_err(to_py_err)?;
    Ok((split.on_fraction, split.off_fraction))
}

/// Exact rewards along the line between two parameter vectors.
#[pyfunction]
fn interpolate_path<'py>(
    py: Python<'py>,
    theta_a: Vec<f64>,
    theta_b: Vec<f64>,
    landscape: &PyLandscape,
    points: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let result = analysis::interpolate_path(&theta_a, &theta_b, &landscape.inner, points)
        .map_err(to_py_err)?;
    let dict = PyDict::new(py);
    dict.set_item("coefficients", result.coefficients)?;
    dict.set_item("rewards", result.rewards)?;
    dict.set_item("barrier", result.barrier)?;
    Ok(dict)
}

/// Exact rewards at `base + m * delta/|delta|` for each magnitude.
#[pyfunction]
fn directional_probe<'py>(
    py: Python<'py>,
    theta_base: Vec<f64>,
    delta: Vec<f64>,
    landscape: &PyLandscape,
    magnitudes: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let result =
        analysis::directional_probe(&theta_base, &delta, &landscape.inner, &magnitudes, "delta")
            .map_err(to_py_err)?;
    let dict = PyDict::new(py);
    dict.set_item("magnitudes", result.magnitudes)?;
    dict.set_item("rewards", result.rewards)?;
    Ok(dict)
}

#[pyfunction]
fn random_unit_direction(dim: usize, seed: u64) -> Vec<f64> {
    analysis::random_unit_direction(dim, seed)
}

/// GD / ES / difference displacement hierarchy over an ES ensemble.
#[pyfunction]
#[pyo3(signature = (theta0, landscape, sigma, population, beta, steps, trials, *,
                    alpha=None, sigma_xi=0.0, seed=0))]
#[allow(clippy::too_many_arguments)]
fn hierarchy_measurement<'py>(
    py: Python<'py>,
    theta0: Vec<f64>,
    landscape: &PyLandscape,
    sigma: f64,
    population: usize,
    beta: f64,
    steps: usize,
    trials: usize,
    alpha: Option<f64>,
    sigma_xi: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let es = EsConfig {
        sigma,
        alpha: alpha.unwrap_or(sigma / 2.0),
        population,
        zscore: ZscoreMode::Population,
        seed,
    }
    .validated()
    .map_err(to_py_err)?;
    let gd = GdConfig::new(beta).map_err(to_py_err)?;
    let noise = NoiseModel::new(sigma_xi).map_err(to_py_err)?;
    let h = analysis::hierarchy_measurement(
        &theta0,
        &landscape.inner,
        &noise,
        &es,
        &gd,
        steps,
        trials,
        seed,
    )
    .map_err(to_py_err)?;
    let dict = PyDict::new(py);
    dict.set_item("gd_sq", h.gd_sq)?;
    dict.set_item("es_sq_mean", h.es_sq_mean)?;
    dict.set_item("diff_sq_mean", h.diff_sq_mean)?;
    dict.set_item("mean_cosine", h.mean_cosine())?;
    dict.set_item("es_sq_samples", h.es_sq_samples)?;
    dict.set_item("diff_sq_samples", h.diff_sq_samples)?;
    dict.set_item("cosine_samples", h.cosine_samples)?;
    dict.set_item("excluded_divergent", h.excluded_divergent)?;
    dict.set_item("trials_used", h.trials_used)?;
    Ok(dict)
}

/// Closed-form predictions for a scenario file, as a flat dict.
#[pyfunction]
fn predict_scenario<'py>(py: Python<'py>, path: &str) -> PyResult<Bound<'py, PyDict>> {
    let scenario = Scenario::from_path(path).map_err(to_py_err)?;
    let predictions = runner::predictions(&scenario).map_err(to_py_err)?;
    let dict = PyDict::new(py);
    for (k, v) in predictions {
        dict.set_item(k, json_to_py(py, &v)?)?;
    }
    Ok(dict)
}

/// Run a scenario's simulation in memory and return the summary dict.
#[pyfunction]
#[pyo3(signature = (path, *, seed=None))]
fn simulate_scenario<'py>(
    py: Python<'py>,
    path: &str,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let scenario = Scenario::from_path(path).map_err(to_py_err)?;
    let output = runner::simulate(
        &scenario,
        &RunOptions {
            seed,
            out_dir: None,
            write: false,
        },
    )
    .map_err(to_py_err)?;
    json_to_py(py, &output.summary)
}

/// Run a scenario's theory-vs-simulation validation; returns the report dict.
#[pyfunction]
#[pyo3(signature = (path, *, seed=None))]
fn validate_scenario<'py>(
    py: Python<'py>,
    path: &str,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let scenario = Scenario::from_path(path).map_err(to_py_err)?;
    let report = runner::validate(
        &scenario,
        &RunOptions {
            seed,
            out_dir: None,
            write: false,
        },
    )
    .map_err(to_py_err)?;
    json_to_py(py, &report.summary)
}

#[pymodule]
fn eslab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLandscape>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(run_es, m)?)?;
    m.add_function(wrap_pyfunction!(run_gd, m)?)?;
    m.add_function(wrap_pyfunction!(run_ou, m)?)?;
    m.add_function(wrap_pyfunction!(es_step, m)?)?;
    m.add_function(wrap_pyfunction!(flat_drift, m)?)?;
    m.add_function(wrap_pyfunction!(flat_drift_slope, m)?)?;
    m.add_function(wrap_pyfunction!(step_variance, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_r_linear, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_r_quadratic, m)?)?;
    m.add_function(wrap_pyfunction!(signal_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(rho_linear, m)?)?;
    m.add_function(wrap_pyfunction!(rho_quadratic, m)?)?;
    m.add_function(wrap_pyfunction!(ou_contraction, m)?)?;
    m.add_function(wrap_pyfunction!(ou_projected_mean, m)?)?;
    m.add_function(wrap_pyfunction!(ou_projected_variance, m)?)?;
    m.add_function(wrap_pyfunction!(ou_asymptotic_variance, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_timescale, m)?)?;
    m.add_function(wrap_pyfunction!(gd_projected, m)?)?;
    m.add_function(wrap_pyfunction!(displacement_decomposition, m)?)?;
    m.add_function(wrap_pyfunction!(es_gd_difference_sq, m)?)?;
    m.add_function(wrap_pyfunction!(expected_cosine_scale, m)?)?;
    m.add_function(wrap_pyfunction!(effective_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(fit_drift, m)?)?;
    m.add_function(wrap_pyfunction!(fit_from_slope, m)?)?;
    m.add_function(wrap_pyfunction!(manifold_projection_stats, m)?)?;
    m.add_function(wrap_pyfunction!(interpolate_path, m)?)?;
    m.add_function(wrap_pyfunction!(directional_probe, m)?)?;
    m.add_function(wrap_pyfunction!(random_unit_direction, m)?)?;
    m.add_function(wrap_pyfunction!(hierarchy_measurement, m)?)?;
    m.add_function(wrap_pyfunction!(predict_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(validate_scenario, m)?)?;
    Ok(())
}
