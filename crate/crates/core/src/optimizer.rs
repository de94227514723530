//! The three iterations under study: z-scored ES, gradient ascent, and the
//! OU idealization of ES on a quadratic landscape, plus the trajectory loop
//! that records drift and eigendirection projections.
//!
//! ES perturbations are generated and consumed streamingly in two passes over
//! a cloned generator state, so memory stays O(d) however large the
//! population: the first pass scores the perturbed rewards, the second
//! replays the same perturbation stream to accumulate the update.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::landscape::{Landscape, NoiseModel};
use crate::theory;

/// Any coordinate beyond this magnitude (or non-finite) marks a trajectory as
/// diverged; divergence is a studied regime, not an error.
pub const DIVERGENCE_THRESHOLD: f64 = 1e30;

/// Generator used for trials. Each trial owns one; nothing shares RNG state.
pub type TrialRng = ChaCha12Rng;

/// Per-trial generator: the master seed keys the cipher and the trial index
/// selects an independent stream, so trials never overlap and any trial can
/// be reproduced in isolation.
pub fn trial_rng(master_seed: u64, trial: u64) -> TrialRng {
    let mut rng = TrialRng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Denominator convention for the population z-score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZscoreMode {
    /// Divide by N; the z-scores then satisfy `sum Z_i^2 = N`.
    #[default]
    Population,
    /// Divide by N-1; the identity becomes `sum Z_i^2 = N - 1`.
    Unbiased,
}

/// Hyperparameters of the z-scored ES update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsConfig {
    /// Perturbation scale.
    pub sigma: f64,
    /// Step size; conventionally half the perturbation scale.
    pub alpha: f64,
    /// Perturbations per update.
    pub population: usize,
    #[serde(default)]
    pub zscore: ZscoreMode,
    #[serde(default)]
    pub seed: u64,
}

impl EsConfig {
    /// Standard configuration with `alpha = sigma / 2`.
    pub fn new(sigma: f64, population: usize) -> Result<Self> {
        EsConfig {
            sigma,
            alpha: sigma / 2.0,
            population,
            zscore: ZscoreMode::Population,
            seed: 0,
        }
        .validated()
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        self.alpha = alpha;
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.sigma <= 0.0 || self.sigma.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.alpha <= 0.0 || self.alpha.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.population < 2 {
            return Err(Error::InvalidConfig(format!(
                "population must be at least 2 for z-scoring, got {}",
                self.population
            )));
        }
        Ok(self)
    }
}

/// Gradient-ascent learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    pub beta: f64,
}

impl GdConfig {
    pub fn new(beta: f64) -> Result<Self> {
        if beta <= 0.0 || beta.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "beta must be positive, got {beta}"
            )));
        }
        Ok(GdConfig { beta })
    }
}

/// The OU idealization: linear contraction toward the optimum with a frozen
/// reward standard deviation, plus isotropic Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuConfig {
    pub sigma: f64,
    pub alpha: f64,
    pub population: usize,
    /// Frozen reward standard deviation defining the effective learning rate
    /// `alpha * sigma / sigma_r_fixed`.
    pub sigma_r_fixed: f64,
    /// Drop the noise term entirely (the infinite-population limit); the
    /// iteration then reduces to gradient ascent with the effective rate.
    #[serde(default)]
    pub noise_free: bool,
    #[serde(default)]
    pub seed: u64,
}

impl OuConfig {
    pub fn new(sigma: f64, alpha: f64, population: usize, sigma_r_fixed: f64) -> Result<Self> {
        let cfg = OuConfig {
            sigma,
            alpha,
            population,
            sigma_r_fixed,
            noise_free: false,
            seed: 0,
        };
        cfg.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.sigma_r_fixed <= 0.0 || self.sigma_r_fixed.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "sigma_r_fixed must be positive, got {}",
                self.sigma_r_fixed
            )));
        }
        if !(self.sigma > 0.0 && self.alpha > 0.0) || self.sigma.is_nan() || self.alpha.is_nan() {
            return Err(Error::InvalidConfig(
                "sigma and alpha must be positive".into(),
            ));
        }
        if self.population < 1 {
            return Err(Error::InvalidConfig("population must be positive".into()));
        }
        Ok(self)
    }

    /// Contraction factor along an eigendirection.
    pub fn contraction(&self, eigenvalue: f64) -> f64 {
        theory::ou_contraction(self.alpha, self.sigma, self.sigma_r_fixed, eigenvalue)
    }
}

/// Which iteration drives a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    Es(EsConfig),
    Gd(GdConfig),
    Ou(OuConfig),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Es(_) => "es",
            Method::Gd(_) => "gd",
            Method::Ou(_) => "ou",
        }
    }
}

/// Diagnostics of a single ES update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiag {
    /// Population mean of the observed rewards.
    pub reward_mean: f64,
    /// Population standard deviation of the observed rewards.
    pub reward_std: f64,
    /// Norm of the applied parameter update.
    pub update_norm: f64,
    /// Sum of squared z-scores; N (population mode) or N-1 (unbiased) for any
    /// non-degenerate step.
    pub z_sq_sum: f64,
    /// Set when all rewards were identical: the update was skipped rather
    /// than dividing by zero.
    pub degenerate: bool,
}

/// Applies z-scored ES updates in place, reusing scratch buffers across steps.
#[derive(Debug, Clone)]
pub struct EsStepper {
    cfg: EsConfig,
    perturbed: Vec<f64>,
    update: Vec<f64>,
    rewards: Vec<f64>,
}

impl EsStepper {
    pub fn new(cfg: EsConfig, dim: usize) -> Self {
        EsStepper {
            perturbed: vec![0.0; dim],
            update: vec![0.0; dim],
            rewards: vec![0.0; cfg.population],
            cfg,
        }
    }

    pub fn config(&self) -> &EsConfig {
        &self.cfg
    }

    /// One update: sample N perturbations, observe rewards, z-score, and move
    /// `theta` along the reward-weighted average perturbation.
    pub fn step<R: Rng + Clone>(
        &mut self,
        theta: &mut [f64],
        landscape: &Landscape,
        noise: &NoiseModel,
        rng: &mut R,
    ) -> Result<StepDiag> {
        check_dim(landscape.dim(), theta.len())?;
        let n = self.cfg.population;
        let sigma = self.cfg.sigma;

        // First pass scores each perturbed point; the replay generator
        // regenerates the identical perturbations in the second pass.
        let mut replay = rng.clone();
        for i in 0..n {
            for (p, t) in self.perturbed.iter_mut().zip(theta.iter()) {
                let e: f64 = rng.sample(StandardNormal);
                *p = t + sigma * e;
            }
            self.rewards[i] = landscape.observe_reward(noise, &self.perturbed, rng)?;
        }

        let mean = self.rewards.iter().sum::<f64>() / n as f64;
        let sq_dev = self.rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>();
        let denom = match self.cfg.zscore {
            ZscoreMode::Population => n as f64,
            ZscoreMode::Unbiased => (n - 1) as f64,
        };
        let std = (sq_dev / denom).sqrt();

        if std == 0.0 {
            // all rewards identical; skip the update instead of dividing by zero
            return Ok(StepDiag {
                reward_mean: mean,
                reward_std: 0.0,
                update_norm: 0.0,
                z_sq_sum: 0.0,
                degenerate: true,
            });
        }

        self.update.fill(0.0);
        let mut z_sq_sum = 0.0;
        for i in 0..n {
            let z = (self.rewards[i] - mean) / std;
            z_sq_sum += z * z;
            for u in self.update.iter_mut() {
                let e: f64 = replay.sample(StandardNormal);
                *u += z * e;
            }
            if noise.is_noisy() {
                let _: f64 = replay.sample(StandardNormal);
            }
        }

        let scale = self.cfg.alpha / n as f64;
        let mut update_sq = 0.0;
        for (t, u) in theta.iter_mut().zip(&self.update) {
            let delta = scale * u;
            update_sq += delta * delta;
            *t += delta;
        }

        let pop_std = (sq_dev / n as f64).sqrt();
        Ok(StepDiag {
            reward_mean: mean,
            reward_std: pop_std,
            update_norm: update_sq.sqrt(),
            z_sq_sum,
            degenerate: false,
        })
    }
}

/// Convenience wrapper returning a fresh vector; trajectories use
/// [`EsStepper`] to avoid reallocating.
pub fn es_step<R: Rng + Clone>(
    theta: &[f64],
    landscape: &Landscape,
    noise: &NoiseModel,
    cfg: &EsConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, StepDiag)> {
    let mut out = theta.to_vec();
    let mut stepper = EsStepper::new(cfg.clone(), theta.len());
    let diag = stepper.step(&mut out, landscape, noise, rng)?;
    Ok((out, diag))
}

/// One gradient-ascent update on the exact reward: `theta + beta * grad R`.
pub fn gd_step(theta: &[f64], landscape: &Landscape, cfg: &GdConfig) -> Result<Vec<f64>> {
    let mut out = theta.to_vec();
    let mut grad = vec![0.0; theta.len()];
    gd_step_in_place(&mut out, landscape, cfg, &mut grad)?;
    Ok(out)
}

fn gd_step_in_place(
    theta: &mut [f64],
    landscape: &Landscape,
    cfg: &GdConfig,
    grad: &mut [f64],
) -> Result<()> {
    landscape.gradient_into(theta, grad)?;
    for (t, g) in theta.iter_mut().zip(grad.iter()) {
        *t += cfg.beta * g;
    }
    Ok(())
}

/// One OU update in the eigenbasis: contract each coordinate by its
/// direction's factor and add isotropic noise of variance `alpha^2 / N`.
pub fn ou_step<R: Rng>(
    theta: &[f64],
    cfg: &OuConfig,
    spectrum: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_dim(spectrum.len(), theta.len())?;
    let noise_std = if cfg.noise_free {
        0.0
    } else {
        (cfg.alpha * cfg.alpha / cfg.population as f64).sqrt()
    };
    Ok(theta
        .iter()
        .zip(spectrum)
        .map(|(t, lambda)| {
            let mut next = cfg.contraction(*lambda) * t;
            if noise_std > 0.0 {
                next += noise_std * rng.sample::<f64, _>(StandardNormal);
            }
            next
        })
        .collect())
}

/// What a trajectory records beyond the squared drift.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RecordSpec {
    /// Eigendirection indices whose projections are recorded each step.
    #[serde(default)]
    pub projections: Vec<usize>,
    /// Keep the final parameter vector (for probes and interpolation).
    #[serde(default)]
    pub keep_final: bool,
}

impl RecordSpec {
    pub fn with_projections(projections: Vec<usize>) -> Self {
        RecordSpec {
            projections,
            keep_final: false,
        }
    }
}

/// Everything recorded along one optimization run. Sequences hold entries
/// for steps `0..=T`, truncated just before the first non-finite state when
/// the run diverges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    /// Squared distance from the initial point; entry 0 is exactly 0.
    pub drift_sq: Vec<f64>,
    /// One series per requested direction, aligned with `drift_sq`.
    pub projections: Vec<Vec<f64>>,
    /// Reward population mean per step; entry 0 is the exact reward at the
    /// initial point.
    pub reward_mean: Vec<f64>,
    /// Reward population standard deviation per step; 0 where no population
    /// exists (initial entry, GD, OU).
    pub reward_std: Vec<f64>,
    /// Steps requested.
    pub requested_steps: usize,
    /// Step at which a non-finite or oversized coordinate appeared, if any.
    pub diverged_at: Option<usize>,
    /// Updates skipped because the reward population had zero variance.
    pub degenerate_steps: usize,
    /// Directions whose contraction factor is analytically non-decaying
    /// (GD and OU runs on a known spectrum).
    pub unstable_directions: Vec<usize>,
    pub final_theta: Option<Vec<f64>>,
}

impl TrajectoryRecord {
    /// Steps actually completed (may be fewer than requested on divergence).
    pub fn completed_steps(&self) -> usize {
        self.drift_sq.len() - 1
    }
}

fn project_for(landscape: &Landscape, theta: &[f64], k: usize) -> f64 {
    match landscape {
        Landscape::Quadratic(q) => q.project(theta, k),
        _ => theta[k],
    }
}

fn drift_from(theta: &[f64], theta0: &[f64]) -> f64 {
    theta
        .iter()
        .zip(theta0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn state_is_finite(theta: &[f64]) -> bool {
    theta
        .iter()
        .all(|t| t.is_finite() && t.abs() <= DIVERGENCE_THRESHOLD)
}

/// Runs `steps` updates of the chosen method from `theta0`, recording drift,
/// requested projections, and reward statistics. Deterministic given the
/// generator state.
pub fn run_trajectory<R: Rng + Clone>(
    theta0: &[f64],
    landscape: &Landscape,
    noise: &NoiseModel,
    method: &Method,
    steps: usize,
    record: &RecordSpec,
    rng: &mut R,
) -> Result<TrajectoryRecord> {
    check_dim(landscape.dim(), theta0.len())?;
    for &k in &record.projections {
        if k >= theta0.len() {
            return Err(Error::InvalidConfig(format!(
                "recorded direction {k} out of range for dimension {}",
                theta0.len()
            )));
        }
    }

    let spectrum: Option<&[f64]> = match landscape {
        Landscape::Quadratic(q) => Some(q.eigenvalues()),
        _ => None,
    };
    let unstable_directions = match (method, spectrum) {
        (Method::Gd(cfg), Some(spec)) => spec
            .iter()
            .enumerate()
            .filter(|(_, l)| {
                let gamma = 1.0 - cfg.beta * **l;
                gamma != 1.0 && gamma.abs() >= 1.0
            })
            .map(|(k, _)| k)
            .collect(),
        (Method::Ou(cfg), Some(spec)) => spec
            .iter()
            .enumerate()
            .filter(|(_, l)| {
                let gamma = cfg.contraction(**l);
                gamma != 1.0 && gamma.abs() >= 1.0
            })
            .map(|(k, _)| k)
            .collect(),
        _ => Vec::new(),
    };

    if let Method::Ou(_) = method {
        if let Some(Landscape::Quadratic(q)) = Some(landscape) {
            if !matches!(q.basis(), crate::landscape::Basis::Canonical) {
                return Err(Error::InvalidConfig(
                    "OU trajectories run in the eigenbasis and require a canonical basis".into(),
                ));
            }
        }
    }

    let mut theta = theta0.to_vec();
    let mut record_out = TrajectoryRecord {
        drift_sq: Vec::with_capacity(steps + 1),
        projections: vec![Vec::with_capacity(steps + 1); record.projections.len()],
        reward_mean: Vec::with_capacity(steps + 1),
        reward_std: Vec::with_capacity(steps + 1),
        requested_steps: steps,
        diverged_at: None,
        degenerate_steps: 0,
        unstable_directions,
        final_theta: None,
    };

    let record_state =
        |out: &mut TrajectoryRecord, theta: &[f64], mean: f64, std: f64, spec: &RecordSpec| {
            out.drift_sq.push(drift_from(theta, theta0));
            for (series, &k) in out.projections.iter_mut().zip(&spec.projections) {
                series.push(project_for(landscape, theta, k));
            }
            out.reward_mean.push(mean);
            out.reward_std.push(std);
        };

    let initial_reward = landscape.reward(&theta)?;
    record_state(&mut record_out, &theta, initial_reward, 0.0, record);

    let mut es_stepper = match method {
        Method::Es(cfg) => Some(EsStepper::new(cfg.clone(), theta.len())),
        _ => None,
    };
    let mut grad_buf = match method {
        Method::Gd(_) => vec![0.0; theta.len()],
        _ => Vec::new(),
    };

    for t in 1..=steps {
        let (mean, std) = match method {
            Method::Es(_) => {
                let diag = es_stepper
                    .as_mut()
                    .expect("stepper present for es method")
                    .step(&mut theta, landscape, noise, rng)?;
                if diag.degenerate {
                    record_out.degenerate_steps += 1;
                }
                (diag.reward_mean, diag.reward_std)
            }
            Method::Gd(cfg) => {
                gd_step_in_place(&mut theta, landscape, cfg, &mut grad_buf)?;
                (landscape.reward(&theta)?, 0.0)
            }
            Method::Ou(cfg) => {
                let spec = spectrum.ok_or_else(|| {
                    Error::InvalidConfig("OU method requires a quadratic landscape".into())
                })?;
                theta = ou_step(&theta, cfg, spec, rng)?;
                (landscape.reward(&theta)?, 0.0)
            }
        };

        if !state_is_finite(&theta) {
            record_out.diverged_at = Some(t);
            break;
        }
        record_state(&mut record_out, &theta, mean, std, record);
    }

    if record.keep_final && record_out.diverged_at.is_none() {
        record_out.final_theta = Some(theta);
    }
    Ok(record_out)
}

/// Squared norm helper shared with the analysis layer.
pub fn displacement_sq(a: &[f64], b: &[f64]) -> f64 {
    drift_from(a, b)
}
