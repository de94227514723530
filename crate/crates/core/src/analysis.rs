//! Monte-Carlo estimators and weight-space geometry procedures: drift
//! regression and effective dimension, on/off-manifold projection statistics,
//! linear interpolation between solutions, directional probes, and the
//! displacement-hierarchy measurement.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::landscape::{dot, norm, norm_sq, Landscape, NoiseModel};
use crate::optimizer::{
    displacement_sq, run_trajectory, trial_rng, EsConfig, GdConfig, Method, RecordSpec,
    TrajectoryRecord,
};
use crate::theory;

/// Sums with pairwise recursion; reductions stay well conditioned even for
/// long curves and many trials.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

/// Result of the no-intercept drift regression `drift_sq ~ slope * t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftFit {
    pub slope: f64,
    /// Centered coefficient of determination; `None` when the curve carries
    /// no variance to explain.
    pub r_squared: Option<f64>,
    /// Random-walk dimension implied by the slope: `slope * N / alpha^2`.
    pub d_eff: f64,
    pub d_eff_ratio: f64,
}

impl DriftFit {
    /// Effective dimension from an externally supplied slope.
    pub fn from_slope(slope: f64, alpha: f64, population: u64, dim: u64) -> Self {
        let d_eff = theory::effective_dimension(slope, alpha, population);
        DriftFit {
            slope,
            r_squared: None,
            d_eff,
            d_eff_ratio: d_eff / dim as f64,
        }
    }
}

/// No-intercept least squares on a drift curve indexed by step. The t = 0
/// entry is identically zero under the model and is dropped from the fit.
pub fn fit_drift(drift_curve: &[f64], alpha: f64, population: u64, dim: u64) -> Result<DriftFit> {
    if drift_curve.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "drift curve needs at least 2 entries, got {}",
            drift_curve.len()
        )));
    }
    let points: Vec<(f64, f64)> = drift_curve
        .iter()
        .enumerate()
        .skip(1)
        .map(|(t, y)| (t as f64, *y))
        .collect();
    let sum_ty: f64 = points.iter().map(|(t, y)| t * y).sum();
    let sum_tt: f64 = points.iter().map(|(t, _)| t * t).sum();
    let slope = if sum_ty == 0.0 { 0.0 } else { sum_ty / sum_tt };

    let ys: Vec<f64> = points.iter().map(|(_, y)| *y).collect();
    let y_bar = mean(&ys);
    let ss_tot: f64 = ys.iter().map(|y| (y - y_bar).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 {
        None
    } else {
        let ss_res: f64 = points.iter().map(|(t, y)| (y - slope * t).powi(2)).sum();
        Some(1.0 - ss_res / ss_tot)
    };

    let d_eff = theory::effective_dimension(slope, alpha, population);
    Ok(DriftFit {
        slope,
        r_squared,
        d_eff,
        d_eff_ratio: d_eff / dim as f64,
    })
}

/// Pointwise ensemble statistics over trial records.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub trials: usize,
    pub mean_drift: Vec<f64>,
    pub stderr_drift: Vec<f64>,
    /// Per recorded direction: mean and (unbiased) variance curves, plus the
    /// standard errors of each.
    pub directions: Vec<DirectionStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionStats {
    pub mean: Vec<f64>,
    pub mean_stderr: Vec<f64>,
    pub variance: Vec<f64>,
    /// Gaussian-theory standard error of the variance estimate,
    /// `var * sqrt(2 / (trials - 1))`.
    pub variance_stderr: Vec<f64>,
}

/// Reduces trial records pointwise. All records must share the step count
/// and projection layout; the reduction is a pure fold in trial order, so the
/// result does not depend on how trials were scheduled.
pub fn ensemble_stats(records: &[TrajectoryRecord]) -> Result<EnsembleStats> {
    let first = records.first().ok_or(Error::EmptyEnsemble)?;
    let len = first.drift_sq.len();
    let n_dirs = first.projections.len();
    for (i, rec) in records.iter().enumerate() {
        if rec.drift_sq.len() != len || rec.projections.len() != n_dirs {
            return Err(Error::InconsistentRecords(format!(
                "record {i} has {} steps / {} directions, expected {} / {}",
                rec.drift_sq.len() - 1,
                rec.projections.len(),
                len - 1,
                n_dirs
            )));
        }
    }
    let trials = records.len();
    let tf = trials as f64;

    let mut mean_drift = Vec::with_capacity(len);
    let mut stderr_drift = Vec::with_capacity(len);
    let mut column = vec![0.0; trials];
    for t in 0..len {
        for (c, rec) in column.iter_mut().zip(records) {
            *c = rec.drift_sq[t];
        }
        let m = mean(&column);
        mean_drift.push(m);
        let var = if trials > 1 {
            column.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (tf - 1.0)
        } else {
            0.0
        };
        stderr_drift.push((var / tf).sqrt());
    }

    let mut directions = Vec::with_capacity(n_dirs);
    for k in 0..n_dirs {
        let mut dir = DirectionStats {
            mean: Vec::with_capacity(len),
            mean_stderr: Vec::with_capacity(len),
            variance: Vec::with_capacity(len),
            variance_stderr: Vec::with_capacity(len),
        };
        for t in 0..len {
            for (c, rec) in column.iter_mut().zip(records) {
                *c = rec.projections[k][t];
            }
            let m = mean(&column);
            let var = if trials > 1 {
                column.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (tf - 1.0)
            } else {
                0.0
            };
            dir.mean.push(m);
            dir.mean_stderr.push((var / tf).sqrt());
            dir.variance.push(var);
            dir.variance_stderr.push(if trials > 1 {
                var * (2.0 / (tf - 1.0)).sqrt()
            } else {
                0.0
            });
        }
        directions.push(dir);
    }

    Ok(EnsembleStats {
        trials,
        mean_drift,
        stderr_drift,
        directions,
    })
}

/// Share of squared displacement parallel to a direction, estimated over
/// update samples: `sum (vhat . u)^2 / sum |u|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldSplit {
    pub on_fraction: f64,
    pub off_fraction: f64,
}

pub fn manifold_projection_stats(samples: &[Vec<f64>], direction: &[f64]) -> Result<ManifoldSplit> {
    let dir_norm = norm(direction);
    if dir_norm == 0.0 {
        return Err(Error::ZeroDirection);
    }
    if samples.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut on_sq = 0.0;
    let mut total_sq = 0.0;
    for sample in samples {
        if sample.len() != direction.len() {
            return Err(Error::DimensionMismatch {
                expected: direction.len(),
                actual: sample.len(),
            });
        }
        let parallel = dot(sample, direction) / dir_norm;
        on_sq += parallel * parallel;
        total_sq += norm_sq(sample);
    }
    if total_sq == 0.0 {
        return Err(Error::DegenerateReward);
    }
    let on_fraction = on_sq / total_sq;
    Ok(ManifoldSplit {
        on_fraction,
        off_fraction: 1.0 - on_fraction,
    })
}

/// Exact rewards along the straight line between two parameter vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationResult {
    /// Mixing coefficients, evenly spaced over [0, 1] including endpoints.
    pub coefficients: Vec<f64>,
    pub rewards: Vec<f64>,
    /// Largest drop of the path reward below the worse endpoint, clamped
    /// at zero.
    pub barrier: f64,
}

/// Evaluates the noiseless reward at `k_points` evenly spaced mixtures of the
/// two endpoints. Interpolation uses exact rewards by construction: a noisy
/// evaluation would blur barrier detection.
pub fn interpolate_path(
    theta_a: &[f64],
    theta_b: &[f64],
    landscape: &Landscape,
    k_points: usize,
) -> Result<InterpolationResult> {
    if theta_a.len() != theta_b.len() {
        return Err(Error::DimensionMismatch {
            expected: theta_a.len(),
            actual: theta_b.len(),
        });
    }
    if k_points < 2 {
        return Err(Error::InvalidConfig(format!(
            "interpolation needs at least 2 grid points, got {k_points}"
        )));
    }
    let mut coefficients = Vec::with_capacity(k_points);
    let mut rewards = Vec::with_capacity(k_points);
    let mut blend = vec![0.0; theta_a.len()];
    for i in 0..k_points {
        let c = i as f64 / (k_points - 1) as f64;
        let reward = if i == 0 {
            landscape.reward(theta_a)?
        } else if i == k_points - 1 {
            landscape.reward(theta_b)?
        } else {
            for ((m, a), b) in blend.iter_mut().zip(theta_a).zip(theta_b) {
                *m = (1.0 - c) * a + c * b;
            }
            landscape.reward(&blend)?
        };
        coefficients.push(c);
        rewards.push(reward);
    }
    let endpoint_floor = rewards[0].min(rewards[k_points - 1]);
    let barrier = rewards
        .iter()
        .map(|r| endpoint_floor - r)
        .fold(0.0_f64, f64::max);
    Ok(InterpolationResult {
        coefficients,
        rewards,
        barrier,
    })
}

/// Rewards along a fixed direction at increasing magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub magnitudes: Vec<f64>,
    pub rewards: Vec<f64>,
    pub direction_label: String,
}

/// Evaluates the exact reward at `theta_base + m * delta / |delta|` for each
/// magnitude. At `m = |delta|` the scale factor is exactly 1, so the probe
/// reproduces the reward of `theta_base + delta` bitwise.
pub fn directional_probe(
    theta_base: &[f64],
    delta: &[f64],
    landscape: &Landscape,
    magnitudes: &[f64],
    label: impl Into<String>,
) -> Result<ProbeResult> {
    if theta_base.len() != delta.len() {
        return Err(Error::DimensionMismatch {
            expected: theta_base.len(),
            actual: delta.len(),
        });
    }
    let delta_norm = norm(delta);
    if delta_norm == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let mut rewards = Vec::with_capacity(magnitudes.len());
    let mut probe = vec![0.0; theta_base.len()];
    for &m in magnitudes {
        let scale = m / delta_norm;
        for ((p, b), d) in probe.iter_mut().zip(theta_base).zip(delta) {
            *p = b + scale * d;
        }
        rewards.push(landscape.reward(&probe)?);
    }
    Ok(ProbeResult {
        magnitudes: magnitudes.to_vec(),
        rewards,
        direction_label: label.into(),
    })
}

/// Uniformly random unit direction, for probe controls.
pub fn random_unit_direction(dim: usize, seed: u64) -> Vec<f64> {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut rng = trial_rng(seed, 0);
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 0.0 {
            for x in v.iter_mut() {
                *x /= n;
            }
            return v;
        }
    }
}

/// Measured displacement hierarchy between one deterministic GD run and an
/// ES ensemble started from the same point.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyMeasurement {
    /// `|theta_GD - theta_0|^2`.
    pub gd_sq: f64,
    /// Trial mean of `|theta_ES - theta_0|^2`.
    pub es_sq_mean: f64,
    /// Trial mean of `|theta_ES - theta_GD|^2`.
    pub diff_sq_mean: f64,
    /// Per-trial `|theta_ES - theta_0|^2`.
    pub es_sq_samples: Vec<f64>,
    /// Per-trial `|theta_ES - theta_GD|^2`.
    pub diff_sq_samples: Vec<f64>,
    /// Per-trial cosine similarity between the two displacement vectors;
    /// `None` when the GD displacement is zero (flat landscape), where the
    /// angle is undefined.
    pub cosine_samples: Option<Vec<f64>>,
    /// Divergent ES trials excluded from the means.
    pub excluded_divergent: usize,
    pub trials_used: usize,
}

impl HierarchyMeasurement {
    pub fn mean_cosine(&self) -> Option<f64> {
        self.cosine_samples.as_ref().map(|c| mean(c))
    }
}

/// Runs GD once (deterministic) and `trials` independent ES runs for `steps`
/// updates each, then compares the resulting displacements.
#[allow(clippy::too_many_arguments)]
pub fn hierarchy_measurement(
    theta0: &[f64],
    landscape: &Landscape,
    noise: &NoiseModel,
    es_cfg: &EsConfig,
    gd_cfg: &GdConfig,
    steps: usize,
    trials: usize,
    master_seed: u64,
) -> Result<HierarchyMeasurement> {
    let record = RecordSpec {
        projections: vec![],
        keep_final: true,
    };
    let mut gd_rng = trial_rng(master_seed, 0);
    let gd_record = run_trajectory(
        theta0,
        landscape,
        &NoiseModel::NONE,
        &Method::Gd(gd_cfg.clone()),
        steps,
        &record,
        &mut gd_rng,
    )?;
    let theta_gd = gd_record
        .final_theta
        .ok_or_else(|| Error::InvalidConfig("GD trajectory diverged".into()))?;
    let gd_sq = displacement_sq(&theta_gd, theta0);
    let gd_disp: Vec<f64> = theta_gd.iter().zip(theta0).map(|(a, b)| a - b).collect();
    let gd_disp_norm = norm(&gd_disp);

    let es_finals: Vec<Option<Vec<f64>>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(master_seed, trial as u64 + 1);
            run_trajectory(
                theta0,
                landscape,
                noise,
                &Method::Es(es_cfg.clone()),
                steps,
                &record,
                &mut rng,
            )
            .map(|rec| rec.final_theta)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut es_sq = Vec::new();
    let mut diff_sq = Vec::new();
    let mut cosines = Vec::new();
    let mut excluded = 0;
    for final_theta in es_finals.iter() {
        let Some(theta_es) = final_theta else {
            excluded += 1;
            continue;
        };
        es_sq.push(displacement_sq(theta_es, theta0));
        diff_sq.push(displacement_sq(theta_es, &theta_gd));
        if gd_disp_norm > 0.0 {
            let es_disp: Vec<f64> = theta_es.iter().zip(theta0).map(|(a, b)| a - b).collect();
            let es_norm = norm(&es_disp);
            if es_norm > 0.0 {
                cosines.push(dot(&es_disp, &gd_disp) / (es_norm * gd_disp_norm));
            }
        }
    }
    if es_sq.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    Ok(HierarchyMeasurement {
        gd_sq,
        es_sq_mean: mean(&es_sq),
        diff_sq_mean: mean(&diff_sq),
        trials_used: es_sq.len(),
        cosine_samples: if gd_disp_norm > 0.0 {
            Some(cosines)
        } else {
            None
        },
        excluded_divergent: excluded,
        es_sq_samples: es_sq,
        diff_sq_samples: diff_sq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::Landscape;
    use crate::optimizer::{run_trajectory, trial_rng, EsConfig, Method, RecordSpec};
    use proptest::prelude::*;

    #[test]
    fn fit_exact_line_recovers_slope() {
        let c = 3.25;
        let curve: Vec<f64> = (0..400).map(|t| c * t as f64).collect();
        let fit = fit_drift(&curve, 0.05, 20, 100).unwrap();
        assert!((fit.slope - c).abs() <= 1e-12 * c);
        assert!((fit.r_squared.unwrap() - 1.0).abs() <= 1e-12);
        let expect_deff = c * 20.0 / (0.05 * 0.05);
        assert!((fit.d_eff - expect_deff).abs() <= 1e-9 * expect_deff);
    }

    #[test]
    fn fit_stored_full_scale_slope_reproduces_reference_ratio() {
        let fit = DriftFit::from_slope(72.74, 7.5e-4, 30, 4_022_468_096);
        assert!(
            (fit.d_eff_ratio - 0.964).abs() < 0.001,
            "{}",
            fit.d_eff_ratio
        );
    }

    #[test]
    fn fit_zero_curve_flags_undefined_r_squared() {
        let fit = fit_drift(&[0.0; 10], 0.1, 10, 50).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert!(fit.r_squared.is_none());
        assert!(fit_drift(&[0.0], 0.1, 10, 50).is_err());
    }

    #[test]
    fn ensemble_single_trial_is_identity_with_zero_stderr() {
        let landscape = Landscape::flat(0.0, 4);
        let noise = NoiseModel::new(1.0).unwrap();
        let cfg = Method::Es(EsConfig::new(0.1, 5).unwrap());
        let mut rng = trial_rng(3, 0);
        let rec = run_trajectory(
            &[0.0; 4],
            &landscape,
            &noise,
            &cfg,
            20,
            &RecordSpec::with_projections(vec![0]),
            &mut rng,
        )
        .unwrap();
        let stats = ensemble_stats(std::slice::from_ref(&rec)).unwrap();
        assert_eq!(stats.mean_drift, rec.drift_sq);
        assert!(stats.stderr_drift.iter().all(|s| *s == 0.0));
        assert!(ensemble_stats(&[]).is_err());
    }

    #[test]
    fn manifold_stats_parallel_samples() {
        let v = vec![2.0, 0.0, 0.0];
        let samples = vec![vec![3.0, 0.0, 0.0], vec![-1.5, 0.0, 0.0]];
        let split = manifold_projection_stats(&samples, &v).unwrap();
        assert!((split.on_fraction - 1.0).abs() < 1e-15);
        assert!(manifold_projection_stats(&samples, &[0.0; 3]).is_err());
    }

    #[test]
    fn manifold_stats_isotropic_gaussian() {
        use rand::Rng;
        use rand_distr::StandardNormal;
        let dim = 100;
        let mut rng = trial_rng(17, 0);
        let samples: Vec<Vec<f64>> = (0..20_000)
            .map(|_| {
                (0..dim)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let mut direction = vec![0.0; dim];
        direction[3] = 1.0;
        let split = manifold_projection_stats(&samples, &direction).unwrap();
        let expect = 1.0 / dim as f64;
        // on-fraction of isotropic samples concentrates near 1/d
        let stderr = expect * (2.0_f64 / 20_000.0).sqrt() * 1.5;
        assert!(
            (split.on_fraction - expect).abs() < 3.0 * stderr,
            "{}",
            split.on_fraction
        );
        assert!((split.on_fraction + split.off_fraction - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_identical_endpoints() {
        let landscape = Landscape::quadratic(vec![1.0, 2.0]);
        let theta = vec![1.0, -1.0];
        let result = interpolate_path(&theta, &theta, &landscape, 5).unwrap();
        assert_eq!(result.barrier, 0.0);
        assert!(result.rewards.iter().all(|r| *r == result.rewards[0]));
    }

    #[test]
    fn interpolation_endpoints_exact() {
        let landscape = Landscape::quadratic(vec![0.5, 3.0, 0.0]);
        let a = vec![1.0, 0.25, -2.0];
        let b = vec![-0.5, 1.5, 4.0];
        let result = interpolate_path(&a, &b, &landscape, 9).unwrap();
        assert_eq!(
            result.rewards[0].to_bits(),
            landscape.reward(&a).unwrap().to_bits()
        );
        assert_eq!(
            result.rewards[8].to_bits(),
            landscape.reward(&b).unwrap().to_bits()
        );
        assert_eq!(result.coefficients[0], 0.0);
        assert_eq!(result.coefficients[8], 1.0);
    }

    #[test]
    fn probe_magnitude_identities() {
        let landscape = Landscape::quadratic(vec![2.0, 0.5, 0.0, 1.0]);
        let base = vec![0.5, -1.0, 2.0, 0.0];
        let delta = vec![1.0, 0.5, -0.25, 2.0];
        let trained: Vec<f64> = base.iter().zip(&delta).map(|(b, d)| b + d).collect();
        let delta_norm = norm(&delta);
        let probe = directional_probe(&base, &delta, &landscape, &[0.0, delta_norm], "es").unwrap();
        assert_eq!(
            probe.rewards[0].to_bits(),
            landscape.reward(&base).unwrap().to_bits()
        );
        assert_eq!(
            probe.rewards[1].to_bits(),
            landscape.reward(&trained).unwrap().to_bits()
        );
        assert!(directional_probe(&base, &[0.0; 4], &landscape, &[1.0], "zero").is_err());
    }

    #[test]
    fn hierarchy_flat_landscape_has_undefined_cosine() {
        let landscape = Landscape::flat(0.0, 30);
        let noise = NoiseModel::new(1.0).unwrap();
        let es = EsConfig::new(0.02, 10).unwrap();
        let gd = GdConfig::new(0.1).unwrap();
        let theta0 = vec![0.0; 30];
        let h = hierarchy_measurement(&theta0, &landscape, &noise, &es, &gd, 100, 8, 5).unwrap();
        assert_eq!(h.gd_sq, 0.0);
        assert!(h.cosine_samples.is_none());
        let expect = theory::flat_drift(es.alpha, 100, 30, 10);
        // 8 trials: loose band, just sanity
        assert!(
            (h.es_sq_mean - expect).abs() < 0.5 * expect,
            "{} vs {expect}",
            h.es_sq_mean
        );
    }

    proptest! {
        #[test]
        fn barrier_invariant_under_endpoint_swap(
            a in prop::collection::vec(-3.0..3.0f64, 4),
            b in prop::collection::vec(-3.0..3.0f64, 4),
            lambda in prop::collection::vec(-1.0..2.0f64, 4),
        ) {
            let landscape = Landscape::quadratic(lambda);
            let fwd = interpolate_path(&a, &b, &landscape, 7).unwrap();
            let rev = interpolate_path(&b, &a, &landscape, 7).unwrap();
            prop_assert!((fwd.barrier - rev.barrier).abs() <= 1e-12 * (1.0 + fwd.barrier.abs()));
        }

        #[test]
        fn manifold_fractions_sum_to_one(
            samples in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 6), 1..40),
            direction in prop::collection::vec(-2.0..2.0f64, 6),
        ) {
            prop_assume!(norm(&direction) > 1e-6);
            prop_assume!(samples.iter().any(|s| norm_sq(s) > 1e-12));
            let split = manifold_projection_stats(&samples, &direction).unwrap();
            prop_assert!((split.on_fraction + split.off_fraction - 1.0).abs() < 1e-12);
            prop_assert!(split.on_fraction >= 0.0 && split.on_fraction <= 1.0 + 1e-12);
        }

        #[test]
        fn fit_recovers_arbitrary_exact_lines(slope in 1e-6..1e3f64, len in 3usize..200) {
            let curve: Vec<f64> = (0..len).map(|t| slope * t as f64).collect();
            let fit = fit_drift(&curve, 0.1, 10, 100).unwrap();
            prop_assert!((fit.slope - slope).abs() <= 1e-10 * slope);
            prop_assert!((fit.r_squared.unwrap() - 1.0).abs() <= 1e-10);
        }
    }
}
