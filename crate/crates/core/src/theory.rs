//! Closed-form predictors for the ES / GD / OU dynamics.
//!
//! Every function here is a pure map from scalars (or a spectrum) to a
//! number, so each one doubles as the reference statement of the formula it
//! implements. The Monte-Carlo machinery in [`crate::analysis`] checks these
//! against simulation; nothing in this module touches an RNG.
//!
//! The single-step moment formulas treat the z-score as if it were computed
//! with the exact population statistics of the reward distribution. The
//! simulator z-scores with sample statistics over a finite population, which
//! introduces relative corrections of order 1/N; see the notes on
//! [`es_step_moments`].

use crate::error::{Error, Result};
use crate::landscape::{norm, norm_sq};

/// Branch tolerance for treating a contraction factor as exactly on the unit
/// circle: the geometric-series variance formula is numerically unstable when
/// `contraction^2` is this close to 1.
pub const UNIT_CONTRACTION_TOL: f64 = 1e-12;

/// Expected squared drift of a pure random walk after `steps` updates:
/// `alpha^2 * steps * dim / population`.
pub fn flat_drift(alpha: f64, steps: u64, dim: u64, population: u64) -> f64 {
    alpha * alpha * steps as f64 * dim as f64 / population as f64
}

/// Per-step slope of the flat-landscape drift: `alpha^2 * dim / population`.
pub fn flat_drift_slope(alpha: f64, dim: u64, population: u64) -> f64 {
    alpha * alpha * dim as f64 / population as f64
}

/// Per-coordinate variance of a single flat-landscape ES update:
/// `alpha^2 / population`.
pub fn step_variance(alpha: f64, population: u64) -> f64 {
    alpha * alpha / population as f64
}

/// Reward standard deviation over perturbations of a linear landscape:
/// `sqrt(sigma^2 |v|^2 + sigma_xi^2)`.
pub fn sigma_r_linear(sigma: f64, grad_norm: f64, sigma_xi: f64) -> Result<f64> {
    sigma_r_quadratic(sigma, grad_norm, 0.0, sigma_xi)
}

/// Reward standard deviation over perturbations of a quadratic landscape:
/// `sqrt(sigma^2 |v|^2 + sigma^4/2 * tr(Q^2) + sigma_xi^2)`, where `v` is the
/// negative gradient at the current point and `tr(Q^2)` the sum of squared
/// eigenvalues.
pub fn sigma_r_quadratic(
    sigma: f64,
    grad_norm: f64,
    trace_curvature_sq: f64,
    sigma_xi: f64,
) -> Result<f64> {
    let var = sigma * sigma * grad_norm * grad_norm
        + 0.5 * sigma.powi(4) * trace_curvature_sq
        + sigma_xi * sigma_xi;
    if var <= 0.0 {
        return Err(Error::DegenerateReward);
    }
    Ok(var.sqrt())
}

/// Share of reward variance carried by the gradient rather than observation
/// noise: `sigma^2 |v|^2 / sigma_R^2`.
pub fn signal_fraction(sigma: f64, grad_norm: f64, sigma_xi: f64) -> Result<f64> {
    let sr = sigma_r_linear(sigma, grad_norm, sigma_xi)?;
    Ok((sigma * grad_norm / sr).powi(2))
}

/// On-manifold fraction of the expected squared single-step displacement on a
/// linear landscape: `(1 + (N+1)s) / (d + (N+1)s)`.
pub fn rho_linear(signal: f64, population: u64, dim: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&signal) {
        return Err(Error::InvalidConfig(format!(
            "signal fraction must lie in [0, 1], got {signal}"
        )));
    }
    let boost = (population as f64 + 1.0) * signal;
    Ok((1.0 + boost) / (dim as f64 + boost))
}

/// On-manifold fraction on a quadratic landscape. `v` is the negative
/// gradient at the current point, expressed in the eigenbasis so that
/// `v^T Q^2 v` reduces to a weighted sum over the spectrum.
pub fn rho_quadratic(
    v_eigen: &[f64],
    spectrum: &[f64],
    sigma: f64,
    population: u64,
    sigma_xi: f64,
) -> Result<f64> {
    let vn2 = norm_sq(v_eigen);
    if vn2 == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let dim = spectrum.len() as f64;
    let trace_q2 = spectrum.iter().map(|l| l * l).sum::<f64>();
    let vhat_q2_vhat = v_eigen
        .iter()
        .zip(spectrum)
        .map(|(v, l)| v * v * l * l)
        .sum::<f64>()
        / vn2;
    let sr2 = sigma * sigma * vn2 + 0.5 * sigma.powi(4) * trace_q2 + sigma_xi * sigma_xi;
    let shared = (population as f64 + 1.0) * sigma * sigma * vn2;
    let numer = shared + 2.0 * sigma.powi(4) * vhat_q2_vhat + sr2;
    let denom = shared + 2.0 * sigma.powi(4) * trace_q2 + dim * sr2;
    Ok(numer / denom)
}

/// Which landscape a single-step moment prediction refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentsKind {
    Flat,
    Linear,
    Quadratic,
}

/// Analytic mean and structured covariance of one ES update.
///
/// The covariance is `isotropic_coeff * I + rank1_coeff * v v^T
/// + spectrum_coeff * Q^2`; storing the three coefficients keeps it O(d).
#[derive(Debug, Clone, PartialEq)]
pub struct StepMoments {
    pub kind: MomentsKind,
    pub mean: Vec<f64>,
    pub isotropic_coeff: f64,
    pub rank1_direction: Vec<f64>,
    pub rank1_coeff: f64,
    pub spectrum_coeff: f64,
    pub sigma_r: f64,
    /// Set when the reward population carries no variance at all (flat
    /// landscape, no observation noise): the update is identically zero.
    pub degenerate: bool,
}

impl StepMoments {
    /// Materializes the covariance as a dense matrix; intended for small
    /// dimensions (tests, diagnostics). `spectrum` must be given in the same
    /// basis as `rank1_direction`; pass an empty slice for flat/linear kinds.
    pub fn dense_covariance(&self, spectrum: &[f64]) -> Vec<Vec<f64>> {
        let d = self.mean.len();
        let mut cov = vec![vec![0.0; d]; d];
        for (i, row) in cov.iter_mut().enumerate() {
            row[i] += self.isotropic_coeff;
            if self.spectrum_coeff != 0.0 {
                row[i] += self.spectrum_coeff * spectrum[i] * spectrum[i];
            }
            for (j, entry) in row.iter_mut().enumerate() {
                *entry += self.rank1_coeff * self.rank1_direction[i] * self.rank1_direction[j];
            }
        }
        cov
    }
}

/// Single-step ES update moments on a flat, linear, or quadratic landscape.
///
/// For the quadratic kind, `v` must be the negative gradient `Q theta` at the
/// current point and `spectrum` the eigenvalues, both in the eigenbasis.
///
/// These are the population-statistics idealizations: at finite population N
/// the sample z-score shrinks the realized mean by the expected sample
/// standard deviation of N standardized rewards (about 1 - 3/(4N) for
/// Gaussian reward populations) and shifts the rank-1 covariance coefficient
/// at the same 1/N order.
pub fn es_step_moments(
    kind: MomentsKind,
    v: &[f64],
    spectrum: &[f64],
    sigma: f64,
    alpha: f64,
    population: u64,
    sigma_xi: f64,
) -> Result<StepMoments> {
    let n = population as f64;
    let dim = match kind {
        MomentsKind::Quadratic => spectrum.len(),
        _ => v.len(),
    };
    let iso = alpha * alpha / n;
    match kind {
        MomentsKind::Flat => {
            if sigma_xi == 0.0 {
                return Ok(StepMoments {
                    kind,
                    mean: vec![0.0; dim],
                    isotropic_coeff: 0.0,
                    rank1_direction: vec![0.0; dim],
                    rank1_coeff: 0.0,
                    spectrum_coeff: 0.0,
                    sigma_r: 0.0,
                    degenerate: true,
                });
            }
            Ok(StepMoments {
                kind,
                mean: vec![0.0; dim],
                isotropic_coeff: iso,
                rank1_direction: vec![0.0; dim],
                rank1_coeff: 0.0,
                spectrum_coeff: 0.0,
                sigma_r: sigma_xi,
                degenerate: false,
            })
        }
        MomentsKind::Linear => {
            let sr = sigma_r_linear(sigma, norm(v), sigma_xi)?;
            let mean = v.iter().map(|vi| -alpha * sigma * vi / sr).collect();
            Ok(StepMoments {
                kind,
                mean,
                isotropic_coeff: iso,
                rank1_direction: v.to_vec(),
                rank1_coeff: alpha * alpha * sigma * sigma / (n * sr * sr),
                spectrum_coeff: 0.0,
                sigma_r: sr,
                degenerate: false,
            })
        }
        MomentsKind::Quadratic => {
            let trace_q2 = spectrum.iter().map(|l| l * l).sum::<f64>();
            let sr = sigma_r_quadratic(sigma, norm(v), trace_q2, sigma_xi)?;
            let mean = v.iter().map(|vi| -alpha * sigma * vi / sr).collect();
            Ok(StepMoments {
                kind,
                mean,
                isotropic_coeff: iso,
                rank1_direction: v.to_vec(),
                rank1_coeff: alpha * alpha * sigma * sigma / (n * sr * sr),
                spectrum_coeff: 2.0 * alpha * alpha * sigma.powi(4) / (n * sr * sr),
                sigma_r: sr,
                degenerate: false,
            })
        }
    }
}

/// Contraction factor of the OU idealization along an eigendirection:
/// `1 - (alpha sigma / sigma_R) * lambda`.
pub fn ou_contraction(alpha: f64, sigma: f64, sigma_r_fixed: f64, eigenvalue: f64) -> f64 {
    1.0 - alpha * sigma / sigma_r_fixed * eigenvalue
}

/// `E[u_k . theta_t] = contraction^t * (u_k . theta_0)`.
pub fn ou_projected_mean(initial_projection: f64, contraction: f64, steps: u64) -> f64 {
    contraction.powi(steps as i32) * initial_projection
}

/// `Var[u_k . theta_t]`: geometric series in `contraction^2`, degenerating to
/// linear growth `alpha^2 t / N` on the unit circle.
pub fn ou_projected_variance(alpha: f64, population: u64, contraction: f64, steps: u64) -> f64 {
    let base = alpha * alpha / population as f64;
    let g2 = contraction * contraction;
    if (g2 - 1.0).abs() < UNIT_CONTRACTION_TOL {
        base * steps as f64
    } else {
        base * (1.0 - g2.powi(steps as i32)) / (1.0 - g2)
    }
}

/// Long-run variance `alpha^2 / (N (1 - contraction^2))`; only defined for
/// contracting directions.
pub fn ou_asymptotic_variance(alpha: f64, population: u64, contraction: f64) -> Result<f64> {
    if contraction.abs() >= 1.0 {
        return Err(Error::NonConvergent(contraction.abs()));
    }
    Ok(alpha * alpha / (population as f64 * (1.0 - contraction * contraction)))
}

/// Steps until the variance reaches half its asymptote:
/// `-log 2 / log(contraction^2)`.
pub fn convergence_timescale(contraction: f64) -> Result<f64> {
    if contraction.abs() >= 1.0 {
        return Err(Error::NonConvergent(contraction.abs()));
    }
    let g2 = contraction * contraction;
    if g2 == 0.0 {
        return Ok(0.0);
    }
    Ok(-std::f64::consts::LN_2 / g2.ln())
}

/// Deterministic projected GD iterate along one eigendirection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdProjection {
    pub value: f64,
    pub contraction: f64,
    /// True iff `0 < lambda < 2 / beta`.
    pub stable: bool,
}

/// `(1 - beta lambda)^t * (u_k . theta_0)` with the stability classification.
pub fn gd_projected(
    initial_projection: f64,
    beta: f64,
    eigenvalue: f64,
    steps: u64,
) -> GdProjection {
    let contraction = 1.0 - beta * eigenvalue;
    GdProjection {
        value: contraction.powi(steps as i32) * initial_projection,
        contraction,
        stable: eigenvalue > 0.0 && eigenvalue < 2.0 / beta,
    }
}

/// How an eigendirection behaves under a linear iteration with the given
/// contraction factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityClass {
    /// |contraction| < 1: converges.
    Contracting,
    /// contraction = +1: frozen mean; a random walk if noise is present.
    Diffusive,
    /// |contraction| >= 1 otherwise: diverges or oscillates without decay.
    Divergent,
}

pub fn stability_class(contraction: f64) -> StabilityClass {
    if contraction.abs() < 1.0 {
        StabilityClass::Contracting
    } else if contraction == 1.0 {
        StabilityClass::Diffusive
    } else {
        StabilityClass::Divergent
    }
}

/// Expected split of the squared ES displacement after `steps` updates into
/// an on-manifold signal term and a diffusion term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacementDecomposition {
    pub signal_sq: f64,
    pub diffusion_sq: f64,
    pub total_sq: f64,
}

/// Per-direction OU displacement moments summed over the spectrum:
/// signal `[1 - gamma^T]^2 (u_k . theta_0)^2` plus diffusion given by the
/// projected variance. Flat directions contribute `alpha^2 T / N` each.
pub fn displacement_decomposition(
    theta0_eigen: &[f64],
    spectrum: &[f64],
    alpha: f64,
    sigma: f64,
    population: u64,
    sigma_r_fixed: f64,
    steps: u64,
) -> Result<DisplacementDecomposition> {
    if theta0_eigen.len() != spectrum.len() {
        return Err(Error::DimensionMismatch {
            expected: spectrum.len(),
            actual: theta0_eigen.len(),
        });
    }
    let mut signal_sq = 0.0;
    let mut diffusion_sq = 0.0;
    for (proj, lambda) in theta0_eigen.iter().zip(spectrum) {
        let gamma = ou_contraction(alpha, sigma, sigma_r_fixed, *lambda);
        let moved = 1.0 - gamma.powi(steps as i32);
        signal_sq += moved * moved * proj * proj;
        diffusion_sq += ou_projected_variance(alpha, population, gamma, steps);
    }
    Ok(DisplacementDecomposition {
        signal_sq,
        diffusion_sq,
        total_sq: signal_sq + diffusion_sq,
    })
}

/// Dominant off-manifold term of `E|theta_ES - theta_GD|^2` once both
/// optimizers have converged on the active directions:
/// `alpha^2 T (d - r) / N`.
pub fn es_gd_difference_sq(alpha: f64, steps: u64, dim: u64, rank: u64, population: u64) -> f64 {
    alpha * alpha * steps as f64 * (dim - rank) as f64 / population as f64
}

/// Characteristic scale `sqrt(r / d)` of the cosine similarity between the ES
/// and GD displacement vectors. This is an order-of-magnitude scale, not an
/// exact expectation; band checks should compare against a multiple of it.
pub fn expected_cosine_scale(rank: u64, dim: u64) -> Result<f64> {
    if rank < 1 || rank > dim {
        return Err(Error::InvalidConfig(format!(
            "rank must satisfy 1 <= rank <= dim, got rank {rank}, dim {dim}"
        )));
    }
    Ok((rank as f64 / dim as f64).sqrt())
}

/// The three pairwise squared distances of the solution geometry, plus the
/// cosine scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HierarchyPrediction {
    /// Analytic `|theta_GD - theta_0|^2` at the given horizon.
    pub gd_sq_norm: f64,
    /// Expected `|theta_ES - theta_0|^2` (signal + diffusion).
    pub es_sq_norm: f64,
    /// Off-manifold dominant `E|theta_ES - theta_GD|^2`.
    pub es_gd_diff_sq_norm: f64,
    pub cosine_scale: f64,
}

/// Assembles the displacement hierarchy for a rank-r spectrum.
#[allow(clippy::too_many_arguments)]
pub fn hierarchy_prediction(
    theta0_eigen: &[f64],
    spectrum: &[f64],
    alpha: f64,
    sigma: f64,
    population: u64,
    sigma_r_fixed: f64,
    beta: f64,
    steps: u64,
) -> Result<HierarchyPrediction> {
    let gd_sq_norm = theta0_eigen
        .iter()
        .zip(spectrum)
        .map(|(proj, lambda)| {
            let moved = 1.0 - (1.0 - beta * lambda).powi(steps as i32);
            moved * moved * proj * proj
        })
        .sum();
    let decomp = displacement_decomposition(
        theta0_eigen,
        spectrum,
        alpha,
        sigma,
        population,
        sigma_r_fixed,
        steps,
    )?;
    let dim = spectrum.len() as u64;
    let rank = spectrum.iter().filter(|l| **l != 0.0).count() as u64;
    Ok(HierarchyPrediction {
        gd_sq_norm,
        es_sq_norm: decomp.total_sq,
        es_gd_diff_sq_norm: es_gd_difference_sq(alpha, steps, dim, rank, population),
        cosine_scale: expected_cosine_scale(rank.max(1), dim)?,
    })
}

/// Effective dimension implied by a fitted drift slope: `slope * N / alpha^2`.
pub fn effective_dimension(slope: f64, alpha: f64, population: u64) -> f64 {
    slope * population as f64 / (alpha * alpha)
}
