//! Analytic reward surfaces: flat, linear, and quadratic.
//!
//! All three landscapes expose exact rewards and exact gradients. The
//! quadratic surface is stored as an eigenvalue spectrum plus a basis; the
//! curvature matrix is never materialized, so dimensions in the millions stay
//! cheap as long as the basis is canonical. An optional seeded random
//! rotation exists to check that nothing downstream secretly depends on the
//! eigenbasis being axis-aligned.

use rand::Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};

/// Constant reward everywhere; the gradient is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatLandscape {
    pub constant: f64,
    pub dim: usize,
}

/// Reward `-v . theta`; the gradient is `-v` everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLandscape {
    pub v: Vec<f64>,
}

/// Orientation of the quadratic eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub enum Basis {
    /// Eigenvector k is the k-th standard basis vector.
    Canonical,
    /// Dense orthogonal matrix, eigenvectors as columns. Small dimensions
    /// only; evaluation is O(d^2).
    Rotation(Rotation),
}

/// A seeded random orthogonal matrix, kept around so basis invariance can be
/// exercised in tests and scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    pub seed: u64,
    dim: usize,
    /// Row-major d x d; column k holds eigenvector k.
    cols: Vec<f64>,
}

impl Rotation {
    /// Draws a Gaussian matrix and orthonormalizes its columns
    /// (modified Gram-Schmidt, run twice for numerical orthogonality).
    pub fn random(dim: usize, seed: u64) -> Self {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let mut cols = vec![0.0; dim * dim];
        for entry in cols.iter_mut() {
            *entry = rng.sample(StandardNormal);
        }
        for _ in 0..2 {
            for k in 0..dim {
                for prev in 0..k {
                    let dot: f64 = (0..dim)
                        .map(|j| cols[j * dim + k] * cols[j * dim + prev])
                        .sum();
                    for j in 0..dim {
                        cols[j * dim + k] -= dot * cols[j * dim + prev];
                    }
                }
                let norm: f64 = (0..dim)
                    .map(|j| cols[j * dim + k].powi(2))
                    .sum::<f64>()
                    .sqrt();
                for j in 0..dim {
                    cols[j * dim + k] /= norm;
                }
            }
        }
        Rotation { seed, dim, cols }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Component of `theta` along eigenvector `k`.
    pub fn project(&self, theta: &[f64], k: usize) -> f64 {
        (0..self.dim)
            .map(|j| self.cols[j * self.dim + k] * theta[j])
            .sum()
    }

    /// Coordinates of `theta` in the eigenbasis.
    pub fn to_eigen(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|k| self.project(theta, k)).collect()
    }

    /// Maps eigenbasis coordinates back to the ambient basis.
    pub fn from_eigen(&self, w: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|j| {
                (0..self.dim)
                    .map(|k| self.cols[j * self.dim + k] * w[k])
                    .sum()
            })
            .collect()
    }
}

/// Reward `-1/2 sum_k lambda_k (u_k . theta)^2`. Eigenvalues may be zero
/// (flat directions) or negative (concave directions).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticLandscape {
    eigenvalues: Vec<f64>,
    basis: Basis,
}

impl QuadraticLandscape {
    pub fn new(eigenvalues: Vec<f64>) -> Self {
        QuadraticLandscape {
            eigenvalues,
            basis: Basis::Canonical,
        }
    }

    pub fn with_rotation(eigenvalues: Vec<f64>, seed: u64) -> Self {
        let rotation = Rotation::random(eigenvalues.len(), seed);
        QuadraticLandscape {
            eigenvalues,
            basis: Basis::Rotation(rotation),
        }
    }

    /// First `rank` eigenvalues set to `value`, the rest flat.
    pub fn rank_r(dim: usize, rank: usize, value: f64) -> Self {
        let mut eigenvalues = vec![0.0; dim];
        for lambda in eigenvalues.iter_mut().take(rank) {
            *lambda = value;
        }
        QuadraticLandscape::new(eigenvalues)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    /// Number of nonzero eigenvalues.
    pub fn rank(&self) -> usize {
        self.eigenvalues.iter().filter(|l| **l != 0.0).count()
    }

    /// Sum of squared eigenvalues, i.e. the trace of the squared curvature.
    pub fn trace_curvature_sq(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l * l).sum()
    }

    /// Component of `theta` along eigenvector `k`.
    pub fn project(&self, theta: &[f64], k: usize) -> f64 {
        match &self.basis {
            Basis::Canonical => theta[k],
            Basis::Rotation(rot) => rot.project(theta, k),
        }
    }

    /// Coordinates of `theta` in the eigenbasis.
    pub fn eigen_coordinates(&self, theta: &[f64]) -> Vec<f64> {
        match &self.basis {
            Basis::Canonical => theta.to_vec(),
            Basis::Rotation(rot) => rot.to_eigen(theta),
        }
    }

    fn reward_inner(&self, theta: &[f64]) -> f64 {
        match &self.basis {
            Basis::Canonical => {
                -0.5 * self
                    .eigenvalues
                    .iter()
                    .zip(theta)
                    .map(|(l, t)| l * t * t)
                    .sum::<f64>()
            }
            Basis::Rotation(rot) => {
                let w = rot.to_eigen(theta);
                -0.5 * self
                    .eigenvalues
                    .iter()
                    .zip(&w)
                    .map(|(l, t)| l * t * t)
                    .sum::<f64>()
            }
        }
    }

    fn gradient_inner(&self, theta: &[f64], out: &mut [f64]) {
        match &self.basis {
            Basis::Canonical => {
                for ((g, l), t) in out.iter_mut().zip(&self.eigenvalues).zip(theta) {
                    *g = -l * t;
                }
            }
            Basis::Rotation(rot) => {
                let mut w = rot.to_eigen(theta);
                for (wk, l) in w.iter_mut().zip(&self.eigenvalues) {
                    *wk *= -l;
                }
                let g = rot.from_eigen(&w);
                out.copy_from_slice(&g);
            }
        }
    }

    /// `Q theta` in the ambient basis: the negative gradient of the reward.
    pub fn negative_gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), theta.len())?;
        let mut g = vec![0.0; theta.len()];
        self.gradient_inner(theta, &mut g);
        for gi in g.iter_mut() {
            *gi = -*gi;
        }
        Ok(g)
    }
}

/// One of the three analytic reward surfaces.
#[derive(Debug, Clone, PartialEq)]
pub enum Landscape {
    Flat(FlatLandscape),
    Linear(LinearLandscape),
    Quadratic(QuadraticLandscape),
}

impl Landscape {
    pub fn flat(constant: f64, dim: usize) -> Self {
        Landscape::Flat(FlatLandscape { constant, dim })
    }

    pub fn linear(v: Vec<f64>) -> Self {
        Landscape::Linear(LinearLandscape { v })
    }

    pub fn quadratic(eigenvalues: Vec<f64>) -> Self {
        Landscape::Quadratic(QuadraticLandscape::new(eigenvalues))
    }

    pub fn dim(&self) -> usize {
        match self {
            Landscape::Flat(f) => f.dim,
            Landscape::Linear(l) => l.v.len(),
            Landscape::Quadratic(q) => q.dim(),
        }
    }

    /// Exact analytic reward.
    pub fn reward(&self, theta: &[f64]) -> Result<f64> {
        check_dim(self.dim(), theta.len())?;
        Ok(match self {
            Landscape::Flat(f) => f.constant,
            Landscape::Linear(l) => -dot(&l.v, theta),
            Landscape::Quadratic(q) => q.reward_inner(theta),
        })
    }

    /// Exact analytic gradient of the reward, written into `out`.
    pub fn gradient_into(&self, theta: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dim(), theta.len())?;
        check_dim(self.dim(), out.len())?;
        match self {
            Landscape::Flat(_) => out.fill(0.0),
            Landscape::Linear(l) => {
                for (g, v) in out.iter_mut().zip(&l.v) {
                    *g = -v;
                }
            }
            Landscape::Quadratic(q) => q.gradient_inner(theta, out),
        }
        Ok(())
    }

    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; theta.len()];
        self.gradient_into(theta, &mut out)?;
        Ok(out)
    }

    /// True reward plus Gaussian observation noise.
    pub fn observe_reward<R: Rng>(
        &self,
        noise: &NoiseModel,
        theta: &[f64],
        rng: &mut R,
    ) -> Result<f64> {
        let r = self.reward(theta)?;
        Ok(r + noise.sample(rng))
    }
}

/// Additive Gaussian observation noise on rewards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub std_dev: f64,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel { std_dev: 0.0 };

    pub fn new(std_dev: f64) -> Result<Self> {
        if std_dev < 0.0 || std_dev.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "observation noise std must be nonnegative, got {std_dev}"
            )));
        }
        Ok(NoiseModel { std_dev })
    }

    pub fn is_noisy(&self) -> bool {
        self.std_dev > 0.0
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.std_dev > 0.0 {
            self.std_dev * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        }
    }
}

/// Dense dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Squared Euclidean norm.
pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Euclidean norm.
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    /// Central finite differences with step scaled to the operating point.
    fn fd_gradient(landscape: &Landscape, theta: &[f64]) -> Vec<f64> {
        let h = 1e-5 * f64::max(1.0, norm(theta));
        let mut probe = theta.to_vec();
        (0..theta.len())
            .map(|j| {
                probe[j] = theta[j] + h;
                let up = landscape.reward(&probe).unwrap();
                probe[j] = theta[j] - h;
                let down = landscape.reward(&probe).unwrap();
                probe[j] = theta[j];
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    fn assert_gradient_matches_fd(landscape: &Landscape, theta: &[f64]) {
        let analytic = landscape.gradient(theta).unwrap();
        let numeric = fd_gradient(landscape, theta);
        let scale = f64::max(norm(&analytic), 1e-12);
        for (a, n) in analytic.iter().zip(&numeric) {
            assert!(
                (a - n).abs() <= 1e-6 * scale,
                "gradient mismatch: analytic {a}, finite-difference {n}"
            );
        }
    }

    #[test]
    fn reward_examples() {
        let quad = Landscape::quadratic(vec![1.0, 0.0]);
        assert_eq!(quad.reward(&[2.0, 3.0]).unwrap(), -2.0);

        let lin = Landscape::linear(vec![1.0, -1.0]);
        assert_eq!(lin.reward(&[3.0, 1.0]).unwrap(), -2.0);

        let flat = Landscape::flat(5.0, 3);
        assert_eq!(flat.reward(&[9.0, -4.0, 0.2]).unwrap(), 5.0);
    }

    #[test]
    fn gradient_examples() {
        let quad = Landscape::quadratic(vec![2.0, 0.0]);
        assert_eq!(quad.gradient(&[1.0, 7.0]).unwrap(), vec![-2.0, 0.0]);

        let flat = Landscape::flat(1.0, 4);
        assert_eq!(flat.gradient(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![0.0; 4]);

        let quad = Landscape::quadratic(vec![1.0, 3.0]);
        assert_gradient_matches_fd(&quad, &[1.0, 1.0]);
    }

    #[test]
    fn gradients_match_finite_differences_everywhere() {
        let cases: Vec<(Landscape, Vec<f64>)> = vec![
            (Landscape::flat(2.5, 3), vec![0.3, -4.0, 2.0]),
            (
                Landscape::linear(vec![1.0, -2.0, 0.5]),
                vec![10.0, 0.0, -3.0],
            ),
            (
                Landscape::quadratic(vec![1.0, -0.5, 0.0, 4.0]),
                vec![0.5, 1.5, -2.0, 0.25],
            ),
            (
                Landscape::Quadratic(QuadraticLandscape::with_rotation(
                    vec![2.0, -1.0, 0.0, 0.5, 3.0],
                    11,
                )),
                vec![1.0, -1.0, 0.5, 2.0, -0.25],
            ),
        ];
        for (landscape, theta) in &cases {
            assert_gradient_matches_fd(landscape, theta);
        }
    }

    #[test]
    fn all_zero_spectrum_equals_flat_zero() {
        let quad = Landscape::quadratic(vec![0.0; 6]);
        let flat = Landscape::flat(0.0, 6);
        let theta = [4.0, -2.0, 0.5, 100.0, 0.0, -7.5];
        assert_eq!(quad.reward(&theta).unwrap(), flat.reward(&theta).unwrap());
        assert_eq!(
            quad.gradient(&theta).unwrap(),
            flat.gradient(&theta).unwrap()
        );
    }

    #[test]
    fn rotation_preserves_spectrum() {
        let eigenvalues = vec![3.0, 1.0, 0.0, -2.0];
        let canonical = QuadraticLandscape::new(eigenvalues.clone());
        let rotated = QuadraticLandscape::with_rotation(eigenvalues, 99);
        let rot = match rotated.basis() {
            Basis::Rotation(r) => r.clone(),
            Basis::Canonical => unreachable!(),
        };
        let w = [1.5, -0.5, 2.0, 0.25];
        let theta = rot.from_eigen(&w);
        let canonical_reward = Landscape::Quadratic(canonical).reward(&w).unwrap();
        let rotated_reward = Landscape::Quadratic(rotated).reward(&theta).unwrap();
        assert!((canonical_reward - rotated_reward).abs() <= 1e-10 * canonical_reward.abs());
    }

    #[test]
    fn rank_counts_nonzero_eigenvalues() {
        let quad = QuadraticLandscape::new(vec![1.0, 0.0, -2.0, 0.0, 1e-12]);
        assert_eq!(quad.rank(), 3);
        assert_eq!(QuadraticLandscape::rank_r(10, 4, 2.0).rank(), 4);
    }

    #[test]
    fn dimension_mismatch_reports_sizes() {
        let lin = Landscape::linear(vec![1.0, 2.0]);
        let err = lin.reward(&[1.0, 2.0, 3.0]).unwrap_err();
        match err {
            Error::DimensionMismatch { expected, actual } => {
                assert_eq!((expected, actual), (2, 3));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn noiseless_observation_is_exact() {
        let flat = Landscape::flat(1.0, 2);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(0);
        for _ in 0..100 {
            let r = flat
                .observe_reward(&NoiseModel::NONE, &[0.0, 0.0], &mut rng)
                .unwrap();
            assert_eq!(r, 1.0);
        }
    }

    #[test]
    fn observation_noise_moments() {
        let flat = Landscape::flat(0.0, 1);
        let noise = NoiseModel::new(1.0).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(42);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| flat.observe_reward(&noise, &[0.0], &mut rng).unwrap())
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        assert!((std - 1.0).abs() < 0.02, "sample std {std}");

        // mean of noisy linear rewards at the origin: zero within 3 stderr
        let lin = Landscape::linear(vec![2.0, -1.0]);
        let noise = NoiseModel::new(0.5).unwrap();
        let samples: Vec<f64> = (0..n)
            .map(|_| lin.observe_reward(&noise, &[0.0, 0.0], &mut rng).unwrap())
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stderr = 0.5 / (n as f64).sqrt();
        assert!(mean.abs() < 3.0 * stderr, "mean {mean} stderr {stderr}");
    }
}
