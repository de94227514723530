//! Simulation and theory of z-scored evolution strategies versus gradient
//! descent on analytic reward landscapes.
//!
//! The crate has five layers:
//!
//! - [`landscape`]: flat, linear, and quadratic reward surfaces with exact
//!   rewards and gradients, plus Gaussian observation noise.
//! - [`optimizer`]: the z-scored ES update, gradient ascent, the OU
//!   idealization, and the trajectory loop with drift recording.
//! - [`theory`]: closed-form predictors for every moment, variance curve,
//!   and displacement statistic the simulators are expected to reproduce.
//! - [`analysis`]: Monte-Carlo estimators and geometry probes — drift
//!   regression and effective dimension, on/off-manifold splits, linear
//!   interpolation between solutions, directional probes, and the
//!   displacement hierarchy.
//! - [`scenario`] / [`runner`]: TOML experiment descriptions and the
//!   commands that turn them into CSV/JSON artifacts, including a
//!   theory-versus-simulation validation gate.

pub mod analysis;
pub mod error;
pub mod landscape;
pub mod optimizer;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod theory;

pub use error::{Error, Result};
pub use landscape::{Landscape, NoiseModel, QuadraticLandscape};
pub use optimizer::{
    es_step, gd_step, ou_step, run_trajectory, trial_rng, EsConfig, GdConfig, Method, OuConfig,
    RecordSpec, TrajectoryRecord, ZscoreMode,
};
pub use scenario::Scenario;
