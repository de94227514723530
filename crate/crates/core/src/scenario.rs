//! Scenario files: a single TOML document that pins everything an experiment
//! needs — landscape, initial point, optimizer hyperparameters, run length,
//! trial count, master seed, what to record, which analyses to run, and the
//! tolerances a validation run must meet. A scenario plus the code version
//! determines every output byte except wall-clock metadata.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::landscape::{Landscape, NoiseModel, QuadraticLandscape};
use crate::optimizer::{EsConfig, GdConfig, Method, OuConfig, RecordSpec, ZscoreMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub landscape: LandscapeSpec,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub es: Option<EsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gd: Option<GdSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ou: Option<OuSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSpec>,
    #[serde(default)]
    pub record: RecordSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LandscapeKind {
    Flat,
    Linear,
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeSpec {
    pub kind: LandscapeKind,
    pub dim: u64,
    /// Flat landscapes: the constant reward.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    /// Linear landscapes: explicit gradient direction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
    /// Linear landscapes: the uniform unit direction scaled to this norm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_norm: Option<f64>,
    /// Quadratic landscapes: explicit eigenvalue list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Vec<f64>>,
    /// Quadratic landscapes: first `rank` eigenvalues set to `lambda`,
    /// the rest zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Observation-noise standard deviation added to every reward sample.
    #[serde(default)]
    pub sigma_xi: f64,
    #[serde(default)]
    pub basis: BasisSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation_seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisSpec {
    #[default]
    Canonical,
    RandomRotation,
}

/// Initial parameter vector; defaults to the origin.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Theta0Spec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Theta0Spec {
    /// Every coordinate set to this value.
    Constant(f64),
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EsSpec {
    pub sigma: f64,
    /// Defaults to `sigma / 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub population: usize,
    #[serde(default)]
    pub zscore: ZscoreMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GdSpec {
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuSpec {
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub population: usize,
    /// Frozen reward standard deviation; when absent, the reward standard
    /// deviation evaluated at the initial point is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_r_fixed: Option<f64>,
    #[serde(default)]
    pub noise_free: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Es,
    Gd,
    Ou,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub method: MethodName,
    pub steps: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_trials() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<std::path::PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    /// Fit the no-intercept drift regression on the ensemble mean curve.
    #[serde(default)]
    pub fit: bool,
    /// Grid size for ES-vs-GD interpolation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpolate_points: Option<usize>,
    /// Magnitudes for directional probes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probe_magnitudes: Vec<f64>,
    /// Random control directions per probe.
    #[serde(default = "default_probe_seeds")]
    pub probe_random_seeds: u64,
    /// Measure the GD/ES displacement hierarchy.
    #[serde(default)]
    pub hierarchy: bool,
}

fn default_probe_seeds() -> u64 {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSpec {
    /// Steps at which per-direction statistics are compared.
    #[serde(default)]
    pub checkpoints: Vec<usize>,
    /// Statistical floor: a comparison also passes when the observation lies
    /// within this many standard errors of the prediction. Set to 0 to
    /// require the relative tolerance alone.
    #[serde(default = "default_stderr_floor")]
    pub stderr_floor: f64,
    /// Relative tolerance per quantity; keys may name a whole family
    /// (e.g. "prop4.mean") or a fully indexed quantity.
    pub tolerances: BTreeMap<String, f64>,
}

fn default_stderr_floor() -> f64 {
    3.0
}

impl Scenario {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        scenario.check()?;
        Ok(scenario)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    /// Hex digest of the canonical serialization; stamped into every output
    /// file so artifacts can be traced back to their scenario.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        let mut out = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    /// Structural validation; collects every offending field rather than
    /// stopping at the first.
    pub fn check(&self) -> Result<()> {
        let mut problems = Vec::new();
        let ls = &self.landscape;
        if ls.dim == 0 {
            problems.push("landscape.dim must be positive".to_string());
        }
        match ls.kind {
            LandscapeKind::Flat => {
                if ls.v.is_some() || ls.v_norm.is_some() {
                    problems.push("landscape.v/v_norm are not valid for kind = \"flat\"".into());
                }
                if ls.spectrum.is_some() || ls.rank.is_some() || ls.lambda.is_some() {
                    problems.push(
                        "landscape.spectrum/rank/lambda are not valid for kind = \"flat\"".into(),
                    );
                }
            }
            LandscapeKind::Linear => {
                if ls.constant.is_some() {
                    problems.push("landscape.constant is not valid for kind = \"linear\"".into());
                }
                if ls.spectrum.is_some() || ls.rank.is_some() || ls.lambda.is_some() {
                    problems.push(
                        "landscape.spectrum/rank/lambda are not valid for kind = \"linear\"".into(),
                    );
                }
                match (&ls.v, ls.v_norm) {
                    (Some(_), Some(_)) => {
                        problems.push("landscape.v and landscape.v_norm are exclusive".into())
                    }
                    (None, None) => problems
                        .push("linear landscape needs landscape.v or landscape.v_norm".into()),
                    (Some(v), None) => {
                        if v.len() as u64 != ls.dim {
                            problems.push(format!(
                                "landscape.v has length {}, expected dim {}",
                                v.len(),
                                ls.dim
                            ));
                        }
                    }
                    (None, Some(_)) => {}
                }
            }
            LandscapeKind::Quadratic => {
                if ls.constant.is_some() {
                    problems
                        .push("landscape.constant is not valid for kind = \"quadratic\"".into());
                }
                if ls.v.is_some() || ls.v_norm.is_some() {
                    problems
                        .push("landscape.v/v_norm are not valid for kind = \"quadratic\"".into());
                }
                match (&ls.spectrum, ls.rank, ls.lambda) {
                    (Some(spec), None, None) => {
                        if spec.len() as u64 != ls.dim {
                            problems.push(format!(
                                "landscape.spectrum has length {}, expected dim {}",
                                spec.len(),
                                ls.dim
                            ));
                        }
                    }
                    (None, Some(rank), Some(_)) => {
                        if rank > ls.dim {
                            problems.push(format!(
                                "landscape.rank {} exceeds dim {}",
                                rank, ls.dim
                            ));
                        }
                    }
                    (None, None, None) => problems.push(
                        "quadratic landscape needs landscape.spectrum or landscape.rank + landscape.lambda"
                            .into(),
                    ),
                    _ => problems.push(
                        "landscape.spectrum and landscape.rank/lambda are exclusive".into(),
                    ),
                }
            }
        }
        if ls.sigma_xi < 0.0 {
            problems.push(format!(
                "landscape.sigma_xi must be nonnegative, got {}",
                ls.sigma_xi
            ));
        }
        if ls.basis == BasisSpec::RandomRotation && ls.kind != LandscapeKind::Quadratic {
            problems.push(
                "landscape.basis = \"random-rotation\" requires a quadratic landscape".into(),
            );
        }

        if let Some(Theta0Spec::Explicit(values)) = self.init.theta0.as_ref() {
            if values.len() as u64 != ls.dim {
                problems.push(format!(
                    "init.theta0 has length {}, expected dim {}",
                    values.len(),
                    ls.dim
                ));
            }
        }

        if let Some(es) = &self.es {
            if es.sigma <= 0.0 || es.sigma.is_nan() {
                problems.push(format!("es.sigma must be positive, got {}", es.sigma));
            }
            if let Some(alpha) = es.alpha {
                if alpha <= 0.0 || alpha.is_nan() {
                    problems.push(format!("es.alpha must be positive, got {alpha}"));
                }
            }
            if es.population < 2 {
                problems.push(format!(
                    "es.population must be at least 2, got {}",
                    es.population
                ));
            }
        }
        if let Some(gd) = &self.gd {
            if gd.beta <= 0.0 || gd.beta.is_nan() {
                problems.push(format!("gd.beta must be positive, got {}", gd.beta));
            }
        }
        if let Some(ou) = &self.ou {
            if ou.sigma <= 0.0 || ou.sigma.is_nan() {
                problems.push(format!("ou.sigma must be positive, got {}", ou.sigma));
            }
            if ou.population < 1 {
                problems.push(format!(
                    "ou.population must be positive, got {}",
                    ou.population
                ));
            }
            if let Some(sr) = ou.sigma_r_fixed {
                if sr <= 0.0 || sr.is_nan() {
                    problems.push(format!("ou.sigma_r_fixed must be positive, got {sr}"));
                }
            }
        }

        if let Some(run) = &self.run {
            let section = match run.method {
                MethodName::Es => self.es.is_some(),
                MethodName::Gd => self.gd.is_some(),
                MethodName::Ou => self.ou.is_some(),
            };
            if !section {
                let name = match run.method {
                    MethodName::Es => "es",
                    MethodName::Gd => "gd",
                    MethodName::Ou => "ou",
                };
                problems.push(format!(
                    "run.method = \"{name}\" has no matching [{name}] section"
                ));
            }
            if run.trials == 0 {
                problems.push("run.trials must be positive".into());
            }
        }

        for &k in &self.record.projections {
            if k as u64 >= ls.dim {
                problems.push(format!(
                    "record.projections index {} out of range for dim {}",
                    k, ls.dim
                ));
            }
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(problems))
        }
    }

    pub fn dim(&self) -> u64 {
        self.landscape.dim
    }

    /// The configured eigenvalue spectrum (quadratic only), materialized.
    pub fn spectrum(&self) -> Option<Vec<f64>> {
        let ls = &self.landscape;
        match ls.kind {
            LandscapeKind::Quadratic => Some(match (&ls.spectrum, ls.rank, ls.lambda) {
                (Some(spec), _, _) => spec.clone(),
                (None, Some(rank), Some(lambda)) => {
                    let mut spec = vec![0.0; ls.dim as usize];
                    for entry in spec.iter_mut().take(rank as usize) {
                        *entry = lambda;
                    }
                    spec
                }
                _ => unreachable!("checked"),
            }),
            _ => None,
        }
    }

    /// The configured gradient direction (linear only), materialized.
    pub fn gradient_direction(&self) -> Option<Vec<f64>> {
        let ls = &self.landscape;
        match ls.kind {
            LandscapeKind::Linear => Some(match (&ls.v, ls.v_norm) {
                (Some(v), _) => v.clone(),
                (None, Some(v_norm)) => {
                    let scale = v_norm / (ls.dim as f64).sqrt();
                    vec![scale; ls.dim as usize]
                }
                _ => unreachable!("checked"),
            }),
            _ => None,
        }
    }

    pub fn build_landscape(&self) -> Result<Landscape> {
        let ls = &self.landscape;
        Ok(match ls.kind {
            LandscapeKind::Flat => Landscape::flat(ls.constant.unwrap_or(0.0), ls.dim as usize),
            LandscapeKind::Linear => {
                Landscape::linear(self.gradient_direction().expect("linear kind"))
            }
            LandscapeKind::Quadratic => {
                let spectrum = self.spectrum().expect("quadratic kind");
                match ls.basis {
                    BasisSpec::Canonical => Landscape::quadratic(spectrum),
                    BasisSpec::RandomRotation => Landscape::Quadratic(
                        QuadraticLandscape::with_rotation(spectrum, ls.rotation_seed.unwrap_or(0)),
                    ),
                }
            }
        })
    }

    pub fn noise(&self) -> Result<NoiseModel> {
        NoiseModel::new(self.landscape.sigma_xi)
    }

    pub fn theta0(&self) -> Vec<f64> {
        let dim = self.landscape.dim as usize;
        match self.init.theta0.as_ref() {
            None => vec![0.0; dim],
            Some(Theta0Spec::Constant(value)) => vec![*value; dim],
            Some(Theta0Spec::Explicit(values)) => values.clone(),
        }
    }

    /// Initial point in the quadratic eigenbasis (identical to `theta0` for
    /// the canonical basis).
    pub fn theta0_eigen(&self) -> Result<Vec<f64>> {
        match self.build_landscape()? {
            Landscape::Quadratic(q) => Ok(q.eigen_coordinates(&self.theta0())),
            _ => Ok(self.theta0()),
        }
    }

    pub fn es_config(&self) -> Result<Option<EsConfig>> {
        let Some(es) = &self.es else { return Ok(None) };
        let cfg = EsConfig {
            sigma: es.sigma,
            alpha: es.alpha.unwrap_or(es.sigma / 2.0),
            population: es.population,
            zscore: es.zscore,
            seed: self.run.as_ref().map(|r| r.seed).unwrap_or(0),
        }
        .validated()?;
        Ok(Some(cfg))
    }

    pub fn gd_config(&self) -> Result<Option<GdConfig>> {
        self.gd
            .as_ref()
            .map(|gd| GdConfig::new(gd.beta))
            .transpose()
    }

    /// OU configuration with the frozen reward standard deviation resolved:
    /// an explicit value wins, otherwise the reward standard deviation at the
    /// initial point.
    pub fn ou_config(&self) -> Result<Option<OuConfig>> {
        let Some(ou) = &self.ou else { return Ok(None) };
        let sigma = ou.sigma;
        let alpha = ou.alpha.unwrap_or(sigma / 2.0);
        let sigma_r_fixed = match ou.sigma_r_fixed {
            Some(value) => value,
            None => self.sigma_r_at_start(sigma)?,
        };
        let cfg = OuConfig {
            sigma,
            alpha,
            population: ou.population,
            sigma_r_fixed,
            noise_free: ou.noise_free,
            seed: self.run.as_ref().map(|r| r.seed).unwrap_or(0),
        }
        .validated()?;
        Ok(Some(cfg))
    }

    /// Reward standard deviation over perturbations at the initial point.
    pub fn sigma_r_at_start(&self, sigma: f64) -> Result<f64> {
        let sigma_xi = self.landscape.sigma_xi;
        match self.landscape.kind {
            LandscapeKind::Flat => crate::theory::sigma_r_quadratic(sigma, 0.0, 0.0, sigma_xi),
            LandscapeKind::Linear => {
                let v = self.gradient_direction().expect("linear kind");
                crate::theory::sigma_r_linear(sigma, crate::landscape::norm(&v), sigma_xi)
            }
            LandscapeKind::Quadratic => {
                let spectrum = self.spectrum().expect("quadratic kind");
                let theta0_eigen = self.theta0_eigen()?;
                let grad_sq: f64 = spectrum
                    .iter()
                    .zip(&theta0_eigen)
                    .map(|(l, t)| (l * t) * (l * t))
                    .sum();
                let trace_q2 = spectrum.iter().map(|l| l * l).sum();
                crate::theory::sigma_r_quadratic(sigma, grad_sq.sqrt(), trace_q2, sigma_xi)
            }
        }
    }

    /// Resolves the method configuration driving `run`.
    pub fn method(&self) -> Result<Method> {
        let run = self
            .run
            .as_ref()
            .ok_or_else(|| Error::InvalidScenario(vec!["missing [run] section".into()]))?;
        match run.method {
            MethodName::Es => Ok(Method::Es(self.es_config()?.ok_or_else(|| {
                Error::InvalidScenario(vec!["run.method = \"es\" but no [es] section".into()])
            })?)),
            MethodName::Gd => Ok(Method::Gd(self.gd_config()?.ok_or_else(|| {
                Error::InvalidScenario(vec!["run.method = \"gd\" but no [gd] section".into()])
            })?)),
            MethodName::Ou => Ok(Method::Ou(self.ou_config()?.ok_or_else(|| {
                Error::InvalidScenario(vec!["run.method = \"ou\" but no [ou] section".into()])
            })?)),
        }
    }
}
