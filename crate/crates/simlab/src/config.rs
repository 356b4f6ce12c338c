//! The experiment configuration consumed by `simlab study`.

use anyhow::{bail, ensure, Result};
use serde::{Deserialize, Serialize};

use itrval::krr::Bandwidth;
use itrval::simgen::ScenarioSpec;
use itrval::stats::Alternative;

/// Full Monte-Carlo study plan, read from a single JSON document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Scenario ids to run, each in 1..=4.
    pub scenarios: Vec<u8>,
    /// Training-set sizes per scenario.
    pub sample_sizes: Vec<usize>,
    /// Independent replicates per (scenario, n) cell.
    pub replicates: usize,
    /// Master seed; every replicate derives its own streams from it.
    pub seed: u64,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub estimators: EstimatorConfig,
    /// Monte-Carlo draws per true-value evaluation.
    #[serde(default = "default_mc_draws")]
    pub mc_draws: usize,
    /// Rejection level for power aggregation.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Confidence level for coverage aggregation.
    #[serde(default = "default_ci_level")]
    pub ci_level: f64,
    /// Direction of the model-comparison test.
    #[serde(default)]
    pub alternative: AlternativeConfig,
    #[serde(default)]
    pub scenario_params: ScenarioParams,
}

fn default_mc_draws() -> usize {
    1_000_000
}

fn default_alpha() -> f64 {
    0.05
}

fn default_ci_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub krr: KrrConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrrConfig {
    /// `"auto"` (median pairwise distance) or a positive number.
    #[serde(default)]
    pub bandwidth: BandwidthConfig,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
}

fn default_ridge() -> f64 {
    0.01
}

impl Default for KrrConfig {
    fn default() -> Self {
        Self { bandwidth: BandwidthConfig::default(), ridge: default_ridge() }
    }
}

/// Bandwidth setting in JSON: the string `"auto"` or a number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BandwidthConfig {
    Value(f64),
    Keyword(AutoKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoKeyword {
    Auto,
}

impl Default for BandwidthConfig {
    fn default() -> Self {
        BandwidthConfig::Keyword(AutoKeyword::Auto)
    }
}

impl BandwidthConfig {
    pub fn to_bandwidth(self) -> Bandwidth {
        match self {
            BandwidthConfig::Value(h) => Bandwidth::Fixed(h),
            BandwidthConfig::Keyword(AutoKeyword::Auto) => Bandwidth::Auto,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    /// The jackknife backs every aggregate table and must stay enabled.
    #[serde(default = "default_true")]
    pub jackknife: bool,
    /// Optional repeated K-fold cross-validation columns.
    #[serde(default)]
    pub cv: Option<CvConfig>,
    /// Score the full-data rule on an independent same-size test draw.
    #[serde(default = "default_true")]
    pub empirical: bool,
}

fn default_true() -> bool {
    true
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { jackknife: true, cv: None, empirical: true }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvConfig {
    pub folds: usize,
    pub repeats: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlternativeConfig {
    #[default]
    Greater,
    TwoSided,
}

impl AlternativeConfig {
    pub fn to_alternative(self) -> Alternative {
        match self {
            AlternativeConfig::Greater => Alternative::Greater,
            AlternativeConfig::TwoSided => Alternative::TwoSided,
        }
    }
}

/// Generative-model knobs shared by all scenarios in the study.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    /// Covariates are uniform on (-half_width, half_width).
    #[serde(default = "default_half_width")]
    pub covariate_half_width: f64,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
    #[serde(default = "default_nuisance_dims")]
    pub nuisance_dims: usize,
}

fn default_half_width() -> f64 {
    2.0
}

fn default_noise_sd() -> f64 {
    1.0
}

fn default_nuisance_dims() -> usize {
    1
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            covariate_half_width: default_half_width(),
            noise_sd: default_noise_sd(),
            nuisance_dims: default_nuisance_dims(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.scenarios.is_empty(), "at least one scenario is required");
        for &s in &self.scenarios {
            ensure!((1..=4).contains(&s), "scenario id {s} is outside 1..=4");
        }
        let mut seen = self.scenarios.clone();
        seen.sort_unstable();
        seen.dedup();
        ensure!(seen.len() == self.scenarios.len(), "scenario ids must be unique");

        ensure!(!self.sample_sizes.is_empty(), "at least one sample size is required");
        for &n in &self.sample_sizes {
            ensure!(n >= 10, "sample sizes must be at least 10, got {n}");
        }
        ensure!(self.replicates >= 1, "at least one replicate is required");
        ensure!(
            self.mc_draws >= 100_000,
            "mc_draws must be at least 100000 for a usable ground truth"
        );
        ensure!(
            self.alpha > 0.0 && self.alpha < 1.0,
            "alpha must lie strictly inside (0, 1)"
        );
        ensure!(
            self.ci_level > 0.0 && self.ci_level < 1.0,
            "ci_level must lie strictly inside (0, 1)"
        );
        ensure!(
            self.estimators.jackknife,
            "the jackknife estimator backs every aggregate table and cannot be disabled"
        );
        if let BandwidthConfig::Value(h) = self.model.krr.bandwidth {
            ensure!(h > 0.0 && h.is_finite(), "krr bandwidth must be positive");
        }
        ensure!(
            self.model.krr.ridge > 0.0 && self.model.krr.ridge.is_finite(),
            "krr ridge must be positive"
        );
        if let Some(cv) = self.estimators.cv {
            ensure!(cv.folds >= 2, "cv needs at least 2 folds");
            ensure!(cv.repeats >= 1, "cv needs at least 1 repeat");
            if let Some(&smallest) = self.sample_sizes.iter().min() {
                ensure!(
                    cv.folds <= smallest,
                    "cv folds ({}) exceed the smallest sample size ({smallest})",
                    cv.folds
                );
            }
        }
        let p = self.scenario_params;
        ensure!(
            p.covariate_half_width > 0.0 && p.covariate_half_width.is_finite(),
            "covariate half-width must be positive"
        );
        ensure!(
            p.noise_sd >= 0.0 && p.noise_sd.is_finite(),
            "noise sd must be nonnegative"
        );
        ensure!(p.nuisance_dims >= 1, "at least one nuisance dimension is required");
        Ok(())
    }

    /// The scenario spec for one scenario id under this config.
    pub fn scenario_spec(&self, scenario: u8) -> Result<ScenarioSpec> {
        let p = self.scenario_params;
        match ScenarioSpec::new(scenario)
            .and_then(|s| s.with_half_width(p.covariate_half_width))
            .and_then(|s| s.with_noise_sd(p.noise_sd))
            .and_then(|s| s.with_nuisance_dims(p.nuisance_dims))
        {
            Ok(spec) => Ok(spec),
            Err(e) => bail!("invalid scenario parameters: {e}"),
        }
    }
}
