//! Experiment configuration.
//!
//! The file is TOML restricted to one level of sections, so either
//! `optimizer.k = -0.05` or a `[optimizer]` table with `k = -0.05`. Unknown
//! sections and keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use salesopt_core::bandit::{BanditParams, Exploration, GradientTarget};
use salesopt_core::bandit::simulation::SimulationConfig;
use salesopt_core::datagen::{GenConfig, OutcomeSpec, PanelSpec};
use salesopt_core::evalharness::AblationConfig;
use salesopt_core::optimizer::OptimizerParams;
use salesopt_core::pipeline::TrainingConfig;
use salesopt_core::uplift::{BaseSpec, LearnerKind, StumpsSpec, UpliftSpec, XGate};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSection {
    pub n_accounts: usize,
    pub n_reps: usize,
    pub account_dim: usize,
    pub rep_dim: usize,
    pub engagement_dim: usize,
    pub engagement_metrics: usize,
    pub treatment_share: f64,
    pub noise_sd: f64,
    pub confounding: f64,
    pub max_days: i64,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        let g = GenConfig::default();
        Self {
            n_accounts: g.n_accounts,
            n_reps: g.n_reps,
            account_dim: g.account_dim,
            rep_dim: g.rep_dim,
            engagement_dim: g.engagement_dim,
            engagement_metrics: g.engagement_metrics,
            treatment_share: g.treatment_share,
            noise_sd: g.noise_sd,
            confounding: g.confounding,
            max_days: g.max_days,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseKind {
    Ridge,
    Stumps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub base: BaseKind,
    pub ridge_lambda: f64,
    pub stumps_rounds: usize,
    pub stumps_learning_rate: f64,
    pub stumps_min_leaf: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let s = StumpsSpec::default();
        Self {
            base: BaseKind::Ridge,
            ridge_lambda: 1e-6,
            stumps_rounds: s.rounds,
            stumps_learning_rate: s.learning_rate,
            stumps_min_leaf: s.min_leaf,
        }
    }
}

impl ModelSection {
    pub fn base_spec(&self) -> BaseSpec {
        match self.base {
            BaseKind::Ridge => BaseSpec::Ridge { lambda: self.ridge_lambda },
            BaseKind::Stumps => BaseSpec::BoostedStumps(StumpsSpec {
                rounds: self.stumps_rounds,
                learning_rate: self.stumps_learning_rate,
                min_leaf: self.stumps_min_leaf,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UpliftSection {
    pub learner: LearnerKind,
    pub base: BaseKind,
    pub ridge_lambda: f64,
    pub stumps_rounds: usize,
    pub stumps_learning_rate: f64,
    pub stumps_min_leaf: usize,
    /// X-learner gate; absent means the propensity score.
    pub x_gate: Option<f64>,
    pub propensity_l2: f64,
}

impl Default for UpliftSection {
    fn default() -> Self {
        let m = ModelSection::default();
        Self {
            learner: LearnerKind::T,
            base: m.base,
            ridge_lambda: m.ridge_lambda,
            stumps_rounds: m.stumps_rounds,
            stumps_learning_rate: m.stumps_learning_rate,
            stumps_min_leaf: m.stumps_min_leaf,
            x_gate: None,
            propensity_l2: 1.0,
        }
    }
}

impl UpliftSection {
    pub fn model(&self) -> ModelSection {
        ModelSection {
            base: self.base,
            ridge_lambda: self.ridge_lambda,
            stumps_rounds: self.stumps_rounds,
            stumps_learning_rate: self.stumps_learning_rate,
            stumps_min_leaf: self.stumps_min_leaf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplorationMode {
    Thompson,
    Ucb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BanditSection {
    pub mode: ExplorationMode,
    pub beta: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub gradient_target: GradientTarget,
    pub hidden: usize,
    pub lambda: f64,
    pub steps_per_update: usize,
    pub warmup_updates: u64,
}

impl Default for BanditSection {
    fn default() -> Self {
        let p = BanditParams::default();
        Self {
            mode: ExplorationMode::Thompson,
            beta: 0.1,
            gamma: 0.1,
            learning_rate: p.learning_rate,
            gradient_target: p.gradient_target,
            hidden: p.hidden,
            lambda: p.lambda,
            steps_per_update: p.steps_per_update,
            warmup_updates: p.warmup_updates,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub rounds: usize,
    pub alerts_per_day: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let s = SimulationConfig::default();
        Self { rounds: s.rounds, alerts_per_day: s.alerts_per_day }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSection {
    pub days: u32,
    pub seeds: u32,
}

impl Default for AblationSection {
    fn default() -> Self {
        Self { days: AblationConfig::default().days, seeds: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub injected_effect: f64,
    pub alpha: f64,
    /// Equal-width bins per covariate for matching.
    pub cem_bins: usize,
    /// Held-out share for forecast error metrics.
    pub holdout: f64,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self { injected_effect: 0.2, alpha: 0.05, cem_bins: 5, holdout: 0.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextGenProvider {
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextGenSection {
    pub provider: TextGenProvider,
    pub url: String,
    pub timeout_ms: u64,
}

impl Default for TextGenSection {
    fn default() -> Self {
        Self { provider: TextGenProvider::Mock, url: String::new(), timeout_ms: 5000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub generator: GeneratorSection,
    pub outcomes: OutcomeSpec,
    pub panel: PanelSpec,
    pub uplift: UpliftSection,
    pub forecast: ModelSection,
    pub optimizer: OptimizerParams,
    pub bandit: BanditSection,
    pub simulation: SimulationSection,
    pub ablation: AblationSection,
    pub evaluate: EvaluateSection,
    pub textgen: TextGenSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 1,
            generator: GeneratorSection::default(),
            outcomes: OutcomeSpec::default(),
            panel: PanelSpec::default(),
            uplift: UpliftSection::default(),
            forecast: ModelSection::default(),
            optimizer: OptimizerParams::default(),
            bandit: BanditSection::default(),
            simulation: SimulationSection::default(),
            ablation: AblationSection::default(),
            evaluate: EvaluateSection::default(),
            textgen: TextGenSection::default(),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(one_line(&e.to_string())))?;
        for (section, value) in &table {
            if let toml::Value::Table(keys) = value {
                if let Some((key, _)) = keys.iter().find(|(_, v)| v.is_table()) {
                    return Err(ConfigError::Parse(format!("{section}.{key}: nesting beyond one level")));
                }
            }
        }
        let cfg: Config = table.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(one_line(&e.to_string())))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// Default config, or the file at `path`, with `seed` overriding.
    pub fn resolve(path: Option<&Path>, seed: Option<u64>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(s) = seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        self.gen_config().check().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.optimizer.check().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let b = &self.bandit;
        if !(b.beta > 0.0 && b.gamma > 0.0 && b.learning_rate > 0.0 && b.lambda > 0.0) || b.hidden == 0 {
            return Err(ConfigError::Invalid("bandit beta, gamma, learning_rate, lambda and hidden must be positive".into()));
        }
        if self.simulation.alerts_per_day == 0 {
            return Err(ConfigError::Invalid("simulation.alerts_per_day must be positive".into()));
        }
        if !(self.evaluate.holdout > 0.0 && self.evaluate.holdout < 1.0) {
            return Err(ConfigError::Invalid("evaluate.holdout must lie in (0,1)".into()));
        }
        if self.evaluate.cem_bins == 0 {
            return Err(ConfigError::Invalid("evaluate.cem_bins must be positive".into()));
        }
        Ok(())
    }

    pub fn gen_config(&self) -> GenConfig {
        let g = &self.generator;
        GenConfig {
            n_accounts: g.n_accounts,
            n_reps: g.n_reps,
            account_dim: g.account_dim,
            rep_dim: g.rep_dim,
            engagement_dim: g.engagement_dim,
            engagement_metrics: g.engagement_metrics,
            seed: self.seed,
            treatment_share: g.treatment_share,
            noise_sd: g.noise_sd,
            confounding: g.confounding,
            max_days: g.max_days,
            panel: self.panel.clone(),
            outcomes: self.outcomes.clone(),
            ..GenConfig::default()
        }
    }

    pub fn training(&self) -> TrainingConfig {
        let u = &self.uplift;
        TrainingConfig {
            uplift: UpliftSpec {
                learner: u.learner,
                base: u.model().base_spec(),
                x_gate: u.x_gate.map_or(XGate::Propensity, XGate::Constant),
                propensity_l2: u.propensity_l2,
            },
            forecast_base: self.forecast.base_spec(),
        }
    }

    pub fn bandit_params(&self) -> BanditParams {
        let b = &self.bandit;
        BanditParams {
            exploration: match b.mode {
                ExplorationMode::Thompson => Exploration::ThompsonSampling { beta: b.beta },
                ExplorationMode::Ucb => Exploration::Ucb { gamma: b.gamma },
            },
            learning_rate: b.learning_rate,
            gradient_target: b.gradient_target,
            hidden: b.hidden,
            lambda: b.lambda,
            steps_per_update: b.steps_per_update,
            warmup_updates: b.warmup_updates,
        }
    }

    pub fn simulation_config(&self) -> SimulationConfig {
        SimulationConfig { rounds: self.simulation.rounds, alerts_per_day: self.simulation.alerts_per_day, seed: self.seed }
    }

    pub fn ablation_config(&self) -> AblationConfig {
        AblationConfig {
            generator: self.gen_config(),
            training: self.training(),
            params: self.optimizer.clone(),
            variants: salesopt_core::pipeline::Variant::ALL.to_vec(),
            days: self.ablation.days,
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
