//! Synthetic populations with a known structural model.
//!
//! Every downstream layer is checked against the truth exposed here: the
//! individual treatment effect of each account, its next-period engagement,
//! the expected bandit reward of every action in every context, and panels
//! with an injected treatment effect.
//!
//! Outcomes follow `y = baseline(x) + a·τ(x) + ε`, where `τ` is linear in a
//! feature subset and `baseline` is linear plus a smooth nonlinearity on the
//! first two coordinates. All generators are pure functions of the config;
//! per-account draws come from keyed streams so they do not depend on
//! iteration order.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::{
    Account, AccountId, ActionType, BanditContext, Day, FeatureLayout, FeedbackEvent, FeedbackKind,
    Group, PanelObservation, Period, Rep, RepId,
};
use crate::math::{dot, sigmoid, sin, sqrt};
use crate::rng::{self, stream, SimRng};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenError {
    #[error("invalid config: {0}")]
    InvalidConfig(&'static str),
}

/// `τ(x) = intercept + Σ coefs[i] · x[features[i]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSpec {
    pub intercept: f64,
    pub features: Vec<usize>,
    pub coefs: Vec<f64>,
}

impl Default for EffectSpec {
    fn default() -> Self {
        Self { intercept: 0.5, features: vec![1, 2, 3], coefs: vec![1.0, -0.8, 0.5] }
    }
}

impl EffectSpec {
    pub fn zero() -> Self {
        Self { intercept: 0.0, features: Vec::new(), coefs: Vec::new() }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.intercept + self.features.iter().zip(&self.coefs).map(|(&j, c)| c * x[j]).sum::<f64>()
    }
}

/// `baseline(x) = intercept + coefs·x + curvature·(x₀² + sin x₁)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub intercept: f64,
    /// Zero-extended to the feature dimension.
    pub coefs: Vec<f64>,
    pub curvature: f64,
}

impl Default for BaselineSpec {
    fn default() -> Self {
        Self { intercept: 10.0, coefs: vec![1.0, -0.5, 0.8, 0.3, -0.6, 0.4], curvature: 1.0 }
    }
}

impl BaselineSpec {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.coefs.iter().zip(x).map(|(c, v)| c * v).sum();
        let bend = if x.len() >= 2 { self.curvature * (x[0] * x[0] + sin(x[1])) } else { 0.0 };
        self.intercept + lin + bend
    }
}

/// Engagement metrics: current level and next-period change, both linear in
/// the engagement features before clamping to each metric's range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementSpec {
    /// Mean change per period, in metric units (one entry per metric).
    pub drift: Vec<f64>,
    /// Spread of the current level, as a fraction of the metric range.
    pub level_scale: f64,
    /// Feature-driven part of the change, as a fraction of the range.
    pub momentum_scale: f64,
    /// Noise on the change, as a fraction of the range.
    pub noise: f64,
}

impl Default for EngagementSpec {
    fn default() -> Self {
        Self { drift: vec![-2.0, -0.02], level_scale: 0.12, momentum_scale: 0.08, noise: 0.02 }
    }
}

/// Click/dismiss probabilities of one action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ResponseModel {
    Fixed { p_click: f64, p_dismiss: f64 },
    /// `p_click = σ(click_bias + u·x)`, `p_dismiss = (1 − p_click)·σ(dismiss_bias + v·x)`,
    /// with `u`, `v` drawn once per run and scaled by `strength / √dim`.
    Logistic { click_bias: f64, dismiss_bias: f64, strength: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditEnvSpec {
    /// Indexed by [`ActionType::index`].
    pub responses: [ResponseModel; 3],
}

impl Default for BanditEnvSpec {
    fn default() -> Self {
        let r = |click_bias, dismiss_bias| ResponseModel::Logistic { click_bias, dismiss_bias, strength: 2.0 };
        Self { responses: [r(-0.4, -0.8), r(-0.6, -1.0), r(-0.2, -0.6)] }
    }
}

impl BanditEnvSpec {
    /// `best` is clicked with probability 0.9; the others are contextual
    /// and clearly worse.
    pub fn dominant(best: ActionType) -> Self {
        let mut responses = [
            ResponseModel::Logistic { click_bias: -1.0, dismiss_bias: -0.5, strength: 1.5 },
            ResponseModel::Logistic { click_bias: -1.0, dismiss_bias: -0.5, strength: 1.5 },
            ResponseModel::Logistic { click_bias: -1.0, dismiss_bias: -0.5, strength: 1.5 },
        ];
        responses[best.index()] = ResponseModel::Fixed { p_click: 0.9, p_dismiss: 0.05 };
        Self { responses }
    }

    pub fn fixed(p: [(f64, f64); 3]) -> Self {
        Self { responses: p.map(|(p_click, p_dismiss)| ResponseModel::Fixed { p_click, p_dismiss }) }
    }
}

/// Two-group panel of net ratios around an intervention at time 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PanelSpec {
    pub units_per_group: usize,
    pub pre_periods: usize,
    pub post_periods: usize,
    pub level: f64,
    pub group_gap: f64,
    pub trend: f64,
    /// Extra slope of the treated group (0 keeps trends parallel).
    pub divergence: f64,
    pub unit_sd: f64,
    pub noise_sd: f64,
    /// Mean shift of treated covariates.
    pub covariate_shift: f64,
}

impl Default for PanelSpec {
    fn default() -> Self {
        Self {
            units_per_group: 200,
            pre_periods: 6,
            post_periods: 6,
            level: 1.0,
            group_gap: 0.05,
            trend: 0.01,
            divergence: 0.0,
            unit_sd: 0.2,
            noise_sd: 0.1,
            covariate_shift: 0.5,
        }
    }
}

/// Realized business outcomes of outreach, for precision metrics.
///
/// Churn and renewal happen around the renewal date, so the chance that an
/// account churns inside the evaluation window is scaled by
/// `σ((renewal_window − d) / renewal_softness)`. Add-on purchases can close
/// at any time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutcomeSpec {
    pub renewal_window: f64,
    pub renewal_softness: f64,
    pub churn_bias: f64,
    /// Churn logit slope on −τ.
    pub churn_ite: f64,
    /// Churn logit slope on declining engagement.
    pub churn_momentum: f64,
    /// Chance outreach keeps a churning account when τ > 0 / when τ ≤ 0.
    pub recover_positive: f64,
    pub recover_negative: f64,
    pub upsell_bias: f64,
    pub upsell_ite: f64,
    pub upsell_momentum: f64,
}

impl Default for OutcomeSpec {
    fn default() -> Self {
        Self {
            renewal_window: 90.0,
            renewal_softness: 20.0,
            churn_bias: -0.5,
            churn_ite: 1.5,
            churn_momentum: 2.0,
            recover_positive: 0.7,
            recover_negative: 0.3,
            upsell_bias: -1.0,
            upsell_ite: 1.5,
            upsell_momentum: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_accounts: usize,
    pub n_reps: usize,
    pub account_dim: usize,
    pub rep_dim: usize,
    /// Trailing coordinates of `x` used as engagement features.
    pub engagement_dim: usize,
    /// Number of engagement metrics `k`; the first two are utilization
    /// (0–100) and adoption (0–1), further ones are 0–100 scores.
    pub engagement_metrics: usize,
    pub seed: u64,
    pub treatment_share: f64,
    pub noise_sd: f64,
    /// Propensity logit slope on `x₀`; 0 gives a randomized assignment.
    pub confounding: f64,
    pub max_days: i64,
    pub effect: EffectSpec,
    pub baseline: BaselineSpec,
    pub engagement: EngagementSpec,
    pub bandit_env: BanditEnvSpec,
    pub panel: PanelSpec,
    pub outcomes: OutcomeSpec,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_accounts: 1000,
            n_reps: 10,
            account_dim: 6,
            rep_dim: 2,
            engagement_dim: 3,
            engagement_metrics: 2,
            seed: 1,
            treatment_share: 0.5,
            noise_sd: 1.0,
            confounding: 0.0,
            max_days: 365,
            effect: EffectSpec::default(),
            baseline: BaselineSpec::default(),
            engagement: EngagementSpec::default(),
            bandit_env: BanditEnvSpec::default(),
            panel: PanelSpec::default(),
            outcomes: OutcomeSpec::default(),
        }
    }
}

impl GenConfig {
    pub fn check(&self) -> Result<(), GenError> {
        let bad = GenError::InvalidConfig;
        if !(self.treatment_share > 0.0 && self.treatment_share < 1.0) {
            return Err(bad("treatment_share must lie in (0,1)"));
        }
        if self.account_dim == 0 || self.rep_dim == 0 || self.engagement_dim == 0 || self.engagement_metrics == 0 {
            return Err(bad("all dimensions must be at least 1"));
        }
        if self.engagement_dim > self.account_dim {
            return Err(bad("engagement_dim exceeds account_dim"));
        }
        if !(self.noise_sd >= 0.0) {
            return Err(bad("noise_sd must be non-negative"));
        }
        if self.max_days < 0 {
            return Err(bad("max_days must be non-negative"));
        }
        if self.effect.features.len() != self.effect.coefs.len()
            || self.effect.features.iter().any(|&j| j >= self.account_dim)
        {
            return Err(bad("effect features must index account features"));
        }
        if self.engagement.drift.len() < self.engagement_metrics {
            return Err(bad("engagement drift needs one entry per metric"));
        }
        if self.bandit_env.responses.iter().any(|r| match *r {
            ResponseModel::Fixed { p_click, p_dismiss } => {
                !(0.0..=1.0).contains(&p_click) || !(0.0..=1.0).contains(&p_dismiss) || p_click + p_dismiss > 1.0
            }
            ResponseModel::Logistic { .. } => false,
        }) {
            return Err(bad("fixed response probabilities must form a distribution"));
        }
        Ok(())
    }
}

/// Value range of engagement metric `m`.
pub fn metric_range(m: usize) -> (f64, f64) {
    if m == 1 { (0.0, 1.0) } else { (0.0, 100.0) }
}

pub fn metric_name(m: usize) -> alloc::string::String {
    match m {
        0 => "product utilization".into(),
        1 => "product adoption".into(),
        _ => alloc::format!("engagement metric {}", m + 1),
    }
}

/// Per-account realized outcomes of outreach.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizedOutcome {
    pub upsell_closed: bool,
    pub churned_without_outreach: bool,
    pub retained_via_outreach: bool,
    /// Bookings realized with outreach.
    pub bookings: f64,
}

/// The structural model behind a [`GenConfig`].
#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub config: GenConfig,
    level_loadings: Vec<Vec<f64>>,
    momentum_loadings: Vec<Vec<f64>>,
}

impl SyntheticWorld {
    pub fn new(config: GenConfig) -> Result<Self, GenError> {
        config.check()?;
        let mut rng = rng::seeded(config.seed, stream::LAYOUT);
        let e = config.engagement_dim;
        let scale = 1.0 / sqrt(e as f64);
        let draw = |rng: &mut SimRng| (0..e).map(|_| rng::normal(rng) * scale).collect::<Vec<_>>();
        let level_loadings = (0..config.engagement_metrics).map(|_| draw(&mut rng)).collect();
        let momentum_loadings = (0..config.engagement_metrics).map(|_| draw(&mut rng)).collect();
        Ok(Self { config, level_loadings, momentum_loadings })
    }

    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout::full(self.config.account_dim, self.config.engagement_dim)
    }

    pub fn true_ite(&self, x: &[f64]) -> f64 {
        self.config.effect.eval(x)
    }

    pub fn baseline(&self, x: &[f64]) -> f64 {
        self.config.baseline.eval(x)
    }

    /// Probability of treatment in the historical data.
    pub fn propensity(&self, x: &[f64]) -> f64 {
        let s = self.config.treatment_share;
        sigmoid(crate::math::ln(s / (1.0 - s)) + self.config.confounding * x[0])
    }

    fn current_engagement(&self, x_e: &[f64]) -> Vec<f64> {
        let spec = &self.config.engagement;
        (0..self.config.engagement_metrics)
            .map(|m| {
                let (lo, hi) = metric_range(m);
                let mid = 0.5 * (lo + hi);
                (mid + (hi - lo) * spec.level_scale * dot(&self.level_loadings[m], x_e)).clamp(lo, hi)
            })
            .collect()
    }

    /// Expected next-period engagement given features and current levels.
    pub fn expected_next_engagement(&self, account: &Account) -> Vec<f64> {
        let spec = &self.config.engagement;
        let x_e = account.x_e();
        (0..self.config.engagement_metrics)
            .map(|m| {
                let (lo, hi) = metric_range(m);
                let change = spec.drift[m] + (hi - lo) * spec.momentum_scale * dot(&self.momentum_loadings[m], &x_e);
                (account.engagement[m] + change).clamp(lo, hi)
            })
            .collect()
    }

    /// Realized next-period engagement (expected value plus noise).
    pub fn next_engagement(&self, account: &Account) -> Vec<f64> {
        let spec = &self.config.engagement;
        let mut rng = rng::keyed(self.config.seed, stream::ENGAGEMENT, account.id.0);
        let x_e = account.x_e();
        (0..self.config.engagement_metrics)
            .map(|m| {
                let (lo, hi) = metric_range(m);
                let change = spec.drift[m]
                    + (hi - lo) * spec.momentum_scale * dot(&self.momentum_loadings[m], &x_e)
                    + (hi - lo) * spec.noise * rng::normal(&mut rng);
                (account.engagement[m] + change).clamp(lo, hi)
            })
            .collect()
    }

    /// Accounts and reps of the configured population.
    pub fn generate_population(&self) -> (Vec<Account>, Vec<Rep>) {
        let c = &self.config;
        let layout = self.layout();
        let accounts = (0..c.n_accounts)
            .map(|i| {
                let id = AccountId(i as u64 + 1);
                let mut rng = rng::keyed(c.seed, stream::ACCOUNTS, id.0);
                let x: Vec<f64> = (0..c.account_dim).map(|_| rng::normal(&mut rng)).collect();
                let d = (rng::uniform(&mut rng) * (c.max_days + 1) as f64) as i64;
                let x_e: Vec<f64> = layout.engagement.iter().map(|&j| x[j]).collect();
                let engagement = self.current_engagement(&x_e);
                let true_ite = Some(self.true_ite(&x));
                Account { id, x, layout: layout.clone(), d: d.min(c.max_days), engagement, true_ite }
            })
            .collect();
        let mut rng = rng::seeded(c.seed, stream::REPS);
        let reps = (0..c.n_reps)
            .map(|j| Rep { id: RepId(j as u32 + 1), s: (0..c.rep_dim).map(|_| rng::normal(&mut rng)).collect() })
            .collect();
        (accounts, reps)
    }

    /// Historical treatment indicators drawn from [`SyntheticWorld::propensity`].
    pub fn assign_treatment(&self, accounts: &[Account]) -> Vec<u8> {
        accounts
            .iter()
            .map(|a| {
                let mut rng = rng::keyed(self.config.seed, stream::TREATMENT, a.id.0);
                u8::from(rng::bernoulli(&mut rng, self.propensity(&a.x)))
            })
            .collect()
    }

    /// `y = baseline(x) + a·τ(x) + noise`. The noise draw is keyed by account,
    /// so `y(1) − y(0) = τ(x)` holds per account at any noise level.
    pub fn simulate_outcomes(&self, accounts: &[Account], treatment: &[u8]) -> Vec<f64> {
        assert_eq!(accounts.len(), treatment.len(), "assignment must cover all accounts");
        accounts
            .iter()
            .zip(treatment)
            .map(|(acc, &a)| {
                let mut rng = rng::keyed(self.config.seed, stream::OUTCOME_NOISE, acc.id.0);
                let tau = acc.true_ite.unwrap_or_else(|| self.true_ite(&acc.x));
                self.baseline(&acc.x) + f64::from(a) * tau + self.config.noise_sd * rng::normal(&mut rng)
            })
            .collect()
    }

    /// Sum over metrics of the expected change, each scaled to its range.
    pub fn engagement_momentum(&self, account: &Account) -> f64 {
        self.expected_next_engagement(account)
            .iter()
            .zip(&account.engagement)
            .enumerate()
            .map(|(m, (next, now))| {
                let (lo, hi) = metric_range(m);
                (next - now) / (hi - lo)
            })
            .sum()
    }

    pub fn renewal_proximity(&self, d: i64) -> f64 {
        let o = &self.config.outcomes;
        sigmoid((o.renewal_window - d as f64) / o.renewal_softness)
    }

    pub fn churn_probability(&self, account: &Account) -> f64 {
        let o = &self.config.outcomes;
        let tau = self.true_ite(&account.x);
        let m = self.engagement_momentum(account);
        self.renewal_proximity(account.d) * sigmoid(o.churn_bias - o.churn_ite * tau - o.churn_momentum * m * 10.0)
    }

    pub fn upsell_probability(&self, account: &Account) -> f64 {
        let o = &self.config.outcomes;
        let tau = self.true_ite(&account.x);
        let m = self.engagement_momentum(account);
        sigmoid(o.upsell_bias + o.upsell_ite * tau + o.upsell_momentum * m * 10.0)
    }

    /// Draws the realized outcome of reaching out to `account`.
    pub fn realize(&self, account: &Account) -> RealizedOutcome {
        let o = &self.config.outcomes;
        let mut rng = rng::keyed(self.config.seed, stream::REALIZED, account.id.0);
        let tau = self.true_ite(&account.x);
        let churned = rng::bernoulli(&mut rng, self.churn_probability(account));
        let p_recover = if tau > 0.0 { o.recover_positive } else { o.recover_negative };
        let recovered = rng::bernoulli(&mut rng, p_recover);
        let upsell = rng::bernoulli(&mut rng, self.upsell_probability(account));
        let bookings = self.simulate_outcomes(core::slice::from_ref(account), &[1])[0];
        RealizedOutcome {
            upsell_closed: upsell,
            churned_without_outreach: churned,
            retained_via_outreach: churned && recovered,
            bookings,
        }
    }

    /// Bandit environment over this population.
    pub fn bandit_env(&self) -> BanditEnv {
        BanditEnv::new(
            self.config.bandit_env.clone(),
            self.config.account_dim + self.config.rep_dim + crate::domain::AlertHistory::DIM,
            self.config.seed,
        )
    }

    /// Two-group panel with `injected_effect` added to treated post-period
    /// outcomes. Trends are parallel unless `panel.divergence ≠ 0`.
    pub fn generate_panel(&self, injected_effect: f64) -> Vec<PanelObservation> {
        generate_panel(&self.config.panel, self.config.seed, injected_effect)
    }
}

/// Free-standing panel generator (see [`SyntheticWorld::generate_panel`]).
pub fn generate_panel(spec: &PanelSpec, seed: u64, injected_effect: f64) -> Vec<PanelObservation> {
    assert!(injected_effect.is_finite(), "injected effect must be finite");
    let mut rng = rng::seeded(seed, stream::PANEL);
    let pre = spec.pre_periods as i32;
    let post = spec.post_periods as i32;
    let mut out = Vec::with_capacity(2 * spec.units_per_group * (spec.pre_periods + spec.post_periods));
    for (g, group) in [Group::Treat, Group::Ctrl].into_iter().enumerate() {
        let treated = group == Group::Treat;
        let shift = if treated { spec.covariate_shift } else { 0.0 };
        for u in 0..spec.units_per_group {
            let unit_id = (g * spec.units_per_group + u) as u64 + 1;
            let covariates: Vec<f64> = (0..3).map(|_| shift + rng::normal(&mut rng)).collect();
            let unit_effect = 0.1 * covariates[0] + spec.unit_sd * rng::normal(&mut rng);
            for t in -pre..post {
                let period = if t < 0 { Period::Pre } else { Period::Post };
                let tf = f64::from(t);
                let mut y = spec.level + unit_effect + spec.trend * tf;
                if treated {
                    y += spec.group_gap + spec.divergence * tf;
                    if period == Period::Post {
                        y += injected_effect;
                    }
                }
                y += spec.noise_sd * rng::normal(&mut rng);
                out.push(PanelObservation { unit_id, group, time: t, period, outcome: y, covariates: covariates.clone() });
            }
        }
    }
    out
}

/// Identifies the (rep, account, day) a simulated feedback belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventKey {
    pub rep_id: RepId,
    pub account_id: AccountId,
    pub t: Day,
}

/// Response side of the bandit simulation: the unknown reward function.
#[derive(Debug, Clone)]
pub struct BanditEnv {
    spec: BanditEnvSpec,
    dim: usize,
    click_w: [Vec<f64>; 3],
    dismiss_w: [Vec<f64>; 3],
}

impl BanditEnv {
    pub fn new(spec: BanditEnvSpec, dim: usize, seed: u64) -> Self {
        let mut rng = rng::seeded(seed, stream::BANDIT_ENV);
        let mut draw = |strength: f64| {
            let s = strength / sqrt(dim as f64);
            (0..dim).map(|_| rng::normal(&mut rng) * s).collect::<Vec<_>>()
        };
        let strength = |r: &ResponseModel| match *r {
            ResponseModel::Logistic { strength, .. } => strength,
            ResponseModel::Fixed { .. } => 0.0,
        };
        let click_w = [draw(strength(&spec.responses[0])), draw(strength(&spec.responses[1])), draw(strength(&spec.responses[2]))];
        let dismiss_w = [draw(strength(&spec.responses[0])), draw(strength(&spec.responses[1])), draw(strength(&spec.responses[2]))];
        Self { spec, dim, click_w, dismiss_w }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(p_click, p_dismiss)` for `action` in context `x`.
    pub fn probabilities(&self, x: &[f64], action: ActionType) -> (f64, f64) {
        let a = action.index();
        match self.spec.responses[a] {
            ResponseModel::Fixed { p_click, p_dismiss } => (p_click, p_dismiss),
            ResponseModel::Logistic { click_bias, dismiss_bias, .. } => {
                let pc = sigmoid(click_bias + dot(&self.click_w[a], x));
                let pd = (1.0 - pc) * sigmoid(dismiss_bias + dot(&self.dismiss_w[a], x));
                (pc, pd)
            }
        }
    }

    /// True expected reward `p_click − p_dismiss`.
    pub fn expected_reward(&self, x: &[f64], action: ActionType) -> f64 {
        let (pc, pd) = self.probabilities(x, action);
        pc - pd
    }

    pub fn best_action(&self, x: &[f64]) -> ActionType {
        let mut best = ActionType::ALL[0];
        let mut best_v = f64::NEG_INFINITY;
        for a in ActionType::ALL {
            let v = self.expected_reward(x, a);
            if v > best_v {
                best = a;
                best_v = v;
            }
        }
        best
    }

    /// Samples the rep's response to `action` shown in `context`.
    pub fn sample_feedback(&self, x: &[f64], action: ActionType, rng: &mut SimRng) -> FeedbackKind {
        let (pc, pd) = self.probabilities(x, action);
        let u = rng::uniform(rng);
        if u < pc {
            FeedbackKind::DeepLinkClicked
        } else if u < pc + pd {
            FeedbackKind::NotificationDismissed
        } else {
            FeedbackKind::NoClick
        }
    }

    pub fn simulate_feedback(
        &self,
        context: &BanditContext,
        action: ActionType,
        key: EventKey,
        rng: &mut SimRng,
    ) -> FeedbackEvent {
        let kind = self.sample_feedback(&context.vector(), action, rng);
        FeedbackEvent::new(key.rep_id, key.account_id, action, kind, key.t)
    }
}

/// Convenience: world and population in one call.
pub fn generate_population(config: &GenConfig) -> Result<(Vec<Account>, Vec<Rep>), GenError> {
    Ok(SyntheticWorld::new(config.clone())?.generate_population())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mean, std_dev};

    fn small(seed: u64) -> GenConfig {
        GenConfig { n_accounts: 200, n_reps: 3, seed, ..GenConfig::default() }
    }

    #[test]
    fn same_seed_same_population() {
        assert_eq!(generate_population(&small(1)).unwrap(), generate_population(&small(1)).unwrap());
        assert_ne!(generate_population(&small(1)).unwrap().0, generate_population(&small(2)).unwrap().0);
    }

    #[test]
    fn zero_effect_gives_zero_ite() {
        let cfg = GenConfig { effect: EffectSpec::zero(), ..small(3) };
        let (accounts, _) = generate_population(&cfg).unwrap();
        assert!(accounts.iter().all(|a| a.true_ite == Some(0.0)));
    }

    #[test]
    fn population_sizes_and_validity() {
        let (accounts, reps) = generate_population(&small(4)).unwrap();
        assert_eq!(accounts.len(), 200);
        assert_eq!(reps.len(), 3);
        for a in &accounts {
            assert!(crate::domain::validate(a).is_ok());
            assert!((0..=365).contains(&a.d));
        }
    }

    #[test]
    fn mean_ite_matches_analytic_mean() {
        // Features are iid N(0,1), so E[τ] is the intercept and
        // sd(τ) = ‖coefs‖.
        let cfg = GenConfig { n_accounts: 1000, ..small(5) };
        let (accounts, _) = generate_population(&cfg).unwrap();
        let ites: Vec<f64> = accounts.iter().map(|a| a.true_ite.unwrap()).collect();
        let sd = sqrt(cfg.effect.coefs.iter().map(|c| c * c).sum::<f64>());
        let se = sd / sqrt(ites.len() as f64);
        assert!((mean(&ites) - cfg.effect.intercept).abs() < 3.0 * se);
        assert!((std_dev(&ites) - sd).abs() < 0.1 * sd);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(SyntheticWorld::new(GenConfig { treatment_share: 1.0, ..small(1) }).is_err());
        assert!(SyntheticWorld::new(GenConfig { rep_dim: 0, ..small(1) }).is_err());
        let env = BanditEnvSpec::fixed([(0.7, 0.5), (0.0, 0.0), (0.0, 0.0)]);
        assert!(SyntheticWorld::new(GenConfig { bandit_env: env, ..small(1) }).is_err());
    }

    #[test]
    fn noiseless_outcomes_are_structural() {
        let world = SyntheticWorld::new(GenConfig { noise_sd: 0.0, ..small(6) }).unwrap();
        let (accounts, _) = world.generate_population();
        let y0 = world.simulate_outcomes(&accounts, &vec![0; accounts.len()]);
        let y1 = world.simulate_outcomes(&accounts, &vec![1; accounts.len()]);
        for (i, a) in accounts.iter().enumerate() {
            assert_eq!(y0[i], world.baseline(&a.x));
            assert!((y1[i] - y0[i] - a.true_ite.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_feedback_distributions() {
        let env = BanditEnv::new(BanditEnvSpec::fixed([(1.0, 0.0), (0.0, 0.0), (0.0, 1.0)]), 4, 1);
        let mut rng = rng::seeded(1, 99);
        let x = [0.0; 4];
        for _ in 0..100 {
            assert_eq!(env.sample_feedback(&x, ActionType::BoostEngagement, &mut rng), FeedbackKind::DeepLinkClicked);
            assert_eq!(env.sample_feedback(&x, ActionType::PreventChurn, &mut rng), FeedbackKind::NoClick);
            assert_eq!(env.sample_feedback(&x, ActionType::PromoteUpsell, &mut rng), FeedbackKind::NotificationDismissed);
        }
        let ctx = BanditContext { x_a: vec![0.0; 2], x_s: vec![0.0], x_r: vec![0.0] };
        let key = EventKey { rep_id: RepId(1), account_id: AccountId(1), t: 0 };
        let e = env.simulate_feedback(&ctx, ActionType::BoostEngagement, key, &mut rng);
        assert_eq!((e.feedback, e.reward), (FeedbackKind::DeepLinkClicked, 1));
        let e = env.simulate_feedback(&ctx, ActionType::PreventChurn, key, &mut rng);
        assert_eq!((e.feedback, e.reward), (FeedbackKind::NoClick, 0));
    }

    #[test]
    fn feedback_frequencies_match_probabilities() {
        let env = BanditEnv::new(BanditEnvSpec::fixed([(0.6, 0.1), (0.6, 0.1), (0.6, 0.1)]), 1, 1);
        let mut rng = rng::seeded(11, 99);
        let mut counts = [0usize; 3];
        let n = 10_000;
        for _ in 0..n {
            counts[env.sample_feedback(&[0.0], ActionType::PreventChurn, &mut rng).index()] += 1;
        }
        let f = counts.map(|c| c as f64 / n as f64);
        assert!((f[0] - 0.6).abs() < 0.02, "{f:?}");
        assert!((f[1] - 0.1).abs() < 0.02, "{f:?}");
        assert!((f[2] - 0.3).abs() < 0.02, "{f:?}");
    }

    #[test]
    fn engagement_stays_in_range() {
        let world = SyntheticWorld::new(small(8)).unwrap();
        let (accounts, _) = world.generate_population();
        for a in &accounts {
            for (m, (now, next)) in a.engagement.iter().zip(world.next_engagement(a)).enumerate() {
                let (lo, hi) = metric_range(m);
                assert!((lo..=hi).contains(now) && (lo..=hi).contains(&next));
            }
        }
    }
}
