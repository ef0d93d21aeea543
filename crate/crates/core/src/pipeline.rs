//! One serving day: score every account, normalize over the pool, filter
//! by thresholds and cooldown, solve the assignment LP, rank the matches,
//! choose an action (rule-based, or the bandit once warm) and render the
//! alert text.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bandit::NeuralBandit;
use crate::datagen::{metric_name, SyntheticWorld};
use crate::domain::{Account, AccountId, ActionType, AlertHistory, BanditContext, Day, Rep, RepId, ScoredAccount};
use crate::domain::Recommendation;
use crate::explain::{render_template, AlertKind, ExplainError, Slots};
use crate::forecast::{EngagementModel, ForecastError};
use crate::linalg::Matrix;
use crate::optimizer::{
    self, build_lp_with, eligibility_filter, match_and_rank, normalize_scores, recommend_action_with_weight, weight,
    LpOptions, MatchedPair, OptimizeError, OptimizerParams, ServedLog,
};
use crate::rng::SimRng;
use crate::uplift::{fit_uplift, BaseSpec, UpliftError, UpliftModel, UpliftSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Uplift(#[from] UpliftError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error("unknown account {0}")]
    UnknownAccount(AccountId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    Full,
    /// `w ≡ 0.5` in the objective and the action rule.
    NoWeighting,
    /// Per-rep capacity rows removed from the LP.
    NoCapacity,
    /// Action is upsell when raw uplift is positive, churn prevention otherwise.
    SimplifiedRules,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::NoWeighting, Variant::NoCapacity, Variant::SimplifiedRules];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Full => "Full",
            Variant::NoWeighting => "A_NoWeighting",
            Variant::NoCapacity => "B_NoCapacity",
            Variant::SimplifiedRules => "C_SimplifiedRules",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Models {
    pub uplift: UpliftModel,
    pub engagement: EngagementModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub uplift: UpliftSpec,
    pub forecast_base: BaseSpec,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self { uplift: UpliftSpec::default(), forecast_base: BaseSpec::default() }
    }
}

/// Fits the uplift model on historical randomized outreach and the
/// engagement forecasters on next-period engagement, both from `world`.
pub fn train_models(world: &SyntheticWorld, accounts: &[Account], cfg: &TrainingConfig) -> Result<Models, PipelineError> {
    let x_u = Matrix::from_rows(&accounts.iter().map(Account::x_u).collect::<Vec<_>>());
    let a = world.assign_treatment(accounts);
    let y = world.simulate_outcomes(accounts, &a);
    let uplift = fit_uplift(&cfg.uplift, &x_u, &a, &y)?;
    let x_e = Matrix::from_rows(&accounts.iter().map(Account::x_e).collect::<Vec<_>>());
    let next: Vec<Vec<f64>> = accounts.iter().map(|acc| world.next_engagement(acc)).collect();
    let engagement = EngagementModel::fit(&x_e, &next, &cfg.forecast_base)?;
    Ok(Models { uplift, engagement })
}

/// Raw scores (`y_u`, `y_e` are filled by [`normalize_scores`]).
pub fn score_accounts(models: &Models, accounts: &[Account]) -> Result<Vec<ScoredAccount>, PipelineError> {
    accounts
        .iter()
        .map(|acc| {
            let delta_e = models.engagement.forecast_delta(acc)?;
            Ok(ScoredAccount {
                account_id: acc.id,
                d: acc.d,
                y_u_raw: models.uplift.predict_ite(&acc.x_u()),
                y_e_raw: optimizer::engagement_diff(&delta_e)?,
                delta_e,
                y_u: 0.0,
                y_e: 0.0,
            })
        })
        .collect()
}

/// Alert text for `action`. Engagement alerts name the metric with the
/// largest predicted change.
pub fn explanation(account: &Account, scored: &ScoredAccount, action: ActionType) -> Result<String, ExplainError> {
    let kind = AlertKind::for_action(action);
    let mut slots = Slots { d: Some(scored.d), ..Slots::default() };
    match kind {
        AlertKind::LowEngagement => {
            let m = (0..scored.delta_e.len())
                .max_by(|&a, &b| scored.delta_e[a].abs().total_cmp(&scored.delta_e[b].abs()).then(b.cmp(&a)))
                .unwrap_or(0);
            slots.product = Some(metric_name(m));
            slots.y = account.engagement.get(m).copied();
            slots.delta_y = scored.delta_e.get(m).copied();
        }
        AlertKind::UpsellFlag => slots.delta_y = Some(scored.y_u_raw),
        AlertKind::ChurnFlag => {}
    }
    render_template(kind, &slots)
}

/// Bandit inputs for one day.
pub struct PolicyInput<'a> {
    pub bandit: &'a NeuralBandit,
    pub histories: &'a BTreeMap<(RepId, AccountId), AlertHistory>,
    pub rng: &'a mut SimRng,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayPlan {
    pub today: Day,
    pub recommendations: Vec<Recommendation>,
    /// Bandit context of each recommendation, same order.
    pub contexts: Vec<Vec<f64>>,
    /// Scores of each recommended account, same order.
    pub scored: Vec<ScoredAccount>,
    pub matched: Vec<MatchedPair>,
    pub pool_size: usize,
    pub eligible: usize,
    pub objective: f64,
}

pub struct DayRequest<'a> {
    pub accounts: &'a [Account],
    pub reps: &'a [Rep],
    pub models: &'a Models,
    pub params: &'a OptimizerParams,
    pub variant: Variant,
    pub served: &'a ServedLog,
    pub today: Day,
}

pub fn run_day(req: &DayRequest<'_>, policy: Option<PolicyInput<'_>>) -> Result<DayPlan, PipelineError> {
    let mut pool = score_accounts(req.models, req.accounts)?;
    normalize_scores(&mut pool);
    let eligible = eligibility_filter(&pool, req.served, req.params, req.today);
    let empty = DayPlan {
        today: req.today,
        recommendations: Vec::new(),
        contexts: Vec::new(),
        scored: Vec::new(),
        matched: Vec::new(),
        pool_size: pool.len(),
        eligible: eligible.len(),
        objective: 0.0,
    };
    if eligible.is_empty() || req.reps.is_empty() {
        return Ok(empty);
    }
    let opts = LpOptions {
        weight_override: (req.variant == Variant::NoWeighting).then_some(0.5),
        capacity: req.variant != Variant::NoCapacity,
    };
    let lp = build_lp_with(&eligible, req.reps, req.params, &opts)?;
    let sol = optimizer::solve_lp(&lp)?;
    let matched = match_and_rank(&sol.assignment, &lp.coefs);

    let by_id: BTreeMap<AccountId, &Account> = req.accounts.iter().map(|a| (a.id, a)).collect();
    let scored_by_id: BTreeMap<AccountId, &ScoredAccount> = eligible.iter().map(|s| (s.account_id, s)).collect();
    let reps_by_id: BTreeMap<RepId, &Rep> = req.reps.iter().map(|r| (r.id, r)).collect();
    let mut plan = DayPlan { matched: matched.clone(), objective: sol.objective, ..empty };
    let mut policy = policy;
    for pair in &matched {
        let account = *by_id.get(&pair.account_id).ok_or(PipelineError::UnknownAccount(pair.account_id))?;
        let scored = scored_by_id[&pair.account_id];
        let rep = reps_by_id[&pair.rep_id];
        let w = match req.variant {
            Variant::NoWeighting => 0.5,
            _ => weight(scored.d as f64, req.params.k, req.params.d0),
        };
        let rule_action = match req.variant {
            Variant::SimplifiedRules => {
                if scored.y_u_raw > 0.0 { ActionType::PromoteUpsell } else { ActionType::PreventChurn }
            }
            _ => recommend_action_with_weight(scored, w),
        };
        let history = policy
            .as_ref()
            .and_then(|p| p.histories.get(&(rep.id, account.id)).cloned())
            .unwrap_or_default();
        let context = BanditContext::new(account, rep, &history, req.today).vector();
        let action = match policy.as_mut() {
            Some(p) if p.bandit.updates >= p.bandit.params.warmup_updates => p.bandit.select_action(&context, p.rng).action,
            _ => rule_action,
        };
        plan.recommendations.push(Recommendation {
            account_id: account.id,
            rep_id: rep.id,
            action,
            cold_start_action: rule_action,
            g_rank: pair.g_rank,
            r_rank: pair.r_rank,
            a_value: pair.a_value,
            explanation: explanation(account, scored, action)?,
            created_at: req.today,
        });
        plan.contexts.push(context);
        plan.scored.push(scored.clone());
    }
    Ok(plan)
}
