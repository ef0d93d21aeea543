//! Optimization layer: score weighting, eligibility with cooldown, the
//! account-to-rep assignment LP, rank assignment and rule-based actions.

pub mod simplex;

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use simplex::{LinearProgram, LpError, LpResult, Row, Sense};

use crate::domain::{AccountId, ActionType, AssignmentMatrix, Day, Rep, RepId, ScoredAccount};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Combiner {
    Or,
    And,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssignmentMode {
    /// `Σ_j a_ij ≤ 1`
    AtMostOne,
    /// `Σ_j a_ij = 1`
    ExactlyOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerParams {
    /// Sigmoid sharpness; negative favors uplift for accounts close to renewal.
    pub k: f64,
    /// Sigmoid center in days.
    pub d0: f64,
    pub n_min: u32,
    pub n_max: u32,
    pub t_u: f64,
    pub t_e: f64,
    pub cooldown_days: i64,
    pub combiner: Combiner,
    pub assignment_mode: AssignmentMode,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        Self {
            k: -0.05,
            d0: 90.0,
            n_min: 0,
            n_max: 5,
            t_u: 60.0,
            t_e: 60.0,
            cooldown_days: 14,
            combiner: Combiner::Or,
            assignment_mode: AssignmentMode::AtMostOne,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OptimizeError {
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("capacity infeasible: {accounts} accounts cannot fit {reps} reps with bounds [{n_min}, {n_max}]")]
    Capacity { accounts: usize, reps: usize, n_min: u32, n_max: u32 },
    #[error("engagement change vector is empty")]
    NoEngagementMetrics,
    #[error(transparent)]
    Lp(#[from] LpError),
}

impl OptimizerParams {
    pub fn check(&self) -> Result<(), OptimizeError> {
        if self.n_min > self.n_max {
            return Err(OptimizeError::InvalidParams("n_min exceeds n_max"));
        }
        if self.cooldown_days < 0 {
            return Err(OptimizeError::InvalidParams("cooldown_days must be non-negative"));
        }
        if !self.k.is_finite() || !self.d0.is_finite() {
            return Err(OptimizeError::InvalidParams("k and d0 must be finite"));
        }
        Ok(())
    }
}

/// `w(d) = 1 / (1 + exp(−k·(d − d0)))`, the weight on monetization uplift.
pub fn weight(d: f64, k: f64, d0: f64) -> f64 {
    crate::math::sigmoid(k * (d - d0))
}

/// Largest absolute engagement change.
pub fn engagement_diff(delta_e: &[f64]) -> Result<f64, OptimizeError> {
    if delta_e.is_empty() {
        return Err(OptimizeError::NoEngagementMetrics);
    }
    Ok(delta_e.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Min–max maps `y_u_raw` and `y_e_raw` over the pool onto [0, 100]; a
/// constant vector maps to 50.
pub fn normalize_scores(pool: &mut [ScoredAccount]) {
    fn scale(values: Vec<f64>) -> Vec<f64> {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return vec![50.0; values.len()];
        }
        values.iter().map(|v| 100.0 * ((v - lo) / (hi - lo))).collect()
    }
    let u = scale(pool.iter().map(|s| s.y_u_raw).collect());
    let e = scale(pool.iter().map(|s| s.y_e_raw).collect());
    for (s, (u, e)) in pool.iter_mut().zip(u.into_iter().zip(e)) {
        s.y_u = u;
        s.y_e = e;
    }
}

/// Days on which each account was served a recommendation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ServedLog {
    days: BTreeMap<AccountId, Vec<Day>>,
}

impl ServedLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, account: AccountId, day: Day) {
        let days = self.days.entry(account).or_default();
        if let Err(pos) = days.binary_search(&day) {
            days.insert(pos, day);
        }
    }

    pub fn from_recommendations<'a>(recs: impl IntoIterator<Item = &'a crate::domain::Recommendation>) -> Self {
        let mut log = Self::new();
        for r in recs {
            log.record(r.account_id, r.created_at);
        }
        log
    }

    /// True if the account was served on any day in `[today − window, today − 1]`.
    pub fn in_cooldown(&self, account: AccountId, today: Day, window: i64) -> bool {
        self.days
            .get(&account)
            .is_some_and(|days| days.iter().any(|&d| d >= today - window && d < today))
    }
}

fn passes_thresholds(s: &ScoredAccount, p: &OptimizerParams) -> bool {
    let u = s.y_u > p.t_u;
    let e = s.y_e > p.t_e;
    match p.combiner {
        Combiner::Or => u || e,
        Combiner::And => u && e,
    }
}

/// Keeps accounts whose normalized scores exceed the thresholds and that
/// were not served within the cooldown window before `today`.
pub fn eligibility_filter(pool: &[ScoredAccount], served: &ServedLog, p: &OptimizerParams, today: Day) -> Vec<ScoredAccount> {
    pool.iter()
        .filter(|s| passes_thresholds(s, p) && !served.in_cooldown(s.account_id, today, p.cooldown_days))
        .cloned()
        .collect()
}

/// `c_i = w(d_i)·y_u + (1 − w(d_i))·y_e`.
pub fn objective_coef(s: &ScoredAccount, p: &OptimizerParams) -> f64 {
    objective_coef_with_weight(s, weight(s.d as f64, p.k, p.d0))
}

pub fn objective_coef_with_weight(s: &ScoredAccount, w: f64) -> f64 {
    w * s.y_u + (1.0 - w) * s.y_e
}

/// Variations of the assignment LP used by ablations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpOptions {
    /// Use this constant instead of `w(d)`.
    pub weight_override: Option<f64>,
    /// Include the per-rep capacity rows.
    pub capacity: bool,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self { weight_override: None, capacity: true }
    }
}

/// Assignment LP over `a_ij`, variable `i·M + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpInstance {
    pub accounts: Vec<AccountId>,
    pub reps: Vec<RepId>,
    /// Per-account objective coefficient, shared by all reps.
    pub coefs: Vec<f64>,
    pub program: LinearProgram,
}

impl LpInstance {
    pub fn var(&self, i: usize, j: usize) -> usize {
        i * self.reps.len() + j
    }
}

pub fn build_lp(pool: &[ScoredAccount], reps: &[Rep], p: &OptimizerParams) -> Result<LpInstance, OptimizeError> {
    build_lp_with(pool, reps, p, &LpOptions::default())
}

pub fn build_lp_with(pool: &[ScoredAccount], reps: &[Rep], p: &OptimizerParams, opts: &LpOptions) -> Result<LpInstance, OptimizeError> {
    p.check()?;
    if pool.is_empty() {
        return Err(OptimizeError::Empty("account pool"));
    }
    if reps.is_empty() {
        return Err(OptimizeError::Empty("rep list"));
    }
    let (n, m) = (pool.len(), reps.len());
    let over = n > m * p.n_max as usize && p.assignment_mode == AssignmentMode::ExactlyOne;
    if opts.capacity && (over || n < m * p.n_min as usize) {
        return Err(OptimizeError::Capacity { accounts: n, reps: m, n_min: p.n_min, n_max: p.n_max });
    }
    let coefs: Vec<f64> = pool
        .iter()
        .map(|s| match opts.weight_override {
            Some(w) => objective_coef_with_weight(s, w),
            None => objective_coef(s, p),
        })
        .collect();
    let objective: Vec<f64> = coefs.iter().flat_map(|&c| core::iter::repeat_n(c, m)).collect();
    let mut rows = Vec::with_capacity(n + 2 * m);
    let sense = match p.assignment_mode {
        AssignmentMode::AtMostOne => Sense::Le,
        AssignmentMode::ExactlyOne => Sense::Eq,
    };
    for i in 0..n {
        rows.push(Row { coefs: (0..m).map(|j| (i * m + j, 1.0)).collect(), sense, rhs: 1.0 });
    }
    for j in (0..m).filter(|_| opts.capacity) {
        let coefs: Vec<(usize, f64)> = (0..n).map(|i| (i * m + j, 1.0)).collect();
        rows.push(Row { coefs: coefs.clone(), sense: Sense::Le, rhs: f64::from(p.n_max) });
        if p.n_min > 0 {
            rows.push(Row { coefs, sense: Sense::Ge, rhs: f64::from(p.n_min) });
        }
    }
    Ok(LpInstance {
        accounts: pool.iter().map(|s| s.account_id).collect(),
        reps: reps.iter().map(|r| r.id).collect(),
        coefs,
        program: LinearProgram { objective, upper: vec![1.0; n * m], rows },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub assignment: AssignmentMatrix,
    pub objective: f64,
    pub iterations: usize,
}

pub fn solve_lp(lp: &LpInstance) -> Result<LpSolution, OptimizeError> {
    let r = simplex::solve(&lp.program)?;
    Ok(LpSolution {
        assignment: AssignmentMatrix { accounts: lp.accounts.clone(), reps: lp.reps.clone(), entries: r.x },
        objective: r.objective,
        iterations: r.iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub account_id: AccountId,
    pub rep_id: RepId,
    pub a_value: f64,
    pub coef: f64,
    pub g_rank: u32,
    pub r_rank: u32,
}

/// Pairs with `a_ij ≥ 0.5`, ordered by `a` descending, then objective
/// coefficient descending, then account id. `r_rank` restarts per rep.
pub fn match_and_rank(assignment: &AssignmentMatrix, coefs: &[f64]) -> Vec<MatchedPair> {
    let m = assignment.reps.len();
    let mut pairs: Vec<MatchedPair> = Vec::new();
    for (i, &account_id) in assignment.accounts.iter().enumerate() {
        for j in 0..m {
            let a = assignment.get(i, j);
            if a >= 0.5 {
                pairs.push(MatchedPair { account_id, rep_id: assignment.reps[j], a_value: a, coef: coefs[i], g_rank: 0, r_rank: 0 });
            }
        }
    }
    pairs.sort_by(|x, y| {
        y.a_value.total_cmp(&x.a_value).then(y.coef.total_cmp(&x.coef)).then(x.account_id.cmp(&y.account_id))
    });
    let mut per_rep: BTreeMap<RepId, u32> = BTreeMap::new();
    for (g, pair) in pairs.iter_mut().enumerate() {
        pair.g_rank = g as u32 + 1;
        let r = per_rep.entry(pair.rep_id).or_insert(0);
        *r += 1;
        pair.r_rank = *r;
    }
    pairs
}

/// Rule-based action choice.
///
/// `M = w(d)·y_u`, `E = (1 − w(d))·y_e`. If `M ≤ E`, engagement is boosted
/// when `min|Δ| ≥ max|Δ|` and upsell promoted otherwise; if `M > E`, the
/// sign of the raw uplift picks upsell or churn prevention. The engagement
/// branch is kept exactly as stated even though it only fires when all
/// changes have equal magnitude.
pub fn recommend_action(s: &ScoredAccount, p: &OptimizerParams) -> ActionType {
    recommend_action_with_weight(s, weight(s.d as f64, p.k, p.d0))
}

pub fn recommend_action_with_weight(s: &ScoredAccount, w: f64) -> ActionType {
    let m = w * s.y_u;
    let e = (1.0 - w) * s.y_e;
    if m <= e {
        let lo = s.delta_e.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
        let hi = s.delta_e.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
        if lo >= hi { ActionType::BoostEngagement } else { ActionType::PromoteUpsell }
    } else if s.y_u_raw > 0.0 {
        ActionType::PromoteUpsell
    } else {
        ActionType::PreventChurn
    }
}
