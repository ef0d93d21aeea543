//! Offline and observational evaluation: net ratio, difference-in-differences
//! with placebo pre-tests, coarsened exact matching, precision metrics and
//! the ablation runner.

pub mod cem;
pub mod did;

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use cem::{cem_match, smd, CemResult, CemUnit, Coarsening, MatchedUnit};
pub use did::{default_cuts, did_estimate, placebo_pretest, CellMeans, DidResult, Inference, PlaceboReport};
pub use crate::uplift::deciles::{decile_spearman, uplift_deciles, DecileRow};

use crate::datagen::{GenConfig, GenError, RealizedOutcome, SyntheticWorld};
use crate::domain::{AccountId, ActionType, Recommendation, Rep, RepId};
use crate::optimizer::{AssignmentMode, OptimizerParams, ServedLog};
use crate::pipeline::{self, DayRequest, PipelineError, TrainingConfig, Variant};
use crate::stats::median;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("renewal target must be positive, got {0}")]
    NonPositiveTarget(f64),
    #[error("non-finite value")]
    NonFinite,
    #[error("no observations in cell {0}")]
    EmptyCell(&'static str),
    #[error("control group has zero change; relative effect undefined")]
    ZeroControlTrend,
    #[error("placebo test needs at least 2 pre-period time points, got {0}")]
    InsufficientPrePeriod(usize),
    #[error("no placebo cut points")]
    NoCuts,
    #[error("placebo cut {0} is not inside the pre-period")]
    CutOutOfRange(i32),
    #[error("invalid coarsening: {0}")]
    InvalidCoarsening(&'static str),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Renewal plus add-on bookings over the renewal target.
pub fn net_ratio(bookings: f64, renewal_target: f64) -> Result<f64, EvalError> {
    if !bookings.is_finite() || !renewal_target.is_finite() {
        return Err(EvalError::NonFinite);
    }
    if renewal_target <= 0.0 {
        return Err(EvalError::NonPositiveTarget(renewal_target));
    }
    Ok(bookings / renewal_target)
}

/// Precision of each recommendation type against realized outcomes.
/// `None` marks an empty denominator.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PrecisionMetrics {
    pub p_ups: Option<f64>,
    pub p_ch: Option<f64>,
    pub p_rec: Option<f64>,
    pub p_low: Option<f64>,
    pub upsell_recs: usize,
    pub churn_recs: usize,
    pub low_engagement_recs: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn precision_metrics<'a>(
    recs: impl IntoIterator<Item = (ActionType, &'a RealizedOutcome)>,
) -> PrecisionMetrics {
    let (mut ups, mut ups_hit) = (0, 0);
    let (mut ch, mut ch_hit, mut rec_hit) = (0, 0, 0);
    let (mut low, mut low_hit) = (0, 0);
    for (action, o) in recs {
        match action {
            ActionType::PromoteUpsell => {
                ups += 1;
                ups_hit += usize::from(o.upsell_closed);
            }
            ActionType::PreventChurn => {
                ch += 1;
                ch_hit += usize::from(o.churned_without_outreach);
                rec_hit += usize::from(o.retained_via_outreach);
            }
            ActionType::BoostEngagement => {
                low += 1;
                low_hit += usize::from(o.churned_without_outreach);
            }
        }
    }
    PrecisionMetrics {
        p_ups: ratio(ups_hit, ups),
        p_ch: ratio(ch_hit, ch),
        p_rec: ratio(rec_hit, ch),
        p_low: ratio(low_hit, low),
        upsell_recs: ups,
        churn_recs: ch,
        low_engagement_recs: low,
    }
}

/// Capacity and assignment constraints checked on a final matching.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub satisfied: usize,
    pub total: usize,
    /// Largest rep load over `n_max`.
    pub max_load_ratio: f64,
    /// Total assignments over total capacity `M·n_max`.
    pub over_capacity: f64,
}

impl ConstraintReport {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.satisfied as f64 / self.total as f64
        }
    }

    pub fn merge(&mut self, other: &ConstraintReport) {
        self.satisfied += other.satisfied;
        self.total += other.total;
        self.max_load_ratio = self.max_load_ratio.max(other.max_load_ratio);
        self.over_capacity = self.over_capacity.max(other.over_capacity);
    }
}

/// One capacity row per rep and one assignment row per candidate account.
pub fn constraint_report(recs: &[Recommendation], reps: &[Rep], candidates: &[AccountId], p: &OptimizerParams) -> ConstraintReport {
    let mut load: BTreeMap<RepId, u32> = reps.iter().map(|r| (r.id, 0)).collect();
    let mut per_account: BTreeMap<AccountId, u32> = candidates.iter().map(|&a| (a, 0)).collect();
    for r in recs {
        *load.entry(r.rep_id).or_default() += 1;
        *per_account.entry(r.account_id).or_default() += 1;
    }
    let cap_ok = load.values().filter(|&&l| l >= p.n_min && l <= p.n_max).count();
    let assign_ok = per_account
        .values()
        .filter(|&&c| match p.assignment_mode {
            AssignmentMode::AtMostOne => c <= 1,
            AssignmentMode::ExactlyOne => c == 1,
        })
        .count();
    let n_max = f64::from(p.n_max.max(1));
    let max_load = load.values().copied().max().unwrap_or(0);
    ConstraintReport {
        satisfied: cap_ok + assign_ok,
        total: load.len() + per_account.len(),
        max_load_ratio: f64::from(max_load) / n_max,
        over_capacity: recs.len() as f64 / (n_max * reps.len().max(1) as f64),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub generator: GenConfig,
    pub training: TrainingConfig,
    pub params: OptimizerParams,
    pub variants: Vec<Variant>,
    /// Consecutive serving days per seed; the cooldown moves each day on to
    /// fresh accounts.
    pub days: u32,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            generator: GenConfig::default(),
            training: TrainingConfig::default(),
            params: OptimizerParams::default(),
            variants: Variant::ALL.to_vec(),
            days: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantMetrics {
    pub variant: Variant,
    pub precision: PrecisionMetrics,
    pub recommendations: usize,
    pub bookings: f64,
    /// 1 = most bookings.
    pub b_total_rank: usize,
    pub constraints: ConstraintReport,
    pub constraints_met: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub seed: u64,
    pub rows: Vec<VariantMetrics>,
}

impl AblationReport {
    pub fn row(&self, v: Variant) -> Option<&VariantMetrics> {
        self.rows.iter().find(|r| r.variant == v)
    }
}

/// Runs every variant on the same population, models and outcomes.
pub fn run_ablation(cfg: &AblationConfig) -> Result<AblationReport, EvalError> {
    let world = SyntheticWorld::new(cfg.generator.clone())?;
    let (accounts, reps) = world.generate_population();
    let models = pipeline::train_models(&world, &accounts, &cfg.training)?;
    let outcomes: BTreeMap<AccountId, RealizedOutcome> = accounts.iter().map(|a| (a.id, world.realize(a))).collect();

    let mut rows = Vec::with_capacity(cfg.variants.len());
    for &variant in &cfg.variants {
        let mut served = ServedLog::new();
        let mut recs: Vec<Recommendation> = Vec::new();
        let mut constraints = ConstraintReport::default();
        for day in 0..i64::from(cfg.days) {
            let req = DayRequest { accounts: &accounts, reps: &reps, models: &models, params: &cfg.params, variant, served: &served, today: day };
            let plan = pipeline::run_day(&req, None)?;
            let candidates: Vec<AccountId> = plan.scored.iter().map(|s| s.account_id).collect();
            let day_report = constraint_report(&plan.recommendations, &reps, &candidates, &cfg.params);
            constraints.merge(&day_report);
            for r in &plan.recommendations {
                served.record(r.account_id, day);
            }
            recs.extend(plan.recommendations);
        }
        let precision = precision_metrics(recs.iter().map(|r| (r.action, &outcomes[&r.account_id])));
        let bookings = recs.iter().map(|r| outcomes[&r.account_id].bookings).sum();
        rows.push(VariantMetrics {
            variant,
            precision,
            recommendations: recs.len(),
            bookings,
            b_total_rank: 0,
            constraints_met: constraints.fraction(),
            constraints,
        });
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[b].bookings.total_cmp(&rows[a].bookings).then(a.cmp(&b)));
    for (rank, &i) in order.iter().enumerate() {
        rows[i].b_total_rank = rank + 1;
    }
    Ok(AblationReport { seed: cfg.generator.seed, rows })
}

/// Medians across seeds; undefined per-seed values are skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSummaryRow {
    pub variant: Variant,
    pub p_ups: Option<f64>,
    pub p_ch: Option<f64>,
    pub p_rec: Option<f64>,
    pub p_low: Option<f64>,
    pub bookings: f64,
    pub b_total_rank: usize,
    pub constraints_met: f64,
    pub over_capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSummary {
    pub reports: Vec<AblationReport>,
    pub rows: Vec<AblationSummaryRow>,
}

pub fn run_ablation_seeds(cfg: &AblationConfig, seeds: &[u64]) -> Result<AblationSummary, EvalError> {
    let reports = seeds
        .iter()
        .map(|&seed| run_ablation(&AblationConfig { generator: GenConfig { seed, ..cfg.generator.clone() }, ..cfg.clone() }))
        .collect::<Result<Vec<_>, _>>()?;
    let opt_median = |xs: Vec<f64>| (!xs.is_empty()).then(|| median(&xs));
    let mut rows: Vec<AblationSummaryRow> = cfg
        .variants
        .iter()
        .map(|&v| {
            let per: Vec<&VariantMetrics> = reports.iter().filter_map(|r| r.row(v)).collect();
            AblationSummaryRow {
                variant: v,
                p_ups: opt_median(per.iter().filter_map(|m| m.precision.p_ups).collect()),
                p_ch: opt_median(per.iter().filter_map(|m| m.precision.p_ch).collect()),
                p_rec: opt_median(per.iter().filter_map(|m| m.precision.p_rec).collect()),
                p_low: opt_median(per.iter().filter_map(|m| m.precision.p_low).collect()),
                bookings: median(&per.iter().map(|m| m.bookings).collect::<Vec<_>>()),
                b_total_rank: 0,
                constraints_met: median(&per.iter().map(|m| m.constraints_met).collect::<Vec<_>>()),
                over_capacity: median(&per.iter().map(|m| m.constraints.over_capacity).collect::<Vec<_>>()),
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[b].bookings.total_cmp(&rows[a].bookings).then(a.cmp(&b)));
    for (rank, &i) in order.iter().enumerate() {
        rows[i].b_total_rank = rank + 1;
    }
    Ok(AblationSummary { reports, rows })
}
