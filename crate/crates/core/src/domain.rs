//! Value types shared by every layer.
//!
//! Nothing here has behavior beyond construction helpers and invariant
//! checks; [`validate`] reports every violated invariant as data.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Day index within a run. The service advances it explicitly; nothing in
/// the engine reads a wall clock.
pub type Day = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AccountId(pub u64);

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RepId(pub u32);

impl fmt::Display for RepId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}", self.0)
    }
}

/// Which coordinates of an account's feature vector feed which model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    /// Pre-treatment covariates for the uplift models.
    pub uplift: Vec<usize>,
    /// Engagement features for the forecasters.
    pub engagement: Vec<usize>,
}

impl FeatureLayout {
    pub fn full(dim: usize, engagement: usize) -> Self {
        Self { uplift: (0..dim).collect(), engagement: (dim - engagement..dim).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Account {
    pub id: AccountId,
    /// Standardized features.
    pub x: Vec<f64>,
    pub layout: FeatureLayout,
    /// Days until the renewal target close date.
    pub d: i64,
    /// Current value of each engagement metric (utilization 0–100, adoption 0–1, ...).
    pub engagement: Vec<f64>,
    /// Ground-truth individual treatment effect; only synthetic accounts carry it.
    pub true_ite: Option<f64>,
}

impl Account {
    pub fn x_u(&self) -> Vec<f64> {
        self.layout.uplift.iter().map(|&i| self.x[i]).collect()
    }

    pub fn x_e(&self) -> Vec<f64> {
        self.layout.engagement.iter().map(|&i| self.x[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rep {
    pub id: RepId,
    /// Experience, historical success rate, ... (standardized).
    pub s: Vec<f64>,
}

/// An account after the prediction layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredAccount {
    pub account_id: AccountId,
    pub d: i64,
    /// Monetization uplift before normalization (currency units).
    pub y_u_raw: f64,
    /// Predicted change of each engagement metric.
    pub delta_e: Vec<f64>,
    /// Largest absolute engagement change.
    pub y_e_raw: f64,
    /// Normalized uplift, 0–100.
    pub y_u: f64,
    /// Normalized engagement difference, 0–100.
    pub y_e: f64,
}

/// Fractional LP solution, dense `accounts × reps`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentMatrix {
    pub accounts: Vec<AccountId>,
    pub reps: Vec<RepId>,
    pub entries: Vec<f64>,
}

impl AssignmentMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.reps.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.reps.len();
        &self.entries[i * m..(i + 1) * m]
    }
}

/// The three recommendable actions, in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionType {
    BoostEngagement,
    PreventChurn,
    PromoteUpsell,
}

impl ActionType {
    pub const ALL: [ActionType; 3] =
        [ActionType::BoostEngagement, ActionType::PreventChurn, ActionType::PromoteUpsell];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Human-readable label ("Promote Upsell").
    pub fn label(self) -> &'static str {
        match self {
            ActionType::BoostEngagement => "Boost Engagement",
            ActionType::PreventChurn => "Prevent Churn",
            ActionType::PromoteUpsell => "Promote Upsell",
        }
    }
}

impl fmt::Display for ActionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub account_id: AccountId,
    pub rep_id: RepId,
    pub action: ActionType,
    /// Action proposed by the rule-based cold start before the bandit.
    pub cold_start_action: ActionType,
    pub g_rank: u32,
    pub r_rank: u32,
    pub a_value: f64,
    pub explanation: String,
    pub created_at: Day,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeedbackKind {
    DeepLinkClicked,
    NotificationDismissed,
    NoClick,
}

impl FeedbackKind {
    pub const ALL: [FeedbackKind; 3] =
        [FeedbackKind::DeepLinkClicked, FeedbackKind::NotificationDismissed, FeedbackKind::NoClick];

    /// +1 for a click through, −1 for a dismissal, 0 otherwise.
    pub fn reward(self) -> i8 {
        match self {
            FeedbackKind::DeepLinkClicked => 1,
            FeedbackKind::NotificationDismissed => -1,
            FeedbackKind::NoClick => 0,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub rep_id: RepId,
    pub account_id: AccountId,
    pub action: ActionType,
    pub feedback: FeedbackKind,
    pub reward: i8,
    pub t: Day,
}

impl FeedbackEvent {
    pub fn new(
        rep_id: RepId,
        account_id: AccountId,
        action: ActionType,
        feedback: FeedbackKind,
        t: Day,
    ) -> Self {
        Self { rep_id, account_id, action, feedback, reward: feedback.reward(), t }
    }
}

/// Alert history of one (rep, account) pair as seen when a new alert is due.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlertHistory {
    pub last_alert_day: Option<Day>,
    pub previous_count: u32,
    pub last_feedback: Option<FeedbackKind>,
    pub last_category: Option<ActionType>,
}

impl AlertHistory {
    /// Number of entries [`AlertHistory::features`] produces.
    pub const DIM: usize = 2 + 3 + 3;

    /// Days since the last alert (capped at 90, in months), log previous
    /// count, one-hot last feedback, one-hot last alert category. Missing
    /// history encodes as the cap and all-zero one-hots.
    pub fn features(&self, today: Day) -> Vec<f64> {
        let days = self.last_alert_day.map_or(90, |d| (today - d).clamp(0, 90));
        let mut v = Vec::with_capacity(Self::DIM);
        v.push(days as f64 / 30.0);
        v.push(crate::math::ln(1.0 + f64::from(self.previous_count)));
        let mut fb = [0.0; 3];
        if let Some(k) = self.last_feedback {
            fb[k.index()] = 1.0;
        }
        v.extend_from_slice(&fb);
        let mut cat = [0.0; 3];
        if let Some(a) = self.last_category {
            cat[a.index()] = 1.0;
        }
        v.extend_from_slice(&cat);
        v
    }

    pub fn record(&mut self, day: Day, action: ActionType) {
        self.last_alert_day = Some(day);
        self.previous_count += 1;
        self.last_category = Some(action);
        self.last_feedback = None;
    }
}

/// Bandit context `x = [account, rep, alert history]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditContext {
    pub x_a: Vec<f64>,
    pub x_s: Vec<f64>,
    pub x_r: Vec<f64>,
}

impl BanditContext {
    pub fn new(account: &Account, rep: &Rep, history: &AlertHistory, today: Day) -> Self {
        Self { x_a: account.x.clone(), x_s: rep.s.clone(), x_r: history.features(today) }
    }

    pub fn dim(&self) -> usize {
        self.x_a.len() + self.x_s.len() + self.x_r.len()
    }

    /// Concatenation in the fixed order account, rep, alert history.
    pub fn vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.x_a);
        v.extend_from_slice(&self.x_s);
        v.extend_from_slice(&self.x_r);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    Treat,
    Ctrl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Period {
    Pre,
    Post,
}

/// One outcome of one (rep, account) unit at one time point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelObservation {
    pub unit_id: u64,
    pub group: Group,
    /// Period index; negative before the intervention.
    pub time: i32,
    pub period: Period,
    /// Net ratio.
    pub outcome: f64,
    /// Account size, engagement level, past sales activity.
    pub covariates: Vec<f64>,
}

/// A violated invariant, located by field path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub rule: String,
}

impl Violation {
    fn new(path: impl Into<String>, rule: impl Into<String>) -> Self {
        Self { path: path.into(), rule: rule.into() }
    }
}

pub trait Validate {
    /// Every violated invariant; empty when the value is well formed.
    fn violations(&self) -> Vec<Violation>;
}

pub fn validate<T: Validate + ?Sized>(entity: &T) -> Result<(), Vec<Violation>> {
    let v = entity.violations();
    if v.is_empty() { Ok(()) } else { Err(v) }
}

const TOL: f64 = 1e-6;

fn check_finite(path: &str, xs: &[f64], out: &mut Vec<Violation>) {
    for (i, x) in xs.iter().enumerate() {
        if !x.is_finite() {
            out.push(Violation::new(format!("{path}[{i}]"), "finite"));
        }
    }
}

impl Validate for Account {
    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.d < 0 {
            out.push(Violation::new("d", "d ≥ 0"));
        }
        check_finite("x", &self.x, &mut out);
        for (name, idx) in [("layout.uplift", &self.layout.uplift), ("layout.engagement", &self.layout.engagement)] {
            if let Some(&bad) = idx.iter().find(|&&i| i >= self.x.len()) {
                out.push(Violation::new(name, format!("index {bad} within x")));
            }
        }
        if self.true_ite.is_some_and(|t| !t.is_finite()) {
            out.push(Violation::new("true_ite", "finite"));
        }
        out
    }
}

impl Validate for [Rep] {
    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if let Some(first) = self.first() {
            for (i, r) in self.iter().enumerate() {
                if r.s.len() != first.s.len() {
                    out.push(Violation::new(format!("[{i}].s"), "feature length fixed across reps"));
                }
                check_finite(&format!("[{i}].s"), &r.s, &mut out);
            }
        }
        out
    }
}

impl Validate for ScoredAccount {
    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (name, v) in [("y_u", self.y_u), ("y_e", self.y_e)] {
            if !(0.0..=100.0).contains(&v) {
                out.push(Violation::new(name, "within [0,100]"));
            }
        }
        let max_abs = self.delta_e.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        if (self.y_e_raw - max_abs).abs() > TOL {
            out.push(Violation::new("y_e_raw", "y_e_raw = max |delta_e|"));
        }
        out
    }
}

impl Validate for AssignmentMatrix {
    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let m = self.reps.len();
        if self.entries.len() != self.accounts.len() * m {
            out.push(Violation::new("entries", "shape accounts × reps"));
            return out;
        }
        for i in 0..self.accounts.len() {
            let row = self.row(i);
            for (j, &a) in row.iter().enumerate() {
                if !(-TOL..=1.0 + TOL).contains(&a) {
                    out.push(Violation::new(format!("entries[{i}][{j}]"), "entry in [0,1]"));
                }
            }
            if row.iter().sum::<f64>() > 1.0 + TOL {
                out.push(Violation::new(format!("entries[{i}]"), "row sum ≤ 1"));
            }
        }
        out
    }
}

impl Validate for Recommendation {
    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.a_value < 0.5 {
            out.push(Violation::new("a_value", "a_value ≥ 0.5"));
        }
        if self.g_rank == 0 {
            out.push(Violation::new("g_rank", "positive"));
        }
        if self.r_rank == 0 {
            out.push(Violation::new("r_rank", "positive"));
        }
        out
    }
}

/// Rank contiguity over a full recommendation set.
impl Validate for [Recommendation] {
    fn violations(&self) -> Vec<Violation> {
        let mut out: Vec<Violation> =
            self.iter().enumerate().flat_map(|(i, r)| {
                r.violations().into_iter().map(move |v| Violation::new(format!("[{i}].{}", v.path), v.rule))
            }).collect();
        let mut g: Vec<u32> = self.iter().map(|r| r.g_rank).collect();
        g.sort_unstable();
        if g.iter().enumerate().any(|(i, &r)| r as usize != i + 1) {
            out.push(Violation::new("g_rank", "contiguous 1..N"));
        }
        let mut reps: Vec<RepId> = self.iter().map(|r| r.rep_id).collect();
        reps.sort_unstable();
        reps.dedup();
        for rep in reps {
            let mut rr: Vec<u32> = self.iter().filter(|r| r.rep_id == rep).map(|r| r.r_rank).collect();
            rr.sort_unstable();
            if rr.iter().enumerate().any(|(i, &r)| r as usize != i + 1) {
                out.push(Violation::new(format!("r_rank[{rep}]"), "contiguous 1..n per rep"));
            }
        }
        out
    }
}

impl Validate for FeedbackEvent {
    fn violations(&self) -> Vec<Violation> {
        if self.reward != self.feedback.reward() {
            alloc::vec![Violation::new("reward", "reward matches feedback kind")]
        } else {
            Vec::new()
        }
    }
}

impl Validate for [PanelObservation] {
    fn violations(&self) -> Vec<Violation> {
        let mut keys: Vec<(u64, i32)> = self.iter().map(|o| (o.unit_id, o.time)).collect();
        keys.sort_unstable();
        let mut out = Vec::new();
        for w in keys.windows(2) {
            if w[0] == w[1] {
                out.push(Violation::new(format!("unit {} time {}", w[0].0, w[0].1), "each (unit, time) at most once"));
            }
        }
        for (i, o) in self.iter().enumerate() {
            if !o.outcome.is_finite() {
                out.push(Violation::new(format!("[{i}].outcome"), "finite"));
            }
        }
        out
    }
}
