//! Service state as a fold over the event log.
//!
//! Live operations build events, append them, then apply them through the
//! same [`Engine::apply`] that replay uses, so a rebuilt engine matches the
//! live one exactly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use salesopt_core::bandit::NeuralBandit;
use salesopt_core::datagen::{GenError, SyntheticWorld};
use salesopt_core::domain::{
    Account, AccountId, ActionType, AlertHistory, Day, FeedbackEvent, FeedbackKind, Recommendation, Rep, RepId,
};
use salesopt_core::optimizer::ServedLog;
use salesopt_core::pipeline::{self, DayRequest, Models, PipelineError, PolicyInput, Variant};
use salesopt_core::rng::{self, stream};

use crate::config::Config;
use crate::eventlog::{DayClosed, Event, FeedbackRecord, PolicyCheckpoint, Record, RunSummary, ServedRecord};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("unknown rep {0}")]
    UnknownRep(RepId),
    #[error("unknown run {0}")]
    UnknownRun(String),
    #[error("no completed run")]
    NoCompletedRun,
    #[error("no recommendation served to rep {rep} for account {account} on day {day}")]
    UnknownRecommendation { rep: RepId, account: AccountId, day: Day },
    #[error("feedback action {got} does not match served action {served}")]
    ActionMismatch { got: ActionType, served: ActionType },
    #[error("feedback reward {got} does not match {kind:?}")]
    RewardMismatch { got: i8, kind: FeedbackKind },
    #[error("log must start with session_started")]
    MissingSession,
    #[error("replayed policy differs from checkpoint at seq {seq} by {diff:e}")]
    CheckpointMismatch { seq: u64, diff: f64 },
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub seed: u64,
    pub config: Config,
    pub day: Day,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub manifest: RunManifest,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackAck {
    pub seq: u64,
    pub reward: i8,
    pub duplicate: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DayMetrics {
    pub day: Day,
    pub served: BTreeMap<ActionType, usize>,
    pub selection_share: BTreeMap<ActionType, f64>,
    pub feedback: BTreeMap<FeedbackKind, usize>,
    pub reward: i64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsSnapshot {
    pub day: Option<Day>,
    pub runs: usize,
    pub recommendations: usize,
    pub selection_share: BTreeMap<ActionType, f64>,
    pub feedback: BTreeMap<FeedbackKind, usize>,
    pub cumulative_reward: i64,
    pub bandit_updates: u64,
    pub days: Vec<DayMetrics>,
}

type ServedKey = (RepId, AccountId, Day);

#[derive(Debug, Clone)]
struct Served {
    action: ActionType,
    context: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Engine {
    config: Config,
    accounts: Vec<Account>,
    reps: Vec<Rep>,
    models: Models,
    bandit: NeuralBandit,
    served_log: ServedLog,
    histories: BTreeMap<(RepId, AccountId), AlertHistory>,
    served: BTreeMap<ServedKey, Served>,
    /// Last feedback per served recommendation; consumed at day close.
    staged: BTreeMap<ServedKey, FeedbackKind>,
    /// Last feedback per served recommendation, kept for metrics.
    effective: BTreeMap<ServedKey, FeedbackKind>,
    /// Recommendations whose feedback already trained the policy.
    trained: std::collections::BTreeSet<ServedKey>,
    pending: Vec<ServedRecord>,
    runs: BTreeMap<String, RunInfo>,
    latest: BTreeMap<RepId, Vec<Recommendation>>,
    last_day: Option<Day>,
    open_day: bool,
    artifacts: Vec<String>,
}

impl Engine {
    /// Generates the population and trains the models `config` describes.
    pub fn new(config: Config) -> Result<Self, EngineError> {
        let world = SyntheticWorld::new(config.gen_config())?;
        let (accounts, reps) = world.generate_population();
        let models = pipeline::train_models(&world, &accounts, &config.training())?;
        let dim = config.generator.account_dim + config.generator.rep_dim + AlertHistory::DIM;
        let bandit = NeuralBandit::new(dim, config.bandit_params(), config.seed);
        Ok(Self {
            config,
            accounts,
            reps,
            models,
            bandit,
            served_log: ServedLog::new(),
            histories: BTreeMap::new(),
            served: BTreeMap::new(),
            staged: BTreeMap::new(),
            effective: BTreeMap::new(),
            trained: Default::default(),
            pending: Vec::new(),
            runs: BTreeMap::new(),
            latest: BTreeMap::new(),
            last_day: None,
            open_day: false,
            artifacts: Vec::new(),
        })
    }

    /// Rebuilds the engine from a full log.
    pub fn replay(records: &[Record]) -> Result<Self, EngineError> {
        let Some(Record { event: Event::SessionStarted(cfg), .. }) = records.first() else {
            return Err(EngineError::MissingSession);
        };
        let mut engine = Self::new((**cfg).clone())?;
        for r in &records[1..] {
            if let Event::PolicySnapshot(cp) = &r.event {
                let diff = engine.checkpoint_diff(cp);
                if diff > 1e-10 {
                    return Err(EngineError::CheckpointMismatch { seq: r.seq, diff });
                }
            }
            engine.apply(r);
        }
        if !engine.pending.is_empty() {
            log::warn!("discarding {} recommendations of an uncommitted run", engine.pending.len());
            engine.pending.clear();
        }
        Ok(engine)
    }

    pub fn set_artifacts(&mut self, artifacts: Vec<String>) {
        self.artifacts = artifacts;
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn bandit(&self) -> &NeuralBandit {
        &self.bandit
    }

    pub fn accounts(&self) -> &[Account] {
        &self.accounts
    }

    pub fn reps(&self) -> &[Rep] {
        &self.reps
    }

    pub fn models(&self) -> &Models {
        &self.models
    }

    pub fn last_day(&self) -> Option<Day> {
        self.last_day
    }

    fn checkpoint_diff(&self, cp: &PolicyCheckpoint) -> f64 {
        if cp.updates != self.bandit.updates || cp.net_params.len() != self.bandit.net.params.len() {
            return f64::INFINITY;
        }
        cp.net_params
            .iter()
            .zip(&self.bandit.net.params)
            .map(|(a, b)| (a - b).abs())
            .fold((cp.learning_rate - self.bandit.learning_rate).abs(), f64::max)
    }

    /// Applies one logged event.
    pub fn apply(&mut self, record: &Record) {
        match &record.event {
            Event::SessionStarted(_) | Event::PolicySnapshot(_) => {}
            Event::Recommendation(r) => self.pending.push(r.clone()),
            Event::RunCommitted(summary) => self.commit(summary),
            Event::Feedback(f) => {
                let e = &f.event;
                let key = (e.rep_id, e.account_id, e.t);
                if !self.trained.contains(&key) {
                    self.staged.insert(key, e.feedback);
                }
                self.effective.insert(key, e.feedback);
                if let Some(h) = self.histories.get_mut(&(e.rep_id, e.account_id)) {
                    if h.last_alert_day == Some(e.t) {
                        h.last_feedback = Some(e.feedback);
                    }
                }
            }
            Event::DayClosed(_) => {
                let staged = std::mem::take(&mut self.staged);
                Self::close_into(&mut self.bandit, &self.served, &staged);
                self.trained.extend(staged.into_keys());
                self.open_day = false;
            }
        }
    }

    fn close_into(bandit: &mut NeuralBandit, served: &BTreeMap<ServedKey, Served>, staged: &BTreeMap<ServedKey, FeedbackKind>) {
        for (key, kind) in staged {
            if let Some(s) = served.get(key) {
                bandit.update(&s.context, s.action, kind.reward());
            }
        }
    }

    fn commit(&mut self, summary: &RunSummary) {
        let (recs, rest): (Vec<ServedRecord>, Vec<ServedRecord>) =
            std::mem::take(&mut self.pending).into_iter().partition(|r| r.run_id == summary.run_id);
        if !rest.is_empty() {
            log::warn!("dropping {} recommendations of uncommitted runs", rest.len());
        }
        let mut by_rep: BTreeMap<RepId, Vec<Recommendation>> = self.reps.iter().map(|r| (r.id, Vec::new())).collect();
        for s in recs {
            let r = s.recommendation;
            self.served_log.record(r.account_id, r.created_at);
            self.histories.entry((r.rep_id, r.account_id)).or_default().record(r.created_at, r.action);
            self.served.insert((r.rep_id, r.account_id, r.created_at), Served { action: r.action, context: s.context });
            by_rep.entry(r.rep_id).or_default().push(r);
        }
        for list in by_rep.values_mut() {
            list.sort_by_key(|r| r.r_rank);
        }
        self.latest = by_rep;
        self.last_day = Some(summary.day);
        self.open_day = true;
        let manifest = RunManifest {
            run_id: summary.run_id.clone(),
            seed: self.config.seed,
            config: self.config.clone(),
            day: summary.day,
            artifacts: self.artifacts.clone(),
        };
        self.runs.insert(summary.run_id.clone(), RunInfo { manifest, summary: summary.clone() });
    }

    /// Events for the next day: close the open day, then serve. Nothing is
    /// changed here; the caller appends the events and applies them.
    pub fn plan_next_run(&self) -> Result<(Day, Vec<Event>), EngineError> {
        let day = self.last_day.map_or(0, |d| d + 1);
        let mut events = Vec::new();
        let mut bandit = self.bandit.clone();
        if self.open_day {
            Self::close_into(&mut bandit, &self.served, &self.staged);
            events.push(Event::DayClosed(DayClosed { updates: self.staged.len() }));
            events.push(Event::PolicySnapshot(checkpoint(&bandit)));
        }
        let mut rng = rng::keyed(self.config.seed, stream::SERVING, day as u64);
        let req = DayRequest {
            accounts: &self.accounts,
            reps: &self.reps,
            models: &self.models,
            params: &self.config.optimizer,
            variant: Variant::Full,
            served: &self.served_log,
            today: day,
        };
        let policy = PolicyInput { bandit: &bandit, histories: &self.histories, rng: &mut rng };
        let plan = pipeline::run_day(&req, Some(policy))?;
        let run_id = format!("run-{:04}", self.runs.len() + 1);
        let summary = RunSummary {
            run_id: run_id.clone(),
            day,
            recommendations: plan.recommendations.len(),
            pool_size: plan.pool_size,
            eligible: plan.eligible,
            objective: plan.objective,
            bandit_updates: bandit.updates,
        };
        for (recommendation, context) in plan.recommendations.into_iter().zip(plan.contexts) {
            events.push(Event::Recommendation(ServedRecord { run_id: run_id.clone(), recommendation, context }));
        }
        events.push(Event::RunCommitted(summary));
        Ok((day, events))
    }

    /// Validates feedback and returns the event to log.
    pub fn plan_feedback(&self, event: &FeedbackEvent) -> Result<Event, EngineError> {
        let key = (event.rep_id, event.account_id, event.t);
        let served = self.served.get(&key).ok_or(EngineError::UnknownRecommendation {
            rep: event.rep_id,
            account: event.account_id,
            day: event.t,
        })?;
        if served.action != event.action {
            return Err(EngineError::ActionMismatch { got: event.action, served: served.action });
        }
        if event.reward != event.feedback.reward() {
            return Err(EngineError::RewardMismatch { got: event.reward, kind: event.feedback });
        }
        if self.trained.contains(&key) {
            log::warn!("feedback for day {} arrived after its day closed; logged but not trained on", event.t);
        }
        Ok(Event::Feedback(FeedbackRecord { event: event.clone(), duplicate: self.effective.contains_key(&key) }))
    }

    pub fn recommendations_for(&self, rep: RepId) -> Result<&[Recommendation], EngineError> {
        if !self.reps.iter().any(|r| r.id == rep) {
            return Err(EngineError::UnknownRep(rep));
        }
        if self.runs.is_empty() {
            return Err(EngineError::NoCompletedRun);
        }
        Ok(self.latest.get(&rep).map_or(&[], Vec::as_slice))
    }

    pub fn run(&self, id: &str) -> Result<&RunInfo, EngineError> {
        self.runs.get(id).ok_or_else(|| EngineError::UnknownRun(id.to_string()))
    }

    pub fn runs(&self) -> impl Iterator<Item = &RunInfo> {
        self.runs.values()
    }

    pub fn metrics(&self) -> MetricsSnapshot {
        let mut days: BTreeMap<Day, DayMetrics> = BTreeMap::new();
        let mut served_total: BTreeMap<ActionType, usize> = ActionType::ALL.iter().map(|&a| (a, 0)).collect();
        for ((_, _, day), s) in &self.served {
            let d = days.entry(*day).or_insert_with(|| empty_day(*day));
            *d.served.entry(s.action).or_default() += 1;
            *served_total.entry(s.action).or_default() += 1;
        }
        let mut feedback: BTreeMap<FeedbackKind, usize> = FeedbackKind::ALL.iter().map(|&k| (k, 0)).collect();
        let mut reward = 0i64;
        for ((_, _, day), kind) in &self.effective {
            let d = days.entry(*day).or_insert_with(|| empty_day(*day));
            *d.feedback.entry(*kind).or_default() += 1;
            d.reward += i64::from(kind.reward());
            *feedback.entry(*kind).or_default() += 1;
            reward += i64::from(kind.reward());
        }
        for d in days.values_mut() {
            d.selection_share = shares(&d.served);
        }
        MetricsSnapshot {
            day: self.last_day,
            runs: self.runs.len(),
            recommendations: self.served.len(),
            selection_share: shares(&served_total),
            feedback,
            cumulative_reward: reward,
            bandit_updates: self.bandit.updates,
            days: days.into_values().collect(),
        }
    }
}

fn checkpoint(bandit: &NeuralBandit) -> PolicyCheckpoint {
    PolicyCheckpoint { updates: bandit.updates, learning_rate: bandit.learning_rate, net_params: bandit.net.params.clone() }
}

fn empty_day(day: Day) -> DayMetrics {
    DayMetrics {
        day,
        served: ActionType::ALL.iter().map(|&a| (a, 0)).collect(),
        selection_share: BTreeMap::new(),
        feedback: FeedbackKind::ALL.iter().map(|&k| (k, 0)).collect(),
        reward: 0,
    }
}

fn shares(counts: &BTreeMap<ActionType, usize>) -> BTreeMap<ActionType, f64> {
    let total: usize = counts.values().sum();
    ActionType::ALL
        .iter()
        .map(|&a| {
            let c = counts.get(&a).copied().unwrap_or(0);
            (a, if total == 0 { 0.0 } else { c as f64 / total as f64 })
        })
        .collect()
}
