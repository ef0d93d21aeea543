//! Closed-loop simulation of the bandit against a synthetic response model.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{BanditParams, NeuralBandit};
use crate::datagen::BanditEnv;
use crate::domain::{Account, AccountId, ActionType, AlertHistory, BanditContext, Day, FeedbackKind, Rep, RepId};
use crate::rng::{self, stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub rounds: usize,
    pub alerts_per_day: usize,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { rounds: 5000, alerts_per_day: 50, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub round: usize,
    pub day: Day,
    pub account_id: AccountId,
    pub rep_id: RepId,
    pub action: ActionType,
    pub greedy: ActionType,
    /// Best action under the true response model.
    pub best: ActionType,
    pub feedback: FeedbackKind,
    pub reward: i8,
    pub cumulative_reward: i64,
    pub expected_reward: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn cumulative_reward(&self) -> i64 {
        self.rows.last().map_or(0, |r| r.cumulative_reward)
    }

    /// Share of rounds in `range` that chose each action.
    pub fn selection_share(&self, range: core::ops::Range<usize>) -> [f64; 3] {
        let rows = &self.rows[range];
        let mut c = [0usize; 3];
        for r in rows {
            c[r.action.index()] += 1;
        }
        c.map(|v| v as f64 / rows.len().max(1) as f64)
    }

    /// Counts of each feedback kind, in [`FeedbackKind::ALL`] order.
    pub fn feedback_distribution(&self) -> [usize; 3] {
        let mut c = [0usize; 3];
        for r in &self.rows {
            c[r.feedback.index()] += 1;
        }
        c
    }

    /// Per-day counts of each feedback kind.
    pub fn feedback_by_day(&self) -> Vec<(Day, [usize; 3])> {
        let mut out: Vec<(Day, [usize; 3])> = Vec::new();
        for r in &self.rows {
            match out.last_mut() {
                Some((d, c)) if *d == r.day => c[r.feedback.index()] += 1,
                _ => {
                    let mut c = [0; 3];
                    c[r.feedback.index()] = 1;
                    out.push((r.day, c));
                }
            }
        }
        out
    }

    /// Fraction of choices equal to the greedy action, per consecutive window.
    pub fn greedy_agreement(&self, window: usize) -> Vec<f64> {
        self.rows
            .chunks(window)
            .filter(|c| c.len() == window)
            .map(|c| c.iter().filter(|r| r.action == r.greedy).count() as f64 / window as f64)
            .collect()
    }
}

/// Runs `config.rounds` alerts. Each round draws an account uniformly; its
/// owning rep is fixed (`accounts[i]` belongs to `reps[i mod M]`). The
/// response model and the policy's exploration use separate streams.
pub fn run_simulation(
    env: &BanditEnv,
    accounts: &[Account],
    reps: &[Rep],
    params: &BanditParams,
    config: &SimulationConfig,
) -> (Trace, NeuralBandit) {
    assert!(!accounts.is_empty() && !reps.is_empty(), "simulation needs accounts and reps");
    let mut world_rng = rng::seeded(config.seed, stream::BANDIT_ENV);
    let mut policy_rng = rng::seeded(config.seed, stream::BANDIT_POLICY);
    let context_dim = accounts[0].x.len() + reps[0].s.len() + AlertHistory::DIM;
    let mut bandit = NeuralBandit::new(context_dim, params.clone(), config.seed);
    let mut history: BTreeMap<usize, AlertHistory> = BTreeMap::new();
    let mut rows = Vec::with_capacity(config.rounds);
    let mut cumulative = 0i64;
    for round in 0..config.rounds {
        let day = (round / config.alerts_per_day.max(1)) as Day;
        let i = (rng::uniform(&mut world_rng) * accounts.len() as f64) as usize % accounts.len();
        let (account, rep) = (&accounts[i], &reps[i % reps.len()]);
        let h = history.entry(i).or_default();
        let x = BanditContext::new(account, rep, h, day).vector();
        let sel = bandit.select_action(&x, &mut policy_rng);
        let feedback = env.sample_feedback(&x, sel.action, &mut world_rng);
        let reward = feedback.reward();
        bandit.update(&x, sel.action, reward);
        h.record(day, sel.action);
        h.last_feedback = Some(feedback);
        cumulative += i64::from(reward);
        rows.push(TraceRow {
            round,
            day,
            account_id: account.id,
            rep_id: rep.id,
            action: sel.action,
            greedy: sel.greedy,
            best: env.best_action(&x),
            feedback,
            reward,
            cumulative_reward: cumulative,
            expected_reward: env.expected_reward(&x, sel.action),
        });
    }
    (Trace { rows }, bandit)
}
