//! Neural contextual bandit over the three action types.
//!
//! A single reward network scores `[context, onehot(action)]`. Exploration
//! uses `σ = sqrt(gᵀ H⁻¹ g)`, where `g` is the gradient of the network output
//! (with respect to parameters by default, or to the context) and `H` is
//! `λI` plus the outer products of past gradients, shared across actions.

pub mod net;
pub mod simulation;
pub mod uncertainty;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use net::RewardNet;
pub use simulation::{run_simulation, SimulationConfig, Trace, TraceRow};
pub use uncertainty::UncertaintyState;

use crate::domain::{ActionType, FeedbackEvent};
use crate::rng::{self, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Exploration {
    /// `score = ŷ + δ`, `δ ~ N(0, β²σ²)`.
    ThompsonSampling { beta: f64 },
    /// `score = ŷ + γσ`.
    Ucb { gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GradientTarget {
    Parameters,
    /// Gradient with respect to the context entries (the action one-hot is
    /// excluded).
    Inputs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BanditParams {
    pub exploration: Exploration,
    pub learning_rate: f64,
    pub gradient_target: GradientTarget,
    pub hidden: usize,
    pub lambda: f64,
    pub steps_per_update: usize,
    /// Updates before the pipeline trusts the bandit over the rule-based action.
    pub warmup_updates: u64,
}

impl Default for BanditParams {
    fn default() -> Self {
        Self {
            exploration: Exploration::ThompsonSampling { beta: 0.1 },
            learning_rate: 0.01,
            gradient_target: GradientTarget::Parameters,
            hidden: 32,
            lambda: 1.0,
            steps_per_update: 1,
            warmup_updates: 20,
        }
    }
}

impl BanditParams {
    pub fn ucb(gamma: f64) -> Self {
        Self { exploration: Exploration::Ucb { gamma }, ..Self::default() }
    }

    pub fn thompson(beta: f64) -> Self {
        Self { exploration: Exploration::ThompsonSampling { beta }, ..Self::default() }
    }
}

/// Reward of a feedback event: +1 click, −1 dismiss, 0 no click.
pub fn reward_from_feedback(event: &FeedbackEvent) -> i8 {
    event.feedback.reward()
}

/// First index of the maximum; earlier entries win ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Exploration scores for the given predictions and uncertainties. Thompson
/// sampling always draws one normal per action so the generator advances the
/// same way whatever β is.
pub fn exploration_scores(pred: &[f64], sigma: &[f64], exploration: Exploration, rng: &mut SimRng) -> Vec<f64> {
    match exploration {
        Exploration::ThompsonSampling { beta } => {
            pred.iter().zip(sigma).map(|(p, s)| p + beta * s * rng::normal(rng)).collect()
        }
        Exploration::Ucb { gamma } => pred.iter().zip(sigma).map(|(p, s)| p + gamma * s).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub action: ActionType,
    /// Argmax of the predictions alone.
    pub greedy: ActionType,
    pub predictions: [f64; 3],
    pub sigmas: [f64; 3],
    pub scores: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateOutcome {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralBandit {
    pub params: BanditParams,
    pub context_dim: usize,
    pub net: RewardNet,
    pub state: UncertaintyState,
    /// Current step size (halved after each rejected step).
    pub learning_rate: f64,
    pub updates: u64,
}

impl NeuralBandit {
    /// Network weights come from the `NET_INIT` stream of `seed`.
    pub fn new(context_dim: usize, params: BanditParams, seed: u64) -> Self {
        let mut rng = rng::seeded(seed, rng::stream::NET_INIT);
        let net = RewardNet::new(context_dim, params.hidden, &mut rng);
        let dim = match params.gradient_target {
            GradientTarget::Parameters => net.params.len(),
            GradientTarget::Inputs => context_dim,
        };
        let state = UncertaintyState::new(dim, params.lambda);
        let learning_rate = params.learning_rate;
        Self { params, context_dim, net, state, learning_rate, updates: 0 }
    }

    fn gradient(&self, z: &[f64]) -> (f64, Vec<f64>) {
        match self.params.gradient_target {
            GradientTarget::Parameters => self.net.grad_params(z),
            GradientTarget::Inputs => {
                let (y, mut g) = self.net.grad_input(z);
                g.truncate(self.context_dim);
                (y, g)
            }
        }
    }

    /// `(ŷ, σ)` for one action.
    pub fn predict(&self, x: &[f64], action: ActionType) -> (f64, f64) {
        let (y, g) = self.gradient(&net::input(x, action));
        (y, self.state.sigma(&g))
    }

    pub fn select_action(&self, x: &[f64], rng: &mut SimRng) -> Selection {
        let mut predictions = [0.0; 3];
        let mut sigmas = [0.0; 3];
        for a in ActionType::ALL {
            let (y, s) = self.predict(x, a);
            predictions[a.index()] = y;
            sigmas[a.index()] = s;
        }
        let s = exploration_scores(&predictions, &sigmas, self.params.exploration, rng);
        let scores = [s[0], s[1], s[2]];
        Selection {
            action: ActionType::ALL[argmax(&scores)],
            greedy: ActionType::ALL[argmax(&predictions)],
            predictions,
            sigmas,
            scores,
        }
    }

    /// SGD on `(ŷ − r)²`, then `H ← H + g gᵀ` with `g` at the new parameters.
    pub fn update(&mut self, x: &[f64], action: ActionType, reward: i8) -> UpdateOutcome {
        let z = net::input(x, action);
        let r = f64::from(reward);
        let mut out = UpdateOutcome { accepted_steps: 0, rejected_steps: 0 };
        for _ in 0..self.params.steps_per_update.max(1) {
            let (y, g) = self.net.grad_params(&z);
            let err = y - r;
            let step = 2.0 * self.learning_rate * err;
            let candidate: Vec<f64> = self.net.params.iter().zip(&g).map(|(p, gi)| p - step * gi).collect();
            if (err * err).is_finite() && candidate.iter().all(|v| v.is_finite()) {
                self.net.params = candidate;
                out.accepted_steps += 1;
            } else {
                self.learning_rate *= 0.5;
                out.rejected_steps += 1;
                log::warn!("bandit update rejected (non-finite loss); learning rate now {}", self.learning_rate);
            }
        }
        let (_, g) = self.gradient(&z);
        self.state.add(&g);
        self.updates += 1;
        out
    }

    /// Largest absolute difference over network parameters, the factor of
    /// `H` and the step size.
    pub fn max_abs_diff(&self, other: &NeuralBandit) -> f64 {
        let a = self.net.params.iter().zip(&other.net.params);
        let b = self.state.factor().factor_data().iter().zip(other.state.factor().factor_data());
        a.chain(b)
            .map(|(x, y)| (x - y).abs())
            .fold((self.learning_rate - other.learning_rate).abs(), f64::max)
    }
}
