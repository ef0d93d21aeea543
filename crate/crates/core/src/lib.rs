//! Causal uplift scoring, constrained account-to-rep matching and neural
//! contextual-bandit action selection for sales recommendation.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its inputs and an explicitly seeded generator; IO, the event
//! log, the HTTP service and the CLI live in the `salesopt` crate.
//!
//! Layers, bottom-up:
//!
//! - [`domain`]: shared value types and their invariants.
//! - [`datagen`]: synthetic populations with known ground truth.
//! - [`uplift`] and [`forecast`]: the prediction layer.
//! - [`optimizer`] and [`bandit`]: the optimization layer.
//! - [`explain`]: templates, feature grouping, local importance, narratives.
//! - [`evalharness`]: decile/DiD/CEM/placebo/ablation evaluation.
//! - [`pipeline`]: one day of score, filter, match, act and explain.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bandit;
pub mod datagen;
pub mod domain;
pub mod evalharness;
pub mod explain;
pub mod forecast;
pub mod linalg;
pub mod math;
pub mod optimizer;
pub mod pipeline;
pub mod rng;
pub mod stats;
pub mod uplift;

pub use domain::{
    Account, AccountId, ActionType, AssignmentMatrix, BanditContext, Day, FeedbackEvent,
    FeedbackKind, PanelObservation, Recommendation, Rep, RepId, ScoredAccount,
};
