//! Monetization uplift: S/T/X/DR meta-learners over pluggable base
//! regressors, logistic propensity, and decile evaluation.

pub mod base;
pub mod deciles;
pub mod propensity;

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

pub use base::{fit_base, fit_ridge, fit_stumps, BaseRegressor, BaseSpec, RidgeModel, StumpsSpec};
pub use deciles::{decile_index, decile_spearman, stability, uplift_deciles, DecileRow};
pub use propensity::{propensity_fit, PropensityModel};

use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arm {
    Treated,
    Control,
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::Treated => "treated",
            Arm::Control => "control",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum UpliftError {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite value in training data")]
    NonFinite,
    #[error("too few rows: {rows} < {needed}")]
    TooFewRows { rows: usize, needed: usize },
    #[error("{0} arm is empty")]
    EmptyArm(Arm),
    #[error("insufficient data in {arm} arm: {rows} rows, need {needed}")]
    InsufficientData { arm: Arm, rows: usize, needed: usize },
    #[error("invalid spec: {0}")]
    InvalidSpec(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LearnerKind {
    S,
    T,
    X,
    DR,
}

/// Weight `g(x)` on the control-side effect model in the X-learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum XGate {
    Propensity,
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpliftSpec {
    pub learner: LearnerKind,
    pub base: BaseSpec,
    pub x_gate: XGate,
    /// L2 penalty on propensity slopes.
    pub propensity_l2: f64,
}

impl Default for UpliftSpec {
    fn default() -> Self {
        Self { learner: LearnerKind::T, base: BaseSpec::default(), x_gate: XGate::Propensity, propensity_l2: 1.0 }
    }
}

impl UpliftSpec {
    pub fn new(learner: LearnerKind, base: BaseSpec) -> Self {
        Self { learner, base, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Components {
    /// One model on `[x, a, a·x]`.
    S { f: BaseRegressor },
    T { f0: BaseRegressor, f1: BaseRegressor },
    X { f0: BaseRegressor, f1: BaseRegressor, tau0: BaseRegressor, tau1: BaseRegressor, gate: Gate },
    DR { f0: BaseRegressor, f1: BaseRegressor, propensity: PropensityModel, tau: BaseRegressor },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    Propensity(PropensityModel),
    Constant(f64),
}

impl Gate {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Gate::Propensity(m) => m.predict(x),
            Gate::Constant(g) => *g,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpliftModel {
    pub kind: LearnerKind,
    pub dim: usize,
    pub components: Components,
}

impl UpliftModel {
    pub fn predict_ite(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "feature vector has wrong dimension");
        match &self.components {
            Components::S { f } => {
                let z1 = s_design(x, 1.0);
                let z0 = s_design(x, 0.0);
                f.predict(&z1) - f.predict(&z0)
            }
            Components::T { f0, f1 } => f1.predict(x) - f0.predict(x),
            Components::X { tau0, tau1, gate, .. } => {
                let g = gate.eval(x);
                g * tau0.predict(x) + (1.0 - g) * tau1.predict(x)
            }
            Components::DR { tau, .. } => tau.predict(x),
        }
    }

    pub fn predict_rows(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict_ite(r)).collect()
    }
}

/// S-learner design row `[x, a, a·x]`. The interaction block lets a linear
/// base express an effect that varies with `x`.
fn s_design(x: &[f64], a: f64) -> Vec<f64> {
    let mut z = Vec::with_capacity(2 * x.len() + 1);
    z.extend_from_slice(x);
    z.push(a);
    z.extend(x.iter().map(|v| a * v));
    z
}

struct Split {
    treated: Vec<usize>,
    control: Vec<usize>,
}

fn check_inputs(x: &Matrix, a: &[u8], y: &[f64]) -> Result<Split, UpliftError> {
    if a.len() != x.rows() {
        return Err(UpliftError::LengthMismatch { expected: x.rows(), found: a.len() });
    }
    if y.len() != x.rows() {
        return Err(UpliftError::LengthMismatch { expected: x.rows(), found: y.len() });
    }
    if a.iter().any(|&v| v > 1) {
        return Err(UpliftError::InvalidSpec("treatment indicators must be 0 or 1"));
    }
    let treated: Vec<usize> = (0..a.len()).filter(|&i| a[i] == 1).collect();
    let control: Vec<usize> = (0..a.len()).filter(|&i| a[i] == 0).collect();
    if treated.is_empty() {
        return Err(UpliftError::EmptyArm(Arm::Treated));
    }
    if control.is_empty() {
        return Err(UpliftError::EmptyArm(Arm::Control));
    }
    Ok(Split { treated, control })
}

fn check_arm_sizes(split: &Split, spec: &BaseSpec, dim: usize) -> Result<(), UpliftError> {
    let needed = base::min_rows(spec, dim);
    for (arm, rows) in [(Arm::Treated, split.treated.len()), (Arm::Control, split.control.len())] {
        if rows < needed {
            return Err(UpliftError::InsufficientData { arm, rows, needed });
        }
    }
    Ok(())
}

fn pick(y: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| y[i]).collect()
}

fn fit_arms(x: &Matrix, y: &[f64], split: &Split, base: &BaseSpec) -> Result<(BaseRegressor, BaseRegressor), UpliftError> {
    let f0 = fit_base(&x.select_rows(&split.control), &pick(y, &split.control), base)?;
    let f1 = fit_base(&x.select_rows(&split.treated), &pick(y, &split.treated), base)?;
    Ok((f0, f1))
}

pub fn fit_uplift(spec: &UpliftSpec, x: &Matrix, a: &[u8], y: &[f64]) -> Result<UpliftModel, UpliftError> {
    let split = check_inputs(x, a, y)?;
    let dim = x.cols();
    let components = match spec.learner {
        LearnerKind::S => {
            let rows: Vec<Vec<f64>> = x.iter_rows().zip(a).map(|(r, &ai)| s_design(r, f64::from(ai))).collect();
            Components::S { f: fit_base(&Matrix::from_rows(&rows), y, &spec.base)? }
        }
        LearnerKind::T => {
            check_arm_sizes(&split, &spec.base, dim)?;
            let (f0, f1) = fit_arms(x, y, &split, &spec.base)?;
            Components::T { f0, f1 }
        }
        LearnerKind::X => {
            check_arm_sizes(&split, &spec.base, dim)?;
            let (f0, f1) = fit_arms(x, y, &split, &spec.base)?;
            let x1 = x.select_rows(&split.treated);
            let x0 = x.select_rows(&split.control);
            let d1: Vec<f64> = split.treated.iter().zip(x1.iter_rows()).map(|(&i, r)| y[i] - f0.predict(r)).collect();
            let d0: Vec<f64> = split.control.iter().zip(x0.iter_rows()).map(|(&i, r)| f1.predict(r) - y[i]).collect();
            let tau1 = fit_base(&x1, &d1, &spec.base)?;
            let tau0 = fit_base(&x0, &d0, &spec.base)?;
            let gate = match spec.x_gate {
                XGate::Propensity => Gate::Propensity(propensity_fit(x, a, spec.propensity_l2)?),
                XGate::Constant(g) if (0.0..=1.0).contains(&g) => Gate::Constant(g),
                XGate::Constant(_) => return Err(UpliftError::InvalidSpec("constant gate must lie in [0,1]")),
            };
            Components::X { f0, f1, tau0, tau1, gate }
        }
        LearnerKind::DR => {
            check_arm_sizes(&split, &spec.base, dim)?;
            let (f0, f1) = fit_arms(x, y, &split, &spec.base)?;
            let propensity = propensity_fit(x, a, spec.propensity_l2)?;
            let mut clipped = 0usize;
            let phi: Vec<f64> = x
                .iter_rows()
                .enumerate()
                .map(|(i, r)| {
                    let raw = propensity.raw(r);
                    if !(propensity::CLIP.0..=propensity::CLIP.1).contains(&raw) {
                        clipped += 1;
                    }
                    let e = raw.clamp(propensity::CLIP.0, propensity::CLIP.1);
                    let (m0, m1) = (f0.predict(r), f1.predict(r));
                    if a[i] == 1 { m1 - m0 + (y[i] - m1) / e } else { m1 - m0 - (y[i] - m0) / (1.0 - e) }
                })
                .collect();
            if clipped > 0 {
                log::info!("dr learner: clipped {clipped} of {} propensities", x.rows());
            }
            let tau = fit_base(x, &phi, &spec.base)?;
            Components::DR { f0, f1, propensity, tau }
        }
    };
    Ok(UpliftModel { kind: spec.learner, dim, components })
}

pub fn fit_s_learner(x: &Matrix, y: &[f64], a: &[u8], base: BaseSpec) -> Result<UpliftModel, UpliftError> {
    fit_uplift(&UpliftSpec::new(LearnerKind::S, base), x, a, y)
}

pub fn fit_t_learner(x: &Matrix, y: &[f64], a: &[u8], base: BaseSpec) -> Result<UpliftModel, UpliftError> {
    fit_uplift(&UpliftSpec::new(LearnerKind::T, base), x, a, y)
}

pub fn fit_x_learner(x: &Matrix, y: &[f64], a: &[u8], base: BaseSpec) -> Result<UpliftModel, UpliftError> {
    fit_uplift(&UpliftSpec::new(LearnerKind::X, base), x, a, y)
}

pub fn fit_dr_learner(x: &Matrix, y: &[f64], a: &[u8], base: BaseSpec) -> Result<UpliftModel, UpliftError> {
    fit_uplift(&UpliftSpec::new(LearnerKind::DR, base), x, a, y)
}

/// DR pseudo-outcomes for given outcome models and propensity, exposed for
/// diagnostics.
pub fn dr_pseudo_outcomes(f0: &BaseRegressor, f1: &BaseRegressor, e: &dyn Fn(&[f64]) -> f64, x: &Matrix, a: &[u8], y: &[f64]) -> Vec<f64> {
    x.iter_rows()
        .enumerate()
        .map(|(i, r)| {
            let (m0, m1) = (f0.predict(r), f1.predict(r));
            let e = e(r).clamp(propensity::CLIP.0, propensity::CLIP.1);
            if a[i] == 1 { m1 - m0 + (y[i] - m1) / e } else { m1 - m0 - (y[i] - m0) / (1.0 - e) }
        })
        .collect()
}
