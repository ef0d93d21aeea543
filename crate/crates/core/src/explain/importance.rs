//! Local-surrogate feature importance.
//!
//! Around an instance `x`, draw `z = x + std ⊙ u` with `u ~ N(0, I)`, weight
//! each draw by `exp(−‖u‖² / width²)`, and fit a weighted ridge model of the
//! predictor's output on `u`. The surrogate slope per original unit is
//! `b_j / std_j`; the reported weight is that slope times `x_j − mean_j`.
//! A predictor that returns the same value for every draw gets zero weights.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::domain::AccountId;
use crate::linalg::Matrix;
use crate::math::{exp, sqrt};
use crate::rng;
use crate::uplift::fit_ridge;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRecord {
    pub feature_name: String,
    pub weight: f64,
    pub value: f64,
    pub account_id: AccountId,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImportanceConfig {
    pub samples: usize,
    /// Kernel width in standardized units; `None` uses `0.75·√p`.
    pub kernel_width: Option<f64>,
    pub ridge: f64,
    pub seed: u64,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        Self { samples: 2000, kernel_width: None, ridge: 1e-3, seed: 1 }
    }
}

/// Population moments used to scale perturbations and center weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    pub fn from_rows(x: &Matrix) -> Self {
        let p = x.cols();
        let mut mean = Vec::with_capacity(p);
        let mut std = Vec::with_capacity(p);
        for j in 0..p {
            let col = x.column(j);
            mean.push(crate::stats::mean(&col));
            std.push(crate::stats::std_dev(&col));
        }
        Self { mean, std }
    }
}

pub fn instance_importance(
    model: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    names: &[String],
    stats: &FeatureStats,
    account_id: AccountId,
    config: &ImportanceConfig,
) -> Result<Vec<ImportanceRecord>, ExplainError> {
    let p = x.len();
    if names.len() != p || stats.mean.len() != p || stats.std.len() != p {
        return Err(ExplainError::LengthMismatch);
    }
    // Zero-variance features are perturbed on a unit scale.
    let scale: Vec<f64> = stats.std.iter().map(|&s| if s > 0.0 { s } else { 1.0 }).collect();
    let width = config.kernel_width.unwrap_or(0.75 * sqrt(p as f64));
    let mut r = rng::keyed(config.seed, rng::stream::IMPORTANCE, account_id.0);
    let n = config.samples.max(p + 2);
    let mut u = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let mut z = alloc::vec![0.0; p];
    for _ in 0..n {
        let mut d2 = 0.0;
        for j in 0..p {
            let uj = rng::normal(&mut r);
            d2 += uj * uj;
            u.push(uj);
            z[j] = x[j] + scale[j] * uj;
        }
        y.push(model(&z));
        w.push(exp(-d2 / (width * width)));
    }
    let u = Matrix::from_vec(n, p, u);
    let surrogate = if y.iter().all(|&v| v == y[0]) {
        crate::uplift::RidgeModel { intercept: y[0], coefs: alloc::vec![0.0; p] }
    } else {
        fit_ridge(&u, &y, Some(&w), config.ridge)
    };
    Ok((0..p)
        .map(|j| {
            let weight = surrogate.coefs[j] / scale[j] * (x[j] - stats.mean[j]);
            ImportanceRecord {
                feature_name: names[j].clone(),
                weight: if weight.is_finite() { weight } else { 0.0 },
                value: x[j],
                account_id,
            }
        })
        .collect())
}
