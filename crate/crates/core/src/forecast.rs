//! Engagement forecasters: one clamped regressor per engagement metric,
//! predicting next-period values from engagement features.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::Account;
use crate::linalg::Matrix;
use crate::math::sqrt;
use crate::uplift::{fit_base, BaseRegressor, BaseSpec, UpliftError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ForecastError {
    #[error("training target {value} outside [{lo}, {hi}] for {name}")]
    TargetOutOfRange { name: String, value: f64, lo: f64, hi: f64 },
    #[error("empty holdout")]
    EmptyHoldout,
    #[error("account has {found} engagement metrics, model expects {expected}")]
    MetricCount { expected: usize, found: usize },
    #[error(transparent)]
    Fit(#[from] UpliftError),
}

/// Engagement metric being forecast and its valid range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

impl Target {
    /// Product utilization, 0–100.
    pub fn pu() -> Self {
        Self { name: "pu".into(), lo: 0.0, hi: 100.0 }
    }

    /// Product adoption, 0–1.
    pub fn pa() -> Self {
        Self { name: "pa".into(), lo: 0.0, hi: 1.0 }
    }

    /// Target for metric `m` of the synthetic generator.
    pub fn for_metric(m: usize) -> Self {
        match m {
            0 => Self::pu(),
            1 => Self::pa(),
            _ => {
                let (lo, hi) = crate::datagen::metric_range(m);
                Self { name: alloc::format!("m{}", m + 1), lo, hi }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecaster {
    pub target: Target,
    pub base: BaseRegressor,
}

impl Forecaster {
    pub fn predict_raw(&self, x_e: &[f64]) -> f64 {
        self.base.predict(x_e)
    }

    pub fn predict(&self, x_e: &[f64]) -> f64 {
        self.predict_raw(x_e).clamp(self.target.lo, self.target.hi)
    }
}

pub fn fit_forecaster(x_e: &Matrix, y: &[f64], target: Target, base: &BaseSpec) -> Result<Forecaster, ForecastError> {
    if let Some(&value) = y.iter().find(|v| !(target.lo..=target.hi).contains(*v)) {
        return Err(ForecastError::TargetOutOfRange { name: target.name, value, lo: target.lo, hi: target.hi });
    }
    Ok(Forecaster { target, base: fit_base(x_e, y, base)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastMetrics {
    pub mae: f64,
    pub rmse: f64,
}

pub fn error_metrics(pred: &[f64], truth: &[f64]) -> Result<ForecastMetrics, ForecastError> {
    if pred.is_empty() {
        return Err(ForecastError::EmptyHoldout);
    }
    let n = pred.len() as f64;
    let (abs, sq) = pred.iter().zip(truth).fold((0.0, 0.0), |(a, s), (p, t)| {
        let e = p - t;
        (a + e.abs(), s + e * e)
    });
    Ok(ForecastMetrics { mae: abs / n, rmse: sqrt(sq / n) })
}

pub fn evaluate(f: &Forecaster, x: &Matrix, y: &[f64]) -> Result<ForecastMetrics, ForecastError> {
    let pred: Vec<f64> = x.iter_rows().map(|r| f.predict(r)).collect();
    error_metrics(&pred, y)
}

/// One forecaster per engagement metric, in metric order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementModel {
    pub forecasters: Vec<Forecaster>,
}

impl EngagementModel {
    /// Fits metric `m` on `next[i][m]`.
    pub fn fit(x_e: &Matrix, next: &[Vec<f64>], base: &BaseSpec) -> Result<Self, ForecastError> {
        let k = next.first().map_or(0, Vec::len);
        let forecasters = (0..k)
            .map(|m| {
                let y: Vec<f64> = next.iter().map(|v| v[m]).collect();
                fit_forecaster(x_e, &y, Target::for_metric(m), base)
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { forecasters })
    }

    /// Next-period change per metric: prediction minus current value.
    pub fn forecast_delta(&self, account: &Account) -> Result<Vec<f64>, ForecastError> {
        if account.engagement.len() != self.forecasters.len() {
            return Err(ForecastError::MetricCount { expected: self.forecasters.len(), found: account.engagement.len() });
        }
        let x_e = account.x_e();
        Ok(self.forecasters.iter().zip(&account.engagement).map(|(f, now)| f.predict(&x_e) - now).collect())
    }
}
