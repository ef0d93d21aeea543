//! Difference-in-differences with cluster-robust inference, and the
//! time-based placebo pre-test.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::domain::{Group, PanelObservation, Period};
use crate::linalg::{spd_inverse, Matrix};
use crate::math::sqrt;
use crate::stats::two_sided_p;

/// z for a two-sided 95% interval.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMeans {
    pub treat_pre: f64,
    pub treat_post: f64,
    pub ctrl_pre: f64,
    pub ctrl_post: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inference {
    pub std_error: f64,
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Inference {
    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DidResult {
    pub tau_hat: f64,
    /// `tau_hat` over the control group's change.
    pub rte: f64,
    pub means: CellMeans,
    pub counts: [usize; 4],
    pub clusters: usize,
    /// `None` when there are too few units or observations for a
    /// cluster-robust variance.
    pub inference: Option<Inference>,
}

fn cell(g: Group, p: Period) -> usize {
    match (g, p) {
        (Group::Treat, Period::Pre) => 0,
        (Group::Treat, Period::Post) => 1,
        (Group::Ctrl, Period::Pre) => 2,
        (Group::Ctrl, Period::Post) => 3,
    }
}

/// DiD estimate, relative treatment effect and interaction-term inference.
///
/// Observations are processed in `(unit, time)` order so the result does
/// not depend on input order. The standard error is the CR1 sandwich of
/// `y ~ 1 + G + P + G·P`, clustered on `unit_id`.
pub fn did_estimate(panel: &[PanelObservation]) -> Result<DidResult, EvalError> {
    let mut obs: Vec<&PanelObservation> = panel.iter().collect();
    obs.sort_by(|a, b| (a.unit_id, a.time).cmp(&(b.unit_id, b.time)).then(cell(a.group, a.period).cmp(&cell(b.group, b.period))));
    if obs.iter().any(|o| !o.outcome.is_finite()) {
        return Err(EvalError::NonFinite);
    }

    let mut sums = [0.0; 4];
    let mut counts = [0usize; 4];
    for o in &obs {
        let c = cell(o.group, o.period);
        sums[c] += o.outcome;
        counts[c] += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(EvalError::EmptyCell(CELL_NAMES[c]));
    }
    let m: Vec<f64> = (0..4).map(|c| sums[c] / counts[c] as f64).collect();
    let means = CellMeans { treat_pre: m[0], treat_post: m[1], ctrl_pre: m[2], ctrl_post: m[3] };
    let ctrl_trend = means.ctrl_post - means.ctrl_pre;
    let tau_hat = (means.treat_post - means.treat_pre) - ctrl_trend;
    if ctrl_trend == 0.0 {
        return Err(EvalError::ZeroControlTrend);
    }

    let clusters: BTreeSet<u64> = obs.iter().map(|o| o.unit_id).collect();
    let inference = cluster_robust(&obs, &m, clusters.len()).map(|se| {
        let p_value = if se > 0.0 {
            two_sided_p(tau_hat / se)
        } else if tau_hat == 0.0 {
            1.0
        } else {
            0.0
        };
        Inference { std_error: se, p_value, ci_low: tau_hat - Z95 * se, ci_high: tau_hat + Z95 * se }
    });
    Ok(DidResult { tau_hat, rte: tau_hat / ctrl_trend, means, counts, clusters: clusters.len(), inference })
}

const CELL_NAMES: [&str; 4] = ["treat/pre", "treat/post", "ctrl/pre", "ctrl/post"];

fn design(o: &PanelObservation) -> [f64; 4] {
    let g = f64::from(u8::from(o.group == Group::Treat));
    let p = f64::from(u8::from(o.period == Period::Post));
    [1.0, g, p, g * p]
}

/// Interaction-coefficient standard error. The model is saturated, so the
/// fitted values are the cell means.
fn cluster_robust(obs: &[&PanelObservation], means: &[f64], n_clusters: usize) -> Option<f64> {
    const K: usize = 4;
    let n = obs.len();
    if n_clusters < 2 || n <= K {
        return None;
    }
    let mut xtx = Matrix::zeros(K, K);
    let mut scores: BTreeMap<u64, [f64; K]> = BTreeMap::new();
    for o in obs {
        let x = design(o);
        let e = o.outcome - means[cell(o.group, o.period)];
        let s = scores.entry(o.unit_id).or_insert([0.0; K]);
        for i in 0..K {
            s[i] += x[i] * e;
            for j in 0..K {
                xtx[(i, j)] += x[i] * x[j];
            }
        }
    }
    let bread = spd_inverse(&xtx).ok()?;
    let mut meat = Matrix::zeros(K, K);
    for s in scores.values() {
        for i in 0..K {
            for j in 0..K {
                meat[(i, j)] += s[i] * s[j];
            }
        }
    }
    // Row 3 of bread·meat·bread, column 3.
    let b3: Vec<f64> = (0..K).map(|i| bread[(3, i)]).collect();
    let mut var = 0.0;
    for i in 0..K {
        for j in 0..K {
            var += b3[i] * meat[(i, j)] * b3[j];
        }
    }
    let g = n_clusters as f64;
    let scale = g / (g - 1.0) * (n as f64 - 1.0) / (n - K) as f64;
    Some(sqrt((var * scale).max(0.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceboReport {
    pub cuts: Vec<i32>,
    pub results: Vec<DidResult>,
    /// Bonferroni-adjusted level each cut is tested at.
    pub alpha_per_cut: f64,
    pub significant: Vec<bool>,
    pub parallel_trends_plausible: bool,
}

/// Distinct pre-period times after the first, i.e. every possible cut.
pub fn default_cuts(panel: &[PanelObservation]) -> Vec<i32> {
    let times: BTreeSet<i32> = panel.iter().filter(|o| o.period == Period::Pre).map(|o| o.time).collect();
    times.into_iter().skip(1).collect()
}

/// Time-based A/A test: restrict to the pre-period, pretend treatment
/// started at each cut and run a DiD per cut. Trends are deemed parallel
/// when no cut is significant at `alpha / cuts`.
pub fn placebo_pretest(panel: &[PanelObservation], cuts: &[i32], alpha: f64) -> Result<PlaceboReport, EvalError> {
    let pre: Vec<&PanelObservation> = panel.iter().filter(|o| o.period == Period::Pre).collect();
    let times: BTreeSet<i32> = pre.iter().map(|o| o.time).collect();
    if times.len() < 2 {
        return Err(EvalError::InsufficientPrePeriod(times.len()));
    }
    if cuts.is_empty() {
        return Err(EvalError::NoCuts);
    }
    let first = *times.iter().next().unwrap_or(&0);
    let last = *times.iter().next_back().unwrap_or(&0);
    let alpha_per_cut = alpha / cuts.len() as f64;
    let mut results = Vec::with_capacity(cuts.len());
    let mut significant = Vec::with_capacity(cuts.len());
    for &cut in cuts {
        if cut <= first || cut > last {
            return Err(EvalError::CutOutOfRange(cut));
        }
        let relabeled: Vec<PanelObservation> = pre
            .iter()
            .map(|o| PanelObservation { period: if o.time >= cut { Period::Post } else { Period::Pre }, ..(*o).clone() })
            .collect();
        let r = did_estimate(&relabeled)?;
        significant.push(r.inference.is_some_and(|i| i.p_value < alpha_per_cut));
        results.push(r);
    }
    let parallel_trends_plausible = !significant.iter().any(|&s| s);
    Ok(PlaceboReport { cuts: cuts.to_vec(), results, alpha_per_cut, significant, parallel_trends_plausible })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn obs(unit: u64, group: Group, time: i32, y: f64) -> PanelObservation {
        let period = if time < 0 { Period::Pre } else { Period::Post };
        PanelObservation { unit_id: unit, group, time, period, outcome: y, covariates: vec![] }
    }

    #[test]
    fn hand_panel() {
        let panel = vec![
            obs(1, Group::Treat, -1, 10.0),
            obs(1, Group::Treat, 0, 14.0),
            obs(2, Group::Ctrl, -1, 8.0),
            obs(2, Group::Ctrl, 0, 9.0),
        ];
        let r = did_estimate(&panel).unwrap();
        assert_eq!(r.tau_hat, 3.0);
        assert_eq!(r.rte, 3.0);
        assert!(r.inference.is_none());
    }

    #[test]
    fn empty_cell_and_flat_control() {
        let panel = vec![obs(1, Group::Treat, -1, 1.0), obs(1, Group::Treat, 0, 2.0), obs(2, Group::Ctrl, -1, 1.0)];
        assert_eq!(did_estimate(&panel), Err(EvalError::EmptyCell("ctrl/post")));
        let flat = vec![
            obs(1, Group::Treat, -1, 1.0),
            obs(1, Group::Treat, 0, 2.0),
            obs(2, Group::Ctrl, -1, 1.0),
            obs(2, Group::Ctrl, 0, 1.0),
        ];
        assert_eq!(did_estimate(&flat), Err(EvalError::ZeroControlTrend));
    }

    #[test]
    fn placebo_needs_two_pre_times() {
        let panel = vec![obs(1, Group::Treat, -1, 1.0), obs(2, Group::Ctrl, -1, 1.0)];
        assert_eq!(placebo_pretest(&panel, &[0], 0.05), Err(EvalError::InsufficientPrePeriod(1)));
    }
}
