//! Uplift decile tables.
//!
//! Decile 1 holds the lowest predicted scores. Equal scores are ordered by
//! input position, so callers that want ties broken by account id pass rows
//! sorted by id.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Arm, UpliftError};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecileRow {
    /// 1-based.
    pub decile: usize,
    pub count: usize,
    pub treated: usize,
    pub control: usize,
    pub mean_score: f64,
    /// `mean(y | a=1) − mean(y | a=0)`, `None` when an arm is empty.
    pub empirical_uplift: Option<f64>,
}

/// Decile (0-based) of each row by ascending score.
pub fn decile_index(scores: &[f64]) -> Vec<usize> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut out = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        out[i] = pos * 10 / n;
    }
    out
}

pub fn uplift_deciles(scores: &[f64], y: &[f64], a: &[u8]) -> Result<Vec<DecileRow>, UpliftError> {
    let n = scores.len();
    if y.len() != n || a.len() != n {
        return Err(UpliftError::LengthMismatch { expected: n, found: if y.len() != n { y.len() } else { a.len() } });
    }
    if !a.contains(&1) {
        return Err(UpliftError::EmptyArm(Arm::Treated));
    }
    if !a.contains(&0) {
        return Err(UpliftError::EmptyArm(Arm::Control));
    }
    let idx = decile_index(scores);
    let mut acc = [(0usize, 0usize, 0.0f64, 0.0f64, 0.0f64); 10];
    for i in 0..n {
        let c = &mut acc[idx[i]];
        c.4 += scores[i];
        if a[i] == 1 {
            c.0 += 1;
            c.2 += y[i];
        } else {
            c.1 += 1;
            c.3 += y[i];
        }
    }
    Ok(acc
        .iter()
        .enumerate()
        .filter(|(_, c)| c.0 + c.1 > 0)
        .map(|(d, &(nt, nc, st, sc, ss))| DecileRow {
            decile: d + 1,
            count: nt + nc,
            treated: nt,
            control: nc,
            mean_score: ss / (nt + nc) as f64,
            empirical_uplift: (nt > 0 && nc > 0).then(|| st / nt as f64 - sc / nc as f64),
        })
        .collect())
}

/// Spearman correlation between decile number and empirical uplift over the
/// deciles where it is defined.
pub fn decile_spearman(table: &[DecileRow]) -> f64 {
    let (d, u): (Vec<f64>, Vec<f64>) =
        table.iter().filter_map(|r| r.empirical_uplift.map(|u| (r.decile as f64, u))).unzip();
    stats::spearman(&d, &u)
}

/// Fraction of rows whose decile moves by at most one between two scorings.
pub fn stability(a: &[f64], b: &[f64]) -> f64 {
    let (da, db) = (decile_index(a), decile_index(b));
    let kept = da.iter().zip(&db).filter(|(x, y)| x.abs_diff(**y) <= 1).count();
    kept as f64 / a.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_sized_bins_with_stable_ties() {
        let scores = vec![1.0; 20];
        let idx = decile_index(&scores);
        assert_eq!(idx, (0..20).map(|i| i / 2).collect::<Vec<_>>());
    }

    #[test]
    fn empty_arm_is_undefined_not_dropped() {
        let scores: Vec<f64> = (0..20).map(f64::from).collect();
        let y = vec![1.0; 20];
        let mut a = vec![0u8; 20];
        a[19] = 1;
        let t = uplift_deciles(&scores, &y, &a).unwrap();
        assert_eq!(t.len(), 10);
        assert!(t[..9].iter().all(|r| r.empirical_uplift.is_none()));
        assert_eq!(t[9].empirical_uplift, Some(0.0));
    }

    #[test]
    fn stability_of_identical_scores_is_one() {
        let s: Vec<f64> = (0..100).map(|i| f64::from(i) * 0.7 % 13.0).collect();
        assert_eq!(stability(&s, &s), 1.0);
    }
}
