//! Coarsened exact matching.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::math::sqrt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CemUnit {
    pub id: u64,
    pub treated: bool,
    pub covariates: Vec<f64>,
}

/// Bin edges per covariate, ascending. A value `v` falls in bin `b` when
/// `edges[b] ≤ v < edges[b+1]`; the last bin also includes its upper
/// edge. Values outside `[edges[0], edges[last]]` are not covered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coarsening {
    pub edges: Vec<Vec<f64>>,
}

impl Coarsening {
    pub fn new(edges: Vec<Vec<f64>>) -> Result<Self, EvalError> {
        if edges.is_empty() {
            return Err(EvalError::InvalidCoarsening("no covariates"));
        }
        for e in &edges {
            if e.len() < 2 || e.iter().any(|v| !v.is_finite()) || e.windows(2).any(|w| w[0] >= w[1]) {
                return Err(EvalError::InvalidCoarsening("edges must be ≥ 2 finite, strictly ascending values"));
            }
        }
        Ok(Self { edges })
    }

    /// `count` equal-width bins spanning `[lo, hi]` for every covariate.
    pub fn uniform(dims: usize, lo: f64, hi: f64, count: usize) -> Result<Self, EvalError> {
        let step = (hi - lo) / count as f64;
        let e: Vec<f64> = (0..=count).map(|i| if i == count { hi } else { lo + step * i as f64 }).collect();
        Self::new((0..dims).map(|_| e.clone()).collect())
    }

    pub fn bin(&self, c: usize, v: f64) -> Option<usize> {
        let e = &self.edges[c];
        let last = e.len() - 1;
        if !(v >= e[0] && v <= e[last]) {
            return None;
        }
        Some(e.partition_point(|&edge| edge <= v).saturating_sub(1).min(last - 1))
    }

    pub fn signature(&self, x: &[f64]) -> Option<Vec<usize>> {
        self.edges.iter().enumerate().map(|(c, _)| x.get(c).and_then(|&v| self.bin(c, v))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedUnit {
    pub id: u64,
    pub stratum: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CemResult {
    pub treated: Vec<MatchedUnit>,
    pub control: Vec<MatchedUnit>,
    pub strata: Vec<Vec<usize>>,
    /// Outside the coarsening range.
    pub dropped_uncovered: usize,
    /// In a stratum that lacks the other group.
    pub dropped_treated: usize,
    pub dropped_control: usize,
    /// True when nothing was retained.
    pub empty: bool,
    /// Standardized mean difference per covariate, before and after.
    pub smd_before: Vec<f64>,
    pub smd_after: Vec<f64>,
}

impl CemResult {
    pub fn retained(&self) -> usize {
        self.treated.len() + self.control.len()
    }
}

/// Bins every unit, keeps strata holding both groups and weights controls
/// by `(m_T^s / m_T) / (m_C^s / m_C)`; treated units get weight 1.
pub fn cem_match(units: &[CemUnit], coarsening: &Coarsening) -> Result<CemResult, EvalError> {
    let k = coarsening.edges.len();
    if units.iter().any(|u| u.covariates.len() < k) {
        return Err(EvalError::InvalidCoarsening("unit has fewer covariates than the coarsening"));
    }
    let mut strata: BTreeMap<Vec<usize>, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    let mut uncovered = 0;
    for (i, u) in units.iter().enumerate() {
        match coarsening.signature(&u.covariates) {
            Some(sig) => {
                let entry = strata.entry(sig).or_default();
                if u.treated { entry.0.push(i) } else { entry.1.push(i) }
            }
            None => uncovered += 1,
        }
    }
    let (mut dropped_t, mut dropped_c) = (0, 0);
    let mut kept = Vec::new();
    for (sig, (t, c)) in strata {
        if t.is_empty() || c.is_empty() {
            dropped_t += t.len();
            dropped_c += c.len();
        } else {
            kept.push((sig, t, c));
        }
    }
    let m_t: usize = kept.iter().map(|(_, t, _)| t.len()).sum();
    let m_c: usize = kept.iter().map(|(_, _, c)| c.len()).sum();
    let mut treated = Vec::with_capacity(m_t);
    let mut control = Vec::with_capacity(m_c);
    let mut weights = alloc::vec![0.0; units.len()];
    let mut sigs = Vec::with_capacity(kept.len());
    for (s, (sig, t, c)) in kept.into_iter().enumerate() {
        let w = (t.len() as f64 / m_t as f64) / (c.len() as f64 / m_c as f64);
        for &i in &t {
            weights[i] = 1.0;
            treated.push(MatchedUnit { id: units[i].id, stratum: s, weight: 1.0 });
        }
        for &i in &c {
            weights[i] = w;
            control.push(MatchedUnit { id: units[i].id, stratum: s, weight: w });
        }
        sigs.push(sig);
    }
    let all = alloc::vec![1.0; units.len()];
    let smd_before = (0..k).map(|c| smd(units, &all, |u| u.covariates[c])).collect();
    let smd_after = (0..k).map(|c| smd(units, &weights, |u| u.covariates[c])).collect();
    Ok(CemResult {
        empty: treated.is_empty(),
        treated,
        control,
        strata: sigs,
        dropped_uncovered: uncovered,
        dropped_treated: dropped_t,
        dropped_control: dropped_c,
        smd_before,
        smd_after,
    })
}

/// Weighted `(mean_T − mean_C) / sqrt((var_T + var_C) / 2)`; units with
/// zero weight are ignored. Zero when both groups are constant and equal.
pub fn smd(units: &[CemUnit], weights: &[f64], f: impl Fn(&CemUnit) -> f64) -> f64 {
    let stats = |treated: bool| {
        let (mut sw, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for (u, &w) in units.iter().zip(weights) {
            if u.treated == treated && w > 0.0 {
                let v = f(u);
                sw += w;
                s1 += w * v;
                s2 += w * v * v;
            }
        }
        if sw == 0.0 {
            return (f64::NAN, f64::NAN);
        }
        let m = s1 / sw;
        (m, (s2 / sw - m * m).max(0.0))
    };
    let (mt, vt) = stats(true);
    let (mc, vc) = stats(false);
    let diff = mt - mc;
    let pooled = sqrt((vt + vc) / 2.0);
    if pooled == 0.0 {
        if diff == 0.0 { 0.0 } else { f64::INFINITY.copysign(diff) }
    } else {
        diff / pooled
    }
}
