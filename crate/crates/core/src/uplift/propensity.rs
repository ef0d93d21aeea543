//! Logistic propensity model fit by penalized Newton iterations.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::base::solve_spd_with_jitter;
use super::UpliftError;
use crate::linalg::Matrix;
use crate::math::{dot, sigmoid};

pub const CLIP: (f64, f64) = (0.01, 0.99);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    pub intercept: f64,
    pub coefs: Vec<f64>,
    /// Training means subtracted before applying `coefs`.
    pub center: Vec<f64>,
}

impl PropensityModel {
    /// Unclipped probability.
    pub fn raw(&self, x: &[f64]) -> f64 {
        let z: f64 = self.intercept + self.coefs.iter().zip(x.iter().zip(&self.center)).map(|(c, (v, m))| c * (v - m)).sum::<f64>();
        sigmoid(z)
    }

    /// Probability clipped into [`CLIP`].
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.raw(x).clamp(CLIP.0, CLIP.1)
    }
}

/// Fits `P(a = 1 | x)` with an L2 penalty `l2` on the slopes, which keeps the
/// fit finite under separation. The intercept is not penalized, so constant
/// features reproduce the sample treatment share.
pub fn propensity_fit(x: &Matrix, a: &[u8], l2: f64) -> Result<PropensityModel, UpliftError> {
    let (n, p) = (x.rows(), x.cols());
    if n != a.len() {
        return Err(UpliftError::LengthMismatch { expected: n, found: a.len() });
    }
    let treated = a.iter().filter(|&&v| v == 1).count();
    if treated == 0 {
        return Err(UpliftError::EmptyArm(super::Arm::Treated));
    }
    if treated == n {
        return Err(UpliftError::EmptyArm(super::Arm::Control));
    }
    let center: Vec<f64> = (0..p).map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64).collect();
    let share = treated as f64 / n as f64;
    // beta[0] is the intercept.
    let mut beta = vec![0.0; p + 1];
    beta[0] = crate::math::ln(share / (1.0 - share));
    let mut z = vec![0.0; p + 1];
    for _ in 0..100 {
        let mut grad = vec![0.0; p + 1];
        let mut hess = Matrix::zeros(p + 1, p + 1);
        for i in 0..n {
            z[0] = 1.0;
            for j in 0..p {
                z[j + 1] = x[(i, j)] - center[j];
            }
            let mu = sigmoid(dot(&beta, &z));
            let r = mu - f64::from(a[i]);
            let w = mu * (1.0 - mu);
            for u in 0..=p {
                grad[u] += r * z[u];
                let row = hess.row_mut(u);
                for v in 0..=u {
                    row[v] += w * z[u] * z[v];
                }
            }
        }
        for u in 0..=p {
            for v in 0..u {
                let h = hess[(u, v)];
                hess.row_mut(v)[u] = h;
            }
            if u > 0 {
                grad[u] += l2 * beta[u];
                hess.row_mut(u)[u] += l2;
            }
        }
        let step = solve_spd_with_jitter(&hess, &grad);
        let mut size: f64 = 0.0;
        for (b, s) in beta.iter_mut().zip(&step) {
            *b -= s;
            size = size.max(s.abs());
        }
        if size < 1e-10 {
            break;
        }
    }
    Ok(PropensityModel { intercept: beta[0], coefs: beta[1..].to_vec(), center })
}
