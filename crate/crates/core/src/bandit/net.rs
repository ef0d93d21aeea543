//! One-hidden-layer ReLU reward network `f_θ([x, onehot(a)])`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::ActionType;
use crate::math::sqrt;
use crate::rng::{self, SimRng};

/// Parameters are laid out as `[W1 (m × d_in, row-major), b1, w2, b2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardNet {
    pub d_in: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
}

/// Network input: the context followed by the one-hot action.
pub fn input(x: &[f64], action: ActionType) -> Vec<f64> {
    let mut z = Vec::with_capacity(x.len() + 3);
    z.extend_from_slice(x);
    let mut onehot = [0.0; 3];
    onehot[action.index()] = 1.0;
    z.extend_from_slice(&onehot);
    z
}

impl RewardNet {
    pub fn param_count(d_in: usize, hidden: usize) -> usize {
        (d_in + 1) * hidden + hidden + 1
    }

    /// He-scaled first layer, `1/√m` output layer, zero biases.
    pub fn new(context_dim: usize, hidden: usize, rng: &mut SimRng) -> Self {
        let d_in = context_dim + 3;
        let mut params = vec![0.0; Self::param_count(d_in, hidden)];
        let s1 = sqrt(2.0 / d_in as f64);
        for w in &mut params[..hidden * d_in] {
            *w = s1 * rng::normal(rng);
        }
        let s2 = 1.0 / sqrt(hidden as f64);
        let w2 = hidden * d_in + hidden;
        for w in &mut params[w2..w2 + hidden] {
            *w = s2 * rng::normal(rng);
        }
        Self { d_in, hidden, params }
    }

    fn w1(&self) -> &[f64] {
        &self.params[..self.hidden * self.d_in]
    }

    fn b1(&self) -> &[f64] {
        let o = self.hidden * self.d_in;
        &self.params[o..o + self.hidden]
    }

    fn w2(&self) -> &[f64] {
        let o = self.hidden * self.d_in + self.hidden;
        &self.params[o..o + self.hidden]
    }

    fn b2(&self) -> f64 {
        self.params[self.params.len() - 1]
    }

    fn pre_activations(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.d_in, "network input has wrong dimension");
        let (w1, b1) = (self.w1(), self.b1());
        (0..self.hidden).map(|k| b1[k] + crate::math::dot(&w1[k * self.d_in..(k + 1) * self.d_in], z)).collect()
    }

    pub fn forward(&self, z: &[f64]) -> f64 {
        let h = self.pre_activations(z);
        self.b2() + h.iter().zip(self.w2()).map(|(&h, w)| h.max(0.0) * w).sum::<f64>()
    }

    /// Output and its gradient with respect to all parameters.
    pub fn grad_params(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let h = self.pre_activations(z);
        let w2 = self.w2();
        let (m, d) = (self.hidden, self.d_in);
        let mut g = vec![0.0; self.params.len()];
        let mut out = self.b2();
        for k in 0..m {
            if h[k] > 0.0 {
                out += h[k] * w2[k];
                let row = &mut g[k * d..(k + 1) * d];
                for (gi, zi) in row.iter_mut().zip(z) {
                    *gi = w2[k] * zi;
                }
                g[m * d + k] = w2[k];
                g[m * d + m + k] = h[k];
            }
        }
        *g.last_mut().unwrap() = 1.0;
        (out, g)
    }

    /// Output and its gradient with respect to the network input.
    pub fn grad_input(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let h = self.pre_activations(z);
        let (w1, w2) = (self.w1(), self.w2());
        let d = self.d_in;
        let mut g = vec![0.0; d];
        let mut out = self.b2();
        for k in 0..self.hidden {
            if h[k] > 0.0 {
                out += h[k] * w2[k];
                for (gi, w) in g.iter_mut().zip(&w1[k * d..(k + 1) * d]) {
                    *gi += w2[k] * w;
                }
            }
        }
        (out, g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count() {
        let mut r = rng::seeded(1, 0);
        let net = RewardNet::new(5, 32, &mut r);
        assert_eq!(net.params.len(), (8 + 1) * 32 + 32 + 1);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut r = rng::seeded(2, 0);
        let net = RewardNet::new(4, 8, &mut r);
        let z = input(&[0.3, -1.2, 0.8, 0.1], ActionType::PreventChurn);
        let (_, g) = net.grad_params(&z);
        let h = 1e-5;
        for i in 0..net.params.len() {
            let mut p = net.clone();
            p.params[i] += h;
            let up = p.forward(&z);
            p.params[i] -= 2.0 * h;
            let fd = (up - p.forward(&z)) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-4 * fd.abs().max(1e-3), "param {i}: {fd} vs {}", g[i]);
        }
        let (_, gi) = net.grad_input(&z);
        for i in 0..z.len() {
            let mut zp = z.clone();
            zp[i] += h;
            let up = net.forward(&zp);
            zp[i] -= 2.0 * h;
            let fd = (up - net.forward(&zp)) / (2.0 * h);
            assert!((fd - gi[i]).abs() <= 1e-4 * fd.abs().max(1e-3));
        }
    }
}
