//! `H = λI + Σ g gᵀ`, kept only as its Cholesky factor.

use serde::{Deserialize, Serialize};

use crate::linalg::{Cholesky, Matrix};
use crate::math::sqrt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyState {
    pub lambda: f64,
    factor: Cholesky,
    pub updates: u64,
}

impl UncertaintyState {
    pub fn new(dim: usize, lambda: f64) -> Self {
        assert!(lambda > 0.0, "lambda must be positive");
        Self { lambda, factor: Cholesky::scaled_identity(dim, lambda), updates: 0 }
    }

    pub fn dim(&self) -> usize {
        self.factor.dim()
    }

    /// `sqrt(gᵀ H⁻¹ g)` by one forward substitution.
    pub fn sigma(&self, g: &[f64]) -> f64 {
        sqrt(self.factor.inv_quad_form(g))
    }

    pub fn add(&mut self, g: &[f64]) {
        self.factor.rank_one_update(g);
        self.updates += 1;
    }

    /// Dense `H`, for inspection and tests.
    pub fn matrix(&self) -> Matrix {
        self.factor.reconstruct()
    }

    pub fn factor(&self) -> &Cholesky {
        &self.factor
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isotropic_sigma() {
        let s = UncertaintyState::new(3, 4.0);
        assert!((s.sigma(&[3.0, 0.0, 4.0]) - 2.5).abs() < 1e-12);
        assert_eq!(s.sigma(&[0.0; 3]), 0.0);
    }

    #[test]
    fn unit_gradient_accumulation() {
        let mut s = UncertaintyState::new(3, 1.5);
        for _ in 0..7 {
            s.add(&[1.0, 0.0, 0.0]);
        }
        let h = s.matrix();
        let mut expected = Matrix::identity(3);
        for i in 0..3 {
            expected[(i, i)] = 1.5;
        }
        expected[(0, 0)] += 7.0;
        for i in 0..3 {
            for j in 0..3 {
                assert!((h[(i, j)] - expected[(i, j)]).abs() < 1e-12);
            }
        }
        assert_eq!(s.updates, 7);
    }
}
