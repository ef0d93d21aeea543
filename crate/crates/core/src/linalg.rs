//! Small dense linear algebra: a row-major matrix and a Cholesky factor with
//! rank-one updates. Sizes here are desk scale (at most a few thousand).

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::math::{hypot, sqrt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("matrix is not positive definite (pivot {pivot})")]
pub struct NotPositiveDefinite {
    pub pivot: usize,
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds from equal-length rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self { rows: idx.len(), cols: self.cols, data }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        self.iter_rows().map(|r| crate::math::dot(r, v)).collect()
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cholesky {
    n: usize,
    /// Column-major (`l[j*n + i]` is `L[i][j]`), upper triangle kept at zero.
    /// Every hot loop below walks one column.
    l: Vec<f64>,
}

impl Cholesky {
    /// Factor of `scale · I`.
    pub fn scaled_identity(n: usize, scale: f64) -> Self {
        let mut l = vec![0.0; n * n];
        let s = sqrt(scale);
        for i in 0..n {
            l[i * n + i] = s;
        }
        Self { n, l }
    }

    /// Factors a symmetric positive-definite matrix (only the lower triangle
    /// of `a` is read).
    pub fn factor(a: &Matrix) -> Result<Self, NotPositiveDefinite> {
        assert_eq!(a.rows(), a.cols());
        let n = a.rows();
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut diag = a[(j, j)];
            for k in 0..j {
                diag -= l[k * n + j] * l[k * n + j];
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(NotPositiveDefinite { pivot: j });
            }
            let d = sqrt(diag);
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[k * n + i] * l[k * n + j];
                }
                l[j * n + i] = s / d;
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Raw factor storage (column-major).
    pub fn factor_data(&self) -> &[f64] {
        &self.l
    }

    /// `L[i][j]`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.l[j * self.n + i]
    }

    /// Solves `L z = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut z = b.to_vec();
        for k in 0..n {
            let col = &self.l[k * n..(k + 1) * n];
            let zk = z[k] / col[k];
            z[k] = zk;
            if zk != 0.0 {
                for (zi, lik) in z[k + 1..].iter_mut().zip(&col[k + 1..]) {
                    *zi -= lik * zk;
                }
            }
        }
        z
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = self.forward(b);
        for i in (0..n).rev() {
            let col = &self.l[i * n..(i + 1) * n];
            let s: f64 = col[i + 1..].iter().zip(&x[i + 1..]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - s) / col[i];
        }
        x
    }

    /// `bᵀ A⁻¹ b`, from one triangular solve.
    pub fn inv_quad_form(&self, b: &[f64]) -> f64 {
        self.forward(b).iter().map(|z| z * z).sum()
    }

    /// Replaces the factor of `A` with the factor of `A + v vᵀ`.
    pub fn rank_one_update(&mut self, v: &[f64]) {
        let n = self.n;
        assert_eq!(v.len(), n);
        let mut x = v.to_vec();
        for k in 0..n {
            let col = &mut self.l[k * n..(k + 1) * n];
            let lkk = col[k];
            let r = hypot(lkk, x[k]);
            let c = r / lkk;
            let s = x[k] / lkk;
            col[k] = r;
            if s == 0.0 {
                continue;
            }
            for (lik, xi) in col[k + 1..].iter_mut().zip(&mut x[k + 1..]) {
                let updated = (*lik + s * *xi) / c;
                *xi = c * *xi - s * updated;
                *lik = updated;
            }
        }
    }

    /// Reassembles `A = L Lᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.n;
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..=j).map(|k| self.entry(i, k) * self.entry(j, k)).sum();
                a[(i, j)] = s;
                a[(j, i)] = s;
            }
        }
        a
    }
}

/// Inverse of a small SPD matrix, column by column.
pub fn spd_inverse(a: &Matrix) -> Result<Matrix, NotPositiveDefinite> {
    let ch = Cholesky::factor(a)?;
    let n = a.rows();
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = ch.solve(&e);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    Ok(inv)
}
