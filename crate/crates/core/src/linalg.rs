//! Small dense symmetric positive semidefinite matrices (dimension <= 3 for
//! covariances, larger for Gram matrices).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue threshold below which a direction counts as null.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SymPsd {
    dim: usize,
    matrix: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SymPsd {
    /// Validates symmetry and positive semidefiniteness of a row-major matrix.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("covariance must be a non-empty square matrix"));
        }
        let matrix = DMatrix::from_fn(dim, dim, |i, j| rows[i][j]);
        Self::from_matrix(matrix)
    }

    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        let dim = matrix.nrows();
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("covariance entries must be finite"));
        }
        let scale = matrix.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        for i in 0..dim {
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::invalid("covariance must be symmetric"));
                }
            }
        }
        let eig = SymmetricEigen::new(matrix.clone());
        let min = eig.eigenvalues.min();
        if min < -1e-10 * scale {
            return Err(Error::invalid(
                "covariance must be positive semidefinite",
            ));
        }
        Ok(Self {
            dim,
            matrix,
            eigenvalues: eig.eigenvalues.map(|v| v.max(0.0)),
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn identity_scaled(dim: usize, v: f64) -> Self {
        Self::from_matrix(DMatrix::identity(dim, dim) * v).expect("scaled identity is PSD")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.matrix[(i, j)]).collect())
            .collect()
    }

    fn threshold(&self) -> f64 {
        RANK_TOL * self.eigenvalues.max().max(1e-300)
    }

    /// `u . M u`
    pub fn quad(&self, u: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            let mut row = 0.0;
            for j in 0..self.dim {
                row += self.matrix[(i, j)] * u[j];
            }
            s += u[i] * row;
        }
        s
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        for i in 0..self.dim {
            out[i] = (0..self.dim).map(|j| self.matrix[(i, j)] * u[j]).sum();
        }
    }

    /// `w . M^+ w` when `w` lies in the range of `M`, `None` otherwise.
    pub fn pinv_quad(&self, w: &[f64]) -> Option<f64> {
        let thr = self.threshold();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut val = 0.0;
        let mut null_part = 0.0;
        for k in 0..self.dim {
            let proj: f64 = (0..self.dim).map(|i| self.eigenvectors[(i, k)] * w[i]).sum();
            if self.eigenvalues[k] > thr {
                val += proj * proj / self.eigenvalues[k];
            } else {
                null_part += proj * proj;
            }
        }
        if null_part.sqrt() > 1e-10 * norm.max(1e-300) && norm > 0.0 {
            None
        } else {
            Some(val)
        }
    }

    /// `M^+ w`; `None` when `w` leaves the range of `M`.
    pub fn pinv_apply(&self, w: &[f64]) -> Option<Vec<f64>> {
        self.pinv_quad(w)?;
        let thr = self.threshold();
        let mut out = vec![0.0; self.dim];
        for k in 0..self.dim {
            if self.eigenvalues[k] <= thr {
                continue;
            }
            let proj: f64 = (0..self.dim).map(|i| self.eigenvectors[(i, k)] * w[i]).sum();
            let c = proj / self.eigenvalues[k];
            for (i, o) in out.iter_mut().enumerate() {
                *o += c * self.eigenvectors[(i, k)];
            }
        }
        Some(out)
    }

    /// True when `w` has a component in the null space of `M`.
    pub fn hits_kernel(&self, w: &[f64]) -> bool {
        self.pinv_quad(w).is_none()
    }

    /// Symmetric square root `M^{1/2}`, row-major.
    pub fn sqrt_rows(&self) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = (0..d)
                    .map(|k| {
                        self.eigenvectors[(i, k)] * self.eigenvalues[k].sqrt() * self.eigenvectors[(j, k)]
                    })
                    .sum();
            }
        }
        out
    }

    pub fn is_singular(&self) -> bool {
        self.eigenvalues.min() <= self.threshold()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_indefinite() {
        assert!(SymPsd::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        assert!(SymPsd::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]).is_err());
    }

    #[test]
    fn pinv_on_singular() {
        let m = SymPsd::from_rows(&[vec![2.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(m.pinv_quad(&[1.0, 0.0]), Some(0.5));
        assert_eq!(m.pinv_quad(&[0.0, 1.0]), None);
        assert_eq!(m.pinv_apply(&[1.0, 0.0]), Some(vec![0.5, 0.0]));
        assert!(m.is_singular());
    }

    #[test]
    fn sqrt_squares_back() {
        let m = SymPsd::from_rows(&[vec![2.0, 0.6], vec![0.6, 1.0]]).unwrap();
        let r = m.sqrt_rows();
        for i in 0..2 {
            for j in 0..2 {
                let s: f64 = (0..2).map(|k| r[i * 2 + k] * r[k * 2 + j]).sum();
                assert!((s - m.entry(i, j)).abs() < 1e-12);
            }
        }
    }
}
