//! Small dense symmetric systems.

use nalgebra::{DMatrix, SymmetricEigen};

/// Symmetric matrix with its eigendecomposition, for conditioned solves.
pub(crate) struct SymSolver {
    eigen: SymmetricEigen<f64, nalgebra::Dyn>,
}

impl SymSolver {
    pub fn new(m: &DMatrix<f64>) -> Self {
        Self {
            eigen: SymmetricEigen::new(m.clone()),
        }
    }

    /// Ratio of largest to smallest absolute eigenvalue; infinite when singular.
    pub fn condition(&self) -> f64 {
        let abs = self.eigen.eigenvalues.iter().map(|v| v.abs());
        let (lo, hi) = abs.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if lo == 0.0 || !lo.is_finite() {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Eigenvector of the eigenvalue smallest in absolute value.
    pub fn weakest_direction(&self) -> Vec<f64> {
        let (idx, _) = self
            .eigen
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bv), (i, v)| {
                if v.abs() < bv {
                    (i, v.abs())
                } else {
                    (bi, bv)
                }
            });
        self.eigen.eigenvectors.column(idx).iter().copied().collect()
    }

    /// `M^{-1} rhs` via the eigendecomposition.
    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let q = &self.eigen.eigenvectors;
        let mut t = q.transpose() * rhs;
        for (i, lambda) in self.eigen.eigenvalues.iter().enumerate() {
            t.row_mut(i).scale_mut(1.0 / lambda);
        }
        q * t
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.eigen.eigenvalues.len();
        self.solve(&DMatrix::identity(n, n))
    }
}
