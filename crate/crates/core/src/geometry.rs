//! Constraint-space linear algebra built on a Cholesky factor of `GGᵀ`.
//!
//! The same factor serves the null-space projection `P = I − Gᵀ(GGᵀ)⁻¹G`,
//! the normal direction `v = −Gᵀ(GGᵀ)⁻¹c` and the least-squares multiplier
//! `λ = −(GGᵀ)⁻¹G g`. `P` is never formed unless explicitly requested.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{check_len, Error, Result};

/// Gram matrices with a 1-norm condition estimate at or above this are rejected.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Reusable factorization of the constraint Jacobian at one iterate.
#[derive(Debug, Clone)]
pub struct ConstraintFactorization {
    g: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    condition: f64,
    gram_eig_min: f64,
    gram_eig_max: f64,
}

impl ConstraintFactorization {
    /// Factorizes `GGᵀ` for an `m × d` Jacobian with `m ≤ d`.
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        let (m, d) = g.shape();
        if m == 0 || m > d {
            return Err(Error::Contract(format!(
                "factorize: Jacobian must be m×d with 0 < m ≤ d, got {m}×{d}"
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("factorize: non-finite Jacobian entry".into()));
        }
        let gram = &g * g.transpose();
        let norm1 = one_norm(&gram);
        let chol = Cholesky::new(gram.clone()).ok_or(Error::RankDeficient {
            condition: f64::INFINITY,
        })?;
        let condition = norm1 * one_norm(&chol.inverse());
        if !(condition < MAX_GRAM_CONDITION) {
            return Err(Error::RankDeficient { condition });
        }
        let eig = SymmetricEigen::new(gram).eigenvalues;
        let gram_eig_min = eig.min().max(0.0);
        let gram_eig_max = eig.max();
        Ok(Self {
            g,
            chol,
            condition,
            gram_eig_min,
            gram_eig_max,
        })
    }

    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn dim_x(&self) -> usize {
        self.g.ncols()
    }

    pub fn dim_c(&self) -> usize {
        self.g.nrows()
    }

    /// Lower-triangular `L` with `LLᵀ = GGᵀ`.
    pub fn gram_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// 1-norm condition number of `GGᵀ`.
    pub fn condition_estimate(&self) -> f64 {
        self.condition
    }

    /// Spectral norm `‖G‖₂`.
    pub fn spectral_norm(&self) -> f64 {
        self.gram_eig_max.sqrt()
    }

    /// `σ_min(G)²`, the smallest eigenvalue of `GGᵀ`.
    pub fn min_gram_eigenvalue(&self) -> f64 {
        self.gram_eig_min
    }

    /// Solves `(GGᵀ) z = r`.
    pub fn gram_solve(&self, r: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(r)
    }

    /// `P y = y − Gᵀ(GGᵀ)⁻¹G y`.
    pub fn project_null(&self, y: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(y.len(), self.dim_x());
        let z = self.chol.solve(&(&self.g * y));
        y - self.g.tr_mul(&z)
    }

    /// `v = −Gᵀ(GGᵀ)⁻¹c`, the minimum-norm solution of `G v = −c`.
    pub fn normal_direction(&self, c: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(c.len(), self.dim_c());
        -self.g.tr_mul(&self.chol.solve(c))
    }

    /// Least-squares multiplier `λ = −(GGᵀ)⁻¹G g`, so that `g + Gᵀλ = P g`.
    pub fn ls_multiplier(&self, gbar: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(gbar.len(), self.dim_x());
        -self.chol.solve(&(&self.g * gbar))
    }

    /// Dense projector `P` (d × d).
    pub fn projector(&self) -> DMatrix<f64> {
        let d = self.dim_x();
        let ginv = self.chol.solve(&self.g);
        DMatrix::identity(d, d) - self.g.transpose() * ginv
    }
}

/// Checked constructor mirroring [`ConstraintFactorization::new`].
pub fn factorize(g: DMatrix<f64>) -> Result<ConstraintFactorization> {
    ConstraintFactorization::new(g)
}

/// Dimension-checked projection.
pub fn project_null(fac: &ConstraintFactorization, y: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("project_null", fac.dim_x(), y.len())?;
    Ok(fac.project_null(y))
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
