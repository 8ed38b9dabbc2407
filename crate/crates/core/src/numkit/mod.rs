//! Dense numerical kernels sized for desk-scale control problems.
//!
//! Everything here works on `nalgebra` dynamic matrices and is a pure
//! function of its inputs. Dimensions are small (states <= 8, a few dozen
//! scalar decision variables), so the algorithms favour robustness and
//! post-hoc verification over asymptotic speed.

mod brent;
mod eig;
mod lmi;
mod lyapunov;

pub use brent::{minimize_scalar, minimize_scalar_with, ScalarBracket, ScalarMinimum, PRESCAN_POINTS};
pub use eig::{general_eigenvalues, spectral_abscissa, sym_eig, SymEig};
pub use lmi::{
    solve_lmi, solve_lmi_with, BlockSense, LmiBlock, LmiOptions, LmiProblem, LmiSolution,
    SymVarLayout, FEASIBILITY_TOL,
};
pub use lyapunov::{solve_lyapunov, LyapunovSolver};

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// A real symmetric matrix. Construction symmetrizes the input, so
/// `m[(i, j)] == m[(j, i)]` holds bit-for-bit afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(invalid(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(invalid("symmetric matrix has non-finite entries"));
        }
        Ok(Self::symmetrized(m))
    }

    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut s = m;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (s[(i, j)] + s[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        Self(s)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// Eigenvalue threshold used by [`SymMatrix::is_positive_definite`].
    pub fn pd_tolerance(&self) -> f64 {
        1e-10 * self.norm()
    }

    pub fn is_positive_definite(&self) -> bool {
        match sym_eig(self) {
            Ok(e) => e.values[0] > self.pd_tolerance(),
            Err(_) => false,
        }
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(sym_eig(self)?.values[0])
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        let e = sym_eig(self)?;
        Ok(e.values[e.values.len() - 1])
    }

    /// Principal square root. Fails if the matrix has a clearly negative
    /// eigenvalue; tiny negative round-off is clipped to zero.
    pub fn sqrt(&self) -> Result<SymMatrix> {
        let e = sym_eig(self)?;
        let tol = self.pd_tolerance().max(f64::MIN_POSITIVE);
        let mut roots = Vec::with_capacity(e.values.len());
        for &l in &e.values {
            if l < -tol {
                return Err(invalid(format!(
                    "square root of an indefinite matrix (eigenvalue {l:e})"
                )));
            }
            roots.push(l.max(0.0).sqrt());
        }
        let d = DMatrix::from_diagonal(&DVector::from_vec(roots));
        Ok(Self::symmetrized(&e.vectors * d * e.vectors.transpose()))
    }

    pub fn inverse(&self) -> Result<SymMatrix> {
        let chol = self
            .0
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NumericalFailure("inverse of a non-PD matrix".into()))?;
        Ok(Self::symmetrized(chol.inverse()))
    }

    /// `v^T M v`.
    pub fn quad_form(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.0 * v))
    }

    pub fn scaled(&self, k: f64) -> SymMatrix {
        Self(&self.0 * k)
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_symmetrizes() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 4.0, 3.0]);
        let s = SymMatrix::new(m).unwrap();
        assert_eq!(s[(0, 1)], s[(1, 0)]);
        assert_eq!(s[(0, 1)], 3.0);
    }

    #[test]
    fn rejects_rectangular() {
        assert!(SymMatrix::new(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn positive_definiteness() {
        assert!(SymMatrix::identity(3).is_positive_definite());
        assert!(!SymMatrix::from_diagonal(&[1.0, 0.0]).is_positive_definite());
        assert!(!SymMatrix::from_diagonal(&[1.0, -1e-3]).is_positive_definite());
        assert!(!SymMatrix::from_diagonal(&[0.0, 0.0]).is_positive_definite());
    }

    #[test]
    fn sqrt_squares_back() {
        let s = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0])).unwrap();
        let r = s.sqrt().unwrap();
        let back = r.as_matrix() * r.as_matrix();
        assert!((back - s.as_matrix()).amax() < 1e-12);
        assert!(SymMatrix::from_diagonal(&[1.0, -1.0]).sqrt().is_err());
    }
}
