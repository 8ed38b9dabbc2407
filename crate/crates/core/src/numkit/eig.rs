use nalgebra::{Complex, DMatrix, DVector, Schur, SymmetricEigen};

use super::SymMatrix;
use crate::error::{Error, Result};

const MAX_ITER: usize = 10_000;

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending and
/// eigenvectors stored column-wise in matching order.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEig {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&self.values));
        &self.vectors * d * self.vectors.transpose()
    }
}

pub fn sym_eig(m: &SymMatrix) -> Result<SymEig> {
    let n = m.dim();
    if n == 0 {
        return Err(Error::InvalidInput("eigendecomposition of an empty matrix".into()));
    }
    let eig = SymmetricEigen::try_new(m.as_matrix().clone(), f64::EPSILON, MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymEig { values, vectors })
}

/// Eigenvalues of a general real square matrix via real Schur form.
pub fn general_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(Error::InvalidInput("eigenvalues need a non-empty square matrix".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("matrix has non-finite entries".into()));
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest real part over the spectrum of `a`.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    Ok(general_eigenvalues(a)?
        .iter()
        .map(|c| c.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_spectrum() {
        let e = sym_eig(&SymMatrix::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_sorted_with_axis_vectors() {
        let e = sym_eig(&SymMatrix::from_diagonal(&[2.0, -1.0])).unwrap();
        assert_eq!(e.values, vec![-1.0, 2.0]);
        assert!((e.vectors[(1, 0)].abs() - 1.0).abs() < 1e-15);
        assert!((e.vectors[(0, 1)].abs() - 1.0).abs() < 1e-15);
        assert_eq!(e.vectors[(0, 0)], 0.0);
    }

    #[test]
    fn abscissa_of_diagonal_and_rotation() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -3.0, -5.0]));
        assert!((spectral_abscissa(&d).unwrap() + 1.0).abs() < 1e-14);
        let r = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(spectral_abscissa(&r).unwrap().abs() < 1e-14);
    }

    #[test]
    fn abscissa_of_repeated_pole_companion() {
        // (s+1)^2 (s+3)^2 (s+5)^2 = s^6 + 18 s^5 + 127 s^4 + 444 s^3 + 799 s^2 + 690 s + 225
        let coeffs = [225.0, 690.0, 799.0, 444.0, 127.0, 18.0];
        let mut a = DMatrix::zeros(6, 6);
        for i in 0..5 {
            a[(i, i + 1)] = 1.0;
        }
        for (j, c) in coeffs.iter().enumerate() {
            a[(5, j)] = -c;
        }
        // a defective double root perturbs by ~sqrt(eps)
        assert!((spectral_abscissa(&a).unwrap() + 1.0).abs() < 1e-6);
    }

    #[test]
    fn non_finite_input_is_a_numerical_failure() {
        let a = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(matches!(spectral_abscissa(&a), Err(Error::NumericalFailure(_))));
    }
}
