use nalgebra::{DMatrix, DVector};

use super::RelaxedLinearSystem;
use crate::error::{invalid, Result};
use crate::numkit::{sym_eig, SymMatrix, FEASIBILITY_TOL};

/// `{q : (q - p)^T P (q - p) <= 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    shape: SymMatrix,
    center: DVector<f64>,
}

impl Ellipsoid {
    pub fn new(shape: SymMatrix, center: DVector<f64>) -> Result<Self> {
        if shape.dim() != center.len() {
            return Err(invalid("ellipsoid center has the wrong dimension"));
        }
        if !shape.is_positive_definite() {
            return Err(invalid("ellipsoid shape must be positive definite"));
        }
        Ok(Self { shape, center })
    }

    pub fn shape(&self) -> &SymMatrix {
        &self.shape
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn contains(&self, q: &DVector<f64>) -> bool {
        self.shape.quad_form(&(q - &self.center)) <= 1.0
    }
}

pub fn ellipsoid_contains(e: &Ellipsoid, q: &DVector<f64>) -> bool {
    e.contains(q)
}

/// `[[A^T P + P A + alpha P, P B], [B^T P, -alpha I]]`.
pub(crate) fn invariance_matrix(sys: &RelaxedLinearSystem, p: &DMatrix<f64>, alpha: f64) -> DMatrix<f64> {
    let (n, m) = (sys.state_dim(), sys.b_bar().ncols());
    let a = sys.a_bar();
    let pb = p * sys.b_bar();
    let mut out = DMatrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(&(a.transpose() * p + p * a + p * alpha));
    out.view_mut((0, n), (n, m)).copy_from(&pb);
    out.view_mut((n, 0), (m, n)).copy_from(&pb.transpose());
    out.view_mut((n, n), (m, m)).copy_from(&(DMatrix::identity(m, m) * -alpha));
    out
}

/// Whether `E(P, 0)` is invariant at decay rate `alpha` for every unit-bounded
/// disturbance, i.e. the invariance matrix is negative semidefinite up to the
/// solver feasibility tolerance.
pub fn invariant_ellipsoid_check(sys: &RelaxedLinearSystem, p: &SymMatrix, alpha: f64) -> bool {
    if p.dim() != sys.state_dim() || !(alpha >= 0.0) || !p.is_positive_definite() {
        return false;
    }
    let m = SymMatrix::symmetrized(invariance_matrix(sys, p.as_matrix(), alpha));
    match sym_eig(&m) {
        Ok(e) => e.values[e.values.len() - 1] <= FEASIBILITY_TOL,
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(b: f64) -> RelaxedLinearSystem {
        let one = DMatrix::from_element(1, 1, 1.0);
        RelaxedLinearSystem::new(-one.clone(), one.clone() * b, one, SymMatrix::identity(1)).unwrap()
    }

    #[test]
    fn containment() {
        let unit = Ellipsoid::new(SymMatrix::identity(2), DVector::zeros(2)).unwrap();
        assert!(unit.contains(&DVector::zeros(2)));
        assert!(unit.contains(&DVector::from_vec(vec![1.0, 0.0])));
        let e = Ellipsoid::new(SymMatrix::from_diagonal(&[1.0, 0.25]), DVector::zeros(2)).unwrap();
        assert!(ellipsoid_contains(&e, &DVector::from_vec(vec![0.0, 2.0])));
        assert!(!ellipsoid_contains(&e, &DVector::from_vec(vec![0.0, 2.0001])));
    }

    #[test]
    fn scalar_invariance_condition() {
        let sys = scalar(1.0);
        assert!(invariant_ellipsoid_check(&sys, &SymMatrix::from_diagonal(&[1.0]), 1.0));
        assert!(!invariant_ellipsoid_check(&sys, &SymMatrix::from_diagonal(&[10.0]), 1.0));
        assert!(!invariant_ellipsoid_check(&sys, &SymMatrix::from_diagonal(&[0.5]), 0.0));
    }
}
