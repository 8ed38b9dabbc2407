use std::collections::HashMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{BoundMethod, PeakBound, RelaxedLinearSystem};
use crate::error::{Error, Result};
use crate::numkit::{minimize_scalar, LyapunovSolver, ScalarBracket, SymMatrix, PRESCAN_POINTS};

/// `Q_alpha` together with the two ingredients of the bound.
#[derive(Debug, Clone)]
struct Shape {
    q: SymMatrix,
    /// `lambda_max(S^(1/2) C Q C^T S^(1/2))`
    output_gain: f64,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl Shape {
    fn bound(&self, z0: &DVector<f64>) -> f64 {
        let reach = if z0.iter().all(|&v| v == 0.0) {
            0.0
        } else {
            match &self.chol {
                Some(c) => z0.dot(&c.solve(z0)),
                None => f64::INFINITY,
            }
        };
        self.output_gain * reach.max(1.0)
    }
}

/// The Lyapunov-route bound for a fixed system, with `Q_alpha` precomputed on
/// the outer search grid. `Q_alpha` does not depend on the initial state, so
/// repeated queries (one per control step) only pay for the refinement.
#[derive(Debug, Clone)]
pub struct LyapunovBoundCache {
    solver: LyapunovSolver,
    bbt: DMatrix<f64>,
    wc: DMatrix<f64>,
    bracket: ScalarBracket,
    grid: HashMap<u64, Shape>,
}

impl LyapunovBoundCache {
    pub fn new(sys: &RelaxedLinearSystem) -> Result<Self> {
        let solver = LyapunovSolver::new(sys.a_bar())?;
        let bbt = sys.b_bar() * sys.b_bar().transpose();
        let wc = sys.weighted_output();
        let bracket = sys.alpha_bracket();
        let mut cache = Self { solver, bbt, wc, bracket, grid: HashMap::new() };
        for alpha in bracket.grid(PRESCAN_POINTS) {
            if let Ok(shape) = cache.shape(alpha) {
                cache.grid.insert(alpha.to_bits(), shape);
            }
        }
        Ok(cache)
    }

    fn shape(&self, alpha: f64) -> Result<Shape> {
        let rhs = SymMatrix::new(&self.bbt / alpha)?;
        let q = self.solver.solve_shifted(alpha / 2.0, &rhs)?;
        let out = SymMatrix::new(&self.wc * q.as_matrix() * self.wc.transpose())?;
        let output_gain = out.max_eigenvalue()?.max(0.0);
        let chol = q.as_matrix().clone().cholesky();
        Ok(Shape { q, output_gain, chol })
    }

    /// `delta_hat(alpha; z0)` and `Q_alpha`.
    pub fn evaluate(&self, alpha: f64, z0: &DVector<f64>) -> Result<(f64, SymMatrix)> {
        let shape = match self.grid.get(&alpha.to_bits()) {
            Some(s) => s.clone(),
            None => self.shape(alpha)?,
        };
        Ok((shape.bound(z0), shape.q))
    }

    pub fn bound(&self, z0: &DVector<f64>) -> Result<PeakBound> {
        let mut first_err = None;
        let f = |alpha: f64| match self.grid.get(&alpha.to_bits()) {
            Some(s) => s.bound(z0),
            None => match self.shape(alpha) {
                Ok(s) => s.bound(z0),
                Err(e) => {
                    first_err.get_or_insert(e);
                    f64::INFINITY
                }
            },
        };
        let min = match minimize_scalar(f, self.bracket) {
            Ok(m) => m,
            Err(Error::NoFeasiblePoint) => {
                return Err(first_err.unwrap_or_else(|| {
                    Error::NumericalFailure("Lyapunov bound is infinite on the whole alpha range".into())
                }))
            }
            Err(e) => return Err(e),
        };
        let (delta, q) = self.evaluate(min.x, z0)?;
        Ok(PeakBound {
            delta,
            alpha_star: min.x,
            method: BoundMethod::Lyap,
            certificate: q,
            initial_state: z0.clone(),
        })
    }
}

/// `delta_hat(alpha; z0) = lambda_max(S^(1/2) C Q C^T S^(1/2)) * max(z0^T Q^-1 z0, 1)`
/// where `A Q + Q A^T + alpha Q + B B^T / alpha = 0`.
pub fn lyap_bound_at(sys: &RelaxedLinearSystem, alpha: f64, z0: &DVector<f64>) -> Result<(f64, SymMatrix)> {
    let cache = LyapunovBoundCache {
        solver: LyapunovSolver::new(sys.a_bar())?,
        bbt: sys.b_bar() * sys.b_bar().transpose(),
        wc: sys.weighted_output(),
        bracket: sys.alpha_bracket(),
        grid: HashMap::new(),
    };
    cache.evaluate(alpha, z0)
}

pub fn peak_bound_lyap(sys: &RelaxedLinearSystem, z0: &DVector<f64>) -> Result<PeakBound> {
    if z0.len() != sys.state_dim() {
        return Err(crate::error::invalid("initial state has the wrong dimension"));
    }
    LyapunovBoundCache::new(sys)?.bound(z0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(b: f64) -> RelaxedLinearSystem {
        let one = DMatrix::from_element(1, 1, 1.0);
        RelaxedLinearSystem::new(-one.clone(), one.clone() * b, one, SymMatrix::identity(1)).unwrap()
    }

    #[test]
    fn scalar_shape_matches_closed_form() {
        let sys = scalar(2.0);
        for alpha in [0.3, 1.0, 1.7] {
            let (_, q) = lyap_bound_at(&sys, alpha, &DVector::zeros(1)).unwrap();
            assert!((q[(0, 0)] - 4.0 / (alpha * (2.0 - alpha))).abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_ultimate_bound() {
        let r = peak_bound_lyap(&scalar(1.5), &DVector::zeros(1)).unwrap();
        assert!((r.delta - 2.25).abs() < 1e-8, "{}", r.delta);
        assert!((r.alpha_star - 1.0).abs() < 1e-4);
    }

    #[test]
    fn scalar_initial_condition_dominates() {
        let r = peak_bound_lyap(&scalar(1.0), &DVector::from_element(1, 3.0)).unwrap();
        assert!((r.delta - 9.0).abs() < 1e-8, "{}", r.delta);
    }

    #[test]
    fn cached_and_fresh_agree() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, -3.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let sys = RelaxedLinearSystem::new(a, b, c, SymMatrix::identity(1)).unwrap();
        let cache = LyapunovBoundCache::new(&sys).unwrap();
        let z0 = DVector::from_vec(vec![0.5, -0.2]);
        let alpha = sys.alpha_bracket().grid(PRESCAN_POINTS).nth(10).unwrap();
        let (cached, _) = cache.evaluate(alpha, &z0).unwrap();
        let (fresh, _) = lyap_bound_at(&sys, alpha, &z0).unwrap();
        assert_eq!(cached, fresh);
    }
}
