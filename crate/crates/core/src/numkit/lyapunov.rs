//! Continuous Lyapunov equations `A Q + Q A^T + R = 0`.
//!
//! Column-block Bartels-Stewart: reduce `A` to real Schur form once, then
//! sweep the quasi-triangular factor from the last diagonal block to the
//! first. Each 1x1 or 2x2 diagonal block leaves an `n x 1` or `n x 2`
//! Sylvester system that is small enough to solve densely. The Schur form is
//! cached, so repeated solves with a scalar shift (`A + s I`) are cheap.

use nalgebra::{DMatrix, Schur};

use super::SymMatrix;
use crate::error::{Error, Result};

const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct LyapunovSolver {
    a: DMatrix<f64>,
    u: DMatrix<f64>,
    t: DMatrix<f64>,
    /// (start, size) of each diagonal block of `t`.
    blocks: Vec<(usize, usize)>,
    abscissa: f64,
}

impl LyapunovSolver {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::InvalidInput("Lyapunov matrix must be square".into()));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("non-finite Lyapunov matrix".into()));
        }
        let (u, t) = Schur::try_new(a.clone(), f64::EPSILON, 10_000)
            .ok_or_else(|| Error::NumericalFailure("Schur iteration did not converge".into()))?
            .unpack();
        let n = t.nrows();
        let scale = t.norm().max(f64::MIN_POSITIVE);
        let mut blocks = Vec::new();
        let mut i = 0;
        while i < n {
            if i + 1 < n && t[(i + 1, i)].abs() > 1e-14 * scale {
                blocks.push((i, 2));
                i += 2;
            } else {
                blocks.push((i, 1));
                i += 1;
            }
        }
        let abscissa = blocks
            .iter()
            .map(|&(s, size)| block_abscissa(&t, s, size))
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { a: a.clone(), u, t, blocks, abscissa })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Spectral abscissa of the unshifted matrix, read off the Schur blocks.
    pub fn abscissa(&self) -> f64 {
        self.abscissa
    }

    pub fn solve(&self, rhs: &SymMatrix) -> Result<SymMatrix> {
        self.solve_shifted(0.0, rhs)
    }

    /// Solves `(A + s I) Q + Q (A + s I)^T + R = 0`.
    pub fn solve_shifted(&self, shift: f64, rhs: &SymMatrix) -> Result<SymMatrix> {
        let n = self.dim();
        if rhs.dim() != n {
            return Err(Error::InvalidInput(format!(
                "Lyapunov rhs is {}x{}, expected {n}x{n}",
                rhs.dim(),
                rhs.dim()
            )));
        }
        if self.abscissa + shift >= 0.0 {
            return Err(Error::NotHurwitz { abscissa: self.abscissa + shift });
        }
        let mut t = self.t.clone();
        for i in 0..n {
            t[(i, i)] += shift;
        }
        // T X + X T^T = C with X = U^T Q U, C = -U^T R U
        let c = -(self.u.transpose() * rhs.as_matrix() * &self.u);
        let mut x = DMatrix::<f64>::zeros(n, n);
        for &(j, bj) in self.blocks.iter().rev() {
            let mut r = c.columns(j, bj).into_owned();
            for &(k, bk) in self.blocks.iter().filter(|&&(k, _)| k > j) {
                let t_jk = t.view((j, k), (bj, bk));
                r -= x.columns(k, bk) * t_jk.transpose();
            }
            let sol = if bj == 1 {
                let mut m = t.clone();
                for i in 0..n {
                    m[(i, i)] += t[(j, j)];
                }
                m.lu()
                    .solve(&r)
                    .ok_or_else(|| Error::NumericalFailure("singular Lyapunov column".into()))?
            } else {
                // (I2 kron T + T_jj kron I_n) vec(X_j) = vec(R_j)
                let mut m = DMatrix::zeros(2 * n, 2 * n);
                for blk in 0..2 {
                    m.view_mut((blk * n, blk * n), (n, n)).copy_from(&t);
                }
                for p in 0..2 {
                    for q in 0..2 {
                        let v = t[(j + p, j + q)];
                        for i in 0..n {
                            m[(p * n + i, q * n + i)] += v;
                        }
                    }
                }
                let rv = DMatrix::from_column_slice(2 * n, 1, r.as_slice());
                let s = m
                    .lu()
                    .solve(&rv)
                    .ok_or_else(|| Error::NumericalFailure("singular Lyapunov block".into()))?;
                DMatrix::from_column_slice(n, 2, s.as_slice())
            };
            x.columns_mut(j, bj).copy_from(&sol);
        }
        let q = SymMatrix::symmetrized(&self.u * x * self.u.transpose());

        let mut a_shift = self.a.clone();
        for i in 0..n {
            a_shift[(i, i)] += shift;
        }
        let resid = (&a_shift * q.as_matrix() + q.as_matrix() * a_shift.transpose()
            + rhs.as_matrix())
        .norm();
        let scale = a_shift.norm() * q.norm() + rhs.norm();
        if !(resid <= RESIDUAL_TOL * scale.max(f64::MIN_POSITIVE)) {
            return Err(Error::NumericalFailure(format!(
                "Lyapunov residual {resid:e} exceeds tolerance (scale {scale:e})"
            )));
        }
        Ok(q)
    }
}

fn block_abscissa(t: &DMatrix<f64>, s: usize, size: usize) -> f64 {
    if size == 1 {
        return t[(s, s)];
    }
    let (a, b, c, d) = (t[(s, s)], t[(s, s + 1)], t[(s + 1, s)], t[(s + 1, s + 1)]);
    let mean = 0.5 * (a + d);
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    if disc >= 0.0 {
        mean + disc.sqrt()
    } else {
        mean
    }
}

/// Solves `A Q + Q A^T + R = 0` for Hurwitz `A`.
pub fn solve_lyapunov(a: &DMatrix<f64>, rhs: &SymMatrix) -> Result<SymMatrix> {
    LyapunovSolver::new(a)?.solve(rhs)
}
