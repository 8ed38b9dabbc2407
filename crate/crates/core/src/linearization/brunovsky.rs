use nalgebra::DMatrix;

use crate::error::{invalid, Result};

/// Chains of integrators `z' = A z + B v`, `y = C z`, together with the
/// permutation `T` that reorders `z` to put every output first and every
/// chain's top state last.
#[derive(Debug, Clone, PartialEq)]
pub struct BrunovskyRealization {
    pub rho: Vec<usize>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub t: DMatrix<f64>,
}

impl BrunovskyRealization {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.rho.len()
    }

    /// Index in `z` of the first state of chain `i`.
    pub fn chain_offset(&self, i: usize) -> usize {
        self.rho[..i].iter().sum()
    }
}

pub fn brunovsky_realization(rho: &[usize]) -> Result<BrunovskyRealization> {
    if rho.is_empty() || rho.contains(&0) {
        return Err(invalid(format!("relative degrees must be positive, got {rho:?}")));
    }
    let n: usize = rho.iter().sum();
    let m = rho.len();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, m);
    let mut c = DMatrix::zeros(m, n);
    let mut offset = 0;
    for (i, &r) in rho.iter().enumerate() {
        for k in 0..r - 1 {
            a[(offset + k, offset + k + 1)] = 1.0;
        }
        b[(offset + r - 1, i)] = 1.0;
        c[(i, offset)] = 1.0;
        offset += r;
    }

    // Sort key (group, level, chain): outputs, then intermediate levels, then tops.
    let mut keys = Vec::with_capacity(n);
    let mut offset = 0;
    for (i, &r) in rho.iter().enumerate() {
        for k in 0..r {
            let group = if k == 0 {
                0
            } else if k + 1 == r {
                2
            } else {
                1
            };
            let level = if group == 2 { 0 } else { k };
            keys.push(((group, level, i), offset + k));
        }
        offset += r;
    }
    keys.sort();
    let mut t = DMatrix::zeros(n, n);
    for (row, (_, col)) in keys.into_iter().enumerate() {
        t[(row, col)] = 1.0;
    }
    Ok(BrunovskyRealization { rho: rho.to_vec(), a, b, c, t })
}
