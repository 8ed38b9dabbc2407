use nalgebra::{Complex, DMatrix};

use super::BrunovskyRealization;
use crate::error::{invalid, Error, Result};
use crate::numkit::spectral_abscissa;

/// State feedback `v = -K z` in Brunovsky coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFeedbackGains {
    k: DMatrix<f64>,
}

impl LinearFeedbackGains {
    /// Accepts `K` only if `A - B K` is Hurwitz.
    pub fn new(k: DMatrix<f64>, realization: &BrunovskyRealization) -> Result<Self> {
        if k.shape() != (realization.input_dim(), realization.state_dim()) {
            return Err(invalid("gain matrix has the wrong shape"));
        }
        let abscissa = spectral_abscissa(&(&realization.a - &realization.b * &k))?;
        if abscissa >= 0.0 {
            return Err(Error::NotHurwitz { abscissa });
        }
        Ok(Self { k })
    }

    /// Block-diagonal gains with chain `i` placed at `chain_poles[i]`.
    pub fn from_chain_poles(realization: &BrunovskyRealization, chain_poles: &[Vec<Complex<f64>>]) -> Result<Self> {
        if chain_poles.len() != realization.input_dim() {
            return Err(invalid("need one pole set per chain"));
        }
        let mut k = DMatrix::zeros(realization.input_dim(), realization.state_dim());
        for (i, poles) in chain_poles.iter().enumerate() {
            if poles.len() != realization.rho[i] {
                return Err(invalid(format!(
                    "chain {i} has degree {} but {} poles were given",
                    realization.rho[i],
                    poles.len()
                )));
            }
            let gains = chain_gains_from_poles(poles)?;
            let off = realization.chain_offset(i);
            for (j, g) in gains.into_iter().enumerate() {
                k[(i, off + j)] = g;
            }
        }
        Self::new(k, realization)
    }

    /// Deals a flat pole list out to the chains; see [`distribute_poles`].
    pub fn from_pole_list(realization: &BrunovskyRealization, poles: &[Complex<f64>]) -> Result<Self> {
        let chains = distribute_poles(&realization.rho, poles)?;
        Self::from_chain_poles(realization, &chains)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn closed_loop(&self, realization: &BrunovskyRealization) -> DMatrix<f64> {
        &realization.a - &realization.b * &self.k
    }
}

/// Gains `(k_0, ..., k_{r-1})` such that `s^r + k_{r-1} s^{r-1} + ... + k_0`
/// has the given roots.
pub fn chain_gains_from_poles(poles: &[Complex<f64>]) -> Result<Vec<f64>> {
    let mut coeffs = vec![Complex::new(1.0, 0.0)];
    for &p in poles {
        if !(p.re.is_finite() && p.im.is_finite()) {
            return Err(invalid("poles must be finite"));
        }
        let mut next = vec![Complex::new(0.0, 0.0); coeffs.len() + 1];
        for (j, &c) in coeffs.iter().enumerate() {
            next[j] += c;
            next[j + 1] -= c * p;
        }
        coeffs = next;
    }
    let scale = coeffs.iter().map(|c| c.norm()).fold(1.0, f64::max);
    if coeffs.iter().any(|c| c.im.abs() > 1e-9 * scale) {
        return Err(invalid("complex poles must come in conjugate pairs"));
    }
    // coeffs[j] multiplies s^{r-j}; k_i is the coefficient of s^i.
    Ok(coeffs[1..].iter().rev().map(|c| c.re).collect())
}

const POLE_TOL: f64 = 1e-9;

fn same(a: Complex<f64>, b: Complex<f64>) -> bool {
    (a - b).norm() <= POLE_TOL * (1.0 + a.norm())
}

/// Splits a flat pole list across `m` chains of equal degree. Each distinct
/// real pole, or conjugate pair, must occur a multiple of `m` times; every
/// chain then receives the same pole set.
pub fn distribute_poles(rho: &[usize], poles: &[Complex<f64>]) -> Result<Vec<Vec<Complex<f64>>>> {
    let m = rho.len();
    if m == 0 {
        return Err(invalid("no chains"));
    }
    if rho.iter().any(|&r| r != rho[0]) {
        return Err(invalid("a flat pole list needs equal relative degrees; give per-chain poles instead"));
    }
    if poles.len() != rho.iter().sum::<usize>() {
        return Err(invalid(format!("expected {} poles, got {}", rho.iter().sum::<usize>(), poles.len())));
    }
    // group into (representative, is_pair, count)
    let mut units: Vec<(Complex<f64>, bool, usize)> = Vec::new();
    let mut used = vec![false; poles.len()];
    for i in 0..poles.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let p = poles[i];
        let is_pair = p.im.abs() > POLE_TOL * (1.0 + p.norm());
        let rep = if is_pair { Complex::new(p.re, p.im.abs()) } else { Complex::new(p.re, 0.0) };
        if is_pair {
            let j = (0..poles.len())
                .find(|&j| !used[j] && same(poles[j], p.conj()))
                .ok_or_else(|| invalid(format!("pole {p} has no conjugate partner")))?;
            used[j] = true;
        }
        match units.iter_mut().find(|u| u.1 == is_pair && same(u.0, rep)) {
            Some(u) => u.2 += 1,
            None => units.push((rep, is_pair, 1)),
        }
    }
    let mut chain = Vec::new();
    for (rep, is_pair, count) in units {
        if count % m != 0 {
            return Err(invalid(format!("pole {rep} appears {count} times, not divisible by {m} chains")));
        }
        for _ in 0..count / m {
            chain.push(rep);
            if is_pair {
                chain.push(rep.conj());
            }
        }
    }
    Ok(vec![chain; m])
}
