use nalgebra::{DMatrix, DVector};

use super::ellipsoid::invariance_matrix;
use super::{BoundMethod, PeakBound, RelaxedLinearSystem};
use crate::error::{invalid, Error, Result};
use crate::numkit::{minimize_scalar_with, solve_lmi, BlockSense, LmiProblem, ScalarBracket, SymMatrix, SymVarLayout};

/// Each sample is a full interior-point solve, so the SDP route scans more
/// coarsely than the Lyapunov route and stops Brent earlier.
const SDP_PRESCAN_POINTS: usize = 24;
const SDP_ALPHA_TOL: f64 = 1e-7;

/// The inner problem at fixed `alpha`: minimize `delta` over `(P, delta)` with
///
/// * `[[A^T P + P A + alpha P, P B], [B^T P, -alpha I]] <= 0`
/// * `[[P, C^T S^(1/2)], [S^(1/2) C, delta I]] >= 0`
/// * `P >= 0`
/// * `z0^T P z0 <= 1` (omitted for `z0 = 0`)
///
/// Returns the problem and the layout of `P`; `delta` is the last variable.
pub fn sdp_problem(sys: &RelaxedLinearSystem, alpha: f64, z0: &DVector<f64>) -> Result<(LmiProblem, SymVarLayout)> {
    let n = sys.state_dim();
    let m = sys.b_bar().ncols();
    let p_out = sys.output_dim();
    if z0.len() != n {
        return Err(invalid("initial state has the wrong dimension"));
    }
    if !(alpha > 0.0) {
        return Err(invalid("alpha must be positive"));
    }
    let layout = SymVarLayout { offset: 0, dim: n };
    let delta_idx = layout.len();
    let mut objective = vec![0.0; delta_idx + 1];
    objective[delta_idx] = 1.0;
    let mut prob = LmiProblem::new(objective);
    let basis = layout.basis();

    // invariance
    let mut c1 = DMatrix::zeros(n + m, n + m);
    c1.view_mut((n, n), (m, m)).fill_with_identity();
    c1 *= -alpha;
    let terms1 = basis.iter().map(|(i, e)| {
        let mut f = invariance_matrix(sys, e, alpha);
        f.view_mut((n, n), (m, m)).fill(0.0);
        (*i, f)
    });
    prob.add_block(BlockSense::Nsd, c1, terms1.collect())?;

    // output peak
    let wc = sys.weighted_output();
    let mut c2 = DMatrix::zeros(n + p_out, n + p_out);
    c2.view_mut((0, n), (n, p_out)).copy_from(&wc.transpose());
    c2.view_mut((n, 0), (p_out, n)).copy_from(&wc);
    let mut terms2: Vec<(usize, DMatrix<f64>)> = basis
        .iter()
        .map(|(i, e)| {
            let mut f = DMatrix::zeros(n + p_out, n + p_out);
            f.view_mut((0, 0), (n, n)).copy_from(e);
            (*i, f)
        })
        .collect();
    let mut fd = DMatrix::zeros(n + p_out, n + p_out);
    fd.view_mut((n, n), (p_out, p_out)).fill_with_identity();
    terms2.push((delta_idx, fd));
    prob.add_block(BlockSense::Psd, c2, terms2)?;

    prob.add_block(BlockSense::Psd, DMatrix::zeros(n, n), basis.clone())?;

    if z0.iter().any(|&v| v != 0.0) {
        let terms4 = basis
            .iter()
            .map(|(i, e)| (*i, DMatrix::from_element(1, 1, z0.dot(&(e * z0)))))
            .filter(|(_, f)| f[(0, 0)] != 0.0)
            .collect();
        prob.add_block(BlockSense::Nsd, DMatrix::from_element(1, 1, -1.0), terms4)?;
    }
    Ok((prob, layout))
}

/// SDP optimum `delta(alpha; z0)` and its `P`.
pub fn sdp_bound_at(sys: &RelaxedLinearSystem, alpha: f64, z0: &DVector<f64>) -> Result<(f64, SymMatrix)> {
    let (prob, layout) = sdp_problem(sys, alpha, z0)?;
    let sol = solve_lmi(&prob)?;
    Ok((sol.x[layout.len()], layout.extract(&sol.x)))
}

pub fn peak_bound_sdp(sys: &RelaxedLinearSystem, z0: &DVector<f64>) -> Result<PeakBound> {
    if z0.len() != sys.state_dim() {
        return Err(invalid("initial state has the wrong dimension"));
    }
    let mut best: Option<(f64, f64, SymMatrix)> = None;
    let mut hard_err = None;
    let f = |alpha: f64| match sdp_bound_at(sys, alpha, z0) {
        Ok((delta, p)) => {
            if best.as_ref().is_none_or(|b| delta < b.0) {
                best = Some((delta, alpha, p));
            }
            delta
        }
        Err(Error::Infeasible(_)) | Err(Error::NumericalFailure(_)) => f64::INFINITY,
        Err(e) => {
            hard_err.get_or_insert(e);
            f64::INFINITY
        }
    };
    let full = sys.alpha_bracket();
    let bracket = ScalarBracket::new(full.lo(), full.hi(), SDP_ALPHA_TOL * sys.alpha_bar())?;
    let res = minimize_scalar_with(f, bracket, SDP_PRESCAN_POINTS);
    if let Some(e) = hard_err {
        return Err(e);
    }
    res?;
    let (delta, alpha_star, certificate) = best.ok_or(Error::NoFeasiblePoint)?;
    Ok(PeakBound { delta, alpha_star, method: BoundMethod::Sdp, certificate, initial_state: z0.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::invariant_ellipsoid_check;

    fn scalar(b: f64) -> RelaxedLinearSystem {
        let one = DMatrix::from_element(1, 1, 1.0);
        RelaxedLinearSystem::new(-one.clone(), one.clone() * b, one, SymMatrix::identity(1)).unwrap()
    }

    #[test]
    fn scalar_inner_problem() {
        // p <= alpha (2 - alpha) / b^2, delta = 1 / p
        let sys = scalar(2.0);
        let (d, p) = sdp_bound_at(&sys, 1.0, &DVector::zeros(1)).unwrap();
        assert!((d - 4.0).abs() < 1e-7, "{d}");
        assert!((p[(0, 0)] - 0.25).abs() < 1e-7);
        let (d, _) = sdp_bound_at(&sys, 0.5, &DVector::zeros(1)).unwrap();
        assert!((d - 4.0 / 0.75).abs() < 1e-6, "{d}");
    }

    #[test]
    fn scalar_peak() {
        let r = peak_bound_sdp(&scalar(1.0), &DVector::zeros(1)).unwrap();
        assert!((r.delta - 1.0).abs() < 1e-6, "{}", r.delta);
        assert!((r.alpha_star - 1.0).abs() < 1e-3);
        assert!(invariant_ellipsoid_check(&scalar(1.0), &r.certificate, r.alpha_star));
        let r = peak_bound_sdp(&scalar(1.0), &DVector::from_element(1, 2.0)).unwrap();
        assert!((r.delta - 4.0).abs() < 1e-6, "{}", r.delta);
    }
}
