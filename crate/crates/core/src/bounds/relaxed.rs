use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::linearization::{BrunovskyRealization, LinearFeedbackGains};
use crate::numkit::{spectral_abscissa, ScalarBracket, SymMatrix};

/// Relative shrink of `(0, alpha_bar)` before the outer search.
pub const BRACKET_SHRINK: f64 = 1e-6;

/// The reordered closed loop with the disturbance scaled to the unit ball.
#[derive(Debug, Clone)]
pub struct RelaxedLinearSystem {
    a_bar: DMatrix<f64>,
    b_bar: DMatrix<f64>,
    c_bar: DMatrix<f64>,
    s: SymMatrix,
    s_half: SymMatrix,
    abscissa: f64,
    gamma: f64,
    delta_w: f64,
}

impl RelaxedLinearSystem {
    /// Generic constructor; `gamma` and `delta_w` are bookkeeping only here,
    /// the disturbance scaling is assumed folded into `b_bar`.
    pub fn new(a_bar: DMatrix<f64>, b_bar: DMatrix<f64>, c_bar: DMatrix<f64>, s: SymMatrix) -> Result<Self> {
        Self::with_scaling(a_bar, b_bar, c_bar, s, 1.0, 1.0)
    }

    fn with_scaling(
        a_bar: DMatrix<f64>,
        b_bar: DMatrix<f64>,
        c_bar: DMatrix<f64>,
        s: SymMatrix,
        gamma: f64,
        delta_w: f64,
    ) -> Result<Self> {
        let n = a_bar.nrows();
        if !a_bar.is_square() || n == 0 {
            return Err(invalid("system matrix must be square and non-empty"));
        }
        if b_bar.nrows() != n || c_bar.ncols() != n {
            return Err(invalid("input/output matrices do not match the state dimension"));
        }
        if s.dim() != c_bar.nrows() {
            return Err(invalid("output metric has the wrong dimension"));
        }
        if !s.is_positive_definite() {
            return Err(invalid("output metric must be positive definite"));
        }
        let abscissa = spectral_abscissa(&a_bar)?;
        if abscissa >= 0.0 {
            return Err(Error::NotHurwitz { abscissa });
        }
        let s_half = s.sqrt()?;
        Ok(Self { a_bar, b_bar, c_bar, s, s_half, abscissa, gamma, delta_w })
    }

    pub fn a_bar(&self) -> &DMatrix<f64> {
        &self.a_bar
    }

    pub fn b_bar(&self) -> &DMatrix<f64> {
        &self.b_bar
    }

    pub fn c_bar(&self) -> &DMatrix<f64> {
        &self.c_bar
    }

    pub fn metric(&self) -> &SymMatrix {
        &self.s
    }

    pub fn metric_sqrt(&self) -> &SymMatrix {
        &self.s_half
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn delta_w(&self) -> f64 {
        self.delta_w
    }

    pub fn state_dim(&self) -> usize {
        self.a_bar.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.c_bar.nrows()
    }

    pub fn abscissa(&self) -> f64 {
        self.abscissa
    }

    /// `-2 * abscissa(A_bar)`: the invariance LMI is infeasible for larger
    /// decay rates.
    pub fn alpha_bar(&self) -> f64 {
        -2.0 * self.abscissa
    }

    /// `(0, alpha_bar)` shrunk by `1e-6 * alpha_bar` at both ends.
    pub fn alpha_bracket(&self) -> ScalarBracket {
        let ab = self.alpha_bar();
        let eps = BRACKET_SHRINK * ab;
        ScalarBracket::new(eps, ab - eps, 1e-10 * ab).expect("alpha_bar is positive")
    }

    /// `S^(1/2) C_bar`.
    pub fn weighted_output(&self) -> DMatrix<f64> {
        self.s_half.as_matrix() * &self.c_bar
    }

    /// Same system with a different output metric.
    pub fn with_metric(&self, s: SymMatrix) -> Result<Self> {
        Self::with_scaling(self.a_bar.clone(), self.b_bar.clone(), self.c_bar.clone(), s, self.gamma, self.delta_w)
    }
}

/// `A_bar = T (A - B K) T^T`, `B_bar = gamma * delta_w * T B`, `C_bar = T C`
/// (which is `[I, 0]` for the output-first ordering).
pub fn build_relaxed_system(
    real: &BrunovskyRealization,
    k: &LinearFeedbackGains,
    gamma: f64,
    delta_w: f64,
    s: SymMatrix,
) -> Result<RelaxedLinearSystem> {
    if !(gamma > 0.0 && delta_w > 0.0 && gamma.is_finite() && delta_w.is_finite()) {
        return Err(invalid("gamma and delta_w must be positive and finite"));
    }
    let t = &real.t;
    let a_bar = t * k.closed_loop(real) * t.transpose();
    let b_bar = t * &real.b * (gamma * delta_w);
    let c_bar = &real.c * t.transpose();
    RelaxedLinearSystem::with_scaling(a_bar, b_bar, c_bar, s, gamma, delta_w)
}
