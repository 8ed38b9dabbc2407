//! Control-affine plants and their exact feedback linearization.
//!
//! A plant supplies closed-form expressions for its coordinate map `Phi`,
//! decoupling matrix `M(x)` and drift term `n(x)`; the linearizing law
//! `u = M(x)^-1 (v - n(x))` then turns the output dynamics into chains of
//! integrators (Brunovsky form) driven by the virtual input `v`.

mod ackermann;
mod brunovsky;
mod gains;

pub use ackermann::{ackermann_plant, bw_norm_bound, AckermannParams, AckermannPlant, AckermannState};
pub use brunovsky::{brunovsky_realization, BrunovskyRealization};
pub use gains::{chain_gains_from_poles, distribute_poles, LinearFeedbackGains};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result, Singularity};

/// `x' = f(x) + G(x) (u + w)`, `y = h(x)` with closed-form linearization data.
pub trait NonlinearPlant: Send + Sync {
    fn name(&self) -> &str;
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    /// Vector relative degree, one entry per output.
    fn relative_degree(&self) -> &[usize];

    fn drift(&self, x: &DVector<f64>) -> DVector<f64>;
    fn input_matrix(&self, x: &DVector<f64>) -> DMatrix<f64>;
    fn output(&self, x: &DVector<f64>) -> DVector<f64>;

    /// `Phi(x) = col(h_1, L_f h_1, ..., h_m, ..., L_f^{rho_m - 1} h_m)`.
    fn coordinate_map(&self, x: &DVector<f64>) -> DVector<f64>;
    /// Decoupling matrix `M(x)`.
    fn decoupling(&self, x: &DVector<f64>) -> DMatrix<f64>;
    /// `n(x) = col(L_f^{rho_i} h_i)`.
    fn drift_term(&self, x: &DVector<f64>) -> DVector<f64>;
    fn singularity(&self, x: &DVector<f64>) -> Option<Singularity>;

    /// Full-state linearizability: relative degrees sum to the state dimension.
    fn validate(&self) -> Result<()> {
        let rho = self.relative_degree();
        if rho.len() != self.input_dim() {
            return Err(Error::InvalidInput(format!(
                "plant {} has {} outputs but {} inputs",
                self.name(),
                rho.len(),
                self.input_dim()
            )));
        }
        let sum: usize = rho.iter().sum();
        if sum != self.state_dim() || rho.contains(&0) {
            return Err(Error::InvalidInput(format!(
                "plant {} relative degree {rho:?} does not sum to state dimension {}",
                self.name(),
                self.state_dim()
            )));
        }
        Ok(())
    }
}

/// `u = M(x)^-1 (v_cmd - n(x))`.
pub fn feedback_linearize(
    plant: &dyn NonlinearPlant,
    x: &DVector<f64>,
    v_cmd: &DVector<f64>,
) -> Result<DVector<f64>> {
    if let Some(s) = plant.singularity(x) {
        return Err(Error::SingularState(s));
    }
    if v_cmd.len() != plant.input_dim() {
        return Err(Error::InvalidInput("virtual input has the wrong dimension".into()));
    }
    let rhs = v_cmd - plant.drift_term(x);
    plant
        .decoupling(x)
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NumericalFailure("decoupling matrix is numerically singular".into()))
}

/// Spectral norm of the decoupling matrix at `x`.
pub fn decoupling_norm(plant: &dyn NonlinearPlant, x: &DVector<f64>) -> Result<f64> {
    let m = plant.decoupling(x);
    let gram = crate::numkit::SymMatrix::new(m.transpose() * m)?;
    Ok(gram.max_eigenvalue()?.max(0.0).sqrt())
}
