//! Certified bounds on the output peak `sup_t ||y(t)||_S^2` of the relaxed
//! linear system `z' = A z + B w`, `y = C z`, `||w|| <= 1`.
//!
//! Both routes search an invariant ellipsoid for every decay rate `alpha` in
//! `(0, alpha_bar)`, with `alpha_bar = -2 * abscissa(A)`, and then minimize
//! the resulting bound over `alpha`. The SDP route optimizes the ellipsoid
//! shape; the Lyapunov route fixes it to the solution of a shifted Lyapunov
//! equation and is much cheaper.

mod ellipsoid;
mod lyap;
mod relaxed;
mod sdp;

pub use ellipsoid::{ellipsoid_contains, invariant_ellipsoid_check, Ellipsoid};
pub use lyap::{lyap_bound_at, peak_bound_lyap, LyapunovBoundCache};
pub use relaxed::{build_relaxed_system, RelaxedLinearSystem};
pub use sdp::{peak_bound_sdp, sdp_bound_at, sdp_problem};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numkit::SymMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundMethod {
    Sdp,
    Lyap,
}

impl std::fmt::Display for BoundMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoundMethod::Sdp => "sdp",
            BoundMethod::Lyap => "lyap",
        })
    }
}

impl std::str::FromStr for BoundMethod {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sdp" => Ok(BoundMethod::Sdp),
            "lyap" => Ok(BoundMethod::Lyap),
            other => Err(crate::error::invalid(format!("unknown bound method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PeakBound {
    /// Bound on `||y||_S^2`.
    pub delta: f64,
    pub alpha_star: f64,
    pub method: BoundMethod,
    /// `P` of the invariant ellipsoid for the SDP route, `Q_alpha` for the
    /// Lyapunov route.
    pub certificate: SymMatrix,
    pub initial_state: DVector<f64>,
}

/// Dispatches on `method`.
pub fn peak_bound(sys: &RelaxedLinearSystem, z0: &DVector<f64>, method: BoundMethod) -> Result<PeakBound> {
    match method {
        BoundMethod::Sdp => peak_bound_sdp(sys, z0),
        BoundMethod::Lyap => peak_bound_lyap(sys, z0),
    }
}
