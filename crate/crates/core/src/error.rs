use thiserror::Error;

/// Which part of the singular set a state fell into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Singularity {
    /// Speed is zero; the decoupling matrix loses rank.
    ZeroSpeed,
    /// Steering angle at +/- pi/2.
    SteeringPerpendicular,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("matrix is not Hurwitz (spectral abscissa {abscissa:e})")]
    NotHurwitz { abscissa: f64 },
    #[error("semidefinite program is infeasible: {0}")]
    Infeasible(String),
    #[error("no feasible point in the search interval")]
    NoFeasiblePoint,
    #[error("state is in the singular set: {0:?}")]
    SingularState(Singularity),
    #[error("pose ({x}, {y}) is inside an obstacle or outside the workspace")]
    PoseInObstacle { x: f64, y: f64 },
    #[error("path planning failed: {0}")]
    PlanningFailed(String),
    #[error("simulation diverged at t = {time}s")]
    Diverged { time: f64 },
    #[error("initial state violates the static safety condition: bound {bound} > clearance {clearance}")]
    InitiallyUnsafe { bound: f64, clearance: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
