//! Closed-loop simulation of the governed robot, scenario files, disturbance
//! models, traces and Monte Carlo peak estimation for the relaxed system.

mod closed_loop;
mod disturbance;
mod montecarlo;
mod plant;
mod scenario;
mod trace;

pub use closed_loop::{run_closed_loop, SimResult};
pub use disturbance::{clamp_norm, DisturbanceKind, DisturbanceModel, HeldDisturbance};
pub use montecarlo::{monte_carlo_peak, zoh_discretize, MonteCarloResult, MonteCarloSpec};
pub use plant::step_plant;
pub use scenario::{apply_override, LinearSystemSpec, PlantSpec, PoleSpec, Scenario, Setup};
pub use trace::{Outcome, StepFlags, Trace, TraceHeader, TraceRecord, TraceSummary, TRACE_SCHEMA};
