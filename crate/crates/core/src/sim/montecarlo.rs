use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::disturbance::{DisturbanceKind, DisturbanceModel};
use crate::bounds::RelaxedLinearSystem;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonteCarloSpec {
    pub trials: usize,
    pub horizon_s: f64,
    /// Disturbance hold time.
    pub hold_s: f64,
    /// Output sampling step; rounded so a hold is a whole number of samples.
    pub sample_s: f64,
    pub kind: DisturbanceKind,
}

impl Default for MonteCarloSpec {
    fn default() -> Self {
        Self { trials: 1000, horizon_s: 20.0, hold_s: 0.05, sample_s: 0.005, kind: DisturbanceKind::Extremal }
    }
}

impl MonteCarloSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || !(self.horizon_s > 0.0) || !(self.sample_s > 0.0) || self.sample_s > self.hold_s {
            return Err(invalid("Monte Carlo needs trials, a positive horizon and 0 < sample <= hold"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    /// Largest sampled `||C z||_S^2` over all trials and times.
    pub peak: f64,
    pub trial_peaks: Vec<f64>,
}

/// `(e^{A h}, int_0^h e^{A s} ds B)` from one exponential of the augmented
/// matrix `[[A, B], [0, 0]] h`.
pub fn zoh_discretize(a: &DMatrix<f64>, b: &DMatrix<f64>, h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, m) = (a.nrows(), b.ncols());
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * h));
    aug.view_mut((0, n), (n, m)).copy_from(&(b * h));
    let e = aug.exp();
    (e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, m)).into_owned())
}

/// Sampled peak of the weighted output of `z' = A z + B w`, `z(0) = z0`, under
/// piecewise-constant disturbances in the unit ball. Trial `i` draws from
/// ChaCha8 stream `i` of `seed`, so results do not depend on scheduling.
pub fn monte_carlo_peak(
    sys: &RelaxedLinearSystem,
    z0: &DVector<f64>,
    spec: &MonteCarloSpec,
    seed: u64,
) -> Result<MonteCarloResult> {
    spec.validate()?;
    if z0.len() != sys.state_dim() {
        return Err(invalid("initial state has the wrong dimension"));
    }
    let per_hold = (spec.hold_s / spec.sample_s).round().max(1.0) as usize;
    let h = spec.hold_s / per_hold as f64;
    let holds = (spec.horizon_s / spec.hold_s).ceil() as usize;
    let (ad, bd) = zoh_discretize(sys.a_bar(), sys.b_bar(), h);
    let sc = sys.weighted_output();
    let model = DisturbanceModel { kind: spec.kind, hold_s: spec.hold_s };
    let m = sys.b_bar().ncols();

    let trial_peaks: Vec<f64> = (0..spec.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut z = z0.clone();
            let mut peak = (&sc * &z).norm_squared();
            let mut next = DVector::zeros(z.len());
            for _ in 0..holds {
                let w = model.sample(&mut rng, m, 1.0);
                let drive = &bd * w;
                for _ in 0..per_hold {
                    next.gemv(1.0, &ad, &z, 0.0);
                    next += &drive;
                    std::mem::swap(&mut z, &mut next);
                    peak = peak.max((&sc * &z).norm_squared());
                }
            }
            peak
        })
        .collect();
    let peak = trial_peaks.iter().copied().fold(0.0, f64::max);
    Ok(MonteCarloResult { peak, trial_peaks })
}
