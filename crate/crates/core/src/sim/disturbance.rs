use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceKind {
    #[default]
    Zero,
    /// Piecewise constant on the sphere `||w|| = delta_w`.
    Extremal,
    /// Piecewise constant, uniform in the ball `||w|| <= delta_w`.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DisturbanceModel {
    pub kind: DisturbanceKind,
    pub hold_s: f64,
}

impl Default for DisturbanceModel {
    fn default() -> Self {
        Self { kind: DisturbanceKind::Zero, hold_s: 0.1 }
    }
}

impl DisturbanceModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.hold_s > 0.0) {
            return Err(invalid("disturbance hold time must be positive"));
        }
        Ok(())
    }

    /// One sample with `||w|| <= radius`, exactly.
    pub fn sample(&self, rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> DVector<f64> {
        let scale = match self.kind {
            DisturbanceKind::Zero => return DVector::zeros(dim),
            DisturbanceKind::Extremal => radius,
            DisturbanceKind::Uniform => radius * rng.random::<f64>().powf(1.0 / dim as f64),
        };
        let dir = loop {
            let d = DVector::from_fn(dim, |_, _| StandardNormal.sample(rng));
            let n: f64 = d.norm();
            if n > 1e-12 {
                break d / n;
            }
        };
        clamp_norm(dir * scale, radius)
    }
}

/// Shrinks `w` until its computed norm is at most `radius`.
pub fn clamp_norm(mut w: DVector<f64>, radius: f64) -> DVector<f64> {
    while w.norm() > radius {
        w *= 1.0 - 4.0 * f64::EPSILON;
    }
    w
}

/// Disturbance signal held constant over `hold_s` windows.
#[derive(Debug, Clone)]
pub struct HeldDisturbance {
    model: DisturbanceModel,
    radius: f64,
    rng: ChaCha8Rng,
    current: DVector<f64>,
    next_switch: f64,
}

impl HeldDisturbance {
    pub fn new(model: DisturbanceModel, dim: usize, radius: f64, rng: ChaCha8Rng) -> Self {
        Self { model, radius, rng, current: DVector::zeros(dim), next_switch: 0.0 }
    }

    pub fn at(&mut self, t: f64) -> &DVector<f64> {
        while t >= self.next_switch - 1e-12 {
            self.current = self.model.sample(&mut self.rng, self.current.len(), self.radius);
            self.next_switch += self.model.hold_s;
        }
        &self.current
    }
}
