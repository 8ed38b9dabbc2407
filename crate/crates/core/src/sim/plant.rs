use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linearization::NonlinearPlant;

fn rhs(plant: &dyn NonlinearPlant, x: &DVector<f64>, uw: &DVector<f64>) -> DVector<f64> {
    plant.drift(x) + plant.input_matrix(x) * uw
}

/// One RK4 step of `x' = f(x) + G(x) (u + w)` with `u` and `w` held over
/// `dt`. `t` is only used to report divergence.
pub fn step_plant(
    plant: &dyn NonlinearPlant,
    t: f64,
    x: &DVector<f64>,
    u: &DVector<f64>,
    w: &DVector<f64>,
    dt: f64,
) -> Result<DVector<f64>> {
    let uw = u + w;
    let k1 = rhs(plant, x, &uw);
    let k2 = rhs(plant, &(x + &k1 * (0.5 * dt)), &uw);
    let k3 = rhs(plant, &(x + &k2 * (0.5 * dt)), &uw);
    let k4 = rhs(plant, &(x + &k3 * dt), &uw);
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::Diverged { time: t + dt })
    }
}
