//! Kinematic Ackermann-drive (bicycle) model with speed and acceleration
//! appended to the state, so that jerk and steering rate are the inputs.
//!
//! State `(x, y, psi, delta, v, a)`, input `(j, omega)`, output `(x, y)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::NonlinearPlant;
use crate::error::{invalid, Result, Singularity};

pub const X: usize = 0;
pub const Y: usize = 1;
pub const PSI: usize = 2;
pub const DELTA: usize = 3;
pub const V: usize = 4;
pub const A: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AckermannParams {
    /// Distance between front and rear axles.
    pub wheelbase_m: f64,
    /// Operating-profile bound on `v^2 / (l cos^2 delta)`.
    pub speed_steer_bound: f64,
    /// Speed floor used to keep the linearizing law away from `v = 0`.
    pub v_min_mps: f64,
    /// Mechanical steering stop.
    #[serde(default = "default_max_steer")]
    pub max_steer_rad: f64,
}

fn default_max_steer() -> f64 {
    0.7
}

impl AckermannParams {
    pub fn new(wheelbase_m: f64, speed_steer_bound: f64, v_min_mps: f64) -> Result<Self> {
        let p = Self { wheelbase_m, speed_steer_bound, v_min_mps, max_steer_rad: default_max_steer() };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wheelbase_m > 0.0) {
            return Err(invalid("wheelbase must be positive"));
        }
        if !(self.v_min_mps > 0.0) {
            return Err(invalid("minimum speed must be positive"));
        }
        if !(self.speed_steer_bound >= self.v_min_mps.powi(2) / self.wheelbase_m) {
            return Err(invalid("speed-steer bound must be at least v_min^2 / l"));
        }
        if !(self.max_steer_rad > 0.0 && self.max_steer_rad < std::f64::consts::FRAC_PI_2) {
            return Err(invalid("steering stop must lie in (0, pi/2)"));
        }
        Ok(())
    }
}

/// `gamma = max(1, beta)`, the bound on `||M(x)||_2` inside the operating
/// profile.
pub fn bw_norm_bound(params: &AckermannParams) -> f64 {
    params.speed_steer_bound.max(1.0)
}

/// Named view of the six-dimensional state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AckermannState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub delta: f64,
    pub v: f64,
    pub a: f64,
}

impl AckermannState {
    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.x, self.y, self.psi, self.delta, self.v, self.a])
    }

    pub fn from_vector(s: &DVector<f64>) -> Self {
        Self { x: s[X], y: s[Y], psi: s[PSI], delta: s[DELTA], v: s[V], a: s[A] }
    }
}

#[derive(Debug, Clone)]
pub struct AckermannPlant {
    params: AckermannParams,
}

pub fn ackermann_plant(params: AckermannParams) -> AckermannPlant {
    AckermannPlant { params }
}

const RHO: [usize; 2] = [3, 3];

impl AckermannPlant {
    pub fn params(&self) -> &AckermannParams {
        &self.params
    }

    fn yaw_rate(&self, x: &DVector<f64>) -> f64 {
        x[V] * x[DELTA].tan() / self.params.wheelbase_m
    }

    /// `v^2 / (l cos^2 delta)`, the quantity the operating profile bounds.
    pub fn envelope_ratio(&self, x: &DVector<f64>) -> f64 {
        x[V] * x[V] / (self.params.wheelbase_m * x[DELTA].cos().powi(2))
    }

    pub fn within_envelope(&self, x: &DVector<f64>) -> bool {
        self.envelope_ratio(x) <= self.params.speed_steer_bound
    }

    /// Copy of `x` with `|v|` raised to `v_min` (sign kept, zero maps to
    /// `+v_min`) and whether the floor was active. The control law is
    /// evaluated at this state so it stays defined near standstill.
    pub fn regularized(&self, x: &DVector<f64>) -> (DVector<f64>, bool) {
        let vmin = self.params.v_min_mps;
        if x[V].abs() >= vmin {
            return (x.clone(), false);
        }
        let mut r = x.clone();
        r[V] = if x[V] < 0.0 { -vmin } else { vmin };
        (r, true)
    }

    /// Clamps the steering angle to the mechanical stop; true when it bit.
    pub fn apply_steering_stop(&self, x: &mut DVector<f64>) -> bool {
        let m = self.params.max_steer_rad;
        if x[DELTA].abs() > m {
            x[DELTA] = x[DELTA].clamp(-m, m);
            return true;
        }
        false
    }

    /// Inverse of the coordinate map on the forward-driving branch (`v > 0`).
    /// `z = (x, x', x'', y, y', y'')`.
    pub fn state_from_flat(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let (xd, xdd, yd, ydd) = (z[1], z[2], z[4], z[5]);
        let v = xd.hypot(yd);
        if v < 1e-12 {
            return Err(invalid("flat state with zero speed has no unique preimage"));
        }
        let psi = yd.atan2(xd);
        let a = (xd * xdd + yd * ydd) / v;
        let yaw_rate = (xd * ydd - yd * xdd) / (v * v);
        let delta = (self.params.wheelbase_m * yaw_rate / v).atan();
        Ok(DVector::from_vec(vec![z[0], z[3], psi, delta, v, a]))
    }
}

impl NonlinearPlant for AckermannPlant {
    fn name(&self) -> &str {
        "ackermann"
    }

    fn state_dim(&self) -> usize {
        6
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn relative_degree(&self) -> &[usize] {
        &RHO
    }

    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        let (c, s) = (x[PSI].cos(), x[PSI].sin());
        DVector::from_vec(vec![x[V] * c, x[V] * s, self.yaw_rate(x), 0.0, x[A], 0.0])
    }

    fn input_matrix(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(6, 2);
        g[(A, 0)] = 1.0;
        g[(DELTA, 1)] = 1.0;
        g
    }

    fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![x[X], x[Y]])
    }

    fn coordinate_map(&self, x: &DVector<f64>) -> DVector<f64> {
        let (c, s) = (x[PSI].cos(), x[PSI].sin());
        let (v, a, r) = (x[V], x[A], self.yaw_rate(x));
        DVector::from_vec(vec![
            x[X],
            v * c,
            a * c - v * r * s,
            x[Y],
            v * s,
            a * s + v * r * c,
        ])
    }

    fn decoupling(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let (c, s) = (x[PSI].cos(), x[PSI].sin());
        let k = self.envelope_ratio(x);
        DMatrix::from_row_slice(2, 2, &[c, -k * s, s, k * c])
    }

    fn drift_term(&self, x: &DVector<f64>) -> DVector<f64> {
        let (c, s) = (x[PSI].cos(), x[PSI].sin());
        let (v, a, r) = (x[V], x[A], self.yaw_rate(x));
        DVector::from_vec(vec![
            -3.0 * a * r * s - v * r * r * c,
            3.0 * a * r * c - v * r * r * s,
        ])
    }

    fn singularity(&self, x: &DVector<f64>) -> Option<Singularity> {
        if x[V].abs() <= 1e-12 {
            Some(Singularity::ZeroSpeed)
        } else if x[DELTA].cos().abs() <= 1e-12 {
            Some(Singularity::SteeringPerpendicular)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linearization::{decoupling_norm, feedback_linearize};

    fn plant(l: f64) -> AckermannPlant {
        ackermann_plant(AckermannParams::new(l, 10.0, 0.05).unwrap())
    }

    fn state(psi: f64, delta: f64, v: f64, a: f64) -> DVector<f64> {
        DVector::from_vec(vec![0.0, 0.0, psi, delta, v, a])
    }

    #[test]
    fn determinant_matches_closed_form() {
        let p = plant(1.0);
        assert!((p.decoupling(&state(0.3, 0.0, 1.0, 0.0)).determinant() - 1.0).abs() < 1e-14);
        assert!((p.decoupling(&state(-1.2, 0.0, 2.0, 0.5)).determinant() - 4.0).abs() < 1e-13);
    }

    #[test]
    fn coordinate_map_coasting() {
        let z = plant(1.0).coordinate_map(&state(0.0, 0.0, 1.0, 0.0));
        assert_eq!(z.as_slice(), &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn identity_decoupling_passes_command_through() {
        let p = plant(1.0);
        let u = feedback_linearize(&p, &state(0.0, 0.0, 1.0, 0.0), &DVector::from_vec(vec![1.0, 2.0]))
            .unwrap();
        assert!((u[0] - 1.0).abs() < 1e-15 && (u[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn cancelling_command_gives_zero_input() {
        let p = plant(0.7);
        let x = state(0.4, 0.2, 1.3, -0.4);
        let u = feedback_linearize(&p, &x, &p.drift_term(&x)).unwrap();
        assert!(u.amax() < 1e-14);
    }

    #[test]
    fn singular_states_are_rejected() {
        let p = plant(1.0);
        let v = DVector::from_vec(vec![0.0, 0.0]);
        assert!(matches!(
            feedback_linearize(&p, &state(0.0, 0.0, 0.0, 0.0), &v),
            Err(crate::Error::SingularState(Singularity::ZeroSpeed))
        ));
        assert!(matches!(
            feedback_linearize(&p, &state(0.0, std::f64::consts::FRAC_PI_2, 1.0, 0.0), &v),
            Err(crate::Error::SingularState(Singularity::SteeringPerpendicular))
        ));
    }

    #[test]
    fn norm_bound_is_max_of_one_and_beta() {
        let mut params = AckermannParams::new(1.0, 10.0, 0.1).unwrap();
        assert_eq!(bw_norm_bound(&params), 10.0);
        params.speed_steer_bound = 0.5;
        assert_eq!(bw_norm_bound(&params), 1.0);
    }

    #[test]
    fn sampled_decoupling_norm_within_gamma() {
        // grid over the operating envelope v^2 / (l cos^2 delta) <= beta
        let params = AckermannParams::new(0.5, 10.0, 0.05).unwrap();
        let p = ackermann_plant(params);
        let gamma = bw_norm_bound(&params);
        for i in 0..40 {
            for j in 0..40 {
                let delta = -1.4 + 2.8 * i as f64 / 39.0;
                let v_max = (params.speed_steer_bound * params.wheelbase_m).sqrt() * delta.cos();
                let v = 0.05 + (v_max - 0.05) * j as f64 / 39.0;
                let x = state(0.3 * i as f64, delta, v, 0.0);
                assert!(decoupling_norm(&p, &x).unwrap() <= gamma * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn flat_inverse_round_trip() {
        let p = plant(0.5);
        let x = DVector::from_vec(vec![1.0, -2.0, 0.7, 0.3, 1.5, -0.2]);
        let back = p.state_from_flat(&p.coordinate_map(&x)).unwrap();
        assert!((back - x).amax() < 1e-12);
    }

    #[test]
    fn invalid_params() {
        assert!(AckermannParams::new(0.0, 10.0, 0.1).is_err());
        assert!(AckermannParams::new(1.0, 10.0, 0.0).is_err());
        assert!(AckermannParams::new(1.0, 0.001, 0.1).is_err());
    }

    #[test]
    fn speed_floor_and_steering_stop() {
        let p = plant(0.5);
        let (r, hit) = p.regularized(&state(0.0, 0.1, 0.0, 0.0));
        assert!(hit && r[V] == p.params().v_min_mps);
        let (r, hit) = p.regularized(&state(0.0, 0.1, -1e-4, 0.0));
        assert!(hit && r[V] == -p.params().v_min_mps);
        let (_, hit) = p.regularized(&state(0.0, 0.1, 2.0, 0.0));
        assert!(!hit);
        let mut x = state(0.0, 0.9, 1.0, 0.0);
        assert!(p.apply_steering_stop(&mut x));
        assert_eq!(x[DELTA], p.params().max_steer_rad);
        assert!(!p.apply_steering_stop(&mut x));
    }
}
