//! Reference governor: a first-order virtual target `g` that only moves as
//! far along the path as the current free energy allows.
//!
//! The free energy `dE = d_S^2(g, O) - delta(z - C^T g) - eps_E` is the
//! squared radius of the local safe zone around `g`. The projected goal is the
//! furthest path point inside that zone, and the governor tracks it with
//! `g' = -k_g (g - g_bar)`.

mod path;

pub use path::Path;

use std::sync::OnceLock;

use nalgebra::{DVector, Vector2};

use crate::bounds::{peak_bound, BoundMethod, LyapunovBoundCache, PeakBound, RelaxedLinearSystem};
use crate::error::{invalid, Result};
use crate::numkit::SymMatrix;
use crate::world::{dist_to_obstacles, OccupancyGrid};

#[derive(Debug, Clone)]
pub struct GovernorParams {
    /// Governor gain in 1/s. Zero freezes the governor.
    pub k_g: f64,
    /// Energy margin in S-units squared.
    pub eps_e: f64,
    pub metric: SymMatrix,
    pub bound_method: BoundMethod,
}

impl GovernorParams {
    pub fn new(k_g: f64, eps_e: f64, metric: SymMatrix, bound_method: BoundMethod) -> Result<Self> {
        if !(k_g >= 0.0 && k_g.is_finite()) {
            return Err(invalid("governor gain must be finite and non-negative"));
        }
        if !(eps_e > 0.0) {
            return Err(invalid("energy margin must be positive"));
        }
        if metric.dim() != 2 || !metric.is_positive_definite() {
            return Err(invalid("output metric must be a 2x2 positive definite matrix"));
        }
        Ok(Self { k_g, eps_e, metric, bound_method })
    }
}

/// Robot state in reordered linear coordinates together with the governor.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    pub z_tilde: DVector<f64>,
    pub g: Vector2<f64>,
}

impl AugmentedState {
    /// `z - C^T g`: the state relative to the equilibrium at `g`.
    pub fn error_state(&self, sys: &RelaxedLinearSystem) -> DVector<f64> {
        &self.z_tilde - sys.c_bar().transpose() * DVector::from_column_slice(self.g.as_slice())
    }
}

/// Peak bounds for one relaxed system, with the Lyapunov route cached and the
/// ultimate (`z0 = 0`) bounds memoized.
#[derive(Debug)]
pub struct BoundEvaluator {
    sys: RelaxedLinearSystem,
    lyap: LyapunovBoundCache,
    ultimate_lyap: f64,
    ultimate_sdp: OnceLock<f64>,
}

impl BoundEvaluator {
    pub fn new(sys: RelaxedLinearSystem) -> Result<Self> {
        let lyap = LyapunovBoundCache::new(&sys)?;
        let ultimate_lyap = lyap.bound(&DVector::zeros(sys.state_dim()))?.delta;
        Ok(Self { sys, lyap, ultimate_lyap, ultimate_sdp: OnceLock::new() })
    }

    pub fn system(&self) -> &RelaxedLinearSystem {
        &self.sys
    }

    pub fn bound(&self, z0: &DVector<f64>, method: BoundMethod) -> Result<PeakBound> {
        match method {
            BoundMethod::Lyap => self.lyap.bound(z0),
            BoundMethod::Sdp => peak_bound(&self.sys, z0, BoundMethod::Sdp),
        }
    }

    pub fn ultimate(&self, method: BoundMethod) -> Result<f64> {
        match method {
            BoundMethod::Lyap => Ok(self.ultimate_lyap),
            BoundMethod::Sdp => {
                if let Some(v) = self.ultimate_sdp.get() {
                    return Ok(*v);
                }
                let v = peak_bound(&self.sys, &DVector::zeros(self.sys.state_dim()), BoundMethod::Sdp)?.delta;
                Ok(*self.ultimate_sdp.get_or_init(|| v))
            }
        }
    }
}

/// `d_S^2 - bound - eps_E`.
pub fn free_energy_value(dist_sq: f64, bound: f64, eps_e: f64) -> f64 {
    dist_sq - bound - eps_e
}

#[derive(Debug, Clone)]
pub struct FreeEnergy {
    pub delta_e: f64,
    pub bound: PeakBound,
}

pub fn free_energy(
    s: &AugmentedState,
    dist_sq_to_obstacles: f64,
    eval: &BoundEvaluator,
    p: &GovernorParams,
) -> Result<FreeEnergy> {
    if !(dist_sq_to_obstacles >= 0.0) {
        return Err(invalid("squared obstacle distance must be non-negative"));
    }
    let bound = eval.bound(&s.error_state(eval.system()), p.bound_method)?;
    Ok(FreeEnergy { delta_e: free_energy_value(dist_sq_to_obstacles, bound.delta, p.eps_e), bound })
}

/// `{q : ||q - g||_S^2 <= max(0, dE)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SafeZone {
    pub center: Vector2<f64>,
    pub radius_sq: f64,
    pub metric: SymMatrix,
}

impl SafeZone {
    pub fn new(center: Vector2<f64>, delta_e: f64, metric: SymMatrix) -> Self {
        Self { center, radius_sq: delta_e.max(0.0), metric }
    }

    pub fn dist_sq(&self, q: &Vector2<f64>) -> f64 {
        metric_dist_sq(&self.metric, &(q - self.center))
    }

    pub fn contains(&self, q: &Vector2<f64>) -> bool {
        self.dist_sq(q) <= self.radius_sq
    }
}

pub(crate) fn metric_dist_sq(s: &SymMatrix, d: &Vector2<f64>) -> f64 {
    s[(0, 0)] * d.x * d.x + 2.0 * s[(0, 1)] * d.x * d.y + s[(1, 1)] * d.y * d.y
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub g_bar: Vector2<f64>,
    pub sigma: f64,
    /// No path point lies in the zone; the governor holds still.
    pub stalled: bool,
}

/// Largest `t` in `[0, 1]` with `a + t (b - a)` inside the zone.
fn furthest_on_segment(zone: &SafeZone, a: &Vector2<f64>, b: &Vector2<f64>) -> Option<f64> {
    let d = b - a;
    let e = a - zone.center;
    let s = &zone.metric;
    let qa = metric_dist_sq(s, &d);
    let qb = s[(0, 0)] * e.x * d.x + s[(0, 1)] * (e.x * d.y + e.y * d.x) + s[(1, 1)] * e.y * d.y;
    let qc = metric_dist_sq(s, &e) - zone.radius_sq;
    if qa <= 0.0 {
        return (qc <= 0.0).then_some(1.0);
    }
    let disc = qb * qb - qa * qc;
    if disc < 0.0 {
        return None;
    }
    let root = disc.sqrt();
    let t_hi = (-qb + root) / qa;
    let t_lo = (-qb - root) / qa;
    if t_hi < 0.0 || t_lo > 1.0 {
        return None;
    }
    Some(t_hi.min(1.0))
}

/// Furthest point of `path` inside `zone` (global maximum of `sigma`). When
/// the zone is degenerate or misses the path, the governor stays at the
/// zone's center and keeps `prev_sigma`.
pub fn project_goal(zone: &SafeZone, path: &Path, prev_sigma: f64) -> Projection {
    let stall = Projection { g_bar: zone.center, sigma: prev_sigma, stalled: true };
    if zone.radius_sq <= 0.0 {
        return stall;
    }
    if path.num_segments() == 0 {
        return if zone.contains(&path.start()) {
            Projection { g_bar: path.start(), sigma: 1.0, stalled: false }
        } else {
            stall
        };
    }
    for k in (0..path.num_segments()).rev() {
        let (a, b) = path.segment(k);
        if let Some(t) = furthest_on_segment(zone, &a, &b) {
            let (s0, s1) = path.segment_sigma(k);
            let g_bar = if t >= 1.0 { b } else { a + (b - a) * t };
            return Projection { g_bar, sigma: s0 + (s1 - s0) * t, stalled: false };
        }
    }
    stall
}

/// `u_g = -k_g (g - g_bar)`.
pub fn governor_control(g: &Vector2<f64>, g_bar: &Vector2<f64>, k_g: f64) -> Vector2<f64> {
    -(g - g_bar) * k_g
}

/// Positive free energy and a zone that meets the path.
pub fn is_safe_state(delta_e: f64, path: &Path, zone: &SafeZone) -> bool {
    if !(delta_e > 0.0) {
        return false;
    }
    if path.num_segments() == 0 {
        return zone.contains(&path.start());
    }
    (0..path.num_segments()).any(|k| {
        let (a, b) = path.segment(k);
        furthest_on_segment(zone, &a, &b).is_some()
    })
}

/// `d_S^2(y, r(1)) <= eps`.
pub fn in_goal_region(y: &Vector2<f64>, path: &Path, eps: f64, s: &SymMatrix) -> bool {
    metric_dist_sq(s, &(y - path.end())) <= eps
}

/// Whether every path point, sampled every half cell, keeps
/// `d_S(r, O) > sqrt(lambda_min(S) (delta_ult + eps_E))`.
pub fn check_path_clearance(
    path: &Path,
    grid: &OccupancyGrid,
    metric: &SymMatrix,
    ultimate_bound: f64,
    eps_e: f64,
    max_range: f64,
) -> Result<bool> {
    let need = (metric.min_eigenvalue()? * (ultimate_bound + eps_e)).sqrt();
    let step = 0.5 * grid.resolution();
    let n = (path.length() / step).ceil().max(1.0) as usize;
    Ok((0..=n).all(|k| {
        let q = path.point_at(k as f64 / n as f64);
        dist_to_obstacles(grid, &q, metric, max_range) > need
    }))
}

/// Governor position, its path progress and stall status.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GovernorState {
    pub g: Vector2<f64>,
    pub sigma: f64,
    pub stalled: bool,
}

impl GovernorState {
    pub fn new(g: Vector2<f64>) -> Self {
        Self { g, sigma: 0.0, stalled: false }
    }

    /// One explicit Euler step toward `proj.g_bar`.
    pub fn step(&mut self, proj: &Projection, k_g: f64, dt: f64) {
        self.g += governor_control(&self.g, &proj.g_bar, k_g) * dt;
        self.sigma = proj.sigma;
        self.stalled = proj.stalled;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Cell;

    fn line() -> Path {
        Path::from_xy(&[[0.0, 0.0], [10.0, 0.0]]).unwrap()
    }

    #[test]
    fn free_energy_arithmetic() {
        assert!((free_energy_value(9.0, 4.0, 0.1) - 4.9).abs() < 1e-15);
        let z = SafeZone::new(Vector2::zeros(), -1.0, SymMatrix::identity(2));
        assert_eq!(z.radius_sq, 0.0);
    }

    #[test]
    fn projection_on_a_line() {
        let z = SafeZone::new(Vector2::zeros(), 4.0, SymMatrix::identity(2));
        let p = project_goal(&z, &line(), 0.0);
        assert!((p.g_bar - Vector2::new(2.0, 0.0)).norm() < 1e-12);
        assert!((p.sigma - 0.2).abs() < 1e-12);
        assert!(!p.stalled);
    }

    #[test]
    fn projection_with_weighted_metric() {
        let z = SafeZone::new(Vector2::new(1.0, 0.0), 4.0, SymMatrix::from_diagonal(&[1.0, 4.0]));
        let p = project_goal(&z, &line(), 0.0);
        assert!((p.g_bar - Vector2::new(3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn projection_takes_the_furthest_piece() {
        // path doubles back through the zone
        let path = Path::from_xy(&[[0.0, 0.0], [5.0, 0.0], [5.0, 1.0], [0.5, 1.0]]).unwrap();
        let z = SafeZone::new(Vector2::zeros(), 4.0, SymMatrix::identity(2));
        let p = project_goal(&z, &path, 0.0);
        assert!((p.g_bar - Vector2::new(0.5, 1.0)).norm() < 1e-12);
        assert_eq!(p.sigma, 1.0);
    }

    #[test]
    fn degenerate_zone_stalls() {
        let z = SafeZone::new(Vector2::new(1.0, 1.0), 0.0, SymMatrix::identity(2));
        let p = project_goal(&z, &line(), 0.3);
        assert_eq!(p.g_bar, Vector2::new(1.0, 1.0));
        assert_eq!(p.sigma, 0.3);
        assert!(p.stalled);
        let far = SafeZone::new(Vector2::new(0.0, 5.0), 1.0, SymMatrix::identity(2));
        assert!(project_goal(&far, &line(), 0.1).stalled);
    }

    #[test]
    fn control_law() {
        assert_eq!(governor_control(&Vector2::new(1.0, 1.0), &Vector2::new(1.0, 1.0), 3.0), Vector2::zeros());
        assert_eq!(governor_control(&Vector2::zeros(), &Vector2::new(1.0, 0.0), 2.0), Vector2::new(2.0, 0.0));
    }

    #[test]
    fn safety_and_goal_predicates() {
        let z = SafeZone::new(Vector2::zeros(), 4.9, SymMatrix::identity(2));
        assert!(is_safe_state(4.9, &line(), &z));
        assert!(!is_safe_state(-1.0, &line(), &z));
        let away = SafeZone::new(Vector2::new(0.0, 5.0), 1.0, SymMatrix::identity(2));
        assert!(!is_safe_state(1.0, &line(), &away));
        assert!(in_goal_region(&Vector2::new(10.0, 0.0), &line(), 0.0, &SymMatrix::identity(2)));
        assert!(in_goal_region(&Vector2::new(10.0, 0.5), &line(), 0.25, &SymMatrix::identity(2)));
        assert!(!in_goal_region(&Vector2::new(10.0, 0.6), &line(), 0.25, &SymMatrix::identity(2)));
    }

    #[test]
    fn path_clearance() {
        let mut g = OccupancyGrid::new(0.5, Vector2::new(-20.25, -20.25), 81, 81).unwrap();
        for j in 0..81 {
            for i in 0..81 {
                g.set(i, j, Cell::Free);
            }
        }
        let s = SymMatrix::identity(2);
        assert!(check_path_clearance(&line(), &g, &s, 1.0, 0.05, 30.0).unwrap());
        let (i, j) = g.cell_of(&Vector2::new(5.0, 0.0)).unwrap();
        g.set(i, j, Cell::Occupied);
        assert!(!check_path_clearance(&line(), &g, &s, 1.0, 0.05, 30.0).unwrap());
    }
}
