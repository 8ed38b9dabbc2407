use std::path::Path as FsPath;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Axis-aligned rectangle `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Self { min, max }
    }

    fn valid(&self) -> bool {
        self.min.iter().chain(&self.max).all(|v| v.is_finite()) && self.min[0] < self.max[0] && self.min[1] < self.max[1]
    }

    pub fn contains(&self, q: &Vector2<f64>) -> bool {
        q.x >= self.min[0] && q.x <= self.max[0] && q.y >= self.min[1] && q.y <= self.max[1]
    }

    fn strictly_contains(&self, q: &Vector2<f64>) -> bool {
        q.x > self.min[0] && q.x < self.max[0] && q.y > self.min[1] && q.y < self.max[1]
    }

    /// Euclidean distance from `q` to the rectangle (0 inside).
    pub fn distance(&self, q: &Vector2<f64>) -> f64 {
        let dx = (self.min[0] - q.x).max(q.x - self.max[0]).max(0.0);
        let dy = (self.min[1] - q.y).max(q.y - self.max[1]).max(0.0);
        dx.hypot(dy)
    }

    /// Slab test: entry and exit parameters of `o + t d`, if the line meets
    /// the rectangle.
    fn slab(&self, o: &Vector2<f64>, d: &Vector2<f64>) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for k in 0..2 {
            if d[k] == 0.0 {
                if o[k] < self.min[k] || o[k] > self.max[k] {
                    return None;
                }
            } else {
                let a = (self.min[k] - o[k]) / d[k];
                let b = (self.max[k] - o[k]) / d[k];
                t0 = t0.max(a.min(b));
                t1 = t1.min(a.max(b));
            }
        }
        (t0 <= t1).then_some((t0, t1))
    }
}

/// Workspace bounds plus rectangular obstacles. The workspace boundary acts as
/// a wall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthMap {
    pub workspace: Rect,
    #[serde(default)]
    pub obstacles: Vec<Rect>,
}

impl GroundTruthMap {
    pub fn new(workspace: Rect, obstacles: Vec<Rect>) -> Result<Self> {
        let m = Self { workspace, obstacles };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.workspace.valid() {
            return Err(invalid("workspace must be a non-degenerate rectangle"));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !o.valid() {
                return Err(invalid(format!("obstacle {i} is degenerate")));
            }
            let inside = o.min[0] >= self.workspace.min[0]
                && o.min[1] >= self.workspace.min[1]
                && o.max[0] <= self.workspace.max[0]
                && o.max[1] <= self.workspace.max[1];
            if !inside {
                return Err(invalid(format!("obstacle {i} leaves the workspace")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Inside an obstacle (closed) or outside the workspace.
    pub fn collides(&self, q: &Vector2<f64>) -> bool {
        !self.workspace.contains(q) || self.obstacles.iter().any(|o| o.contains(q))
    }

    /// Euclidean distance to the nearest obstacle or workspace wall.
    pub fn clearance(&self, q: &Vector2<f64>) -> f64 {
        if !self.workspace.contains(q) {
            return 0.0;
        }
        let w = &self.workspace;
        let wall = (q.x - w.min[0]).min(w.max[0] - q.x).min(q.y - w.min[1]).min(w.max[1] - q.y);
        self.obstacles.iter().map(|o| o.distance(q)).fold(wall, f64::min)
    }

    /// Distance along the ray from `o` at `angle` to the first obstacle or
    /// wall, capped at `max_range`.
    pub fn cast(&self, o: &Vector2<f64>, angle: f64, max_range: f64) -> f64 {
        let d = Vector2::new(angle.cos(), angle.sin());
        let mut best = self.workspace.slab(o, &d).map_or(0.0, |(_, t1)| t1.max(0.0));
        for ob in &self.obstacles {
            if let Some((t0, t1)) = ob.slab(o, &d) {
                if t1 >= 0.0 {
                    best = best.min(t0.max(0.0));
                }
            }
        }
        best.min(max_range)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarSpec {
    pub num_beams: usize,
    pub max_range_m: f64,
    #[serde(default = "full_turn")]
    pub angular_span_rad: f64,
}

fn full_turn() -> f64 {
    std::f64::consts::TAU
}

impl Default for LidarSpec {
    fn default() -> Self {
        Self { num_beams: 360, max_range_m: 30.0, angular_span_rad: full_turn() }
    }
}

impl LidarSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_beams == 0 || !(self.max_range_m > 0.0) || !(self.angular_span_rad > 0.0) {
            return Err(invalid("lidar needs at least one beam, positive range and positive span"));
        }
        Ok(())
    }

    /// Beam `k` relative to the heading; beams are centered on the heading.
    pub fn beam_angle(&self, heading: f64, k: usize) -> f64 {
        let n = self.num_beams as f64;
        heading + (k as f64 - (n - 1.0) / 2.0) * self.angular_span_rad / n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2 {
    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beam {
    pub angle: f64,
    pub range: f64,
}

pub fn raycast(map: &GroundTruthMap, pose: &Pose2, spec: &LidarSpec) -> Result<Vec<Beam>> {
    let p = pose.position();
    if !map.workspace.contains(&p) || map.obstacles.iter().any(|o| o.strictly_contains(&p)) {
        return Err(Error::PoseInObstacle { x: pose.x, y: pose.y });
    }
    Ok((0..spec.num_beams)
        .map(|k| {
            let angle = spec.beam_angle(pose.heading, k);
            Beam { angle, range: map.cast(&p, angle, spec.max_range_m) }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn wall_map() -> GroundTruthMap {
        GroundTruthMap::new(Rect::new([-50.0, -50.0], [50.0, 50.0]), vec![Rect::new([5.0, -20.0], [6.0, 20.0])]).unwrap()
    }

    fn single(heading: f64) -> (Pose2, LidarSpec) {
        (Pose2 { x: 0.0, y: 0.0, heading }, LidarSpec { num_beams: 1, max_range_m: 30.0, angular_span_rad: 0.1 })
    }

    #[test]
    fn perpendicular_wall() {
        let (pose, spec) = single(0.0);
        let r = raycast(&wall_map(), &pose, &spec).unwrap();
        assert_eq!(r[0].range, 5.0);
    }

    #[test]
    fn oblique_wall() {
        let (pose, spec) = single(FRAC_PI_4);
        let r = raycast(&wall_map(), &pose, &spec).unwrap();
        assert!((r[0].range - 5.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_map_saturates() {
        let map = GroundTruthMap::new(Rect::new([-100.0, -100.0], [100.0, 100.0]), vec![]).unwrap();
        let r = raycast(&map, &Pose2 { x: 0.0, y: 0.0, heading: 0.3 }, &LidarSpec::default()).unwrap();
        assert_eq!(r.len(), 360);
        assert!(r.iter().all(|b| b.range == 30.0));
    }

    #[test]
    fn boundary_is_a_wall() {
        let map = GroundTruthMap::new(Rect::new([0.0, 0.0], [10.0, 10.0]), vec![]).unwrap();
        assert_eq!(map.cast(&Vector2::new(2.0, 5.0), std::f64::consts::PI, 30.0), 2.0);
    }

    #[test]
    fn pose_inside_obstacle() {
        let pose = Pose2 { x: 5.5, y: 0.0, heading: 0.0 };
        assert!(matches!(raycast(&wall_map(), &pose, &LidarSpec::default()), Err(Error::PoseInObstacle { .. })));
    }

    #[test]
    fn beam_fan_is_centered() {
        let spec = LidarSpec { num_beams: 3, max_range_m: 1.0, angular_span_rad: 3.0 };
        assert_eq!(spec.beam_angle(0.0, 1), 0.0);
        assert_eq!(spec.beam_angle(0.0, 0), -1.0);
    }

    #[test]
    fn clearance_and_json() {
        let m = GroundTruthMap::from_json(
            r#"{"workspace": {"min": [0, 0], "max": [10, 10]}, "obstacles": [{"min": [4, 4], "max": [6, 6]}]}"#,
        )
        .unwrap();
        assert_eq!(m.clearance(&Vector2::new(1.0, 5.0)), 1.0);
        assert_eq!(m.clearance(&Vector2::new(2.5, 5.0)), 1.5);
        assert!(m.collides(&Vector2::new(5.0, 5.0)));
        assert!(GroundTruthMap::from_json(r#"{"workspace": {"min": [0, 0], "max": [1, 1]}, "obstacles": [{"min": [0, 0], "max": [2, 2]}]}"#).is_err());
    }
}
