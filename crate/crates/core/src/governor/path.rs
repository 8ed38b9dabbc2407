use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Piecewise-linear path `r(sigma)`, `sigma` in `[0, 1]` proportional to arc
/// length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Path {
    points: Vec<Vector2<f64>>,
    /// Cumulative arc length at each waypoint.
    arc: Vec<f64>,
}

impl Path {
    pub fn new(points: Vec<Vector2<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("a path needs at least one waypoint"));
        }
        if points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(invalid("path waypoints must be finite"));
        }
        let mut arc = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        arc.push(0.0);
        for w in points.windows(2) {
            acc += (w[1] - w[0]).norm();
            arc.push(acc);
        }
        Ok(Self { points, arc })
    }

    pub fn from_xy(points: &[[f64; 2]]) -> Result<Self> {
        Self::new(points.iter().map(|p| Vector2::new(p[0], p[1])).collect())
    }

    pub fn waypoints(&self) -> &[Vector2<f64>] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        *self.arc.last().expect("non-empty")
    }

    pub fn start(&self) -> Vector2<f64> {
        self.points[0]
    }

    pub fn end(&self) -> Vector2<f64> {
        self.points[self.points.len() - 1]
    }

    pub fn num_segments(&self) -> usize {
        self.points.len() - 1
    }

    /// `sigma` at the start of segment `k` and at its end.
    pub fn segment_sigma(&self, k: usize) -> (f64, f64) {
        let len = self.length();
        if len == 0.0 {
            return (0.0, 1.0);
        }
        (self.arc[k] / len, self.arc[k + 1] / len)
    }

    pub fn segment(&self, k: usize) -> (Vector2<f64>, Vector2<f64>) {
        (self.points[k], self.points[k + 1])
    }

    pub fn point_at(&self, sigma: f64) -> Vector2<f64> {
        let sigma = sigma.clamp(0.0, 1.0);
        let len = self.length();
        if len == 0.0 || self.points.len() == 1 {
            return self.points[0];
        }
        let s = sigma * len;
        let k = match self.arc.binary_search_by(|a| a.total_cmp(&s)) {
            Ok(i) => return self.points[i],
            Err(i) => i.clamp(1, self.points.len() - 1) - 1,
        };
        let seg = self.arc[k + 1] - self.arc[k];
        if seg == 0.0 {
            return self.points[k];
        }
        let t = (s - self.arc[k]) / seg;
        self.points[k] + (self.points[k + 1] - self.points[k]) * t
    }
}

impl TryFrom<Vec<[f64; 2]>> for Path {
    type Error = crate::Error;

    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        Self::from_xy(&v)
    }
}

impl From<Path> for Vec<[f64; 2]> {
    fn from(p: Path) -> Self {
        p.points.iter().map(|q| [q.x, q.y]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arc_length_parameterization() {
        let p = Path::from_xy(&[[0.0, 0.0], [3.0, 0.0], [3.0, 1.0]]).unwrap();
        assert_eq!(p.length(), 4.0);
        assert_eq!(p.point_at(0.0), Vector2::new(0.0, 0.0));
        assert_eq!(p.point_at(0.5), Vector2::new(2.0, 0.0));
        assert_eq!(p.point_at(0.75), Vector2::new(3.0, 0.0));
        assert_eq!(p.point_at(1.0), Vector2::new(3.0, 1.0));
        assert_eq!(p.point_at(7.0), Vector2::new(3.0, 1.0));
        assert_eq!(p.segment_sigma(1), (0.75, 1.0));
    }

    #[test]
    fn single_point_path() {
        let p = Path::from_xy(&[[1.0, 2.0]]).unwrap();
        assert_eq!(p.point_at(0.3), Vector2::new(1.0, 2.0));
        assert_eq!(p.num_segments(), 0);
        assert!(Path::new(vec![]).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let p = Path::from_xy(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[[0.0,0.0],[1.0,1.0]]");
        assert_eq!(serde_json::from_str::<Path>(&s).unwrap(), p);
    }
}
