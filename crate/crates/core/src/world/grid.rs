use std::io::Write;
use std::path::Path as FsPath;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::{Beam, GroundTruthMap};
use crate::error::{invalid, Result};
use crate::numkit::SymMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cell {
    Free,
    Occupied,
    Unknown,
}

/// Ternary occupancy grid. Cell `(i, j)` covers
/// `origin + res * [i, i + 1) x [j, j + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    resolution: f64,
    origin: Vector2<f64>,
    width: usize,
    height: usize,
    cells: Vec<Cell>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridMetadata {
    pub resolution_m: f64,
    pub origin: [f64; 2],
    pub width: usize,
    pub height: usize,
    pub free: u8,
    pub occupied: u8,
    pub unknown: u8,
}

impl OccupancyGrid {
    /// All-unknown grid.
    pub fn new(resolution: f64, origin: Vector2<f64>, width: usize, height: usize) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) || width == 0 || height == 0 {
            return Err(invalid("grid needs a positive resolution and non-zero size"));
        }
        Ok(Self { resolution, origin, width, height, cells: vec![Cell::Unknown; width * height] })
    }

    /// Grid over the map's workspace with a one-cell margin, so that beams
    /// ending on the workspace wall mark a cell.
    pub fn for_map(map: &GroundTruthMap, resolution: f64) -> Result<Self> {
        let w = &map.workspace;
        let width = ((w.max[0] - w.min[0]) / resolution).ceil() as usize + 2;
        let height = ((w.max[1] - w.min[1]) / resolution).ceil() as usize + 2;
        let origin = Vector2::new(w.min[0] - resolution, w.min[1] - resolution);
        Self::new(resolution, origin, width, height)
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Vector2<f64> {
        self.origin
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    /// Signed cell coordinates of a point (may lie outside the grid).
    pub fn cell_coords(&self, q: &Vector2<f64>) -> (i64, i64) {
        let r = (q - self.origin) / self.resolution;
        (r.x.floor() as i64, r.y.floor() as i64)
    }

    pub fn in_bounds(&self, i: i64, j: i64) -> bool {
        i >= 0 && j >= 0 && (i as usize) < self.width && (j as usize) < self.height
    }

    pub fn cell_of(&self, q: &Vector2<f64>) -> Option<(usize, usize)> {
        let (i, j) = self.cell_coords(q);
        self.in_bounds(i, j).then_some((i as usize, j as usize))
    }

    pub fn center(&self, i: i64, j: i64) -> Vector2<f64> {
        self.origin + Vector2::new(i as f64 + 0.5, j as f64 + 0.5) * self.resolution
    }

    pub fn get(&self, i: usize, j: usize) -> Cell {
        self.cells[self.index(i, j)]
    }

    /// Out-of-grid cells read as unknown.
    pub fn get_signed(&self, i: i64, j: i64) -> Cell {
        if self.in_bounds(i, j) {
            self.get(i as usize, j as usize)
        } else {
            Cell::Unknown
        }
    }

    pub fn set(&mut self, i: usize, j: usize, c: Cell) {
        let k = self.index(i, j);
        self.cells[k] = c;
    }

    pub fn count(&self, c: Cell) -> usize {
        self.cells.iter().filter(|&&x| x == c).count()
    }

    /// Binary PGM (P5), top row = largest y.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        for j in (0..self.height).rev() {
            for i in 0..self.width {
                out.push(match self.get(i, j) {
                    Cell::Free => 255,
                    Cell::Occupied => 0,
                    Cell::Unknown => 128,
                });
            }
        }
        out
    }

    pub fn metadata(&self) -> GridMetadata {
        GridMetadata {
            resolution_m: self.resolution,
            origin: [self.origin.x, self.origin.y],
            width: self.width,
            height: self.height,
            free: 255,
            occupied: 0,
            unknown: 128,
        }
    }

    /// Writes `path` as PGM and a JSON sidecar next to it.
    pub fn write_pgm(&self, path: impl AsRef<FsPath>) -> Result<()> {
        let path = path.as_ref();
        std::fs::File::create(path)?.write_all(&self.to_pgm())?;
        std::fs::write(path.with_extension("json"), serde_json::to_string_pretty(&self.metadata())?)?;
        Ok(())
    }
}

/// Integer line from `a` to `b` inclusive.
pub(crate) fn bresenham(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut x, mut y) = a;
    let dx = (b.0 - a.0).abs();
    let dy = -(b.1 - a.1).abs();
    let sx = if a.0 < b.0 { 1 } else { -1 };
    let sy = if a.1 < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy) as usize + 1);
    loop {
        out.push((x, y));
        if (x, y) == b {
            return out;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Integrates one scan taken at `origin`. Traversed cells become free, the
/// endpoint cell of a beam shorter than `max_range` becomes occupied, and
/// occupied cells never revert.
pub fn update_grid(grid: &mut OccupancyGrid, origin: &Vector2<f64>, beams: &[Beam], max_range: f64) {
    let start = grid.cell_coords(origin);
    for b in beams {
        // nudge past the surface so the hit lands in the obstacle's cell
        let end = origin + Vector2::new(b.angle.cos(), b.angle.sin()) * (b.range + 1e-9);
        let end = grid.cell_coords(&end);
        let hit = b.range < max_range;
        for (i, j) in bresenham(start, end) {
            if !grid.in_bounds(i, j) {
                continue;
            }
            let (i, j) = (i as usize, j as usize);
            let cur = grid.get(i, j);
            if cur == Cell::Occupied {
                continue;
            }
            let next = if hit && (i as i64, j as i64) == end { Cell::Occupied } else { Cell::Free };
            grid.set(i, j, next);
        }
    }
}

fn eig2(s: &SymMatrix) -> (f64, f64) {
    let (a, b, d) = (s[(0, 0)], s[(0, 1)], s[(1, 1)]);
    let m = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    (m - r, m + r)
}

/// Lower bound on `d_S(q, O)`, with `O` every occupied, unknown or
/// out-of-grid cell. Cell centers are pulled in by half a cell and the result
/// is capped at the sensing range, since unobserved space earns no credit.
pub fn dist_to_obstacles(grid: &OccupancyGrid, q: &Vector2<f64>, s: &SymMatrix, max_range: f64) -> f64 {
    debug_assert_eq!(s.dim(), 2);
    let (lmin, lmax) = eig2(s);
    let (smin, smax) = (lmin.max(0.0).sqrt(), lmax.sqrt());
    let res = grid.resolution;
    let cap = max_range * smin;
    let half = 0.5 * res * smax;
    let (ci, cj) = grid.cell_coords(q);
    let norm = |c: Vector2<f64>| {
        let d = c - q;
        (s[(0, 0)] * d.x * d.x + 2.0 * s[(0, 1)] * d.x * d.y + s[(1, 1)] * d.y * d.y).max(0.0).sqrt()
    };
    let blocked = |i: i64, j: i64| grid.get_signed(i, j) != Cell::Free;
    let mut best = f64::INFINITY;
    let max_ring = (max_range / res).ceil() as i64 + 2;
    for r in 0..=max_ring {
        let ring_lb = smin * (r as f64 - 0.5).max(0.0) * res;
        if ring_lb >= best || ring_lb - half >= cap {
            break;
        }
        let mut visit = |i: i64, j: i64| {
            if blocked(i, j) {
                best = best.min(norm(grid.center(i, j)));
            }
        };
        if r == 0 {
            visit(ci, cj);
            continue;
        }
        for k in -r..=r {
            visit(ci + k, cj - r);
            visit(ci + k, cj + r);
        }
        for k in (-r + 1)..r {
            visit(ci - r, cj + k);
            visit(ci + r, cj + k);
        }
    }
    (best - half).clamp(0.0, cap)
}

/// Exact squared Euclidean distance transform (in cells) to the cells where
/// `seed` is true.
pub(crate) fn distance_transform(seed: &[bool], width: usize, height: usize) -> Vec<f64> {
    const INF: f64 = 1e20;
    let mut d: Vec<f64> = seed.iter().map(|&s| if s { 0.0 } else { INF }).collect();
    let n = width.max(height);
    let mut f = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    for i in 0..width {
        for j in 0..height {
            f[j] = d[j * width + i];
        }
        edt_1d(&f[..height], &mut out[..height], &mut v, &mut z);
        for j in 0..height {
            d[j * width + i] = out[j];
        }
    }
    for j in 0..height {
        f[..width].copy_from_slice(&d[j * width..(j + 1) * width]);
        edt_1d(&f[..width], &mut out[..width], &mut v, &mut z);
        d[j * width..(j + 1) * width].copy_from_slice(&out[..width]);
    }
    d
}

/// Lower envelope of parabolas (Felzenszwalb and Huttenlocher).
fn edt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0: replace the only parabola
                v[0] = q;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, dq) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        *dq = (q as f64 - p as f64).powi(2) + f[p];
    }
}
