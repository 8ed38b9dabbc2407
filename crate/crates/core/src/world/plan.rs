use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Vector2;

use super::grid::{bresenham, distance_transform};
use super::{Cell, OccupancyGrid};
use crate::error::{Error, Result};
use crate::governor::Path;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Cells closer than `radius` (center to center) to any occupied or unknown
/// cell, plus those cells themselves.
#[derive(Debug, Clone)]
pub struct BlockedMask {
    pub width: usize,
    pub height: usize,
    pub blocked: Vec<bool>,
    /// Occupied or unknown before inflation.
    pub hard: Vec<bool>,
}

impl BlockedMask {
    pub fn is_blocked(&self, i: i64, j: i64) -> bool {
        if i < 0 || j < 0 || i as usize >= self.width || j as usize >= self.height {
            return true;
        }
        self.blocked[j as usize * self.width + i as usize]
    }
}

pub fn inflate(grid: &OccupancyGrid, radius: f64) -> BlockedMask {
    let hard: Vec<bool> = grid.cells().iter().map(|&c| c != Cell::Free).collect();
    let (w, h) = (grid.width(), grid.height());
    let r_cells = radius.max(0.0) / grid.resolution();
    let d2 = distance_transform(&hard, w, h);
    let mut blocked: Vec<bool> = d2.iter().map(|&d| d <= r_cells * r_cells).collect();
    // the grid edge counts as obstacle too
    for j in 0..h {
        for i in 0..w {
            let edge = i.min(j).min(w - 1 - i).min(h - 1 - j) as f64 + 1.0;
            if edge <= r_cells {
                blocked[j * w + i] = true;
            }
        }
    }
    BlockedMask { width: w, height: h, blocked, hard }
}

#[derive(Clone, Copy)]
struct Node {
    f: f64,
    h: f64,
    idx: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then(other.h.total_cmp(&self.h)).then(other.idx.cmp(&self.idx))
    }
}

fn octile(a: (usize, usize), b: (usize, usize)) -> f64 {
    let dx = a.0.abs_diff(b.0) as f64;
    let dy = a.1.abs_diff(b.1) as f64;
    dx.max(dy) + (SQRT2 - 1.0) * dx.min(dy)
}

const MOVES: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

/// Neighbors of `idx` under 8-connectivity; diagonal moves may not cut a
/// blocked corner.
fn neighbors(blocked: &[bool], w: usize, h: usize, idx: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
    let (i, j) = ((idx % w) as i64, (idx / w) as i64);
    let free = move |x: i64, y: i64| x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && !blocked[y as usize * w + x as usize];
    MOVES.iter().filter_map(move |&(dx, dy)| {
        let (x, y) = (i + dx, j + dy);
        if !free(x, y) {
            return None;
        }
        if dx != 0 && dy != 0 && !(free(i + dx, j) && free(i, j + dy)) {
            return None;
        }
        Some((y as usize * w + x as usize, if dx != 0 && dy != 0 { SQRT2 } else { 1.0 }))
    })
}

struct Search {
    parent: Vec<usize>,
    cost: Vec<f64>,
    closed: Vec<bool>,
}

fn search(blocked: &[bool], w: usize, h: usize, start: usize, goal: (usize, usize)) -> (Search, bool) {
    let n = w * h;
    let mut s = Search { parent: vec![usize::MAX; n], cost: vec![f64::INFINITY; n], closed: vec![false; n] };
    let goal_idx = goal.1 * w + goal.0;
    let coord = |k: usize| (k % w, k / w);
    let mut open = BinaryHeap::new();
    s.cost[start] = 0.0;
    let h0 = octile(coord(start), goal);
    open.push(Node { f: h0, h: h0, idx: start });
    while let Some(Node { idx, .. }) = open.pop() {
        if s.closed[idx] {
            continue;
        }
        s.closed[idx] = true;
        if idx == goal_idx {
            return (s, true);
        }
        for (nb, step) in neighbors(blocked, w, h, idx) {
            if s.closed[nb] {
                continue;
            }
            let g = s.cost[idx] + step;
            if g < s.cost[nb] {
                s.cost[nb] = g;
                s.parent[nb] = idx;
                let hh = octile(coord(nb), goal);
                open.push(Node { f: g + hh, h: hh, idx: nb });
            }
        }
    }
    (s, false)
}

fn trace(s: &Search, w: usize, end: usize) -> Vec<(usize, usize)> {
    let mut out = vec![(end % w, end / w)];
    let mut k = end;
    while s.parent[k] != usize::MAX {
        k = s.parent[k];
        out.push((k % w, k / w));
    }
    out.reverse();
    out
}

/// 8-connected A* with the octile heuristic on a blocked mask (row-major,
/// `width` columns). Returns the cell path and its cost in cell units.
pub fn astar(
    blocked: &[bool],
    width: usize,
    height: usize,
    start: (usize, usize),
    goal: (usize, usize),
) -> Option<(Vec<(usize, usize)>, f64)> {
    let ok = |c: (usize, usize)| c.0 < width && c.1 < height && !blocked[c.1 * width + c.0];
    if blocked.len() != width * height || !ok(start) || !ok(goal) {
        return None;
    }
    let (s, found) = search(blocked, width, height, start.1 * width + start.0, goal);
    let g = goal.1 * width + goal.0;
    found.then(|| (trace(&s, width, g), s.cost[g]))
}

fn line_of_sight(grid: &OccupancyGrid, mask: &BlockedMask, a: &Vector2<f64>, b: &Vector2<f64>) -> bool {
    let steps = ((b - a).norm() / (0.25 * grid.resolution())).ceil().max(1.0) as usize;
    (0..=steps).all(|k| {
        let (i, j) = grid.cell_coords(&(a + (b - a) * (k as f64 / steps as f64)));
        !mask.is_blocked(i, j)
    })
}

/// If the start cell sits inside the inflation margin, the nearest free cell
/// reachable by a straight line that avoids hard obstacles.
fn escape_cell(grid: &OccupancyGrid, mask: &BlockedMask, start: (i64, i64), radius: f64) -> Option<(i64, i64)> {
    let reach = (radius / grid.resolution()).ceil() as i64 + 2;
    let mut best: Option<((i64, i64), i64)> = None;
    for dj in -reach..=reach {
        for di in -reach..=reach {
            let c = (start.0 + di, start.1 + dj);
            if mask.is_blocked(c.0, c.1) {
                continue;
            }
            let d2 = di * di + dj * dj;
            if best.is_some_and(|(_, b)| b <= d2) {
                continue;
            }
            let clear = bresenham(start, c).iter().all(|&(i, j)| {
                grid.in_bounds(i, j) && !mask.hard[j as usize * mask.width + i as usize]
            });
            if clear {
                best = Some((c, d2));
            }
        }
    }
    best.map(|(c, _)| c)
}

/// Outcome of [`plan_toward`].
#[derive(Debug, Clone)]
pub struct PlanResult {
    pub path: Path,
    /// False when the goal is not reachable in the known free space and the
    /// path ends at the reachable cell closest to it.
    pub reaches_goal: bool,
}

fn plan_impl(
    grid: &OccupancyGrid,
    start: &Vector2<f64>,
    goal: &Vector2<f64>,
    inflation_radius: f64,
    partial: bool,
) -> Result<PlanResult> {
    let mask = inflate(grid, inflation_radius);
    let (w, h) = (grid.width(), grid.height());
    let fail = |m: &str| Error::PlanningFailed(m.to_string());
    let s0 = grid.cell_coords(start);
    let g0 = grid.cell_coords(goal);
    if !grid.in_bounds(s0.0, s0.1) {
        return Err(fail("start lies outside the grid"));
    }
    if !grid.in_bounds(g0.0, g0.1) {
        return Err(fail("goal lies outside the grid"));
    }
    if !partial && mask.is_blocked(g0.0, g0.1) {
        return Err(fail("goal lies in an inflated obstacle"));
    }
    let mut prefix = vec![*start];
    let s_cell = if mask.is_blocked(s0.0, s0.1) {
        let e = escape_cell(grid, &mask, s0, inflation_radius).ok_or_else(|| fail("start is boxed in by obstacles"))?;
        prefix.push(grid.center(e.0, e.1));
        e
    } else {
        s0
    };
    let goal_u = (g0.0 as usize, g0.1 as usize);
    let start_idx = s_cell.1 as usize * w + s_cell.0 as usize;
    let (search_res, found) = search(&mask.blocked, w, h, start_idx, goal_u);
    let end = if found {
        goal_u.1 * w + goal_u.0
    } else if partial {
        // reachable cell nearest the goal; ties prefer cheaper then lower index
        (0..w * h)
            .filter(|&k| search_res.closed[k])
            .min_by(|&a, &b| {
                let da = (grid.center((a % w) as i64, (a / w) as i64) - goal).norm();
                let db = (grid.center((b % w) as i64, (b / w) as i64) - goal).norm();
                da.total_cmp(&db).then(search_res.cost[a].total_cmp(&search_res.cost[b])).then(a.cmp(&b))
            })
            .expect("start cell is always closed")
    } else {
        return Err(fail("no path to goal"));
    };
    let cells = trace(&search_res, w, end);
    let mut pts: Vec<Vector2<f64>> = cells.iter().map(|&(i, j)| grid.center(i as i64, j as i64)).collect();
    if found {
        *pts.last_mut().expect("non-empty") = *goal;
    }
    // greedy line-of-sight shortcuts over the cell path
    let mut smooth = vec![pts[0]];
    let mut i = 0;
    while i + 1 < pts.len() {
        let mut j = pts.len() - 1;
        while j > i + 1 && !line_of_sight(grid, &mask, &pts[i], &pts[j]) {
            j -= 1;
        }
        smooth.push(pts[j]);
        i = j;
    }
    // the exact start replaces the first cell center when it is not escaping
    let mut points = prefix;
    let skip_first = points.len() == 1;
    points.extend(smooth.into_iter().skip(usize::from(skip_first)));
    if points.len() == 1 {
        points.push(if found { *goal } else { points[0] });
    }
    Ok(PlanResult { path: Path::new(points)?, reaches_goal: found })
}

/// A* from `start` to `goal` on the grid with occupied and unknown cells
/// inflated by `inflation_radius`, followed by line-of-sight smoothing.
pub fn plan_path(grid: &OccupancyGrid, start: &Vector2<f64>, goal: &Vector2<f64>, inflation_radius: f64) -> Result<Path> {
    plan_impl(grid, start, goal, inflation_radius, false).map(|r| r.path)
}

/// Like [`plan_path`], but when the goal is not reachable through known free
/// space, plans to the reachable cell nearest the goal instead of failing.
pub fn plan_toward(
    grid: &OccupancyGrid,
    start: &Vector2<f64>,
    goal: &Vector2<f64>,
    inflation_radius: f64,
) -> Result<PlanResult> {
    plan_impl(grid, start, goal, inflation_radius, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free(n: usize, res: f64) -> OccupancyGrid {
        let half = 0.5 * res * n as f64;
        let mut g = OccupancyGrid::new(res, Vector2::new(-half - 0.5 * res, -half - 0.5 * res), n, n).unwrap();
        for j in 0..n {
            for i in 0..n {
                g.set(i, j, Cell::Free);
            }
        }
        g
    }

    #[test]
    fn straight_line_in_free_space() {
        let g = free(81, 0.5);
        let p = plan_path(&g, &Vector2::new(0.0, 0.0), &Vector2::new(10.0, 0.0), 0.5).unwrap();
        assert_eq!(p.waypoints().len(), 2);
        assert!((p.length() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn goal_in_obstacle_fails() {
        let mut g = free(81, 0.5);
        let (i, j) = g.cell_of(&Vector2::new(10.0, 0.0)).unwrap();
        g.set(i, j, Cell::Occupied);
        let r = plan_path(&g, &Vector2::new(0.0, 0.0), &Vector2::new(10.2, 0.0), 1.0);
        assert!(matches!(r, Err(Error::PlanningFailed(_))));
    }

    #[test]
    fn corner_cutting_is_forbidden() {
        // diagonal squeeze between two blocked cells
        let mut blocked = vec![false; 9];
        blocked[1] = true;
        blocked[3] = true;
        assert!(astar(&blocked, 3, 3, (0, 0), (2, 2)).is_none());
        blocked[3] = false;
        let (path, cost) = astar(&blocked, 3, 3, (0, 0), (2, 2)).unwrap();
        assert_eq!(path.first(), Some(&(0, 0)));
        assert!((cost - (1.0 + SQRT2 + 1.0)).abs() < 1e-12 || (cost - (2.0 * SQRT2)).abs() < 1e-12);
    }

    #[test]
    fn partial_plan_heads_for_the_goal() {
        let mut g = free(81, 0.5);
        // unknown wall across the grid
        let (wi, _) = g.cell_of(&Vector2::new(15.0, 0.0)).unwrap();
        for j in 0..81 {
            g.set(wi, j, Cell::Unknown);
        }
        let goal = Vector2::new(18.0, 0.0);
        let r = plan_toward(&g, &Vector2::new(0.0, 0.0), &goal, 1.0).unwrap();
        assert!(!r.reaches_goal);
        let end = r.path.end();
        assert!(end.x < 15.0 - 1.0 && end.x > 13.0, "{end}");
        assert!(plan_path(&g, &Vector2::new(0.0, 0.0), &goal, 1.0).is_err());
    }

    #[test]
    fn start_inside_margin_escapes() {
        let mut g = free(81, 0.5);
        let (i, j) = g.cell_of(&Vector2::new(5.0, 0.0)).unwrap();
        g.set(i, j, Cell::Occupied);
        let p = plan_path(&g, &Vector2::new(4.0, 0.0), &Vector2::new(0.0, 0.0), 2.0).unwrap();
        assert_eq!(p.start(), Vector2::new(4.0, 0.0));
        assert_eq!(p.end(), Vector2::new(0.0, 0.0));
    }
}
