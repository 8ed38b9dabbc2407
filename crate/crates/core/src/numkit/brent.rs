use crate::error::{invalid, Error, Result};

/// Number of equally spaced samples taken before Brent refinement.
pub const PRESCAN_POINTS: usize = 64;

const GOLDEN: f64 = 0.381_966_011_250_105_1;
const MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarBracket {
    lo: f64,
    hi: f64,
    tol: f64,
}

impl ScalarBracket {
    pub fn new(lo: f64, hi: f64, tol: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid(format!("bracket needs lo < hi, got ({lo}, {hi})")));
        }
        if !(tol > 0.0) {
            return Err(invalid("bracket tolerance must be positive"));
        }
        Ok(Self { lo, hi, tol })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn grid(&self, points: usize) -> impl Iterator<Item = f64> + '_ {
        let step = (self.hi - self.lo) / (points - 1) as f64;
        (0..points).map(move |k| if k + 1 == points { self.hi } else { self.lo + step * k as f64 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMinimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Global-ish minimization on a closed bracket: a coarse scan picks the best
/// sample, then Brent's method polishes inside its two neighbouring cells.
///
/// `f` may return `+inf` (or NaN) to mark infeasible points.
pub fn minimize_scalar<F: FnMut(f64) -> f64>(f: F, bracket: ScalarBracket) -> Result<ScalarMinimum> {
    minimize_scalar_with(f, bracket, PRESCAN_POINTS)
}

/// [`minimize_scalar`] with a custom number of scan samples (at least 3).
pub fn minimize_scalar_with<F: FnMut(f64) -> f64>(
    mut f: F,
    bracket: ScalarBracket,
    points: usize,
) -> Result<ScalarMinimum> {
    if points < 3 {
        return Err(invalid("scan needs at least three points"));
    }
    let mut evals = 0;
    let mut eval = |x: f64| {
        evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let grid: Vec<f64> = bracket.grid(points).collect();
    let values: Vec<f64> = grid.iter().map(|&x| eval(x)).collect();
    let (best, &best_val) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("prescan is non-empty");
    if !best_val.is_finite() {
        return Err(Error::NoFeasiblePoint);
    }
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(points - 1)];
    let (x, fx) = brent(&mut eval, a, b, grid[best], best_val, bracket.tol);
    let (x, value) = if fx <= best_val { (x, fx) } else { (grid[best], best_val) };
    drop(eval);
    Ok(ScalarMinimum { x: x.clamp(bracket.lo, bracket.hi), value, evaluations: evals })
}

fn brent(f: &mut impl FnMut(f64) -> f64, mut a: f64, mut b: f64, x0: f64, f0: f64, tol: f64) -> (f64, f64) {
    let (mut x, mut w, mut v) = (x0, x0, x0);
    let (mut fx, mut fw, mut fv) = (f0, f0, f0);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..MAX_ITER {
        let xm = 0.5 * (a + b);
        let tol1 = tol + 1e-12 * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 && fx.is_finite() && fw.is_finite() && fv.is_finite() {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            if !(p.abs() >= (0.5 * q * etemp).abs() || p <= q * (a - x) || p >= q * (b - x)) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx)
}
