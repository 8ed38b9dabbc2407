//! Small dense semidefinite programs in LMI form.
//!
//! Decision variables are a flat vector `x`. Each constraint block is an
//! affine symmetric matrix expression `F0 + sum_i x_i F_i` that must be
//! positive or negative semidefinite. The solver is a log-det barrier method:
//! a Phase-1 problem (`min s` s.t. `F(x) + s I > 0`) finds a strictly feasible
//! start, then the barrier parameter is increased until the duality-gap
//! estimate `sum(block dims) / t` falls under the requested relative gap.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{sym_eig, SymMatrix};
use crate::error::{invalid, Error, Result};

/// Post-hoc eigenvalue slack allowed on every block.
pub const FEASIBILITY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockSense {
    /// `F(x) >= 0`
    Psd,
    /// `F(x) <= 0`
    Nsd,
}

#[derive(Debug, Clone)]
pub struct LmiBlock {
    pub sense: BlockSense,
    pub constant: DMatrix<f64>,
    /// Sparse list of `(variable index, coefficient matrix)`.
    pub terms: Vec<(usize, DMatrix<f64>)>,
}

impl LmiBlock {
    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    pub fn evaluate(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut m = self.constant.clone();
        for (i, f) in &self.terms {
            let xi = x[*i];
            m.zip_apply(f, |a, b| *a += xi * b);
        }
        m
    }

    /// `F(x)` flipped so that feasibility means positive semidefinite.
    fn oriented(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match self.sense {
            BlockSense::Psd => self.evaluate(x),
            BlockSense::Nsd => -self.evaluate(x),
        }
    }

    fn sign(&self) -> f64 {
        match self.sense {
            BlockSense::Psd => 1.0,
            BlockSense::Nsd => -1.0,
        }
    }
}

/// Linear objective `c^T x` to minimize subject to LMI blocks.
#[derive(Debug, Clone)]
pub struct LmiProblem {
    objective: DVector<f64>,
    blocks: Vec<LmiBlock>,
}

impl LmiProblem {
    pub fn new(objective: Vec<f64>) -> Self {
        Self { objective: DVector::from_vec(objective), blocks: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn blocks(&self) -> &[LmiBlock] {
        &self.blocks
    }

    pub fn objective(&self) -> &DVector<f64> {
        &self.objective
    }

    /// Adds a block after checking it is a well-formed affine symmetric
    /// expression in the problem's variables.
    pub fn add_block(
        &mut self,
        sense: BlockSense,
        constant: DMatrix<f64>,
        terms: Vec<(usize, DMatrix<f64>)>,
    ) -> Result<()> {
        let d = constant.nrows();
        if !constant.is_square() || d == 0 {
            return Err(invalid("LMI block constant must be square and non-empty"));
        }
        let symmetric = |m: &DMatrix<f64>| (m - m.transpose()).amax() <= 1e-12 * (1.0 + m.amax());
        if !symmetric(&constant) {
            return Err(invalid("LMI block constant is not symmetric"));
        }
        for (i, f) in &terms {
            if *i >= self.num_vars() {
                return Err(invalid(format!("LMI term references unknown variable {i}")));
            }
            if f.shape() != (d, d) {
                return Err(invalid("LMI coefficient shape does not match its block"));
            }
            if !symmetric(f) {
                return Err(invalid(format!("LMI coefficient of variable {i} is not symmetric")));
            }
        }
        self.blocks.push(LmiBlock { sense, constant, terms });
        Ok(())
    }

    pub fn objective_value(&self, x: &DVector<f64>) -> f64 {
        self.objective.dot(x)
    }

    /// Largest amount by which any block misses its sign constraint
    /// (0 when every block holds).
    pub fn max_violation(&self, x: &DVector<f64>) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for b in &self.blocks {
            let m = SymMatrix::symmetrized(b.oriented(x));
            worst = worst.max(-sym_eig(&m)?.values[0]);
        }
        Ok(worst)
    }
}

/// Index bookkeeping for a symmetric matrix decision variable stored as its
/// upper triangle inside the flat variable vector.
#[derive(Debug, Clone, Copy)]
pub struct SymVarLayout {
    pub offset: usize,
    pub dim: usize,
}

impl SymVarLayout {
    pub fn len(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }

    pub fn is_empty(&self) -> bool {
        self.dim == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // row-major upper triangle
        self.offset + i * self.dim - i * (i + 1) / 2 + j
    }

    /// `(variable index, E_ij)` for every free entry.
    pub fn basis(&self) -> Vec<(usize, DMatrix<f64>)> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.dim {
            for j in i..self.dim {
                let mut e = DMatrix::zeros(self.dim, self.dim);
                e[(i, j)] = 1.0;
                e[(j, i)] = 1.0;
                out.push((self.index(i, j), e));
            }
        }
        out
    }

    pub fn extract(&self, x: &DVector<f64>) -> SymMatrix {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in i..self.dim {
                let v = x[self.index(i, j)];
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix::symmetrized(m)
    }

    pub fn write(&self, m: &SymMatrix, x: &mut DVector<f64>) {
        for i in 0..self.dim {
            for j in i..self.dim {
                x[self.index(i, j)] = m[(i, j)];
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LmiOptions {
    pub relative_gap: f64,
    pub absolute_gap: f64,
    pub barrier_growth: f64,
    pub max_newton_steps: usize,
    /// Every variable is confined to `[-bound, bound]` so the barrier has a
    /// minimizer even when the feasible set is unbounded. A solution that
    /// lands near this box is reported as a numerical failure.
    pub variable_bound: f64,
}

impl Default for LmiOptions {
    fn default() -> Self {
        Self {
            relative_gap: 1e-9,
            absolute_gap: 1e-12,
            barrier_growth: 60.0,
            max_newton_steps: 4000,
            variable_bound: 1e6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmiSolution {
    pub objective: f64,
    pub x: DVector<f64>,
    pub newton_steps: usize,
}

pub fn solve_lmi(p: &LmiProblem) -> Result<LmiSolution> {
    solve_lmi_with(p, &LmiOptions::default(), None)
}

/// Barrier solve with explicit options and an optional (not necessarily
/// feasible) starting point.
pub fn solve_lmi_with(
    p: &LmiProblem,
    opts: &LmiOptions,
    start: Option<&DVector<f64>>,
) -> Result<LmiSolution> {
    if p.blocks.is_empty() {
        return Err(invalid("LMI problem has no constraint blocks"));
    }
    let n = p.num_vars();
    let x0 = match start {
        Some(s) if s.len() == n => s.clone(),
        Some(_) => return Err(invalid("LMI start point has the wrong length")),
        None => DVector::zeros(n),
    };
    let bound = opts.variable_bound;
    if !(bound > 0.0) || x0.amax() >= bound {
        return Err(invalid("LMI variable bound must be positive and contain the start point"));
    }
    let mut budget = opts.max_newton_steps;
    let x_feas = if strictly_feasible(&p.blocks, &x0) {
        x0
    } else {
        phase_one(p, &x0, bound, &mut budget)?
    };

    let barrier = Barrier::new(&p.blocks, p.objective.clone(), bound, n);
    let total_dim: usize = p.blocks.iter().map(LmiBlock::dim).sum::<usize>() + 2 * n;
    let mut x = x_feas;
    let mut t = 1.0;
    loop {
        x = barrier.center(x, t, &mut budget, |_| false)?;
        let gap = total_dim as f64 / t;
        let obj = p.objective_value(&x);
        if gap <= opts.relative_gap * obj.abs() + opts.absolute_gap {
            break;
        }
        t *= opts.barrier_growth;
    }
    if x.amax() > 0.99 * bound {
        return Err(Error::NumericalFailure(format!(
            "LMI solution reached the variable bound {bound:e}; the problem may be unbounded"
        )));
    }
    let violation = p.max_violation(&x)?;
    if violation > FEASIBILITY_TOL {
        return Err(Error::NumericalFailure(format!(
            "barrier solution violates a block by {violation:e}"
        )));
    }
    Ok(LmiSolution {
        objective: p.objective_value(&x),
        x,
        newton_steps: opts.max_newton_steps - budget,
    })
}

fn strictly_feasible(blocks: &[LmiBlock], x: &DVector<f64>) -> bool {
    blocks.iter().all(|b| b.oriented(x).cholesky().is_some())
}

/// Minimizes `s` subject to `F_k(x) + s I > 0` and `s > -1`, stopping as soon
/// as `s < 0`.
fn phase_one(p: &LmiProblem, x0: &DVector<f64>, bound: f64, budget: &mut usize) -> Result<DVector<f64>> {
    let n = p.num_vars();
    let s_idx = n;
    let mut blocks = Vec::with_capacity(p.blocks.len() + 1);
    let mut worst: f64 = 0.0;
    for b in &p.blocks {
        let d = b.dim();
        let mut terms = b.terms.clone();
        // oriented(F) + s I  <=>  F + sign * s I
        terms.push((s_idx, DMatrix::identity(d, d) * b.sign()));
        blocks.push(LmiBlock { sense: b.sense, constant: b.constant.clone(), terms });
        let m = SymMatrix::symmetrized(b.oriented(x0));
        worst = worst.max(-sym_eig(&m)?.values[0]);
    }
    blocks.push(LmiBlock {
        sense: BlockSense::Psd,
        constant: DMatrix::from_element(1, 1, 1.0),
        terms: vec![(s_idx, DMatrix::from_element(1, 1, 1.0))],
    });
    let mut c = DVector::zeros(n + 1);
    c[s_idx] = 1.0;
    let mut x = x0.clone().resize_vertically(n + 1, 0.0);
    x[s_idx] = worst + 1.0;

    let barrier = Barrier::new(&blocks, c, bound, n);
    let total_dim: usize = blocks.iter().map(LmiBlock::dim).sum::<usize>() + 2 * n;
    let done = |x: &DVector<f64>| x[s_idx] < 0.0;
    let mut t = 1.0;
    loop {
        x = barrier.center(x, t, budget, done)?;
        if done(&x) {
            let candidate = x.rows(0, n).into_owned();
            if strictly_feasible(&p.blocks, &candidate) {
                return Ok(candidate);
            }
        }
        let gap = total_dim as f64 / t;
        if x[s_idx] - gap > 0.0 || (gap < 1e-10 && x[s_idx] >= 0.0) {
            return Err(Error::Infeasible(format!(
                "phase 1 optimum s = {:e} is not negative",
                x[s_idx]
            )));
        }
        t *= 10.0;
    }
}

/// Oriented coefficients of one block, one `vec(F_i)` per column.
struct TermStack {
    vars: Vec<usize>,
    coeffs: DMatrix<f64>,
}

impl TermStack {
    fn new(b: &LmiBlock) -> Self {
        let d = b.dim();
        let mut coeffs = DMatrix::zeros(d * d, b.terms.len());
        for (col, (_, f)) in b.terms.iter().enumerate() {
            for (k, v) in f.iter().enumerate() {
                coeffs[(k, col)] = v * b.sign();
            }
        }
        Self { vars: b.terms.iter().map(|(i, _)| *i).collect(), coeffs }
    }
}

struct Barrier<'a> {
    blocks: &'a [LmiBlock],
    stacks: Vec<TermStack>,
    c: DVector<f64>,
    /// The first `boxed` variables carry `-log(bound - x_i) - log(bound + x_i)`.
    bound: f64,
    boxed: usize,
}

impl<'a> Barrier<'a> {
    fn new(blocks: &'a [LmiBlock], c: DVector<f64>, bound: f64, boxed: usize) -> Self {
        Self { blocks, stacks: blocks.iter().map(TermStack::new).collect(), c, bound, boxed }
    }

    /// `t c^T x - sum log det F_k(x)`, or `None` outside the interior.
    fn value(&self, x: &DVector<f64>, t: f64) -> Option<f64> {
        let mut v = t * self.c.dot(x);
        for i in 0..self.boxed {
            let (lo, hi) = (self.bound + x[i], self.bound - x[i]);
            if !(lo > 0.0 && hi > 0.0) {
                return None;
            }
            v -= lo.ln() + hi.ln();
        }
        for b in self.blocks {
            let chol = b.oriented(x).cholesky()?;
            v -= 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        }
        Some(v)
    }

    /// Damped Newton centering. `stop` allows early exit (Phase 1).
    fn center(
        &self,
        mut x: DVector<f64>,
        t: f64,
        budget: &mut usize,
        stop: impl Fn(&DVector<f64>) -> bool,
    ) -> Result<DVector<f64>> {
        let n = x.len();
        let mut fx = self
            .value(&x, t)
            .ok_or_else(|| Error::NumericalFailure("barrier started outside the interior".into()))?;
        loop {
            if *budget == 0 {
                return Err(Error::NumericalFailure("LMI solver hit its Newton step cap".into()));
            }
            *budget -= 1;

            let mut grad = &self.c * t;
            let mut hess = DMatrix::<f64>::zeros(n, n);
            for i in 0..self.boxed {
                let (lo, hi) = (1.0 / (self.bound + x[i]), 1.0 / (self.bound - x[i]));
                grad[i] += hi - lo;
                hess[(i, i)] += lo * lo + hi * hi;
            }
            for (b, stack) in self.blocks.iter().zip(&self.stacks) {
                let chol: Cholesky<f64, Dyn> = b
                    .oriented(&x)
                    .cholesky()
                    .ok_or_else(|| Error::NumericalFailure("lost strict feasibility".into()))?;
                let d = b.dim();
                let w = chol
                    .l_dirty()
                    .lower_triangle()
                    .solve_lower_triangular(&DMatrix::identity(d, d))
                    .expect("cholesky factor is non-singular");
                // column i is vec(L^-1 F_i L^-T)
                let g = w.kronecker(&w) * &stack.coeffs;
                let h = g.tr_mul(&g);
                for (a, &i) in stack.vars.iter().enumerate() {
                    grad[i] -= (0..d).map(|k| g[(k * d + k, a)]).sum::<f64>();
                    for (c, &j) in stack.vars.iter().enumerate() {
                        hess[(i, j)] += h[(a, c)];
                    }
                }
            }
            let step = newton_step(&hess, &grad)?;
            let decrement = -grad.dot(&step);
            if !(decrement.is_finite()) {
                return Err(Error::NumericalFailure("non-finite Newton decrement".into()));
            }
            if decrement <= 1e-10 {
                return Ok(x);
            }
            let mut s = 1.0;
            let mut accepted = false;
            while s > 1e-14 {
                let cand = &x + &step * s;
                if cand == x {
                    break;
                }
                if let Some(fc) = self.value(&cand, t) {
                    if fc <= fx - 0.25 * s * decrement {
                        x = cand;
                        fx = fc;
                        accepted = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            if !accepted || stop(&x) {
                return Ok(x);
            }
        }
    }
}

fn newton_step(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = hess.clone().cholesky() {
        return Ok(-ch.solve(grad));
    }
    let reg = 1e-12 * hess.diagonal().amax().max(1.0);
    let mut h = hess.clone();
    for i in 0..h.nrows() {
        h[(i, i)] += reg;
    }
    h.cholesky()
        .map(|ch| -ch.solve(grad))
        .ok_or_else(|| Error::NumericalFailure("barrier Hessian is singular".into()))
}
