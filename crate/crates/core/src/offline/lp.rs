//! Linear programs in `max c'x  s.t.  rows, l <= x <= u` form and a
//! bounded-variable primal simplex solver.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint<T> {
    pub coeffs: Vec<(usize, T)>,
    pub sense: RowSense,
    pub rhs: T,
}

impl<T: Real> Constraint<T> {
    pub fn activity(&self, x: &[T]) -> T {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("malformed LP: {0}")]
    Malformed(String),
    #[error("simplex iteration limit {0} reached")]
    IterationLimit(usize),
}

/// A maximization LP with bounded variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem<T> {
    pub objective: Vec<T>,
    pub constraints: Vec<Constraint<T>>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Real> Default for LpProblem<T> {
    fn default() -> Self {
        Self {
            objective: Vec::new(),
            constraints: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
        }
    }
}

impl<T: Real> LpProblem<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable and returns its index.
    pub fn add_var(&mut self, objective: T, lower: T, upper: T) -> usize {
        self.objective.push(objective);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, T)>, sense: RowSense, rhs: T) {
        self.constraints.push(Constraint { coeffs, sense, rhs });
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.constraints.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Malformed("bound vectors do not match variable count".into()));
        }
        for j in 0..n {
            if !self.objective[j].is_finite() || self.lower[j].is_nan() || self.upper[j].is_nan() {
                return Err(LpError::Malformed(format!("variable {j} has non-finite data")));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() || c.coeffs.iter().any(|&(j, a)| j >= n || !a.is_finite()) {
                return Err(LpError::Malformed(format!("row {i} is not finite or references a missing variable")));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[T]) -> T {
        self.objective.iter().zip(x).map(|(c, v)| *c * *v).sum()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for j in 0..self.n_vars() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        for c in &self.constraints {
            let gap = c.activity(x) - c.rhs;
            let v = match c.sense {
                RowSense::Le => gap,
                RowSense::Ge => -gap,
                RowSense::Eq => gap.abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    /// Largest complementary-slackness product between `x` and the row
    /// duals `y`, including sign violations of `y`.
    pub fn complementary_slackness_residual(&self, x: &[T], y: &[T]) -> T {
        let mut worst = T::zero();
        let mut reduced = self.objective.clone();
        for (c, &yi) in self.constraints.iter().zip(y) {
            for &(j, a) in &c.coeffs {
                reduced[j] = reduced[j] - yi * a;
            }
            let slack = c.rhs - c.activity(x);
            let sign_violation = match c.sense {
                RowSense::Le => (-yi).max(T::zero()),
                RowSense::Ge => yi.max(T::zero()),
                RowSense::Eq => T::zero(),
            };
            worst = worst.max((yi * slack).abs()).max(sign_violation);
        }
        for j in 0..self.n_vars() {
            let d = reduced[j];
            let product = if d > T::zero() {
                d * (self.upper[j] - x[j])
            } else {
                -d * (x[j] - self.lower[j])
            };
            worst = worst.max(product.abs());
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    /// Primal values; meaningful when optimal.
    pub x: Vec<T>,
    pub value: T,
    /// Row duals at the optimum.
    pub duals: Vec<T>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotRule {
    /// Lowest-index improving column, lowest-index leaving row on ties.
    Bland,
    /// Largest reduced cost; falls back to Bland after a run of
    /// degenerate pivots.
    Dantzig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexOptions {
    pub rule: PivotRule,
    pub pivot_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            rule: PivotRule::Bland,
            pivot_tolerance: 1e-9,
            max_iterations: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    Lower,
    Upper,
    /// Nonbasic free variable held at zero.
    Zero,
}

const REFRESH_EVERY: usize = 64;
const DEGENERATE_RUN: usize = 50;

struct Simplex<'a, T> {
    m: usize,
    cols: Vec<Vec<(usize, T)>>,
    rhs: &'a [T],
    lb: Vec<T>,
    ub: Vec<T>,
    cost: Vec<T>,
    x: Vec<T>,
    state: Vec<VarState>,
    head: Vec<usize>,
    binv: Vec<T>,
    y: Vec<T>,
    ptol: T,
    dtol: T,
    rule: PivotRule,
    iterations: usize,
    max_iterations: usize,
    degenerate_run: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Moved,
}

impl<T: Real> Simplex<'_, T> {
    fn price(&self, j: usize) -> T {
        self.cols[j].iter().fold(self.cost[j], |acc, &(i, a)| acc - self.y[i] * a)
    }

    fn refresh(&mut self) {
        let m = self.m;
        let mut r: Vec<T> = self.rhs.to_vec();
        for (j, col) in self.cols.iter().enumerate() {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let v = self.x[j];
            if v != T::zero() {
                for &(i, a) in col {
                    r[i] = r[i] - a * v;
                }
            }
        }
        for p in 0..m {
            let row = &self.binv[p * m..(p + 1) * m];
            self.x[self.head[p]] = row.iter().zip(&r).map(|(b, v)| *b * *v).sum();
        }
        for k in 0..m {
            self.y[k] = T::zero();
        }
        for p in 0..m {
            let cb = self.cost[self.head[p]];
            if cb != T::zero() {
                let row = &self.binv[p * m..(p + 1) * m];
                for k in 0..m {
                    self.y[k] = self.y[k] + cb * row[k];
                }
            }
        }
    }

    fn choose_entering(&self) -> Option<(usize, T)> {
        let use_bland = self.rule == PivotRule::Bland || self.degenerate_run >= DEGENERATE_RUN;
        let mut best: Option<(usize, T)> = None;
        for j in 0..self.cols.len() {
            let (up, down) = match self.state[j] {
                VarState::Basic(_) => continue,
                _ if self.lb[j] == self.ub[j] => continue,
                VarState::Lower => (true, false),
                VarState::Upper => (false, true),
                VarState::Zero => (true, true),
            };
            let d = self.price(j);
            if (up && d > self.dtol) || (down && d < -self.dtol) {
                if use_bland {
                    return Some((j, d));
                }
                if best.map_or(true, |(_, bd)| d.abs() > bd.abs()) {
                    best = Some((j, d));
                }
            }
        }
        best
    }

    fn iterate(&mut self) -> Result<Step, LpError> {
        if self.iterations >= self.max_iterations {
            return Err(LpError::IterationLimit(self.max_iterations));
        }
        if self.iterations % REFRESH_EVERY == 0 {
            self.refresh();
        }
        let Some((q, dq)) = self.choose_entering() else {
            return Ok(Step::Optimal);
        };
        self.iterations += 1;
        let m = self.m;
        let mut alpha = vec![T::zero(); m];
        for &(k, a) in &self.cols[q] {
            for p in 0..m {
                let b = self.binv[p * m + k];
                if b != T::zero() {
                    alpha[p] = alpha[p] + b * a;
                }
            }
        }
        let dir = if dq > T::zero() { T::one() } else { -T::one() };
        let use_bland = self.rule == PivotRule::Bland || self.degenerate_run >= DEGENERATE_RUN;

        let mut step = self.ub[q] - self.lb[q];
        let mut leave: Option<usize> = None;
        for p in 0..m {
            let rate = -dir * alpha[p];
            let b = self.head[p];
            let limit = if rate < -self.ptol && self.lb[b].is_finite() {
                (self.x[b] - self.lb[b]) / -rate
            } else if rate > self.ptol && self.ub[b].is_finite() {
                (self.ub[b] - self.x[b]) / rate
            } else {
                continue;
            };
            let limit = limit.max(T::zero());
            let better = match leave {
                _ if limit < step => true,
                Some(l) if limit == step => {
                    if use_bland {
                        b < self.head[l]
                    } else {
                        alpha[p].abs() > alpha[l].abs()
                    }
                }
                _ => false,
            };
            if better {
                step = limit;
                leave = Some(p);
            }
        }
        if step.is_infinite() {
            return Ok(Step::Unbounded);
        }
        if step <= T::zero() {
            self.degenerate_run += 1;
        } else {
            self.degenerate_run = 0;
        }

        self.x[q] = self.x[q] + dir * step;
        for p in 0..m {
            if alpha[p] != T::zero() {
                let b = self.head[p];
                self.x[b] = self.x[b] - dir * alpha[p] * step;
            }
        }

        match leave {
            None => {
                self.state[q] = if dir > T::zero() { VarState::Upper } else { VarState::Lower };
                self.x[q] = if dir > T::zero() { self.ub[q] } else { self.lb[q] };
            }
            Some(r) => {
                let out = self.head[r];
                let rate = -dir * alpha[r];
                if rate < T::zero() {
                    self.state[out] = VarState::Lower;
                    self.x[out] = self.lb[out];
                } else {
                    self.state[out] = VarState::Upper;
                    self.x[out] = self.ub[out];
                }
                let pivot = alpha[r];
                let ratio = dq / pivot;
                for k in 0..m {
                    let v = self.binv[r * m + k] / pivot;
                    self.binv[r * m + k] = v;
                }
                for k in 0..m {
                    self.y[k] = self.y[k] + ratio * self.binv[r * m + k] * pivot;
                }
                let (before, rest) = self.binv.split_at_mut(r * m);
                let (pivot_row, after) = rest.split_at_mut(m);
                for (p, &a) in alpha.iter().enumerate() {
                    if p == r || a == T::zero() {
                        continue;
                    }
                    let row = if p < r {
                        &mut before[p * m..(p + 1) * m]
                    } else {
                        let o = (p - r - 1) * m;
                        &mut after[o..o + m]
                    };
                    for (dst, src) in row.iter_mut().zip(pivot_row.iter()) {
                        if *src != T::zero() {
                            *dst = *dst - a * *src;
                        }
                    }
                }
                self.head[r] = q;
                self.state[q] = VarState::Basic(r);
            }
        }
        Ok(Step::Moved)
    }

    fn run(&mut self) -> Result<bool, LpError> {
        self.refresh();
        self.degenerate_run = 0;
        loop {
            match self.iterate()? {
                Step::Moved => {}
                Step::Optimal => {
                    self.refresh();
                    // Drift can leave a slightly positive reduced cost after
                    // the refresh; one more pass settles it.
                    if self.choose_entering().is_none() {
                        return Ok(true);
                    }
                }
                Step::Unbounded => return Ok(false),
            }
        }
    }
}

/// Solves `problem` with the bounded-variable primal simplex.
///
/// Rows become equalities with bounded slacks; rows the all-slack start
/// violates get an artificial column and a first phase minimizes their sum.
pub fn simplex_solve<T: Real>(problem: &LpProblem<T>, options: &SimplexOptions) -> Result<LpSolution<T>, LpError> {
    problem.validate()?;
    let n = problem.n_vars();
    let m = problem.n_rows();
    let ftol = T::of(T::FEAS_TOL);

    let mut cols: Vec<Vec<(usize, T)>> = vec![Vec::new(); n + m];
    let mut rhs = Vec::with_capacity(m);
    let mut lb = problem.lower.clone();
    let mut ub = problem.upper.clone();
    for (i, c) in problem.constraints.iter().enumerate() {
        for &(j, a) in &c.coeffs {
            if a != T::zero() {
                cols[j].push((i, a));
            }
        }
        cols[n + i].push((i, T::one()));
        rhs.push(c.rhs);
        let (l, u) = match c.sense {
            RowSense::Le => (T::zero(), T::infinity()),
            RowSense::Ge => (T::neg_infinity(), T::zero()),
            RowSense::Eq => (T::zero(), T::zero()),
        };
        lb.push(l);
        ub.push(u);
    }
    for j in 0..n {
        if lb[j] > ub[j] + ftol {
            return Ok(infeasible(n, m));
        }
    }

    let mut x = vec![T::zero(); n + m];
    let mut state = vec![VarState::Lower; n + m];
    for j in 0..n {
        (x[j], state[j]) = if lb[j].is_finite() {
            (lb[j], VarState::Lower)
        } else if ub[j].is_finite() {
            (ub[j], VarState::Upper)
        } else {
            (T::zero(), VarState::Zero)
        };
    }
    let mut residual = rhs.clone();
    for j in 0..n {
        for &(i, a) in &cols[j] {
            residual[i] = residual[i] - a * x[j];
        }
    }

    let mut head = vec![0; m];
    let mut binv = vec![T::zero(); m * m];
    let mut artificials = Vec::new();
    for i in 0..m {
        let s = n + i;
        let r = residual[i];
        if r >= lb[s] - ftol && r <= ub[s] + ftol {
            head[i] = s;
            state[s] = VarState::Basic(i);
            binv[i * m + i] = T::one();
        } else {
            let (at, st) = if r < lb[s] { (lb[s], VarState::Lower) } else { (ub[s], VarState::Upper) };
            x[s] = at;
            state[s] = st;
            let sign = if r - at > T::zero() { T::one() } else { -T::one() };
            let a = cols.len();
            cols.push(vec![(i, sign)]);
            lb.push(T::zero());
            ub.push(T::infinity());
            x.push((r - at).abs());
            state.push(VarState::Basic(i));
            head[i] = a;
            binv[i * m + i] = sign;
            artificials.push(a);
        }
    }

    let total = cols.len();
    let mut sx = Simplex {
        m,
        cols,
        rhs: &rhs,
        lb,
        ub,
        cost: vec![T::zero(); total],
        x,
        state,
        head,
        binv,
        y: vec![T::zero(); m],
        ptol: T::of(options.pivot_tolerance),
        dtol: T::of(T::FEAS_TOL),
        rule: options.rule,
        iterations: 0,
        max_iterations: options.max_iterations,
        degenerate_run: 0,
    };

    if !artificials.is_empty() {
        for &a in &artificials {
            sx.cost[a] = -T::one();
        }
        sx.run()?;
        let scale = rhs.iter().fold(T::one(), |acc, b| acc.max(b.abs()));
        let infeasibility: T = artificials.iter().map(|&a| sx.x[a]).sum();
        if infeasibility > ftol * scale {
            return Ok(LpSolution {
                iterations: sx.iterations,
                ..infeasible(n, m)
            });
        }
        for &a in &artificials {
            sx.cost[a] = T::zero();
            sx.ub[a] = T::zero();
            if !matches!(sx.state[a], VarState::Basic(_)) {
                sx.state[a] = VarState::Lower;
                sx.x[a] = T::zero();
            }
        }
    }
    sx.cost[..n].copy_from_slice(&problem.objective);
    if !sx.run()? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: sx.x[..n].to_vec(),
            value: T::infinity(),
            duals: vec![T::zero(); m],
            iterations: sx.iterations,
        });
    }
    let x = sx.x[..n].to_vec();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        value: problem.objective_value(&x),
        x,
        duals: sx.y.clone(),
        iterations: sx.iterations,
    })
}

fn infeasible<T: Real>(n: usize, m: usize) -> LpSolution<T> {
    LpSolution {
        status: LpStatus::Infeasible,
        x: vec![T::nan(); n],
        value: T::neg_infinity(),
        duals: vec![T::zero(); m],
        iterations: 0,
    }
}
