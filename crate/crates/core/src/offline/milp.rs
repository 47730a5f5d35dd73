use serde::{Deserialize, Serialize};

use super::lp::{simplex_solve, LpProblem, LpSolution, LpStatus, RowSense, SimplexOptions};
use super::{OfflineError, OfflineInstance};
use crate::Real;

/// Distance from {0, 1} below which a relaxed transmit variable counts as
/// integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

/// Column of `x_n` in [`build_milp`]'s problem.
pub fn x_var(n: usize) -> usize {
    n
}

/// Column of `B_n` in [`build_milp`]'s problem.
pub fn b_var(inst: &OfflineInstance, n: usize) -> usize {
    inst.n_slots() + n
}

/// Relaxation of the offline problem: maximize `Σ γ^n D_n x_n` over
/// `x_n ∈ [0, 1]`, `B_n ∈ [0, B_max]`, `B_0 = b0`, subject to
/// `E^T_n x_n ≤ B_n` for every slot and
/// `B_{n+1} ≤ B_n − E^T_n x_n + E^H_n` between consecutive slots.
///
/// Rows are ordered battery rows first, then recursion rows.
pub fn build_milp<T: Real>(inst: &OfflineInstance) -> LpProblem<T> {
    let n = inst.n_slots();
    let mut p = LpProblem::new();
    for k in 0..n {
        p.add_var(T::of(inst.weight(k)), T::zero(), T::one());
    }
    let b_max = T::of(inst.b_max as f64);
    for k in 0..n {
        if k == 0 {
            let b0 = T::of(inst.b0 as f64);
            p.add_var(T::zero(), b0, b0);
        } else {
            p.add_var(T::zero(), T::zero(), b_max);
        }
    }
    for k in 0..n {
        let c = T::of(inst.costs[k] as f64);
        p.add_constraint(vec![(x_var(k), c), (b_var(inst, k), -T::one())], RowSense::Le, T::zero());
    }
    for k in 0..n.saturating_sub(1) {
        let c = T::of(inst.costs[k] as f64);
        p.add_constraint(
            vec![(b_var(inst, k + 1), T::one()), (b_var(inst, k), -T::one()), (x_var(k), c)],
            RowSense::Le,
            T::of(inst.harvests[k] as f64),
        );
    }
    p
}

/// Optimal relaxation of an offline instance, split into transmit and
/// battery parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relaxation<T> {
    pub status: LpStatus,
    pub x: Vec<T>,
    pub b: Vec<T>,
    pub value: T,
    /// Every `x_n` lies within [`INTEGRALITY_TOL`] of 0 or 1.
    pub integral: bool,
    pub iterations: usize,
}

impl<T: Real> Relaxation<T> {
    pub(crate) fn from_solution(inst: &OfflineInstance, sol: LpSolution<T>) -> Self {
        let n = inst.n_slots();
        let integral = sol.status == LpStatus::Optimal && first_fractional(&sol.x[..n]).is_none();
        let (x, b) = if sol.status == LpStatus::Optimal {
            (sol.x[..n].to_vec(), sol.x[n..].to_vec())
        } else {
            (Vec::new(), Vec::new())
        };
        Self {
            status: sol.status,
            x,
            b,
            value: sol.value,
            integral,
            iterations: sol.iterations,
        }
    }

    /// The relaxed transmit vector rounded to 0/1.
    pub fn rounded(&self) -> Vec<u8> {
        self.x.iter().map(|v| u8::from(*v > T::of(0.5))).collect()
    }
}

/// Index of the first `x_n` that is not within [`INTEGRALITY_TOL`] of 0 or 1.
pub fn first_fractional<T: Real>(x: &[T]) -> Option<usize> {
    let tol = T::of(INTEGRALITY_TOL);
    x.iter().position(|&v| v > tol && v < T::one() - tol)
}

/// Upper bound on the offline optimum from the LP relaxation.
pub fn lp_relaxation_bound<T: Real>(inst: &OfflineInstance) -> Result<Relaxation<T>, OfflineError> {
    inst.validate()?;
    let p = build_milp::<T>(inst);
    let opts = SimplexOptions {
        pivot_tolerance: T::PIVOT_TOL,
        ..SimplexOptions::default()
    };
    let sol = simplex_solve(&p, &opts)?;
    Ok(Relaxation::from_solution(inst, sol))
}
