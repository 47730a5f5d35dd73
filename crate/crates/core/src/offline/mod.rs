//! Non-causal optimization over one realization: the MILP relaxation, a
//! bounded-variable simplex, LP-based branch and bound, and two exact
//! references (exhaustive enumeration and a battery-level DP).

mod bab;
mod dp;
mod exhaustive;
mod instance;
mod lp;
mod milp;

use thiserror::Error;

pub use bab::{bab_solve, bab_solve_with_root, BabConfig, BabNode, InitialIncumbent, MilpSolution, NodeSelection};
pub use dp::battery_dp_solve;
pub use exhaustive::{exhaustive_solve, EXHAUSTIVE_MAX_SLOTS};
pub use instance::OfflineInstance;
pub use lp::{
    simplex_solve, Constraint, LpError, LpProblem, LpSolution, LpStatus, PivotRule, RowSense, SimplexOptions,
};
pub use milp::{b_var, build_milp, first_fractional, lp_relaxation_bound, x_var, Relaxation, INTEGRALITY_TOL};

#[derive(Debug, Error, PartialEq)]
pub enum OfflineError {
    #[error("invalid offline instance: {0}")]
    InvalidInstance(String),
    #[error("root relaxation has no feasible solution")]
    NoFeasibleSolution,
    #[error("{n_slots} slots exceed the exhaustive-search limit of {limit}")]
    TooLarge { n_slots: usize, limit: usize },
    #[error(transparent)]
    Lp(#[from] LpError),
}
