//! Transmission scheduling for an energy-harvesting transmitter with a
//! finite battery, Markov data/energy arrivals and a Markov fading channel.
//!
//! The crate models the transmitter as a finite MDP ([`mdp`]) and solves it
//! four ways: exact dynamic programming with known statistics ([`dp`]),
//! model-free learning ([`rl`]), non-causal mixed-integer optimization on a
//! sampled realization ([`offline`]) and a greedy baseline. [`sim`] provides
//! seeded realizations, rollouts and confidence intervals, and
//! [`experiment`] orchestrates method comparisons into CSV tables.
//!
//! Solvers are generic over the [`Real`] scalar; the aliases below fix it
//! to `f64`.

pub mod dp;
pub mod experiment;
pub mod mdp;
pub mod offline;
pub mod rl;
mod scalar;
pub mod sim;

pub use mdp::{Action, FiniteMdp, Policy, Scenario, StateSpace, SystemState, TransmitterMdp};
pub use scalar::Real;

pub type ValueTable = dp::ValueTable<f64>;
pub type QTable = dp::QTable<f64>;
pub type LpProblem = offline::LpProblem<f64>;
pub type LpSolution = offline::LpSolution<f64>;
pub type ValueTable32 = dp::ValueTable<f32>;
pub type QTable32 = dp::QTable<f32>;
