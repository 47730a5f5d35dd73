//! Model-free learners: Q-learning for the discounted problem and
//! R-learning for the average-reward problem, both with epsilon-greedy
//! exploration restricted to feasible actions.

mod env;
mod qlearn;
mod rlearn;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dp::QTable;
use crate::mdp::{Action, Policy};
use crate::Real;

pub use env::{Environment, SimulatedTransmitter, StepOutcome, TabularEnv};
pub use qlearn::{q_learning, q_learning_run, QLearner, QLearningOutcome};
pub use rlearn::{r_learning, r_learning_run, RLearner, RLearningOutcome};

#[derive(Debug, Error, PartialEq)]
pub enum LearningError {
    #[error("invalid learning config: {0}")]
    InvalidConfig(String),
}

/// Step size schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearningRate {
    Constant(f64),
    /// `1 / (1 + k)` on the k-th visit of a state-action pair (k >= 1).
    RobbinsMonro,
}

impl LearningRate {
    #[inline]
    pub fn at(&self, visits: u64) -> f64 {
        match *self {
            LearningRate::Constant(a) => a,
            LearningRate::RobbinsMonro => 1.0 / (1.0 + visits as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningConfig {
    pub epsilon: f64,
    pub alpha: LearningRate,
    pub learning_slots: u64,
    /// Seeds the exploration RNG; the environment has its own seed.
    pub seed: u64,
    /// Step size of the R-learning average-reward estimate.
    pub beta: f64,
    /// Slot counts after which the greedy policy is recorded.
    #[serde(default)]
    pub snapshots: Vec<u64>,
    /// Battery level the learning environment starts from.
    #[serde(default)]
    pub initial_battery: u32,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.07,
            alpha: LearningRate::Constant(0.5),
            learning_slots: 10_000,
            seed: 0,
            beta: 0.1,
            snapshots: Vec::new(),
            initial_battery: 0,
        }
    }
}

impl LearningConfig {
    pub fn validate(&self) -> Result<(), LearningError> {
        let bad = |m: String| Err(LearningError::InvalidConfig(m));
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad(format!("epsilon {} outside (0, 1]", self.epsilon));
        }
        if let LearningRate::Constant(a) = self.alpha {
            if !(a > 0.0 && a <= 1.0) {
                return bad(format!("alpha {a} outside (0, 1]"));
            }
        }
        if self.learning_slots < 1 {
            return bad("learning_slots must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta {} outside [0, 1]", self.beta));
        }
        Ok(())
    }
}

/// Greedy policy recorded during learning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub slot: u64,
    pub policy: Policy,
    /// Average-reward estimate, R-learning only.
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub action: Action,
    /// True when the action came from the exploration branch.
    pub explored: bool,
}

/// Epsilon-greedy choice over the feasible actions of `s`.
pub fn epsilon_greedy_select<T: Real, R: Rng + ?Sized>(
    q: &QTable<T>,
    s: usize,
    feasible: &[Action],
    epsilon: f64,
    rng: &mut R,
) -> Selection {
    debug_assert!(!feasible.is_empty());
    if rng.gen::<f64>() < epsilon {
        let action = feasible[rng.gen_range(0..feasible.len())];
        Selection { action, explored: true }
    } else {
        Selection {
            action: q.argmax(s),
            explored: false,
        }
    }
}

/// Roughly `per_decade` log-spaced slot counts in `[1, max]`, always
/// ending at `max`.
pub fn log_spaced(max: u64, per_decade: u32) -> Vec<u64> {
    let mut out = Vec::new();
    if max == 0 {
        return out;
    }
    let steps = ((max as f64).log10() * per_decade as f64).ceil() as u32;
    for i in 0..=steps {
        let v = 10f64.powf(i as f64 / per_decade as f64).round() as u64;
        let v = v.min(max);
        if out.last() != Some(&v) {
            out.push(v);
        }
    }
    if out.last() != Some(&max) {
        out.push(max);
    }
    out
}

pub(crate) fn mask_of<E: Environment + ?Sized>(env: &E) -> Vec<[bool; 2]> {
    (0..env.n_states())
        .map(|s| {
            let f = env.feasible(s);
            [f.contains(&Action::Drop), f.contains(&Action::Transmit)]
        })
        .collect()
}
