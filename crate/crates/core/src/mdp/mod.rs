//! The transmitter MDP: exogenous chains, scenario description, state
//! space, battery dynamics and the compiled transition kernel.

mod chain;
mod model;
mod scenario;
mod space;

pub use chain::MarkovChain;
pub use model::TransmitterMdp;
pub use scenario::{
    energy_cost, EnergyCostTable, PhysicalParams, Scenario, ScenarioError, DEFAULT_COST_TOLERANCE,
    SCHEMA_VERSION,
};
pub use space::{feasible_actions, next_battery, Action, ModelError, Policy, StateSpace, SystemState};

/// A finite MDP over the binary action set, as seen by the exact solvers.
///
/// `actions(s)` lists the feasible actions in ascending order and always
/// contains at least one entry.
pub trait FiniteMdp {
    fn n_states(&self) -> usize;
    fn discount(&self) -> f64;
    fn actions(&self, s: usize) -> &[Action];
    fn reward(&self, s: usize, a: Action) -> f64;
    /// Sparse `(next_state, probability)` list for a feasible pair.
    fn successors(&self, s: usize, a: Action) -> &[(usize, f64)];

    fn is_feasible(&self, s: usize, a: Action) -> bool {
        self.actions(s).contains(&a)
    }

    /// Largest immediate reward over all feasible pairs.
    fn max_reward(&self) -> f64 {
        (0..self.n_states())
            .flat_map(|s| self.actions(s).iter().map(move |&a| (s, a)))
            .map(|(s, a)| self.reward(s, a))
            .fold(0.0, f64::max)
    }
}

/// Explicit tabular MDP, mostly for small hand-built test problems.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    discount: f64,
    actions: Vec<Vec<Action>>,
    rewards: Vec<[f64; 2]>,
    successors: Vec<[Vec<(usize, f64)>; 2]>,
}

impl TabularMdp {
    pub fn new(n_states: usize, discount: f64) -> Self {
        Self {
            discount,
            actions: vec![Vec::new(); n_states],
            rewards: vec![[0.0; 2]; n_states],
            successors: vec![[Vec::new(), Vec::new()]; n_states],
        }
    }

    /// Adds action `a` in state `s`. Panics on a malformed successor list.
    pub fn with_action(mut self, s: usize, a: Action, reward: f64, successors: Vec<(usize, f64)>) -> Self {
        let n = self.actions.len();
        assert!(s < n && successors.iter().all(|&(t, p)| t < n && (0.0..=1.0).contains(&p)));
        let total: f64 = successors.iter().map(|&(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-9, "successor probabilities sum to {total}");
        if !self.actions[s].contains(&a) {
            self.actions[s].push(a);
            self.actions[s].sort();
        }
        self.rewards[s][a.index()] = reward;
        self.successors[s][a.index()] = successors;
        self
    }

    pub fn with_discount(mut self, discount: f64) -> Self {
        self.discount = discount;
        self
    }
}

impl FiniteMdp for TabularMdp {
    fn n_states(&self) -> usize {
        self.actions.len()
    }

    fn discount(&self) -> f64 {
        self.discount
    }

    fn actions(&self, s: usize) -> &[Action] {
        &self.actions[s]
    }

    fn reward(&self, s: usize, a: Action) -> f64 {
        self.rewards[s][a.index()]
    }

    fn successors(&self, s: usize, a: Action) -> &[(usize, f64)] {
        &self.successors[s][a.index()]
    }
}
