use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("infeasible transmit: cost {cost} exceeds battery {battery}")]
    InfeasibleAction { battery: u32, cost: u32 },
    #[error("policy length {got} does not match {expected} states")]
    PolicyLength { expected: usize, got: usize },
    #[error("state index {0} out of range")]
    StateOutOfRange(usize),
    #[error("action {action:?} is not feasible in state {state}")]
    NotFeasible { state: usize, action: Action },
}

/// Binary per-slot decision: drop the arriving packet or transmit it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Action {
    Drop = 0,
    Transmit = 1,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Drop, Action::Transmit];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> Action {
        if i == 0 {
            Action::Drop
        } else {
            Action::Transmit
        }
    }

    #[inline]
    pub fn transmits(self) -> bool {
        self == Action::Transmit
    }
}

impl From<Action> for u8 {
    fn from(a: Action) -> u8 {
        a as u8
    }
}

impl TryFrom<u8> for Action {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            0 => Ok(Action::Drop),
            1 => Ok(Action::Transmit),
            other => Err(format!("action must be 0 or 1, got {other}")),
        }
    }
}

pub(crate) const DROP_ONLY: &[Action] = &[Action::Drop];
pub(crate) const BOTH: &[Action] = &[Action::Drop, Action::Transmit];

/// Actions allowed with `battery` units stored and a packet costing `cost`.
#[inline]
pub fn feasible_actions(battery: u32, cost: u32) -> &'static [Action] {
    if battery >= cost {
        BOTH
    } else {
        DROP_ONLY
    }
}

/// Battery level at the start of the next slot.
#[inline]
pub fn next_battery(b: u32, x: Action, cost: u32, harvest: u32, b_max: u32) -> Result<u32, ModelError> {
    let spent = match x {
        Action::Transmit if cost > b => return Err(ModelError::InfeasibleAction { battery: b, cost }),
        Action::Transmit => cost,
        Action::Drop => 0,
    };
    Ok((b - spent + harvest).min(b_max))
}

/// One state of the transmitter: harvest, packet and channel indices plus
/// the battery level in energy units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemState {
    pub e_idx: usize,
    pub d_idx: usize,
    pub h_idx: usize,
    pub battery: u32,
}

/// Dimensions of the product state space with its lexicographic
/// `(e, d, h, battery)` flattening, battery varying fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    pub n_energy: usize,
    pub n_data: usize,
    pub n_channel: usize,
    pub b_max: u32,
}

impl StateSpace {
    pub fn new(n_energy: usize, n_data: usize, n_channel: usize, b_max: u32) -> Self {
        Self {
            n_energy,
            n_data,
            n_channel,
            b_max,
        }
    }

    #[inline]
    pub fn battery_levels(&self) -> usize {
        self.b_max as usize + 1
    }

    /// Number of exogenous `(e, d, h)` combinations.
    #[inline]
    pub fn n_exogenous(&self) -> usize {
        self.n_energy * self.n_data * self.n_channel
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_exogenous() * self.battery_levels()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn exogenous_index(&self, e: usize, d: usize, h: usize) -> usize {
        (e * self.n_data + d) * self.n_channel + h
    }

    #[inline]
    pub fn exogenous_parts(&self, exo: usize) -> (usize, usize, usize) {
        let h = exo % self.n_channel;
        let rest = exo / self.n_channel;
        (rest / self.n_data, rest % self.n_data, h)
    }

    #[inline]
    pub fn index_of_parts(&self, exo: usize, battery: u32) -> usize {
        exo * self.battery_levels() + battery as usize
    }

    #[inline]
    pub fn index(&self, s: &SystemState) -> usize {
        self.index_of_parts(self.exogenous_index(s.e_idx, s.d_idx, s.h_idx), s.battery)
    }

    #[inline]
    pub fn state(&self, idx: usize) -> SystemState {
        let levels = self.battery_levels();
        let (e_idx, d_idx, h_idx) = self.exogenous_parts(idx / levels);
        SystemState {
            e_idx,
            d_idx,
            h_idx,
            battery: (idx % levels) as u32,
        }
    }

    pub fn contains(&self, s: &SystemState) -> bool {
        s.e_idx < self.n_energy && s.d_idx < self.n_data && s.h_idx < self.n_channel && s.battery <= self.b_max
    }

    /// All states in flat-index order.
    pub fn states(&self) -> impl Iterator<Item = SystemState> + '_ {
        (0..self.len()).map(move |i| self.state(i))
    }
}

/// Deterministic stationary policy over flat state indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    actions: Vec<Action>,
}

impl Policy {
    /// Wraps `actions` after checking each is feasible under `feasible`.
    pub fn new<F>(actions: Vec<Action>, n_states: usize, mut feasible: F) -> Result<Self, ModelError>
    where
        F: FnMut(usize, Action) -> Result<(), ModelError>,
    {
        if actions.len() != n_states {
            return Err(ModelError::PolicyLength {
                expected: n_states,
                got: actions.len(),
            });
        }
        for (s, &a) in actions.iter().enumerate() {
            feasible(s, a)?;
        }
        Ok(Self { actions })
    }

    /// Wraps actions already known to be feasible.
    pub(crate) fn from_vec_unchecked(actions: Vec<Action>) -> Self {
        Self { actions }
    }

    pub fn all_drop(n_states: usize) -> Self {
        Self {
            actions: vec![Action::Drop; n_states],
        }
    }

    #[inline]
    pub fn action(&self, s: usize) -> Action {
        self.actions[s]
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Number of states where the two policies disagree.
    pub fn differences(&self, other: &Policy) -> usize {
        self.actions.iter().zip(&other.actions).filter(|(a, b)| a != b).count()
    }
}
