use super::space::{feasible_actions, next_battery, Action, ModelError, Policy, StateSpace, SystemState};
use super::{EnergyCostTable, FiniteMdp, Scenario, ScenarioError};

/// The energy-harvesting transmitter as a finite MDP, compiled from a
/// validated [`Scenario`].
///
/// Successor lists are precomputed per feasible `(state, action)` pair; the
/// exogenous part of each successor is the product of the three chains and
/// the battery part is the deterministic [`next_battery`] update.
#[derive(Debug, Clone)]
pub struct TransmitterMdp {
    scenario: Scenario,
    space: StateSpace,
    costs: EnergyCostTable,
    discount: f64,
    harvest_units: Vec<u32>,
    exo_successors: Vec<Vec<(usize, f64)>>,
    successors: Vec<[Vec<(usize, f64)>; 2]>,
}

impl TransmitterMdp {
    pub fn new(scenario: Scenario) -> Result<Self, ScenarioError> {
        let discount = scenario.discount;
        Self::with_discount(scenario, discount)
    }

    /// Compiles the scenario with the discount replaced, e.g. `1.0` for the
    /// average-reward problem.
    pub fn with_discount(scenario: Scenario, discount: f64) -> Result<Self, ScenarioError> {
        let costs = scenario.validate()?;
        if !(0.0..=1.0).contains(&discount) {
            return Err(ScenarioError::invalid("discount-range", format!("discount {discount}")));
        }
        let space = StateSpace::new(
            scenario.energy_chain.len(),
            scenario.data_chain.len(),
            scenario.channel_chain.len(),
            scenario.battery_capacity,
        );
        let harvest_units = scenario.energy_chain.labels.iter().map(|&e| e as u32).collect();

        let mut exo_successors = Vec::with_capacity(space.n_exogenous());
        for exo in 0..space.n_exogenous() {
            let (e, d, h) = space.exogenous_parts(exo);
            let mut row = Vec::new();
            for e2 in 0..space.n_energy {
                let pe = scenario.energy_chain.prob(e, e2);
                if pe == 0.0 {
                    continue;
                }
                for d2 in 0..space.n_data {
                    let pd = scenario.data_chain.prob(d, d2);
                    if pd == 0.0 {
                        continue;
                    }
                    for h2 in 0..space.n_channel {
                        let ph = scenario.channel_chain.prob(h, h2);
                        if ph == 0.0 {
                            continue;
                        }
                        row.push((space.exogenous_index(e2, d2, h2), pe * pd * ph));
                    }
                }
            }
            exo_successors.push(row);
        }

        let mut mdp = Self {
            scenario,
            space,
            costs,
            discount,
            harvest_units,
            exo_successors,
            successors: Vec::new(),
        };
        mdp.successors = (0..space.len())
            .map(|s| {
                let state = space.state(s);
                let mut lists: [Vec<(usize, f64)>; 2] = [Vec::new(), Vec::new()];
                for &a in mdp.feasible(&state) {
                    let b2 = mdp.battery_after(&state, a).expect("feasible action");
                    lists[a.index()] = mdp.exo_successors[space.exogenous_index(state.e_idx, state.d_idx, state.h_idx)]
                        .iter()
                        .map(|&(exo2, p)| (space.index_of_parts(exo2, b2), p))
                        .collect();
                }
                lists
            })
            .collect();
        Ok(mdp)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn costs(&self) -> &EnergyCostTable {
        &self.costs
    }

    pub fn harvest(&self, e_idx: usize) -> u32 {
        self.harvest_units[e_idx]
    }

    pub fn packet_bits(&self, d_idx: usize) -> f64 {
        self.scenario.data_chain.label(d_idx)
    }

    pub fn cost(&self, s: &SystemState) -> u32 {
        self.costs.get(s.d_idx, s.h_idx)
    }

    pub fn feasible(&self, s: &SystemState) -> &'static [Action] {
        feasible_actions(s.battery, self.cost(s))
    }

    pub fn battery_after(&self, s: &SystemState, x: Action) -> Result<u32, ModelError> {
        next_battery(s.battery, x, self.cost(s), self.harvest(s.e_idx), self.space.b_max)
    }

    /// `P(s' | s, x)`: product of the three chain transitions times the
    /// indicator that the battery follows the deterministic update.
    pub fn transition_prob(&self, s: &SystemState, x: Action, next: &SystemState) -> Result<f64, ModelError> {
        let b2 = self.battery_after(s, x)?;
        if next.battery != b2 {
            return Ok(0.0);
        }
        let sc = &self.scenario;
        Ok(sc.energy_chain.prob(s.e_idx, next.e_idx)
            * sc.data_chain.prob(s.d_idx, next.d_idx)
            * sc.channel_chain.prob(s.h_idx, next.h_idx))
    }

    /// Bits delivered by taking `x` in `s`.
    pub fn expected_reward(&self, s: &SystemState, x: Action) -> Result<f64, ModelError> {
        if x.transmits() {
            let cost = self.cost(s);
            if cost > s.battery {
                return Err(ModelError::InfeasibleAction {
                    battery: s.battery,
                    cost,
                });
            }
            Ok(self.packet_bits(s.d_idx))
        } else {
            Ok(0.0)
        }
    }

    /// Validates `actions` against the feasibility constraint.
    pub fn policy(&self, actions: Vec<Action>) -> Result<Policy, ModelError> {
        Policy::new(actions, self.space.len(), |s, a| {
            let st = self.space.state(s);
            if self.feasible(&st).contains(&a) {
                Ok(())
            } else {
                Err(ModelError::InfeasibleAction {
                    battery: st.battery,
                    cost: self.cost(&st),
                })
            }
        })
    }

    /// Transmits whenever the battery covers the packet's cost.
    pub fn greedy_policy(&self) -> Policy {
        Policy::from_vec_unchecked(
            self.space
                .states()
                .map(|s| *self.feasible(&s).last().expect("drop always feasible"))
                .collect(),
        )
    }
}

impl FiniteMdp for TransmitterMdp {
    fn n_states(&self) -> usize {
        self.space.len()
    }

    fn discount(&self) -> f64 {
        self.discount
    }

    fn actions(&self, s: usize) -> &[Action] {
        self.feasible(&self.space.state(s))
    }

    fn reward(&self, s: usize, a: Action) -> f64 {
        if a.transmits() {
            self.packet_bits(self.space.state(s).d_idx)
        } else {
            0.0
        }
    }

    fn successors(&self, s: usize, a: Action) -> &[(usize, f64)] {
        &self.successors[s][a.index()]
    }

    fn max_reward(&self) -> f64 {
        self.scenario.max_packet_bits()
    }
}
