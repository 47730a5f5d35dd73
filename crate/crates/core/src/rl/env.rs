use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mdp::{Action, FiniteMdp, SystemState, TransmitterMdp};

/// What the learner sees after acting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub next: usize,
}

/// A system the learner can only act on and observe.
///
/// Learners get no access to transition probabilities: they see the
/// current state, the actions the battery allows there, and the reward and
/// successor produced by each step.
pub trait Environment {
    fn n_states(&self) -> usize;
    fn state(&self) -> usize;
    fn feasible(&self, s: usize) -> &[Action];
    fn step(&mut self, a: Action) -> StepOutcome;
}

/// Simulates the transmitter by sampling each exogenous chain on its own
/// and applying the battery update.
#[derive(Debug, Clone)]
pub struct SimulatedTransmitter<'a> {
    mdp: &'a TransmitterMdp,
    current: SystemState,
    rng: ChaCha8Rng,
}

impl<'a> SimulatedTransmitter<'a> {
    /// Starts from a uniformly drawn `(e, d, h)` with `initial_battery` stored.
    pub fn new(mdp: &'a TransmitterMdp, seed: u64, initial_battery: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sp = mdp.space();
        let current = SystemState {
            e_idx: rng.gen_range(0..sp.n_energy),
            d_idx: rng.gen_range(0..sp.n_data),
            h_idx: rng.gen_range(0..sp.n_channel),
            battery: initial_battery.min(sp.b_max),
        };
        Self { mdp, current, rng }
    }

    pub fn current(&self) -> SystemState {
        self.current
    }
}

impl Environment for SimulatedTransmitter<'_> {
    fn n_states(&self) -> usize {
        self.mdp.space().len()
    }

    fn state(&self) -> usize {
        self.mdp.space().index(&self.current)
    }

    fn feasible(&self, s: usize) -> &[Action] {
        self.mdp.feasible(&self.mdp.space().state(s))
    }

    fn step(&mut self, a: Action) -> StepOutcome {
        let s = self.current;
        let battery = self.mdp.battery_after(&s, a).expect("learner chose an infeasible action");
        let reward = if a.transmits() { self.mdp.packet_bits(s.d_idx) } else { 0.0 };
        let sc = self.mdp.scenario();
        self.current = SystemState {
            e_idx: sc.energy_chain.sample_next(s.e_idx, &mut self.rng),
            d_idx: sc.data_chain.sample_next(s.d_idx, &mut self.rng),
            h_idx: sc.channel_chain.sample_next(s.h_idx, &mut self.rng),
            battery,
        };
        StepOutcome {
            reward,
            next: self.state(),
        }
    }
}

/// Samples successors of any [`FiniteMdp`]; used for small test problems.
#[derive(Debug, Clone)]
pub struct TabularEnv<'a, M> {
    mdp: &'a M,
    current: usize,
    rng: ChaCha8Rng,
}

impl<'a, M: FiniteMdp> TabularEnv<'a, M> {
    pub fn new(mdp: &'a M, seed: u64, start: usize) -> Self {
        Self {
            mdp,
            current: start,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl<M: FiniteMdp> Environment for TabularEnv<'_, M> {
    fn n_states(&self) -> usize {
        self.mdp.n_states()
    }

    fn state(&self) -> usize {
        self.current
    }

    fn feasible(&self, s: usize) -> &[Action] {
        self.mdp.actions(s)
    }

    fn step(&mut self, a: Action) -> StepOutcome {
        let s = self.current;
        let succ = self.mdp.successors(s, a);
        let u: f64 = self.rng.gen();
        let mut acc = 0.0;
        let mut next = succ.last().map(|&(t, _)| t).unwrap_or(s);
        for &(t, p) in succ {
            acc += p;
            if u < acc {
                next = t;
                break;
            }
        }
        self.current = next;
        StepOutcome {
            reward: self.mdp.reward(s, a),
            next,
        }
    }
}
