use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{epsilon_greedy_select, mask_of, Environment, LearningConfig, LearningError, SimulatedTransmitter, Snapshot};
use crate::dp::QTable;
use crate::mdp::{Action, FiniteMdp, Policy, TransmitterMdp};
use crate::Real;

/// Q-learning state: the table, where the agent is, and visit counts.
#[derive(Debug, Clone)]
pub struct QLearner<T> {
    pub q: QTable<T>,
    pub state: usize,
    pub slot: u64,
    pub visits: Vec<[u64; 2]>,
}

impl<T: Real> QLearner<T> {
    pub fn new(q: QTable<T>, start: usize) -> Self {
        let n = q.n_states();
        Self {
            q,
            state: start,
            slot: 0,
            visits: vec![[0; 2]; n],
        }
    }

    /// One temporal-difference update of `Q(s, x)` towards
    /// `reward + gamma * max_feasible Q(s_next, .)`; only that entry changes.
    pub fn update(&mut self, s: usize, x: Action, reward: f64, s_next: usize, gamma: f64, alpha: f64) {
        let alpha = T::of(alpha);
        let target = T::of(reward) + T::of(gamma) * self.q.max(s_next);
        let old = self.q.get(s, x).expect("update on a feasible pair");
        self.q.set(s, x, (T::one() - alpha) * old + alpha * target);
        self.visits[s][x.index()] += 1;
        self.slot += 1;
        self.state = s_next;
    }
}

#[derive(Debug, Clone)]
pub struct QLearningOutcome<T> {
    pub q: QTable<T>,
    pub policy: Policy,
    pub trace: Vec<Snapshot>,
    pub visits: Vec<[u64; 2]>,
}

/// Runs `config.learning_slots` select/step/update interactions against `env`.
pub fn q_learning<T: Real, E: Environment + ?Sized>(
    env: &mut E,
    gamma: f64,
    config: &LearningConfig,
) -> Result<QLearningOutcome<T>, LearningError> {
    config.validate()?;
    if !(0.0..1.0).contains(&gamma) {
        return Err(LearningError::InvalidConfig(format!("discount {gamma} outside [0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut learner = QLearner::new(QTable::zeros(mask_of(env)), env.state());
    let mut snapshots = config.snapshots.clone();
    snapshots.sort_unstable();
    let mut pending = snapshots.into_iter().peekable();
    let mut trace = Vec::new();
    while pending.next_if_eq(&0).is_some() {
        trace.push(Snapshot { slot: 0, policy: learner.q.greedy_policy(), rho: None });
    }
    for _ in 0..config.learning_slots {
        let s = learner.state;
        let sel = epsilon_greedy_select(&learner.q, s, env.feasible(s), config.epsilon, &mut rng);
        let out = env.step(sel.action);
        let alpha = config.alpha.at(learner.visits[s][sel.action.index()] + 1);
        learner.update(s, sel.action, out.reward, out.next, gamma, alpha);
        while pending.next_if_eq(&learner.slot).is_some() {
            trace.push(Snapshot {
                slot: learner.slot,
                policy: learner.q.greedy_policy(),
                rho: None,
            });
        }
    }
    Ok(QLearningOutcome {
        policy: learner.q.greedy_policy(),
        q: learner.q,
        trace,
        visits: learner.visits,
    })
}

/// Q-learning on a simulated transmitter seeded with `env_seed`.
pub fn q_learning_run<T: Real>(
    mdp: &TransmitterMdp,
    config: &LearningConfig,
    env_seed: u64,
) -> Result<QLearningOutcome<T>, LearningError> {
    let mut env = SimulatedTransmitter::new(mdp, env_seed, config.initial_battery);
    q_learning(&mut env, mdp.discount(), config)
}
