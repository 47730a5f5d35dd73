use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{epsilon_greedy_select, mask_of, Environment, LearningConfig, LearningError, SimulatedTransmitter, Snapshot};
use crate::dp::QTable;
use crate::mdp::{Action, Policy, TransmitterMdp};
use crate::Real;

/// R-learning state: relative action values plus the running gain `rho`.
#[derive(Debug, Clone)]
pub struct RLearner<T> {
    pub q: QTable<T>,
    pub rho: T,
    pub state: usize,
    pub slot: u64,
}

impl<T: Real> RLearner<T> {
    pub fn new(q: QTable<T>, start: usize) -> Self {
        Self {
            q,
            rho: T::zero(),
            state: start,
            slot: 0,
        }
    }

    /// Updates `rho` (greedy steps only) and then `Q(s, x)` towards
    /// `reward - rho + max Q(s_next, .)`, both from the pre-step table.
    pub fn update(&mut self, s: usize, x: Action, reward: f64, s_next: usize, alpha: f64, beta: f64, explored: bool) {
        let r = T::of(reward);
        let next_best = self.q.max(s_next);
        if !explored {
            let beta = T::of(beta);
            let here_best = self.q.max(s);
            self.rho = (T::one() - beta) * self.rho + beta * (r + next_best - here_best);
        }
        let alpha = T::of(alpha);
        let old = self.q.get(s, x).expect("update on a feasible pair");
        self.q.set(s, x, (T::one() - alpha) * old + alpha * (r - self.rho + next_best));
        self.slot += 1;
        self.state = s_next;
    }
}

#[derive(Debug, Clone)]
pub struct RLearningOutcome<T> {
    pub q: QTable<T>,
    /// Final average-reward estimate, bits per slot.
    pub rho: T,
    pub policy: Policy,
    pub trace: Vec<Snapshot>,
}

pub fn r_learning<T: Real, E: Environment + ?Sized>(
    env: &mut E,
    config: &LearningConfig,
) -> Result<RLearningOutcome<T>, LearningError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut learner = RLearner::new(QTable::zeros(mask_of(env)), env.state());
    let mut visits = vec![[0u64; 2]; env.n_states()];
    let mut snapshots = config.snapshots.clone();
    snapshots.sort_unstable();
    let mut pending = snapshots.into_iter().peekable();
    let mut trace = Vec::new();
    let snap = |l: &RLearner<T>| Snapshot {
        slot: l.slot,
        policy: l.q.greedy_policy(),
        rho: Some(l.rho.as_f64()),
    };
    while pending.next_if_eq(&0).is_some() {
        trace.push(snap(&learner));
    }
    for _ in 0..config.learning_slots {
        let s = learner.state;
        let sel = epsilon_greedy_select(&learner.q, s, env.feasible(s), config.epsilon, &mut rng);
        let out = env.step(sel.action);
        let count = &mut visits[s][sel.action.index()];
        *count += 1;
        let alpha = config.alpha.at(*count);
        learner.update(s, sel.action, out.reward, out.next, alpha, config.beta, sel.explored);
        while pending.next_if_eq(&learner.slot).is_some() {
            trace.push(snap(&learner));
        }
    }
    Ok(RLearningOutcome {
        policy: learner.q.greedy_policy(),
        q: learner.q,
        rho: learner.rho,
        trace,
    })
}

/// R-learning on a simulated transmitter seeded with `env_seed`.
pub fn r_learning_run<T: Real>(
    mdp: &TransmitterMdp,
    config: &LearningConfig,
    env_seed: u64,
) -> Result<RLearningOutcome<T>, LearningError> {
    let mut env = SimulatedTransmitter::new(mdp, env_seed, config.initial_battery);
    r_learning(&mut env, config)
}
