//! Exact dynamic programming for a known model: iterative policy
//! evaluation, policy improvement, policy iteration for the discounted
//! problem and relative value iteration for the average-reward problem.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{Action, FiniteMdp, ModelError, Policy};
use crate::Real;

#[derive(Debug, Error)]
pub enum DpError {
    #[error("not converged after {sweeps} sweeps (last change {delta:e})")]
    NotConverged { sweeps: usize, delta: f64 },
    #[error("discount {0} outside [0, 1) required by this solver")]
    DiscountOutOfRange(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// State-value function, indexed by flat state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable<T> {
    v: Vec<T>,
}

impl<T: Real> ValueTable<T> {
    pub fn zeros(n: usize) -> Self {
        Self { v: vec![T::zero(); n] }
    }

    pub fn from_vec(v: Vec<T>) -> Self {
        Self { v }
    }

    #[inline]
    pub fn get(&self, s: usize) -> T {
        self.v[s]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.v
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// Sup-norm distance to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.v
            .iter()
            .zip(&other.v)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }
}

/// Action-value function with infeasible entries masked out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable<T> {
    q: Vec<[T; 2]>,
    mask: Vec<[bool; 2]>,
}

impl<T: Real> QTable<T> {
    /// Zero table; `mask[s][a]` marks feasible entries.
    pub fn zeros(mask: Vec<[bool; 2]>) -> Self {
        assert!(mask.iter().all(|m| m[0] || m[1]), "every state needs a feasible action");
        Self {
            q: vec![[T::zero(); 2]; mask.len()],
            mask,
        }
    }

    pub fn for_mdp<M: FiniteMdp + ?Sized>(mdp: &M) -> Self {
        Self::zeros(
            (0..mdp.n_states())
                .map(|s| [mdp.is_feasible(s, Action::Drop), mdp.is_feasible(s, Action::Transmit)])
                .collect(),
        )
    }

    pub fn n_states(&self) -> usize {
        self.q.len()
    }

    #[inline]
    pub fn is_feasible(&self, s: usize, a: Action) -> bool {
        self.mask[s][a.index()]
    }

    /// `None` for a masked entry.
    #[inline]
    pub fn get(&self, s: usize, a: Action) -> Option<T> {
        self.is_feasible(s, a).then(|| self.q[s][a.index()])
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: Action, value: T) {
        debug_assert!(self.is_feasible(s, a));
        self.q[s][a.index()] = value;
    }

    /// Greedy action over feasible entries; ties go to `Drop`.
    #[inline]
    pub fn argmax(&self, s: usize) -> Action {
        match self.mask[s] {
            [true, true] => {
                if self.q[s][1] > self.q[s][0] {
                    Action::Transmit
                } else {
                    Action::Drop
                }
            }
            [false, true] => Action::Transmit,
            _ => Action::Drop,
        }
    }

    #[inline]
    pub fn max(&self, s: usize) -> T {
        self.q[s][self.argmax(s).index()]
    }

    pub fn greedy_policy(&self) -> Policy {
        Policy::from_vec_unchecked((0..self.n_states()).map(|s| self.argmax(s)).collect())
    }

    /// Feasible entries as `(state, action, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, Action, T)> + '_ {
        (0..self.q.len()).flat_map(move |s| {
            Action::ALL
                .into_iter()
                .filter(move |&a| self.is_feasible(s, a))
                .map(move |a| (s, a, self.q[s][a.index()]))
        })
    }
}

/// Tolerances and limits for the DP solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpConfig {
    /// Policy evaluation stops once a full sweep changes no value by this much.
    pub eval_tolerance: f64,
    pub max_sweeps: usize,
    pub rvi_reference_state: usize,
    pub rvi_span_tolerance: f64,
    /// Self-loop mixing weight `tau` for relative value iteration: the
    /// recursion runs on `tau * P + (1 - tau) * I` with rewards scaled by
    /// `tau`, which keeps gain and optimal policies but removes periodicity.
    /// `1.0` gives the plain recursion.
    pub rvi_aperiodicity: f64,
}

impl Default for DpConfig {
    fn default() -> Self {
        Self {
            eval_tolerance: 1e-9,
            max_sweeps: 100_000,
            rvi_reference_state: 0,
            rvi_span_tolerance: 1e-9,
            rvi_aperiodicity: 0.5,
        }
    }
}

#[inline]
fn backup<T: Real, M: FiniteMdp + ?Sized>(mdp: &M, v: &[T], s: usize, a: Action, gamma: T) -> T {
    let future: T = mdp
        .successors(s, a)
        .iter()
        .map(|&(t, p)| T::of(p) * v[t])
        .sum();
    T::of(mdp.reward(s, a)) + gamma * future
}

fn check_policy<M: FiniteMdp + ?Sized>(mdp: &M, policy: &Policy) -> Result<(), DpError> {
    if policy.len() != mdp.n_states() {
        return Err(ModelError::PolicyLength {
            expected: mdp.n_states(),
            got: policy.len(),
        }
        .into());
    }
    match (0..mdp.n_states()).find(|&s| !mdp.is_feasible(s, policy.action(s))) {
        Some(s) => Err(ModelError::NotFeasible {
            state: s,
            action: policy.action(s),
        }
        .into()),
        None => Ok(()),
    }
}

fn check_discount(gamma: f64) -> Result<(), DpError> {
    if (0.0..1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(DpError::DiscountOutOfRange(gamma))
    }
}

/// Value of `policy` by in-place iterative evaluation from zero.
pub fn policy_evaluation<T: Real, M: FiniteMdp + ?Sized>(
    mdp: &M,
    policy: &Policy,
    config: &DpConfig,
) -> Result<ValueTable<T>, DpError> {
    policy_evaluation_from(mdp, policy, config, ValueTable::zeros(mdp.n_states()))
}

/// Iterative evaluation warm-started from `init`.
pub fn policy_evaluation_from<T: Real, M: FiniteMdp + ?Sized>(
    mdp: &M,
    policy: &Policy,
    config: &DpConfig,
    init: ValueTable<T>,
) -> Result<ValueTable<T>, DpError> {
    check_discount(mdp.discount())?;
    check_policy(mdp, policy)?;
    let gamma = T::of(mdp.discount());
    let tol = T::of(config.eval_tolerance);
    let mut v = init.v;
    let mut delta = T::zero();
    for _ in 0..config.max_sweeps {
        delta = T::zero();
        for s in 0..v.len() {
            let old = v[s];
            v[s] = backup(mdp, &v, s, policy.action(s), gamma);
            delta = delta.max((old - v[s]).abs());
        }
        if delta < tol {
            return Ok(ValueTable { v });
        }
    }
    Err(DpError::NotConverged {
        sweeps: config.max_sweeps,
        delta: delta.as_f64(),
    })
}

/// `Q(s, x) = sum_s' P(s'|s,x) [R(s,x) + gamma v(s')]` for feasible pairs.
pub fn q_from_v<T: Real, M: FiniteMdp + ?Sized>(mdp: &M, v: &ValueTable<T>) -> QTable<T> {
    let gamma = T::of(mdp.discount());
    let mut q = QTable::for_mdp(mdp);
    for s in 0..mdp.n_states() {
        for &a in mdp.actions(s) {
            q.set(s, a, backup(mdp, &v.v, s, a, gamma));
        }
    }
    q
}

/// Greedy policy with respect to `q`, ties toward `Drop`.
pub fn policy_improvement<T: Real>(q: &QTable<T>) -> Policy {
    q.greedy_policy()
}

/// Sup-norm gap between `v` and one application of the optimality operator.
pub fn bellman_residual<T: Real, M: FiniteMdp + ?Sized>(mdp: &M, v: &ValueTable<T>) -> T {
    let q = q_from_v(mdp, v);
    (0..mdp.n_states())
        .map(|s| (q.max(s) - v.get(s)).abs())
        .fold(T::zero(), T::max)
}

#[derive(Debug, Clone)]
pub struct PolicyIterationOutcome<T> {
    pub policy: Policy,
    pub values: ValueTable<T>,
    /// Number of evaluate/improve rounds, including the final stable one.
    pub rounds: usize,
}

/// Policy iteration from the all-drop policy and zero values.
///
/// Each evaluation is warm-started from the previous round's values. A
/// state switches action only if the challenger beats the incumbent by
/// more than `10 * eval_tolerance`, so numerical noise in near-ties cannot
/// make the loop oscillate.
pub fn policy_iteration<T: Real, M: FiniteMdp + ?Sized>(
    mdp: &M,
    config: &DpConfig,
) -> Result<PolicyIterationOutcome<T>, DpError> {
    check_discount(mdp.discount())?;
    let n = mdp.n_states();
    let mut actions: Vec<Action> = (0..n).map(|s| mdp.actions(s)[0]).collect();
    let mut values = ValueTable::zeros(n);
    let margin = T::of(10.0 * config.eval_tolerance);
    for rounds in 1..=config.max_sweeps {
        let policy = Policy::from_vec_unchecked(actions.clone());
        values = policy_evaluation_from(mdp, &policy, config, values)?;
        let q = q_from_v(mdp, &values);
        let mut stable = true;
        for (s, current) in actions.iter_mut().enumerate() {
            let best = q.argmax(s);
            if best != *current && q.get(s, best).unwrap() > q.get(s, *current).unwrap() + margin {
                *current = best;
                stable = false;
            }
        }
        if stable {
            return Ok(PolicyIterationOutcome {
                policy,
                values,
                rounds,
            });
        }
    }
    Err(DpError::NotConverged {
        sweeps: config.max_sweeps,
        delta: f64::NAN,
    })
}

#[derive(Debug, Clone)]
pub struct RviOutcome<T> {
    pub policy: Policy,
    /// Long-run average reward per slot.
    pub gain: T,
    /// Relative values, zero at the reference state.
    pub bias: ValueTable<T>,
    pub sweeps: usize,
}

/// Relative value iteration for the average-reward criterion. The model's
/// discount is ignored.
pub fn relative_value_iteration<T: Real, M: FiniteMdp + ?Sized>(
    mdp: &M,
    config: &DpConfig,
) -> Result<RviOutcome<T>, DpError> {
    let n = mdp.n_states();
    let r = config.rvi_reference_state;
    if r >= n {
        return Err(ModelError::StateOutOfRange(r).into());
    }
    let tau = T::of(config.rvi_aperiodicity);
    let stay = T::one() - tau;
    let tol = T::of(config.rvi_span_tolerance);
    let mut h = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let mut span = T::infinity();
    for sweep in 1..=config.max_sweeps {
        for s in 0..n {
            w[s] = mdp
                .actions(s)
                .iter()
                .map(|&a| tau * backup(mdp, &h, s, a, T::one()) + stay * h[s])
                .fold(T::neg_infinity(), T::max);
        }
        let (lo, hi) = w
            .iter()
            .zip(&h)
            .map(|(a, b)| *a - *b)
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), d| (lo.min(d), hi.max(d)));
        span = hi - lo;
        let offset = w[r];
        let scaled_gain = offset - h[r];
        for s in 0..n {
            h[s] = w[s] - offset;
        }
        if span < tol {
            let bias = ValueTable { v: h };
            let policy = q_from_v(&Undiscounted(mdp), &bias).greedy_policy();
            return Ok(RviOutcome {
                policy,
                gain: scaled_gain / tau,
                bias,
                sweeps: sweep,
            });
        }
    }
    Err(DpError::NotConverged {
        sweeps: config.max_sweeps,
        delta: span.as_f64(),
    })
}

/// Views an MDP with discount forced to one.
struct Undiscounted<'a, M: ?Sized>(&'a M);

impl<M: FiniteMdp + ?Sized> FiniteMdp for Undiscounted<'_, M> {
    fn n_states(&self) -> usize {
        self.0.n_states()
    }
    fn discount(&self) -> f64 {
        1.0
    }
    fn actions(&self, s: usize) -> &[Action] {
        self.0.actions(s)
    }
    fn reward(&self, s: usize, a: Action) -> f64 {
        self.0.reward(s, a)
    }
    fn successors(&self, s: usize, a: Action) -> &[(usize, f64)] {
        self.0.successors(s, a)
    }
}

/// Long-run average reward of a fixed policy, by relative value iteration
/// restricted to that policy.
pub fn policy_gain<T: Real, M: FiniteMdp + ?Sized>(mdp: &M, policy: &Policy, config: &DpConfig) -> Result<T, DpError> {
    check_policy(mdp, policy)?;
    let fixed = Restricted { mdp, policy };
    relative_value_iteration::<T, _>(&fixed, config).map(|o| o.gain)
}

struct Restricted<'a, M: ?Sized> {
    mdp: &'a M,
    policy: &'a Policy,
}

impl<M: FiniteMdp + ?Sized> FiniteMdp for Restricted<'_, M> {
    fn n_states(&self) -> usize {
        self.mdp.n_states()
    }
    fn discount(&self) -> f64 {
        self.mdp.discount()
    }
    fn actions(&self, s: usize) -> &[Action] {
        match self.policy.action(s) {
            Action::Drop => &[Action::Drop],
            Action::Transmit => &[Action::Transmit],
        }
    }
    fn reward(&self, s: usize, a: Action) -> f64 {
        self.mdp.reward(s, a)
    }
    fn successors(&self, s: usize, a: Action) -> &[(usize, f64)] {
        self.mdp.successors(s, a)
    }
}
