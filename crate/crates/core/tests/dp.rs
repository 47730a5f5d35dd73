mod common;

use ehopt_core::dp::{
    bellman_residual, policy_evaluation, policy_gain, policy_improvement, policy_iteration, q_from_v,
    relative_value_iteration, DpConfig,
};
use ehopt_core::mdp::TabularMdp;
use ehopt_core::rl::{Environment, SimulatedTransmitter};
use ehopt_core::{Action, FiniteMdp, Policy, Scenario, TransmitterMdp};
use proptest::prelude::*;

/// Solves `(I - gamma P) v = r` by Gaussian elimination with partial pivoting.
fn exact_value<M: FiniteMdp>(mdp: &M, actions: &[Action]) -> Vec<f64> {
    let n = mdp.n_states();
    let g = mdp.discount();
    let mut a = vec![vec![0.0; n + 1]; n];
    for s in 0..n {
        a[s][s] += 1.0;
        for &(t, p) in mdp.successors(s, actions[s]) {
            a[s][t] -= g * p;
        }
        a[s][n] = mdp.reward(s, actions[s]);
    }
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=n {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    (0..n).map(|s| a[s][n] / a[s][s]).collect()
}

fn all_policies<M: FiniteMdp>(mdp: &M) -> Vec<Vec<Action>> {
    let mut out = vec![Vec::new()];
    for s in 0..mdp.n_states() {
        out = out
            .into_iter()
            .flat_map(|p| {
                mdp.actions(s).iter().map(move |&a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    out
}

fn arb_tabular() -> impl Strategy<Value = TabularMdp> {
    (1usize..=6, 0.3f64..0.95).prop_flat_map(|(n, gamma)| {
        let state = (
            any::<bool>(),
            0.0f64..10.0,
            0.0f64..10.0,
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(0.0f64..1.0, n),
        );
        (Just(gamma), prop::collection::vec(state, n))
    })
    .prop_map(|(gamma, states)| {
        let n = states.len();
        let dist = |w: Vec<f64>| -> Vec<(usize, f64)> {
            let w: Vec<f64> = w.into_iter().map(|x| x + 0.01).collect();
            let total: f64 = w.iter().sum();
            let mut d: Vec<(usize, f64)> = w.iter().enumerate().map(|(t, x)| (t, x / total)).collect();
            let head: f64 = d[..n - 1].iter().map(|&(_, p)| p).sum();
            d[n - 1].1 = 1.0 - head;
            d
        };
        let mut mdp = TabularMdp::new(n, gamma);
        for (s, (transmit, r0, r1, w0, w1)) in states.into_iter().enumerate() {
            mdp = mdp.with_action(s, Action::Drop, r0, dist(w0));
            if transmit {
                mdp = mdp.with_action(s, Action::Transmit, r1, dist(w1));
            }
        }
        mdp
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn policy_iteration_matches_enumeration(mdp in arb_tabular()) {
        let out = policy_iteration::<f64, _>(&mdp, &DpConfig::default()).unwrap();
        let n = mdp.n_states();
        let mut best = vec![f64::NEG_INFINITY; n];
        for p in all_policies(&mdp) {
            for (b, v) in best.iter_mut().zip(exact_value(&mdp, &p)) {
                *b = b.max(v);
            }
        }
        let found = exact_value(&mdp, out.policy.actions());
        for s in 0..n {
            prop_assert!((out.values.get(s) - best[s]).abs() < 1e-6, "state {s}: {} vs {}", out.values.get(s), best[s]);
            prop_assert!((found[s] - best[s]).abs() < 1e-6);
        }
    }

    #[test]
    fn improvement_never_lowers_values(mdp in arb_tabular()) {
        let config = DpConfig::default();
        let mut policy = Policy::all_drop(mdp.n_states());
        let mut v = policy_evaluation::<f64, _>(&mdp, &policy, &config).unwrap();
        for _ in 0..20 {
            let next = policy_improvement(&q_from_v(&mdp, &v));
            let w = policy_evaluation::<f64, _>(&mdp, &next, &config).unwrap();
            for s in 0..mdp.n_states() {
                prop_assert!(w.get(s) >= v.get(s) - 1e-7, "state {s}: {} < {}", w.get(s), v.get(s));
            }
            if next == policy {
                break;
            }
            policy = next;
            v = w;
        }
    }

    #[test]
    fn policy_evaluation_matches_linear_solve(mdp in arb_tabular()) {
        let policy = policy_improvement(&q_from_v(&mdp, &ehopt_core::ValueTable::zeros(mdp.n_states())));
        let v = policy_evaluation::<f64, _>(&mdp, &policy, &DpConfig::default()).unwrap();
        for (s, exact) in exact_value(&mdp, policy.actions()).into_iter().enumerate() {
            prop_assert!((v.get(s) - exact).abs() < 1e-6);
        }
    }
}

#[test]
fn reference_policy_iteration_agrees_with_value_iteration() {
    let mdp = TransmitterMdp::new(Scenario::bundled()).unwrap();
    let out = policy_iteration::<f64, _>(&mdp, &DpConfig::default()).unwrap();
    assert!(bellman_residual(&mdp, &out.values) <= 1e-7);

    let space = mdp.space().clone();
    let states: Vec<_> = space.states().collect();
    let mut v = vec![0.0; states.len()];
    loop {
        let next: Vec<f64> = states
            .iter()
            .map(|s| {
                mdp.feasible(s)
                    .iter()
                    .map(|&x| {
                        let future: f64 = states
                            .iter()
                            .enumerate()
                            .map(|(j, t)| mdp.transition_prob(s, x, t).unwrap() * v[j])
                            .sum();
                        mdp.expected_reward(s, x).unwrap() + 0.9 * future
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if delta < 1e-12 {
            break;
        }
    }
    for (s, vi) in v.iter().enumerate() {
        assert!((out.values.get(s) - vi).abs() < 1e-6, "state {s}");
    }
}

#[test]
fn f32_policy_iteration_agrees_with_f64() {
    let mdp = TransmitterMdp::new(Scenario::bundled()).unwrap();
    let config = DpConfig {
        eval_tolerance: 1e-4,
        ..DpConfig::default()
    };
    let wide = policy_iteration::<f64, _>(&mdp, &DpConfig::default()).unwrap();
    let narrow = policy_iteration::<f32, _>(&mdp, &config).unwrap();
    for s in 0..mdp.n_states() {
        let rel = (wide.values.get(s) - narrow.values.get(s) as f64).abs() / wide.values.get(s).max(1.0);
        assert!(rel < 1e-4, "state {s}: {rel}");
    }
}

#[test]
fn average_reward_gain_matches_long_rollout() {
    let mdp = TransmitterMdp::with_discount(Scenario::bundled(), 1.0).unwrap();
    let config = DpConfig::default();
    let out = relative_value_iteration::<f64, _>(&mdp, &config).unwrap();
    let gain = policy_gain::<f64, _>(&mdp, &out.policy, &config).unwrap();
    assert!((gain - out.gain).abs() < 1e-6 * out.gain);
    let greedy = policy_gain::<f64, _>(&mdp, &mdp.greedy_policy(), &config).unwrap();
    assert!(greedy <= out.gain + 1e-6);

    let mut env = SimulatedTransmitter::new(&mdp, 17, 0);
    let slots = 1_000_000;
    let mut total = 0.0;
    for _ in 0..slots {
        let s = env.state();
        total += env.step(out.policy.action(s)).reward;
    }
    let empirical = total / slots as f64;
    assert!((empirical - out.gain).abs() < 0.01 * out.gain, "{empirical} vs {}", out.gain);
}
