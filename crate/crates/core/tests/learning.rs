use ehopt_core::dp::{policy_iteration, q_from_v, relative_value_iteration, DpConfig};
use ehopt_core::mdp::TabularMdp;
use ehopt_core::rl::{
    epsilon_greedy_select, q_learning, q_learning_run, r_learning, Environment, LearningConfig, LearningRate, QLearner,
    SimulatedTransmitter, TabularEnv,
};
use ehopt_core::{Action, FiniteMdp, QTable, Scenario, TransmitterMdp};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn four_state() -> TabularMdp {
    TabularMdp::new(4, 0.8)
        .with_action(0, Action::Drop, 0.0, vec![(0, 0.5), (1, 0.5)])
        .with_action(0, Action::Transmit, 1.0, vec![(2, 1.0)])
        .with_action(1, Action::Drop, 2.0, vec![(0, 0.3), (3, 0.7)])
        .with_action(2, Action::Drop, 0.5, vec![(1, 0.2), (2, 0.8)])
        .with_action(2, Action::Transmit, 3.0, vec![(0, 0.6), (3, 0.4)])
        .with_action(3, Action::Drop, 0.0, vec![(3, 0.1), (0, 0.9)])
        .with_action(3, Action::Transmit, 1.5, vec![(1, 1.0)])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn q_stays_within_reward_bound(seed in any::<u64>(), p_h in 0.5f64..0.95, alpha in 0.05f64..1.0) {
        let mdp = TransmitterMdp::new(Scenario::reference(p_h, 5)).unwrap();
        let bound = mdp.max_reward() / (1.0 - mdp.discount());
        let mut env = SimulatedTransmitter::new(&mdp, seed, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let mut learner = QLearner::new(QTable::for_mdp(&mdp), env.state());
        for _ in 0..5_000 {
            let s = learner.state;
            let sel = epsilon_greedy_select(&learner.q, s, env.feasible(s), 0.2, &mut rng);
            let out = env.step(sel.action);
            learner.update(s, sel.action, out.reward, out.next, mdp.discount(), alpha);
            let q = learner.q.get(s, sel.action).unwrap();
            prop_assert!((0.0..=bound + 1e-9).contains(&q), "{q} > {bound}");
        }
    }
}

#[test]
fn robbins_monro_converges_on_small_mdp() {
    let mdp = four_state().with_discount(0.3);
    let exact = policy_iteration::<f64, _>(&mdp, &DpConfig::default()).unwrap();
    let q_star = q_from_v(&mdp, &exact.values);
    let config = LearningConfig {
        epsilon: 1.0,
        alpha: LearningRate::RobbinsMonro,
        learning_slots: 1_000_000,
        seed: 5,
        ..LearningConfig::default()
    };
    let mut env = TabularEnv::new(&mdp, 6, 0);
    let out = q_learning::<f64, _>(&mut env, mdp.discount(), &config).unwrap();
    let worst = q_star
        .entries()
        .map(|(s, a, v)| (out.q.get(s, a).unwrap() - v).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.01, "max error {worst}");
    assert_eq!(out.policy, exact.policy);
}

#[test]
fn learner_is_seed_deterministic() {
    let mdp = TransmitterMdp::new(Scenario::bundled()).unwrap();
    let config = LearningConfig {
        learning_slots: 20_000,
        seed: 3,
        ..LearningConfig::default()
    };
    let a = q_learning_run::<f64>(&mdp, &config, 4).unwrap();
    let b = q_learning_run::<f64>(&mdp, &config, 4).unwrap();
    assert_eq!(a.q, b.q);
    let c = q_learning_run::<f64>(&mdp, &LearningConfig { seed: 8, ..config }, 4).unwrap();
    assert_ne!(a.q, c.q);
}

#[test]
fn visits_count_every_slot() {
    let mdp = TransmitterMdp::new(Scenario::bundled()).unwrap();
    let config = LearningConfig {
        learning_slots: 12_345,
        snapshots: vec![0, 10, 12_345],
        ..LearningConfig::default()
    };
    let out = q_learning_run::<f64>(&mdp, &config, 1).unwrap();
    let total: u64 = out.visits.iter().flatten().sum();
    assert_eq!(total, 12_345);
    let slots: Vec<u64> = out.trace.iter().map(|s| s.slot).collect();
    assert_eq!(slots, vec![0, 10, 12_345]);
    assert_eq!(out.trace.last().unwrap().policy, out.policy);
}

#[test]
fn r_learning_estimates_gain_on_small_mdp() {
    let mdp = four_state().with_discount(1.0);
    let config = DpConfig {
        rvi_aperiodicity: 0.5,
        ..DpConfig::default()
    };
    let exact = relative_value_iteration::<f64, _>(&mdp, &config).unwrap();
    let learn = LearningConfig {
        epsilon: 0.1,
        alpha: LearningRate::Constant(0.05),
        beta: 0.01,
        learning_slots: 500_000,
        seed: 2,
        ..LearningConfig::default()
    };
    let mut env = TabularEnv::new(&mdp, 3, 0);
    let out = r_learning::<f64, _>(&mut env, &learn).unwrap();
    assert!((out.rho - exact.gain).abs() < 0.05 * exact.gain, "{} vs {}", out.rho, exact.gain);
    assert_eq!(out.policy, exact.policy);
    assert_eq!(mdp.n_states(), 4);
}
