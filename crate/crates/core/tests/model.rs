mod common;

use common::arb_scenario;
use ehopt_core::mdp::ScenarioError;
use ehopt_core::sim::{realization_seed, sample_realization, EvalConfig, Realization};
use ehopt_core::{Action, FiniteMdp, Scenario, TransmitterMdp};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_rows_sum_to_one(sc in arb_scenario()) {
        let mdp = TransmitterMdp::new(sc).unwrap();
        let space = mdp.space().clone();
        for s in space.states() {
            for &x in mdp.feasible(&s) {
                let total: f64 = space.states().map(|t| mdp.transition_prob(&s, x, &t).unwrap()).sum();
                prop_assert!((total - 1.0).abs() < 1e-9, "{s:?} {x:?} {total}");
                let sparse: f64 = mdp.successors(space.index(&s), x).iter().map(|&(_, p)| p).sum();
                prop_assert!((sparse - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn successors_match_dense_kernel(sc in arb_scenario()) {
        let mdp = TransmitterMdp::new(sc).unwrap();
        let space = mdp.space().clone();
        for s in 0..mdp.n_states() {
            let state = space.state(s);
            for &x in mdp.actions(s) {
                for &(t, p) in mdp.successors(s, x) {
                    let dense = mdp.transition_prob(&state, x, &space.state(t)).unwrap();
                    prop_assert!((dense - p).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn transmit_feasible_iff_affordable(sc in arb_scenario()) {
        let mdp = TransmitterMdp::new(sc).unwrap();
        for s in mdp.space().states() {
            let affordable = s.battery >= mdp.cost(&s);
            prop_assert_eq!(mdp.feasible(&s).contains(&Action::Transmit), affordable);
            prop_assert!(mdp.feasible(&s).contains(&Action::Drop));
        }
    }

    #[test]
    fn realization_survives_offline_round_trip(seed in any::<u64>(), n in 1usize..40) {
        let mdp = TransmitterMdp::new(Scenario::bundled()).unwrap();
        let r = Realization::sample(&mdp, n, seed);
        let inst = r.to_offline(&mdp, 0);
        prop_assert_eq!(inst.n_slots(), n);
        let back = Realization::from_offline(&inst, &mdp, seed).unwrap();
        prop_assert_eq!(back, r);
    }
}

#[test]
fn empirical_self_transition_frequency() {
    let mdp = TransmitterMdp::new(Scenario::bundled()).unwrap();
    let r = Realization::sample(&mdp, 1_000_001, 11);
    for chain in [&r.energy, &r.data, &r.channel] {
        let mut stay = 0u64;
        for w in chain.windows(2) {
            stay += (w[0] == w[1]) as u64;
        }
        let freq = stay as f64 / 1e6;
        assert!((freq - 0.9).abs() < 0.002, "{freq}");
    }
}

#[test]
fn realizations_are_seed_deterministic() {
    let mdp = TransmitterMdp::new(Scenario::bundled()).unwrap();
    let config = EvalConfig::default();
    let a = sample_realization(&mdp, &config, 5);
    assert_eq!(a, sample_realization(&mdp, &config, 5));
    assert_eq!(a.seed, realization_seed(0, 5));
    assert_ne!(a, sample_realization(&mdp, &config, 6));
    assert_eq!(a.n_slots(), 101);
}

#[test]
fn load_reports_missing_file() {
    let err = Scenario::load("/definitely/not/here.json").unwrap_err();
    assert!(matches!(err, ScenarioError::Io(_)));
}

#[test]
fn load_reports_parse_position() {
    let err = Scenario::from_json("{\n  \"energy_chain\": [").unwrap_err();
    match err {
        ScenarioError::Parse { line, .. } => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn each_invariant_is_named() {
    let cases: Vec<(Box<dyn Fn(&mut Scenario)>, &str)> = vec![
        (Box::new(|s| s.schema_version = 9), "schema-version"),
        (Box::new(|s| s.battery_capacity = 0), "battery-capacity"),
        (Box::new(|s| s.discount = 1.5), "discount-range"),
        (Box::new(|s| s.energy_chain.labels[1] = 2.5), "integral-harvest"),
        (Box::new(|s| s.data_chain.transition[0] = vec![0.5, 0.6]), "row-stochastic"),
        (Box::new(|s| s.cost_table = Some(vec![vec![1]])), "cost-table-shape"),
    ];
    for (mutate, invariant) in cases {
        let mut sc = Scenario::bundled();
        mutate(&mut sc);
        match sc.validate() {
            Err(ScenarioError::Invalid { invariant: got, .. }) => assert_eq!(got, invariant),
            other => panic!("expected {invariant}, got {other:?}"),
        }
        assert!(TransmitterMdp::new(sc).is_err());
    }
}

#[test]
fn scenario_json_round_trip() {
    let sc = Scenario::reference(0.7, 8);
    let back = Scenario::from_json(&sc.to_json()).unwrap();
    assert_eq!(back, sc);
    assert_eq!(back.harvest_persistence(), Some(0.7));
}
