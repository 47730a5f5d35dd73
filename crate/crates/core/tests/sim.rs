use ehopt_core::dp::{policy_evaluation, policy_gain, policy_iteration, DpConfig};
use ehopt_core::sim::{
    estimate, evaluate_policies, expected_value_from_v, rollout_policy, sample_realization, throughput,
    truncation_error, write_values_csv, EvalConfig, Metric,
};
use ehopt_core::{FiniteMdp, Scenario, TransmitterMdp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

#[test]
fn interval_covers_true_mean_at_nominal_rate() {
    let normal = Normal::new(5.0, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let reps = 400;
    let mut hits = 0;
    for _ in 0..reps {
        let values: Vec<f64> = (0..200).map(|_| normal.inverse_cdf(rng.gen_range(1e-12..1.0))).collect();
        let r = estimate(&values, 0.9, 0.0).unwrap();
        hits += (r.lo <= 5.0 && 5.0 <= r.hi) as usize;
    }
    let rate = hits as f64 / reps as f64;
    let slack = 3.0 * (0.9f64 * 0.1 / reps as f64).sqrt();
    assert!((rate - 0.9).abs() <= slack, "coverage {rate}");
}

#[test]
fn truncation_error_bounds_the_discarded_tail() {
    let e = truncation_error(600.0, 0.9, 100).unwrap();
    let tail: f64 = (101..5000).map(|n| 600.0 * 0.9f64.powi(n)).sum();
    assert!(tail <= e);
    assert!((e - 0.1594).abs() / 0.1594 < 1e-3);
}

#[test]
fn monte_carlo_agrees_with_exact_policy_value() {
    let mdp = TransmitterMdp::new(Scenario::bundled()).unwrap();
    let dp = DpConfig::default();
    let config = EvalConfig {
        n_realizations: 4000,
        base_seed: 8,
        ..EvalConfig::default()
    };
    for policy in [policy_iteration::<f64, _>(&mdp, &dp).unwrap().policy, mdp.greedy_policy()] {
        let v = policy_evaluation::<f64, _>(&mdp, &policy, &dp).unwrap();
        let exact = expected_value_from_v(v.as_slice(), mdp.space(), 0);
        let values = evaluate_policies(&mdp, &config, Metric::DiscountedData, |_| &policy);
        let eps_n = Metric::DiscountedData.eps_n(600.0, 0.9, config.horizon).unwrap();
        let r = estimate(&values, 0.9, eps_n).unwrap();
        let four_sigma = 4.0 * r.sigma_hat / (values.len() as f64).sqrt();
        assert!(exact >= r.estimate - four_sigma && exact <= r.estimate + four_sigma + eps_n, "{exact} vs {r:?}");
    }
}

#[test]
fn throughput_tracks_average_gain() {
    let mdp = TransmitterMdp::with_discount(Scenario::bundled(), 1.0).unwrap();
    let policy = mdp.greedy_policy();
    let gain = policy_gain::<f64, _>(&mdp, &policy, &DpConfig::default()).unwrap();
    let config = EvalConfig {
        horizon: 2000,
        n_realizations: 200,
        base_seed: 1,
        ..EvalConfig::default()
    };
    let values = evaluate_policies(&mdp, &config, Metric::Throughput, |_| &policy);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    assert!((mean - gain).abs() < 0.02 * gain, "{mean} vs {gain}");
    assert_eq!(Metric::Throughput.eps_n(600.0, 1.0, 100).unwrap(), 0.0);
}

#[test]
fn evaluation_is_order_independent_and_reproducible() {
    let mdp = TransmitterMdp::new(Scenario::bundled()).unwrap();
    let policy = mdp.greedy_policy();
    let config = EvalConfig {
        n_realizations: 50,
        base_seed: 4,
        ..EvalConfig::default()
    };
    let values = evaluate_policies(&mdp, &config, Metric::DiscountedData, |_| &policy);
    for t in [0u64, 17, 49] {
        let r = sample_realization(&mdp, &config, t);
        let tr = rollout_policy(&policy, &r, &mdp, 0);
        assert_eq!(values[t as usize], Metric::DiscountedData.of(&tr, mdp.discount()));
        assert!(throughput(&tr) >= 0.0);
    }
    assert_eq!(values, evaluate_policies(&mdp, &config, Metric::DiscountedData, |_| &policy));
}

#[test]
fn values_csv_lists_every_realization() {
    let config = EvalConfig::default();
    let mut buf = Vec::new();
    write_values_csv(&mut buf, &config, Metric::Throughput, &[1.5, 2.0]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,seed,metric,value");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("1,") && lines[2].ends_with(",throughput,2"));
}
