use serde::{Deserialize, Serialize};

use super::Realization;
use crate::mdp::{Action, Policy, SystemState, TransmitterMdp};

/// Per-slot record of a causal policy rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
    /// Battery level at the start of each slot.
    pub battery: Vec<u32>,
}

/// Runs `policy` along a realization from battery `b0`, reading each
/// action from the realized state only.
pub fn rollout_policy(policy: &Policy, realization: &Realization, mdp: &TransmitterMdp, b0: u32) -> Trajectory {
    let sp = mdp.space();
    let n = realization.n_slots();
    let mut tr = Trajectory {
        actions: Vec::with_capacity(n),
        rewards: Vec::with_capacity(n),
        battery: Vec::with_capacity(n),
    };
    let mut battery = b0.min(sp.b_max);
    for k in 0..n {
        let s = SystemState {
            e_idx: realization.energy[k],
            d_idx: realization.data[k],
            h_idx: realization.channel[k],
            battery,
        };
        let x = policy.action(sp.index(&s));
        tr.battery.push(battery);
        tr.actions.push(x);
        tr.rewards.push(if x.transmits() { mdp.packet_bits(s.d_idx) } else { 0.0 });
        battery = mdp.battery_after(&s, x).expect("policy actions are feasible");
    }
    tr
}

/// `Σ γ^n r_n`.
pub fn discounted_data(trajectory: &Trajectory, gamma: f64) -> f64 {
    let mut weight = 1.0;
    let mut total = 0.0;
    for &r in &trajectory.rewards {
        total += weight * r;
        weight *= gamma;
    }
    total
}

/// Mean reward per slot.
pub fn throughput(trajectory: &Trajectory) -> f64 {
    if trajectory.rewards.is_empty() {
        return 0.0;
    }
    trajectory.rewards.iter().sum::<f64>() / trajectory.rewards.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{MarkovChain, Scenario};

    fn tr(rewards: &[f64]) -> Trajectory {
        Trajectory {
            actions: rewards.iter().map(|&r| if r > 0.0 { Action::Transmit } else { Action::Drop }).collect(),
            rewards: rewards.to_vec(),
            battery: vec![0; rewards.len()],
        }
    }

    #[test]
    fn discounting() {
        assert!((discounted_data(&tr(&[300.0, 300.0]), 0.9) - 570.0).abs() < 1e-12);
        assert_eq!(discounted_data(&tr(&[300.0, 600.0]), 0.0), 300.0);
        assert_eq!(discounted_data(&tr(&[300.0, 600.0]), 1.0), 900.0);
    }

    #[test]
    fn throughput_examples() {
        assert_eq!(throughput(&tr(&[600.0, 0.0])), 300.0);
        assert_eq!(throughput(&tr(&[0.0, 0.0])), 0.0);
        assert_eq!(throughput(&tr(&[300.0; 7])), 300.0);
    }

    /// The three-slot instance: harvests (2, 0, 2), packets (300, 600, 300)
    /// and every cost 2, realized on a scenario with one channel state.
    fn three_slot() -> (TransmitterMdp, Realization) {
        let mut sc = Scenario::bundled();
        sc.data_chain = MarkovChain::two_state([300.0, 600.0], [0.5, 0.5]).unwrap();
        sc.channel_chain = MarkovChain::identity(vec![1.0]);
        sc.cost_table = Some(vec![vec![2], vec![2]]);
        sc.discount = 0.9;
        let mdp = TransmitterMdp::new(sc).unwrap();
        let r = Realization {
            seed: 0,
            energy: vec![1, 0, 1],
            data: vec![0, 1, 0],
            channel: vec![0; 3],
        };
        (mdp, r)
    }

    #[test]
    fn greedy_on_three_slot_instance() {
        let (mdp, r) = three_slot();
        let t = rollout_policy(&mdp.greedy_policy(), &r, &mdp, 0);
        assert_eq!(t.actions, vec![Action::Drop, Action::Transmit, Action::Drop]);
        assert_eq!(t.battery, vec![0, 2, 0]);
        assert_eq!(t.rewards.iter().sum::<f64>(), 600.0);
    }

    #[test]
    fn all_drop_accumulates_capped_harvest() {
        let (mdp, _) = three_slot();
        let r = Realization {
            seed: 0,
            energy: vec![1; 5],
            data: vec![0; 5],
            channel: vec![0; 5],
        };
        let t = rollout_policy(&Policy::all_drop(mdp.space().len()), &r, &mdp, 0);
        assert_eq!(t.battery, vec![0, 2, 4, 5, 5]);
        assert!(t.rewards.iter().all(|&x| x == 0.0));
    }
}
