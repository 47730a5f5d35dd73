#![allow(dead_code)]

use ehopt_core::mdp::MarkovChain;
use ehopt_core::offline::OfflineInstance;
use ehopt_core::Scenario;
use proptest::prelude::*;

/// Row-stochastic matrix from raw positive weights.
pub fn stochastic(weights: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    weights
        .into_iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            row.iter().map(|w| w / total).collect()
        })
        .collect()
}

fn weights(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.05f64..1.0, n), n)
}

/// Small scenario with random chains, costs, capacity and discount.
pub fn arb_scenario() -> impl Strategy<Value = Scenario> {
    (1usize..=2, 1usize..=2, 1usize..=2, 1u32..=4)
        .prop_flat_map(|(ne, nd, nh, b_max)| {
            (
                prop::collection::btree_set(0u32..=b_max, ne),
                weights(ne),
                weights(nd),
                weights(nh),
                prop::collection::vec(prop::collection::vec(1u32..=b_max + 1, nh), nd),
                Just(b_max),
                0.5f64..0.95,
            )
        })
        .prop_filter("energy chain needs distinct labels", |(e, w, ..)| e.len() == w.len())
        .prop_map(|(energy, we, wd, wh, costs, b_max, gamma)| {
            let mut sc = Scenario::bundled();
            sc.energy_chain =
                MarkovChain::new(energy.into_iter().map(f64::from).collect(), stochastic(we)).unwrap();
            let nd = wd.len();
            let nh = wh.len();
            sc.data_chain = MarkovChain::new((1..=nd).map(|i| 100.0 * i as f64).collect(), stochastic(wd)).unwrap();
            sc.channel_chain = MarkovChain::new((1..=nh).map(|i| i as f64).collect(), stochastic(wh)).unwrap();
            sc.cost_table = Some(costs);
            sc.battery_capacity = b_max;
            sc.discount = gamma;
            sc
        })
}

/// Offline instance with up to `max_slots` slots; discount 1 is included.
pub fn arb_instance(max_slots: usize) -> impl Strategy<Value = OfflineInstance> {
    (1usize..=max_slots, 1u32..=6)
        .prop_flat_map(|(n, b_max)| {
            (
                prop::collection::vec(0u32..=b_max.min(3), n),
                prop::collection::vec(prop::sample::select(vec![100.0, 250.0, 300.0, 600.0]), n),
                prop::collection::vec(1u32..=b_max.min(4), n),
                Just(b_max),
                0u32..=b_max,
                prop::sample::select(vec![0.5, 0.9, 0.99, 1.0]),
            )
        })
        .prop_map(|(harvests, packet_bits, costs, b_max, b0, discount)| OfflineInstance {
            harvests,
            packet_bits,
            costs,
            b_max,
            b0,
            discount,
        })
}
