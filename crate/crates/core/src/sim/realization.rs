use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EvalConfig, SimError};
use crate::mdp::{FiniteMdp, TransmitterMdp};
use crate::offline::OfflineInstance;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of realization `t`: `splitmix64(base_seed XOR t)`.
pub fn realization_seed(base_seed: u64, t: u64) -> u64 {
    splitmix64(base_seed ^ t)
}

/// Exogenous chain indices for slots `0..n_slots`; slot 0 is the initial
/// state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Realization {
    pub seed: u64,
    pub energy: Vec<usize>,
    pub data: Vec<usize>,
    pub channel: Vec<usize>,
}

impl Realization {
    pub fn n_slots(&self) -> usize {
        self.energy.len()
    }

    /// Draws a realization from `seed`: a uniform initial `(e, d, h)`,
    /// then each chain stepped independently in the order energy, data,
    /// channel.
    pub fn sample(mdp: &TransmitterMdp, n_slots: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sc = mdp.scenario();
        let sp = mdp.space();
        let mut e = rng.gen_range(0..sp.n_energy);
        let mut d = rng.gen_range(0..sp.n_data);
        let mut h = rng.gen_range(0..sp.n_channel);
        let mut out = Self {
            seed,
            energy: Vec::with_capacity(n_slots),
            data: Vec::with_capacity(n_slots),
            channel: Vec::with_capacity(n_slots),
        };
        for n in 0..n_slots {
            if n > 0 {
                e = sc.energy_chain.sample_next(e, &mut rng);
                d = sc.data_chain.sample_next(d, &mut rng);
                h = sc.channel_chain.sample_next(h, &mut rng);
            }
            out.energy.push(e);
            out.data.push(d);
            out.channel.push(h);
        }
        out
    }

    /// The offline problem on this realization.
    pub fn to_offline(&self, mdp: &TransmitterMdp, b0: u32) -> OfflineInstance {
        let costs = mdp.costs();
        OfflineInstance {
            harvests: self.energy.iter().map(|&e| mdp.harvest(e)).collect(),
            packet_bits: self.data.iter().map(|&d| mdp.packet_bits(d)).collect(),
            costs: self.data.iter().zip(&self.channel).map(|(&d, &h)| costs.get(d, h)).collect(),
            b_max: mdp.space().b_max,
            b0,
            discount: mdp.discount(),
        }
    }

    /// Recovers chain indices from an instance's labels. The channel state
    /// is identified through the cost table and must be unique for the
    /// packet size.
    pub fn from_offline(inst: &OfflineInstance, mdp: &TransmitterMdp, seed: u64) -> Result<Self, SimError> {
        let sc = mdp.scenario();
        let costs = mdp.costs();
        let n_channel = mdp.space().n_channel;
        let mut out = Self {
            seed,
            energy: Vec::new(),
            data: Vec::new(),
            channel: Vec::new(),
        };
        for n in 0..inst.n_slots() {
            let e = sc
                .energy_chain
                .index_of(inst.harvests[n] as f64)
                .ok_or_else(|| SimError::Unmatched(format!("harvest {} at slot {n}", inst.harvests[n])))?;
            let d = sc
                .data_chain
                .index_of(inst.packet_bits[n])
                .ok_or_else(|| SimError::Unmatched(format!("packet {} at slot {n}", inst.packet_bits[n])))?;
            let mut hs = (0..n_channel).filter(|&h| costs.get(d, h) == inst.costs[n]);
            let h = hs
                .next()
                .ok_or_else(|| SimError::Unmatched(format!("cost {} at slot {n}", inst.costs[n])))?;
            if hs.next().is_some() {
                return Err(SimError::Unmatched(format!("cost {} at slot {n} is ambiguous", inst.costs[n])));
            }
            out.energy.push(e);
            out.data.push(d);
            out.channel.push(h);
        }
        Ok(out)
    }
}

/// Realization `t` of an evaluation.
pub fn sample_realization(mdp: &TransmitterMdp, config: &EvalConfig, t: u64) -> Realization {
    Realization::sample(mdp, config.n_slots(), realization_seed(config.base_seed, t))
}
