use serde::{Deserialize, Serialize};

use super::OfflineError;

/// One realization of the exogenous chains over `n_slots` slots, seen
/// non-causally by the offline solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineInstance {
    /// Energy units harvested during slot `n`, usable from slot `n + 1`.
    pub harvests: Vec<u32>,
    pub packet_bits: Vec<f64>,
    pub costs: Vec<u32>,
    pub b_max: u32,
    pub b0: u32,
    pub discount: f64,
}

impl OfflineInstance {
    pub fn n_slots(&self) -> usize {
        self.packet_bits.len()
    }

    pub fn validate(&self) -> Result<(), OfflineError> {
        let n = self.n_slots();
        let bad = |msg: String| Err(OfflineError::InvalidInstance(msg));
        if n == 0 {
            return bad("instance has no slots".into());
        }
        if self.harvests.len() != n || self.costs.len() != n {
            return bad(format!(
                "sequence lengths differ: {} harvests, {} packets, {} costs",
                self.harvests.len(),
                n,
                self.costs.len()
            ));
        }
        if self.costs.iter().any(|&c| c == 0) {
            return bad("energy costs must be positive".into());
        }
        if self.packet_bits.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return bad("packet sizes must be finite and nonnegative".into());
        }
        if self.b0 > self.b_max {
            return bad(format!("b0 {} exceeds b_max {}", self.b0, self.b_max));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return bad(format!("discount {} outside [0, 1]", self.discount));
        }
        Ok(())
    }

    /// Objective weight `γ^n D_n` of slot `n`.
    pub fn weight(&self, n: usize) -> f64 {
        self.discount.powi(n as i32) * self.packet_bits[n]
    }

    /// Discounted data of a transmit vector, summed in slot order. Every
    /// solver reports its value through this function so results compare
    /// exactly.
    pub fn objective(&self, x: &[u8]) -> f64 {
        let mut total = 0.0;
        for (n, &xn) in x.iter().enumerate() {
            if xn != 0 {
                total += self.weight(n);
            }
        }
        total
    }

    /// Battery levels `B_0..B_N` under the equality recursion, or `None`
    /// when some transmission exceeds the battery.
    pub fn battery_trajectory(&self, x: &[u8]) -> Option<Vec<u32>> {
        let mut b = self.b0;
        let mut out = Vec::with_capacity(x.len());
        for (n, &xn) in x.iter().enumerate() {
            out.push(b);
            let spent = if xn != 0 { self.costs[n] } else { 0 };
            if spent > b {
                return None;
            }
            b = (b - spent + self.harvests[n]).min(self.b_max);
        }
        Some(out)
    }

    pub fn is_feasible(&self, x: &[u8]) -> bool {
        x.len() == self.n_slots() && self.battery_trajectory(x).is_some()
    }
}
