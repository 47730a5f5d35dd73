use super::bab::MilpSolution;
use super::{OfflineError, OfflineInstance};

/// Largest instance [`exhaustive_solve`] accepts.
pub const EXHAUSTIVE_MAX_SLOTS: usize = 20;

/// Exact optimum by enumerating transmit vectors in lexicographic order
/// (drop before transmit), abandoning a prefix as soon as it overdraws the
/// battery. The first vector reaching the best value is kept.
pub fn exhaustive_solve(inst: &OfflineInstance) -> Result<MilpSolution, OfflineError> {
    inst.validate()?;
    let n = inst.n_slots();
    if n > EXHAUSTIVE_MAX_SLOTS {
        return Err(OfflineError::TooLarge {
            n_slots: n,
            limit: EXHAUSTIVE_MAX_SLOTS,
        });
    }
    let mut search = Search {
        inst,
        x: vec![0; n],
        best_x: vec![0; n],
        best: f64::NEG_INFINITY,
        leaves: 0,
    };
    search.visit(0, inst.b0);
    Ok(MilpSolution {
        x: search.best_x,
        value: search.best,
        proved_optimal: true,
        nodes_explored: search.leaves,
    })
}

struct Search<'a> {
    inst: &'a OfflineInstance,
    x: Vec<u8>,
    best_x: Vec<u8>,
    best: f64,
    leaves: u64,
}

impl Search<'_> {
    fn visit(&mut self, n: usize, battery: u32) {
        if n == self.x.len() {
            self.leaves += 1;
            let value = self.inst.objective(&self.x);
            if value > self.best {
                self.best = value;
                self.best_x.copy_from_slice(&self.x);
            }
            return;
        }
        let inst = self.inst;
        for xn in [0u8, 1] {
            let spent = if xn == 1 { inst.costs[n] } else { 0 };
            if spent > battery {
                continue;
            }
            self.x[n] = xn;
            self.visit(n + 1, (battery - spent + inst.harvests[n]).min(inst.b_max));
        }
        self.x[n] = 0;
    }
}
