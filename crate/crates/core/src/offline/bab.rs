use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::lp::{simplex_solve, LpStatus, PivotRule, SimplexOptions};
use super::milp::{build_milp, first_fractional, x_var, Relaxation};
use super::{battery_dp_solve, OfflineError, OfflineInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeSelection {
    /// Largest inherited bound first; newest node among equal bounds.
    BestBound,
    /// Newest node first.
    DepthFirst,
}

/// Where the search's first incumbent comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialIncumbent {
    /// Transmit nothing (value 0).
    #[default]
    AllDrop,
    /// The exact optimum from [`battery_dp_solve`](super::battery_dp_solve).
    /// The search then only certifies it, and the returned value does not
    /// depend on when a timeout fires.
    BatteryDp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BabConfig {
    /// Wall-clock limit; `None` searches to completion.
    pub timeout: Option<Duration>,
    pub node_selection: NodeSelection,
    pub pivot_rule: PivotRule,
    pub incumbent: InitialIncumbent,
}

impl Default for BabConfig {
    fn default() -> Self {
        Self {
            timeout: Some(Duration::from_secs(20)),
            node_selection: NodeSelection::BestBound,
            pivot_rule: PivotRule::Bland,
            incumbent: InitialIncumbent::AllDrop,
        }
    }
}

impl BabConfig {
    pub fn unlimited() -> Self {
        Self {
            timeout: None,
            ..Self::default()
        }
    }
}

/// A subproblem: transmit decisions fixed so far and the bound inherited
/// from its parent's relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct BabNode {
    pub fixed: Vec<Option<bool>>,
    pub upper_bound: f64,
    seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpSolution {
    pub x: Vec<u8>,
    pub value: f64,
    pub proved_optimal: bool,
    pub nodes_explored: u64,
}

struct Queued {
    key: f64,
    node: BabNode,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key).then(self.node.seq.cmp(&other.node.seq))
    }
}

/// Greatest common divisor of the objective weights when they are all
/// integers, which lets bounds be rounded down to attainable values.
fn integer_step(inst: &OfflineInstance) -> Option<f64> {
    if inst.discount != 1.0 {
        return None;
    }
    let mut g: u64 = 0;
    for &d in &inst.packet_bits {
        if d.fract() != 0.0 || d > 1e15 {
            return None;
        }
        let mut a = d as u64;
        let mut b = g;
        while b != 0 {
            (a, b) = (b, a % b);
        }
        g = a;
    }
    (g > 0).then_some(g as f64)
}

fn prune_tolerance(incumbent: f64) -> f64 {
    1e-9 * incumbent.abs().max(1.0)
}

/// LP-based branch and bound over the transmit vector.
///
/// Each node's relaxation is solved from scratch. A relaxation whose
/// transmit part is integral yields a candidate whose battery levels are
/// rebuilt with the equality recursion; otherwise the node branches on its
/// lowest-index fractional slot. The search starts from the all-drop
/// incumbent and a strictly better candidate replaces it.
pub fn bab_solve(inst: &OfflineInstance, config: &BabConfig) -> Result<MilpSolution, OfflineError> {
    bab_solve_with_root(inst, config).map(|(s, _)| s)
}

/// As [`bab_solve`], also returning the root relaxation.
pub fn bab_solve_with_root(
    inst: &OfflineInstance,
    config: &BabConfig,
) -> Result<(MilpSolution, Relaxation<f64>), OfflineError> {
    inst.validate()?;
    let start = Instant::now();
    let n = inst.n_slots();
    let base = build_milp::<f64>(inst);
    let opts = SimplexOptions {
        rule: config.pivot_rule,
        ..SimplexOptions::default()
    };
    let step = integer_step(inst);

    let mut best_x = match config.incumbent {
        InitialIncumbent::AllDrop => vec![0u8; n],
        InitialIncumbent::BatteryDp => battery_dp_solve(inst)?.x,
    };
    let mut best = inst.objective(&best_x);
    let mut nodes: u64 = 0;
    let mut seq: u64 = 0;
    let mut root: Option<Relaxation<f64>> = None;

    let mut heap = BinaryHeap::new();
    heap.push(Queued {
        key: f64::INFINITY,
        node: BabNode {
            fixed: vec![None; n],
            upper_bound: f64::INFINITY,
            seq,
        },
    });
    let mut timed_out = false;

    while let Some(Queued { node, .. }) = heap.pop() {
        if node.upper_bound <= best + prune_tolerance(best) {
            continue;
        }
        if root.is_some() && config.timeout.is_some_and(|t| start.elapsed() >= t) {
            timed_out = true;
            break;
        }
        nodes += 1;
        let mut p = base.clone();
        for (k, f) in node.fixed.iter().enumerate() {
            if let Some(v) = f {
                let v = if *v { 1.0 } else { 0.0 };
                p.lower[x_var(k)] = v;
                p.upper[x_var(k)] = v;
            }
        }
        let sol = simplex_solve(&p, &opts)?;
        let relax = Relaxation::from_solution(inst, sol);
        if root.is_none() {
            if relax.status != LpStatus::Optimal {
                return Err(OfflineError::NoFeasibleSolution);
            }
            root = Some(relax.clone());
        }
        if relax.status != LpStatus::Optimal {
            continue;
        }
        let mut bound = relax.value;
        if let Some(g) = step {
            bound = ((bound + 1e-6 * bound.abs().max(1.0)) / g).floor() * g;
        }
        if bound <= best + prune_tolerance(best) {
            continue;
        }
        match first_fractional(&relax.x) {
            None => {
                let x = relax.rounded();
                if inst.is_feasible(&x) {
                    let value = inst.objective(&x);
                    if value > best {
                        best = value;
                        best_x = x;
                    }
                }
            }
            Some(k) => {
                for choice in [false, true] {
                    let mut fixed = node.fixed.clone();
                    fixed[k] = Some(choice);
                    seq += 1;
                    let key = match config.node_selection {
                        NodeSelection::BestBound => bound,
                        NodeSelection::DepthFirst => seq as f64,
                    };
                    heap.push(Queued {
                        key,
                        node: BabNode {
                            fixed,
                            upper_bound: bound,
                            seq,
                        },
                    });
                }
            }
        }
    }

    let root = root.expect("root node is always explored");
    Ok((
        MilpSolution {
            x: best_x,
            value: best,
            proved_optimal: !timed_out,
            nodes_explored: nodes,
        },
        root,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_slot_instance() {
        let inst = OfflineInstance {
            harvests: vec![2, 0, 2],
            packet_bits: vec![300.0, 600.0, 300.0],
            costs: vec![2, 2, 2],
            b_max: 5,
            b0: 0,
            discount: 1.0,
        };
        let s = bab_solve(&inst, &BabConfig::default()).unwrap();
        assert_eq!(s.x, vec![0, 1, 0]);
        assert_eq!(s.value, 600.0);
        assert!(s.proved_optimal);
        assert_eq!(s.nodes_explored, 1);
    }

    #[test]
    fn single_slot_with_energy() {
        let inst = OfflineInstance {
            harvests: vec![0],
            packet_bits: vec![300.0],
            costs: vec![1],
            b_max: 5,
            b0: 1,
            discount: 0.9,
        };
        let s = bab_solve(&inst, &BabConfig::default()).unwrap();
        assert_eq!(s.x, vec![1]);
        assert_eq!(s.value, 300.0);
    }

    #[test]
    fn branches_on_fractional_root() {
        // Three units of energy, costs 2: the relaxation spends 1.5 packets.
        let inst = OfflineInstance {
            harvests: vec![0, 0],
            packet_bits: vec![300.0, 300.0],
            costs: vec![2, 2],
            b_max: 5,
            b0: 3,
            discount: 1.0,
        };
        let (s, root) = bab_solve_with_root(&inst, &BabConfig::unlimited()).unwrap();
        assert!(!root.integral);
        assert!((root.value - 450.0).abs() < 1e-9);
        assert_eq!(s.value, 300.0);
        assert!(s.nodes_explored <= 7);
        assert!(inst.is_feasible(&s.x));
        assert_eq!(inst.objective(&s.x), 300.0);
    }

    #[test]
    fn zero_timeout_keeps_all_drop_incumbent() {
        let inst = OfflineInstance {
            harvests: vec![0, 0],
            packet_bits: vec![300.0, 300.0],
            costs: vec![2, 2],
            b_max: 5,
            b0: 3,
            discount: 0.9,
        };
        let config = BabConfig {
            timeout: Some(Duration::ZERO),
            ..BabConfig::default()
        };
        let s = bab_solve(&inst, &config).unwrap();
        assert!(!s.proved_optimal);
        assert_eq!(s.nodes_explored, 1);
        assert_eq!((s.x, s.value), (vec![0, 0], 0.0));
    }

    #[test]
    fn dp_incumbent_survives_zero_timeout() {
        let inst = OfflineInstance {
            harvests: vec![0, 0],
            packet_bits: vec![300.0, 300.0],
            costs: vec![2, 2],
            b_max: 5,
            b0: 3,
            discount: 0.9,
        };
        let config = BabConfig {
            timeout: Some(Duration::ZERO),
            incumbent: InitialIncumbent::BatteryDp,
            ..BabConfig::default()
        };
        let s = bab_solve(&inst, &config).unwrap();
        assert_eq!((s.x, s.value), (vec![1, 0], 300.0));
    }

    #[test]
    fn integer_step_needs_undiscounted_integers() {
        let mut inst = OfflineInstance {
            harvests: vec![0; 2],
            packet_bits: vec![300.0, 600.0],
            costs: vec![1; 2],
            b_max: 1,
            b0: 0,
            discount: 1.0,
        };
        assert_eq!(integer_step(&inst), Some(300.0));
        inst.discount = 0.9;
        assert_eq!(integer_step(&inst), None);
        inst.discount = 1.0;
        inst.packet_bits[0] = 0.5;
        assert_eq!(integer_step(&inst), None);
    }
}
