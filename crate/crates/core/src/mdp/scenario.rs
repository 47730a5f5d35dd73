use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::MarkovChain;

pub const SCHEMA_VERSION: u32 = 1;

/// Relative distance from an integer accepted when mapping a transmit
/// energy onto whole energy units. The bundled channel gains are quoted to
/// four significant digits, which leaves up to 4.2e-4 of rounding noise.
pub const DEFAULT_COST_TOLERANCE: f64 = 1e-3;

const BUNDLED: &str = include_str!("../../scenarios/default.json");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("scenario invalid ({invariant}): {detail}")]
    Invalid {
        invariant: &'static str,
        detail: String,
    },
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
}

impl ScenarioError {
    pub(crate) fn invalid(invariant: &'static str, detail: impl Into<String>) -> Self {
        Self::Invalid {
            invariant,
            detail: detail.into(),
        }
    }
}

impl From<serde_json::Error> for ScenarioError {
    fn from(e: serde_json::Error) -> Self {
        Self::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

/// Physical-layer constants of the low-power link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub bandwidth_hz: f64,
    pub tx_duration_s: f64,
    pub slot_duration_s: f64,
    pub noise_density_w_per_hz: f64,
    pub energy_unit_joules: f64,
}

impl PhysicalParams {
    /// 2 MHz, 5 ms transmissions in 10 ms slots, N0 = 10^-20.4 W/Hz, 2.5 uJ units.
    pub fn ieee802154e() -> Self {
        Self {
            bandwidth_hz: 2e6,
            tx_duration_s: 5e-3,
            slot_duration_s: 10e-3,
            noise_density_w_per_hz: 10f64.powf(-20.4),
            energy_unit_joules: 2.5e-6,
        }
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let fields = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("tx_duration_s", self.tx_duration_s),
            ("slot_duration_s", self.slot_duration_s),
            ("noise_density_w_per_hz", self.noise_density_w_per_hz),
            ("energy_unit_joules", self.energy_unit_joules),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(ScenarioError::invalid("positive-physical", format!("{name} = {v}")));
            }
        }
        if self.tx_duration_s > self.slot_duration_s {
            return Err(ScenarioError::invalid(
                "tx-within-slot",
                format!(
                    "tx_duration_s {} exceeds slot_duration_s {}",
                    self.tx_duration_s, self.slot_duration_s
                ),
            ));
        }
        Ok(())
    }
}

/// Minimum energy, in whole energy units, to deliver `d_bits` over a channel
/// with power gain `h_gain` in the low-SNR regime: `D ln2 N0 / H`.
pub fn energy_cost(
    d_bits: f64,
    h_gain: f64,
    physical: &PhysicalParams,
    tolerance: f64,
) -> Result<u32, ScenarioError> {
    if !(d_bits > 0.0 && h_gain > 0.0) {
        return Err(ScenarioError::invalid(
            "positive-labels",
            format!("packet {d_bits} bits / gain {h_gain} must be positive"),
        ));
    }
    let joules = d_bits * std::f64::consts::LN_2 * physical.noise_density_w_per_hz / h_gain;
    let units = joules / physical.energy_unit_joules;
    let rounded = units.round();
    if rounded < 1.0 || (units - rounded).abs() > tolerance * rounded {
        return Err(ScenarioError::invalid(
            "integral-energy-cost",
            format!("packet {d_bits} bits at gain {h_gain} needs {units} energy units"),
        ));
    }
    Ok(rounded as u32)
}

/// Transmit cost in energy units for every (packet, channel) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyCostTable {
    cost: Vec<Vec<u32>>,
}

impl EnergyCostTable {
    pub fn from_rows(cost: Vec<Vec<u32>>) -> Self {
        Self { cost }
    }

    pub fn get(&self, d_idx: usize, h_idx: usize) -> u32 {
        self.cost[d_idx][h_idx]
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.cost
    }

    /// Sorted set of distinct costs.
    pub fn distinct(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.cost.iter().flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn default_tolerance() -> f64 {
    DEFAULT_COST_TOLERANCE
}

/// Declarative problem definition: the three exogenous chains, battery and
/// discount, and the physical constants behind transmit costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    /// Harvested energy per slot, in energy units.
    pub energy_chain: MarkovChain,
    /// Packet sizes in bits.
    pub data_chain: MarkovChain,
    /// Channel power gains.
    pub channel_chain: MarkovChain,
    pub battery_capacity: u32,
    pub discount: f64,
    pub physical: PhysicalParams,
    /// Explicit cost table indexed `[d_idx][h_idx]`, overriding the Shannon mapping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_table: Option<Vec<Vec<u32>>>,
    #[serde(default = "default_tolerance")]
    pub cost_tolerance: f64,
}

impl Scenario {
    /// The bundled reference scenario: harvests {0, 2}, packets {300, 600}
    /// bits, two indoor channel gains, B_max = 5, discount 0.9 and
    /// harvest persistence 0.9.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED).expect("bundled scenario is valid")
    }

    /// Bundled scenario with a given harvest persistence and battery size.
    pub fn reference(harvest_persistence: f64, battery_capacity: u32) -> Self {
        let mut s = Self::bundled();
        s.set_harvest_persistence(harvest_persistence)
            .expect("bundled energy chain has two states");
        s.battery_capacity = battery_capacity;
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Sets the probability that a harvesting slot is followed by another
    /// harvesting slot (the last state of a two-state energy chain).
    pub fn set_harvest_persistence(&mut self, p: f64) -> Result<(), ScenarioError> {
        if self.energy_chain.len() != 2 {
            return Err(ScenarioError::invalid(
                "two-state-energy-chain",
                "harvest persistence needs a two-state energy chain",
            ));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(ScenarioError::invalid("probability-range", format!("persistence {p}")));
        }
        self.energy_chain.transition[1] = vec![1.0 - p, p];
        Ok(())
    }

    pub fn harvest_persistence(&self) -> Option<f64> {
        (self.energy_chain.len() == 2).then(|| self.energy_chain.transition[1][1])
    }

    pub fn max_packet_bits(&self) -> f64 {
        self.data_chain.labels.iter().cloned().fold(0.0, f64::max)
    }

    /// Checks every scenario invariant and returns the resolved cost table.
    pub fn validate(&self) -> Result<EnergyCostTable, ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::invalid(
                "schema-version",
                format!("expected {SCHEMA_VERSION}, found {}", self.schema_version),
            ));
        }
        self.energy_chain.validate("energy_chain")?;
        self.data_chain.validate("data_chain")?;
        self.channel_chain.validate("channel_chain")?;
        self.physical.validate()?;
        if self.battery_capacity < 1 {
            return Err(ScenarioError::invalid("battery-capacity", "battery_capacity must be >= 1"));
        }
        for &e in &self.energy_chain.labels {
            if e < 0.0 || e.fract() != 0.0 || e > self.battery_capacity as f64 {
                return Err(ScenarioError::invalid(
                    "integral-harvest",
                    format!(
                        "harvest label {e} must be an integer in [0, {}]",
                        self.battery_capacity
                    ),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(ScenarioError::invalid("discount-range", format!("discount {}", self.discount)));
        }
        if !(self.cost_tolerance >= 0.0) {
            return Err(ScenarioError::invalid("cost-tolerance", "cost_tolerance must be >= 0"));
        }
        self.cost_table()
    }

    fn cost_table(&self) -> Result<EnergyCostTable, ScenarioError> {
        let (nd, nh) = (self.data_chain.len(), self.channel_chain.len());
        let rows = match &self.cost_table {
            Some(rows) => {
                if rows.len() != nd || rows.iter().any(|r| r.len() != nh) {
                    return Err(ScenarioError::invalid(
                        "cost-table-shape",
                        format!("cost_table must be {nd}x{nh}"),
                    ));
                }
                if rows.iter().flatten().any(|&c| c == 0) {
                    return Err(ScenarioError::invalid(
                        "integral-energy-cost",
                        "explicit costs must be positive",
                    ));
                }
                rows.clone()
            }
            None => self
                .data_chain
                .labels
                .iter()
                .map(|&d| {
                    self.channel_chain
                        .labels
                        .iter()
                        .map(|&h| energy_cost(d, h, &self.physical, self.cost_tolerance))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?,
        };
        Ok(EnergyCostTable::from_rows(rows))
    }
}
