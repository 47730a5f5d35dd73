//! Seeded realizations, causal rollouts, the two performance metrics and
//! Monte Carlo confidence intervals.

mod realization;
mod rollout;
mod stats;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{Policy, StateSpace, TransmitterMdp};

pub use realization::{realization_seed, sample_realization, splitmix64, Realization};
pub use rollout::{discounted_data, rollout_policy, throughput, Trajectory};
pub use stats::{estimate, student_t_quantile, truncation_error, EstimateReport};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("truncation error diverges for an undiscounted horizon")]
    DivergentHorizon,
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
    #[error("instance does not match the scenario: {0}")]
    Unmatched(String),
}

/// Monte Carlo evaluation settings. Realizations cover slots `0..=horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub horizon: usize,
    pub n_realizations: usize,
    pub confidence: f64,
    pub base_seed: u64,
    pub initial_battery: u32,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            horizon: 100,
            n_realizations: 2000,
            confidence: 0.9,
            base_seed: 0,
            initial_battery: 0,
        }
    }
}

impl EvalConfig {
    pub fn n_slots(&self) -> usize {
        self.horizon + 1
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.horizon < 1 {
            return Err(SimError::InvalidConfig("horizon must be at least 1".into()));
        }
        if self.n_realizations < 2 {
            return Err(SimError::InvalidConfig("at least 2 realizations needed".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(SimError::InvalidConfig(format!("confidence {} outside (0, 1)", self.confidence)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Discounted data over the horizon.
    DiscountedData,
    /// Bits per slot over the horizon.
    Throughput,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::DiscountedData => "discounted_data",
            Metric::Throughput => "throughput",
        }
    }

    pub fn of(self, trajectory: &Trajectory, gamma: f64) -> f64 {
        match self {
            Metric::DiscountedData => discounted_data(trajectory, gamma),
            Metric::Throughput => throughput(trajectory),
        }
    }

    /// Truncation error for this metric; throughput intervals use zero.
    pub fn eps_n(self, d_max: f64, gamma: f64, horizon: usize) -> Result<f64, SimError> {
        match self {
            Metric::DiscountedData => truncation_error(d_max, gamma, horizon),
            Metric::Throughput => Ok(0.0),
        }
    }
}

/// Average of `v` over states holding `b0` energy units, i.e. the value
/// from a uniformly drawn `(e, d, h)`.
pub fn expected_value_from_v(v: &[f64], space: &StateSpace, b0: u32) -> f64 {
    let n_exo = space.n_exogenous();
    let total: f64 = (0..n_exo).map(|exo| v[space.index_of_parts(exo, b0)]).sum();
    total / n_exo as f64
}

/// Per-realization metric of `policy_for(t)` over the configured
/// realizations, in realization order.
pub fn evaluate_policies<'p, F>(mdp: &TransmitterMdp, config: &EvalConfig, metric: Metric, policy_for: F) -> Vec<f64>
where
    F: Fn(u64) -> &'p Policy + Sync,
{
    let gamma = crate::FiniteMdp::discount(mdp);
    (0..config.n_realizations as u64)
        .into_par_iter()
        .map(|t| {
            let r = sample_realization(mdp, config, t);
            let tr = rollout_policy(policy_for(t), &r, mdp, config.initial_battery);
            metric.of(&tr, gamma)
        })
        .collect()
}

/// Writes per-realization values as CSV with columns `t,seed,metric,value`.
pub fn write_values_csv<W: Write>(
    mut out: W,
    config: &EvalConfig,
    metric: Metric,
    values: &[f64],
) -> std::io::Result<()> {
    writeln!(out, "t,seed,metric,value")?;
    for (t, v) in values.iter().enumerate() {
        let seed = realization_seed(config.base_seed, t as u64);
        writeln!(out, "{t},{seed},{},{v}", metric.name())?;
    }
    Ok(())
}
