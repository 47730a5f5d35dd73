//! Method comparisons over a parameter sweep, evaluated on shared seeded
//! realizations and emitted as CSV.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Duration;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dp::{policy_iteration, relative_value_iteration, DpConfig};
use crate::mdp::{FiniteMdp, Policy, Scenario, ScenarioError, TransmitterMdp};
use crate::offline::{
    bab_solve_with_root, exhaustive_solve, lp_relaxation_bound, BabConfig, InitialIncumbent, PivotRule,
};
use crate::rl::{q_learning_run, r_learning_run, LearningConfig};
use crate::sim::{
    estimate, evaluate_policies, realization_seed, sample_realization, EstimateReport, EvalConfig, Metric, SimError,
};

pub const EXPERIMENT_SCHEMA_VERSION: u32 = 1;

/// Header of the result table.
pub const CSV_HEADER: &str =
    "experiment,grid_param,grid_value,method,metric,estimate,sigma_hat,eps_T,eps_N,lo,hi,seed,n_realizations";

/// Learning-time grid of the `fig2` preset.
pub const FIG2_LEARNING_GRID: [f64; 14] = [
    10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1e3, 2e3, 5e3, 1e4, 2e4, 5e4, 1e5, 2e5,
];

const LEARNING_SEED_SALT: u64 = 0x6c65_6172_6e69_6e67;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ExperimentError> {
    Err(ExperimentError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    /// Expected total discounted data.
    Dsp,
    /// Long-run throughput; the discount is forced to 1.
    Tp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pi,
    Rvi,
    Qlearn,
    Rlearn,
    Bab,
    Lp,
    Greedy,
    Exhaustive,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Pi,
        Method::Rvi,
        Method::Qlearn,
        Method::Rlearn,
        Method::Bab,
        Method::Lp,
        Method::Greedy,
        Method::Exhaustive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pi => "pi",
            Method::Rvi => "rvi",
            Method::Qlearn => "qlearn",
            Method::Rlearn => "rlearn",
            Method::Bab => "bab",
            Method::Lp => "lp",
            Method::Greedy => "greedy",
            Method::Exhaustive => "exhaustive",
        }
    }

    fn allowed(self, problem: Problem) -> bool {
        match problem {
            Problem::Dsp => !matches!(self, Method::Rvi | Method::Rlearn),
            Problem::Tp => matches!(self, Method::Rvi | Method::Rlearn | Method::Bab | Method::Lp | Method::Greedy),
        }
    }

    fn learns(self) -> bool {
        matches!(self, Method::Qlearn | Method::Rlearn)
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridParam {
    #[serde(rename = "L")]
    LearningSlots,
    #[serde(rename = "p_H")]
    HarvestPersistence,
    #[serde(rename = "B_max")]
    BatteryCapacity,
}

impl GridParam {
    pub fn name(self) -> &'static str {
        match self {
            GridParam::LearningSlots => "L",
            GridParam::HarvestPersistence => "p_H",
            GridParam::BatteryCapacity => "B_max",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub param: GridParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub schema_version: u32,
    /// Written to the `experiment` column.
    pub name: String,
    pub scenario: Scenario,
    pub problem: Problem,
    pub methods: Vec<Method>,
    /// `None` evaluates the scenario as given at a single point.
    pub sweep: Option<Sweep>,
    pub eval: EvalConfig,
    /// Learner settings; `seed` and `snapshots` are set per run.
    pub learning: LearningConfig,
    /// Independent learning runs per grid point; realization `t` is
    /// evaluated with the policy of run `t mod learning_runs`.
    pub learning_runs: usize,
    pub bab_timeout_s: Option<f64>,
    pub bab_incumbent: InitialIncumbent,
    pub pivot_rule: PivotRule,
    pub dp: DpConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            schema_version: EXPERIMENT_SCHEMA_VERSION,
            name: "custom".into(),
            scenario: Scenario::bundled(),
            problem: Problem::Dsp,
            methods: Vec::new(),
            sweep: None,
            eval: EvalConfig::default(),
            learning: LearningConfig::default(),
            learning_runs: 50,
            bab_timeout_s: Some(20.0),
            bab_incumbent: InitialIncumbent::AllDrop,
            pivot_rule: PivotRule::Bland,
            dp: DpConfig::default(),
        }
    }
}

impl ExperimentSpec {
    /// The figure presets `fig2`..`fig5`, all on the bundled scenario.
    pub fn preset(name: &str, base_seed: u64) -> Option<Self> {
        use Method::*;
        let p_h_grid = vec![0.5, 0.6, 0.7, 0.8, 0.9];
        let mut spec = Self {
            name: name.into(),
            ..Self::default()
        };
        spec.eval.base_seed = base_seed;
        match name {
            "fig2" => {
                spec.methods = vec![Qlearn, Pi, Bab, Lp, Greedy];
                spec.sweep = Some(Sweep {
                    param: GridParam::LearningSlots,
                    values: FIG2_LEARNING_GRID.to_vec(),
                });
            }
            "fig3" => {
                spec.methods = vec![Pi, Qlearn, Bab, Lp, Greedy];
                spec.sweep = Some(Sweep {
                    param: GridParam::HarvestPersistence,
                    values: p_h_grid,
                });
            }
            "fig4" => {
                spec.methods = vec![Pi, Qlearn, Bab, Lp, Greedy];
                spec.sweep = Some(Sweep {
                    param: GridParam::BatteryCapacity,
                    values: (5..=9).map(f64::from).collect(),
                });
            }
            "fig5" => {
                spec.problem = Problem::Tp;
                spec.methods = vec![Rvi, Rlearn, Bab, Lp, Greedy];
                spec.learning.learning_slots = 200_000;
                spec.bab_incumbent = InitialIncumbent::BatteryDp;
                spec.bab_timeout_s = Some(0.05);
                spec.sweep = Some(Sweep {
                    param: GridParam::HarvestPersistence,
                    values: p_h_grid,
                });
            }
            _ => return None,
        }
        Some(spec)
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Invalid(format!("line {}: {e}", e.line())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    fn grid(&self) -> Vec<Option<f64>> {
        match &self.sweep {
            Some(s) => s.values.iter().map(|&v| Some(v)).collect(),
            None => vec![None],
        }
    }

    /// Scenario at one grid point.
    pub fn scenario_at(&self, value: Option<f64>) -> Result<Scenario, ExperimentError> {
        let mut sc = self.scenario.clone();
        if let (Some(sweep), Some(v)) = (&self.sweep, value) {
            match sweep.param {
                GridParam::LearningSlots => {}
                GridParam::HarvestPersistence => sc.set_harvest_persistence(v)?,
                GridParam::BatteryCapacity => sc.battery_capacity = v as u32,
            }
        }
        Ok(sc)
    }

    fn mdp_at(&self, value: Option<f64>) -> Result<TransmitterMdp, ExperimentError> {
        let sc = self.scenario_at(value)?;
        Ok(match self.problem {
            Problem::Dsp => TransmitterMdp::new(sc)?,
            Problem::Tp => TransmitterMdp::with_discount(sc, 1.0)?,
        })
    }

    fn learning_slots_at(&self, value: Option<f64>) -> u64 {
        match (&self.sweep, value) {
            (Some(s), Some(v)) if s.param == GridParam::LearningSlots => v as u64,
            _ => self.learning.learning_slots,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.schema_version != EXPERIMENT_SCHEMA_VERSION {
            return invalid(format!(
                "schema_version {} (expected {EXPERIMENT_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        self.eval.validate()?;
        self.learning
            .validate()
            .map_err(|e| ExperimentError::Invalid(e.to_string()))?;
        if self.learning_runs == 0 {
            return invalid("learning_runs must be at least 1");
        }
        if let Some(t) = self.bab_timeout_s {
            if !(t >= 0.0) {
                return invalid(format!("bab_timeout_s {t} must be nonnegative"));
            }
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return invalid(format!("method {} listed twice", m.name()));
            }
            if !m.allowed(self.problem) {
                return invalid(format!("method {} does not apply to {:?}", m.name(), self.problem));
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return invalid("sweep has no values");
            }
            for &v in &s.values {
                let ok = match s.param {
                    GridParam::LearningSlots => v >= 1.0 && v.fract() == 0.0,
                    GridParam::HarvestPersistence => (0.0..=1.0).contains(&v),
                    GridParam::BatteryCapacity => v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64,
                };
                if !ok {
                    return invalid(format!("{} value {v} out of range", s.param.name()));
                }
            }
        }
        for v in self.grid() {
            let mdp = self.mdp_at(v)?;
            let discounted_method = self.methods.iter().any(|m| matches!(m, Method::Pi | Method::Qlearn));
            if self.problem == Problem::Dsp && discounted_method && mdp.discount() >= 1.0 {
                return invalid("pi and qlearn need a discount below 1");
            }
        }
        Ok(())
    }
}

/// One `(grid point, method)` result; `report` is `None` when the method
/// failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub grid_param: Option<GridParam>,
    pub grid_value: Option<f64>,
    pub method: Method,
    pub metric: Metric,
    pub report: Option<EstimateReport>,
    pub error: Option<String>,
    pub seed: u64,
    pub n_realizations: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn failures(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| r.report.is_none())
    }

    pub fn get(&self, grid_value: Option<f64>, method: Method) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.grid_value == grid_value && r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let grid_value = r.grid_value.map(|v| v.to_string()).unwrap_or_default();
            let numbers = match &r.report {
                Some(e) => format!(
                    "{},{},{},{},{},{}",
                    e.estimate, e.sigma_hat, e.eps_t, e.eps_n, e.lo, e.hi
                ),
                None => ",,,,,".to_string(),
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.experiment,
                r.grid_param.map(GridParam::name).unwrap_or(""),
                grid_value,
                r.method.name(),
                r.metric.name(),
                numbers,
                r.seed,
                r.n_realizations
            )
            .expect("writing to a String");
        }
        out
    }
}

/// Builds a rayon pool capped by `EHOPT_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool, ExperimentError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("EHOPT_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| ExperimentError::Invalid(format!("EHOPT_THREADS={v} is not a thread count")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| ExperimentError::Invalid(format!("thread pool: {e}")))
}

/// Seeds of learning run `r`: `(exploration, environment)`.
pub fn learning_seeds(base_seed: u64, r: usize) -> (u64, u64) {
    let salted = base_seed ^ LEARNING_SEED_SALT;
    (
        realization_seed(salted, 2 * r as u64),
        realization_seed(salted, 2 * r as u64 + 1),
    )
}

/// Greedy policies of `runs` seeded learning runs, recorded after each of
/// `checkpoints` slots. Indexed `[checkpoint][run]`.
pub fn learned_policies(
    mdp: &TransmitterMdp,
    method: Method,
    base: &LearningConfig,
    base_seed: u64,
    runs: usize,
    checkpoints: &[u64],
) -> Result<Vec<Vec<Policy>>, String> {
    let per_run: Vec<Result<Vec<Policy>, String>> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let (seed, env_seed) = learning_seeds(base_seed, r);
            let cfg = LearningConfig {
                seed,
                learning_slots: *checkpoints.iter().max().unwrap_or(&1),
                snapshots: checkpoints.to_vec(),
                ..base.clone()
            };
            let trace = match method {
                Method::Qlearn => q_learning_run::<f64>(mdp, &cfg, env_seed).map(|o| o.trace),
                Method::Rlearn => r_learning_run::<f64>(mdp, &cfg, env_seed).map(|o| o.trace),
                _ => unreachable!("not a learning method"),
            }
            .map_err(|e| e.to_string())?;
            Ok(checkpoints
                .iter()
                .map(|&c| {
                    trace
                        .iter()
                        .find(|s| s.slot == c)
                        .expect("snapshot recorded at every checkpoint")
                        .policy
                        .clone()
                })
                .collect())
        })
        .collect();
    let per_run = per_run.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok((0..checkpoints.len())
        .map(|c| per_run.iter().map(|p| p[c].clone()).collect())
        .collect())
}

/// Per-realization values of the offline methods.
#[derive(Debug, Default)]
struct OfflineValues {
    bab: Option<Result<Vec<f64>, String>>,
    lp: Option<Result<Vec<f64>, String>>,
    exhaustive: Option<Result<Vec<f64>, String>>,
}

fn offline_values(spec: &ExperimentSpec, mdp: &TransmitterMdp, metric: Metric) -> OfflineValues {
    let want = |m| spec.methods.contains(&m);
    let cfg = &spec.eval;
    let scale = match metric {
        Metric::DiscountedData => 1.0,
        Metric::Throughput => 1.0 / cfg.n_slots() as f64,
    };
    let bab_config = BabConfig {
        timeout: spec.bab_timeout_s.map(Duration::from_secs_f64),
        pivot_rule: spec.pivot_rule,
        incumbent: spec.bab_incumbent,
        ..BabConfig::default()
    };
    let mut out = OfflineValues::default();
    if want(Method::Bab) {
        let solved: Vec<Result<(f64, f64, bool), String>> = (0..cfg.n_realizations as u64)
            .into_par_iter()
            .map(|t| {
                let inst = sample_realization(mdp, cfg, t).to_offline(mdp, cfg.initial_battery);
                let (sol, root) = bab_solve_with_root(&inst, &bab_config).map_err(|e| e.to_string())?;
                Ok((sol.value * scale, root.value * scale, sol.proved_optimal))
            })
            .collect();
        match solved.into_iter().collect::<Result<Vec<_>, _>>() {
            Ok(v) => {
                let unproved = v.iter().filter(|s| !s.2).count();
                if unproved > 0 {
                    warn!("branch and bound hit its timeout on {unproved} realizations");
                }
                out.bab = Some(Ok(v.iter().map(|s| s.0).collect()));
                if want(Method::Lp) {
                    out.lp = Some(Ok(v.iter().map(|s| s.1).collect()));
                }
            }
            Err(e) => {
                out.bab = Some(Err(e.clone()));
            }
        }
    }
    if want(Method::Lp) && !matches!(out.lp, Some(Ok(_))) {
        out.lp = Some(
            (0..cfg.n_realizations as u64)
                .into_par_iter()
                .map(|t| {
                    let inst = sample_realization(mdp, cfg, t).to_offline(mdp, cfg.initial_battery);
                    lp_relaxation_bound::<f64>(&inst)
                        .map(|r| r.value * scale)
                        .map_err(|e| e.to_string())
                })
                .collect(),
        );
    }
    if want(Method::Exhaustive) {
        out.exhaustive = Some(
            (0..cfg.n_realizations as u64)
                .into_par_iter()
                .map(|t| {
                    let inst = sample_realization(mdp, cfg, t).to_offline(mdp, cfg.initial_battery);
                    exhaustive_solve(&inst)
                        .map(|s| s.value * scale)
                        .map_err(|e| e.to_string())
                })
                .collect(),
        );
    }
    out
}

fn policy_values(spec: &ExperimentSpec, mdp: &TransmitterMdp, metric: Metric, policies: &[Policy]) -> Vec<f64> {
    let r = policies.len() as u64;
    evaluate_policies(mdp, &spec.eval, metric, |t| &policies[(t % r) as usize])
}

/// Runs every method at every grid point on the same realizations.
///
/// Results that do not depend on the grid parameter (everything but the
/// learners on an `L` sweep) are computed once and reused. A failing
/// method yields a row without a report; the run continues.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable, ExperimentError> {
    spec.validate()?;
    let metric = match spec.problem {
        Problem::Dsp => Metric::DiscountedData,
        Problem::Tp => Metric::Throughput,
    };
    let grid = spec.grid();
    let learning_sweep = spec.sweep.as_ref().is_some_and(|s| s.param == GridParam::LearningSlots);
    let mut table = ResultTable::default();

    // On an L sweep the model is shared, so each learner runs once with a
    // snapshot at every grid value.
    let shared_mdp = if learning_sweep { Some(spec.mdp_at(None)?) } else { None };
    let mut shared_values: Vec<(Method, Result<Vec<f64>, String>)> = Vec::new();
    let mut shared_learned: Vec<(Method, Result<Vec<Vec<Policy>>, String>)> = Vec::new();
    if let Some(mdp) = &shared_mdp {
        let checkpoints: Vec<u64> = grid.iter().map(|v| v.map_or(1, |v| v as u64)).collect();
        for &m in &spec.methods {
            if m.learns() {
                info!("{}: learning {} runs up to L={}", m.name(), spec.learning_runs, checkpoints.iter().max().unwrap());
                shared_learned.push((
                    m,
                    learned_policies(mdp, m, &spec.learning, spec.eval.base_seed, spec.learning_runs, &checkpoints),
                ));
            }
        }
        shared_values = method_values(spec, mdp, metric, None)?;
    }

    for (gi, &value) in grid.iter().enumerate() {
        let owned;
        let mdp = match &shared_mdp {
            Some(m) => m,
            None => {
                owned = spec.mdp_at(value)?;
                &owned
            }
        };
        let eps_n = metric.eps_n(mdp.scenario().max_packet_bits(), mdp.discount(), spec.eval.horizon)?;
        let values = if learning_sweep {
            let mut v = Vec::new();
            for &m in &spec.methods {
                if m.learns() {
                    let learned = &shared_learned.iter().find(|(k, _)| *k == m).expect("learned above").1;
                    v.push((
                        m,
                        learned
                            .as_ref()
                            .map(|per_checkpoint| policy_values(spec, mdp, metric, &per_checkpoint[gi]))
                            .map_err(Clone::clone),
                    ));
                } else {
                    let shared = &shared_values.iter().find(|(k, _)| *k == m).expect("computed above").1;
                    v.push((m, shared.clone()));
                }
            }
            v
        } else {
            info!("{} at {:?}", spec.name, value);
            method_values(spec, mdp, metric, value)?
        };
        for (m, vals) in values {
            let (report, error) = match vals.and_then(|v| estimate(&v, spec.eval.confidence, eps_n).map_err(|e| e.to_string())) {
                Ok(r) => (Some(r), None),
                Err(e) => {
                    warn!("{} failed at {:?}: {e}", m.name(), value);
                    (None, Some(e))
                }
            };
            table.rows.push(ResultRow {
                experiment: spec.name.clone(),
                grid_param: spec.sweep.as_ref().map(|s| s.param),
                grid_value: value,
                method: m,
                metric,
                report,
                error,
                seed: spec.eval.base_seed,
                n_realizations: spec.eval.n_realizations,
            });
        }
    }
    Ok(table)
}

/// Per-realization values of every method at one grid point, in spec
/// order. Learners are skipped when `value` is `None` on an `L` sweep.
fn method_values(
    spec: &ExperimentSpec,
    mdp: &TransmitterMdp,
    metric: Metric,
    value: Option<f64>,
) -> Result<Vec<(Method, Result<Vec<f64>, String>)>, ExperimentError> {
    let learning_sweep = spec.sweep.as_ref().is_some_and(|s| s.param == GridParam::LearningSlots);
    let mut offline = offline_values(spec, mdp, metric);
    let mut out = Vec::new();
    for &m in &spec.methods {
        let vals = match m {
            Method::Pi => policy_iteration::<f64, _>(mdp, &spec.dp)
                .map(|o| policy_values(spec, mdp, metric, &[o.policy]))
                .map_err(|e| e.to_string()),
            Method::Rvi => relative_value_iteration::<f64, _>(mdp, &spec.dp)
                .map(|o| policy_values(spec, mdp, metric, &[o.policy]))
                .map_err(|e| e.to_string()),
            Method::Greedy => Ok(policy_values(spec, mdp, metric, &[mdp.greedy_policy()])),
            Method::Qlearn | Method::Rlearn => {
                if learning_sweep {
                    continue;
                }
                let slots = spec.learning_slots_at(value);
                learned_policies(mdp, m, &spec.learning, spec.eval.base_seed, spec.learning_runs, &[slots])
                    .map(|mut p| policy_values(spec, mdp, metric, &p.remove(0)))
            }
            Method::Bab => offline.bab.take().expect("computed when requested"),
            Method::Lp => offline.lp.take().expect("computed when requested"),
            Method::Exhaustive => offline.exhaustive.take().expect("computed when requested"),
        };
        out.push((m, vals));
    }
    Ok(out)
}
