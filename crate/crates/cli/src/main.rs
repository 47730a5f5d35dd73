use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use ehopt_core::dp::{policy_evaluation, policy_gain, policy_iteration, relative_value_iteration, DpConfig};
use ehopt_core::experiment::{run_experiment, thread_pool, ExperimentSpec, Method, ResultRow};
use ehopt_core::offline::{
    bab_solve, battery_dp_solve, exhaustive_solve, lp_relaxation_bound, BabConfig, InitialIncumbent, OfflineInstance,
};
use ehopt_core::rl::{q_learning_run, r_learning_run, LearningConfig, LearningRate};
use ehopt_core::sim::{expected_value_from_v, sample_realization, write_values_csv, EvalConfig, Metric};
use ehopt_core::{Action, FiniteMdp, Policy, QTable, Scenario, TransmitterMdp};

const EXIT_INVALID: u8 = 2;
const EXIT_METHOD: u8 = 3;

/// Marks an error as bad input (exit code 2) rather than a solver failure.
#[derive(Debug)]
struct Invalid;

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("invalid input")
    }
}

trait InvalidExt<T> {
    fn invalid(self) -> Result<T>;
}

impl<T, E: Into<anyhow::Error>> InvalidExt<T> for std::result::Result<T, E> {
    fn invalid(self) -> Result<T> {
        self.map_err(|e| e.into().context(Invalid))
    }
}

#[derive(Parser)]
#[command(name = "ehopt", version, about = "Transmission scheduling for an energy-harvesting transmitter")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the MDP with known statistics.
    Solve(SolveArgs),
    /// Learn a policy from simulated interaction.
    Learn(LearnArgs),
    /// Solve one realization non-causally.
    Offline(OfflineArgs),
    /// Monte Carlo evaluation of one method.
    Evaluate(EvaluateArgs),
    /// Run a figure preset or a custom experiment spec.
    Experiment(ExperimentArgs),
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Scenario JSON; the bundled reference scenario when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Override the probability of harvesting again after a harvest.
    #[arg(long)]
    p_h: Option<f64>,
    /// Override the battery capacity.
    #[arg(long)]
    b_max: Option<u32>,
    /// Override the discount factor.
    #[arg(long)]
    discount: Option<f64>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario> {
        let mut sc = match &self.scenario {
            Some(p) => Scenario::load(p).invalid()?,
            None => Scenario::bundled(),
        };
        if let Some(p) = self.p_h {
            sc.set_harvest_persistence(p).invalid()?;
        }
        if let Some(b) = self.b_max {
            sc.battery_capacity = b;
        }
        if let Some(g) = self.discount {
            sc.discount = g;
        }
        sc.validate().invalid()?;
        Ok(sc)
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum SolveMethod {
    Pi,
    Rvi,
    Greedy,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value = "pi")]
    method: SolveMethod,
    /// Initial battery for the reported expected value.
    #[arg(long, default_value_t = 0)]
    b0: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum LearnMethod {
    Qlearn,
    Rlearn,
}

#[derive(Args)]
struct LearnArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value = "qlearn")]
    method: LearnMethod,
    #[arg(long, default_value_t = 10_000)]
    slots: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.07)]
    epsilon: f64,
    /// Constant learning rate; `--robbins-monro` replaces it with 1/(1+visits).
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long)]
    robbins_monro: bool,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum OfflineMethod {
    Bab,
    Lp,
    Exhaustive,
    Dp,
}

#[derive(Args)]
struct OfflineArgs {
    /// Instance JSON; otherwise a realization is sampled from the scenario.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Realization index under `--seed`.
    #[arg(long, default_value_t = 0)]
    index: u64,
    #[arg(long, default_value_t = 100)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    b0: u32,
    #[arg(long, value_enum, default_value = "bab")]
    method: OfflineMethod,
    /// Branch-and-bound time limit in seconds; 0 disables it.
    #[arg(long, default_value_t = 20.0)]
    timeout: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct EvalArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    confidence: Option<f64>,
    /// Learning runs per grid point.
    #[arg(long)]
    runs: Option<usize>,
    /// Learning slots for qlearn/rlearn.
    #[arg(long)]
    slots: Option<u64>,
    /// Branch-and-bound time limit per realization in seconds; 0 disables it.
    #[arg(long)]
    bab_timeout: Option<f64>,
    /// Seed branch and bound with the exact battery-level optimum.
    #[arg(long)]
    bab_dp_incumbent: bool,
}

impl EvalArgs {
    fn apply(&self, spec: &mut ExperimentSpec) {
        spec.eval.base_seed = self.seed;
        if let Some(t) = self.realizations {
            spec.eval.n_realizations = t;
        }
        if let Some(n) = self.horizon {
            spec.eval.horizon = n;
        }
        if let Some(d) = self.confidence {
            spec.eval.confidence = d;
        }
        if let Some(r) = self.runs {
            spec.learning_runs = r;
        }
        if let Some(l) = self.slots {
            spec.learning.learning_slots = l;
        }
        if let Some(t) = self.bab_timeout {
            spec.bab_timeout_s = (t > 0.0).then_some(t);
        }
        if self.bab_dp_incumbent {
            spec.bab_incumbent = InitialIncumbent::BatteryDp;
        }
    }
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    method: Method,
    /// Evaluate the throughput problem instead of discounted data.
    #[arg(long)]
    throughput: bool,
    #[command(flatten)]
    eval: EvalArgs,
    /// Write per-realization values as CSV.
    #[arg(long)]
    values_csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Preset {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Custom,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    preset: Preset,
    /// Spec JSON for `custom`.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Base seed; required for the figure presets.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    slots: Option<u64>,
    #[arg(long)]
    bab_timeout: Option<f64>,
    #[arg(long)]
    bab_dp_incumbent: bool,
    /// Comma-separated method subset.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the resolved spec as JSON.
    #[arg(long)]
    dump_spec: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INVALID) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = thread_pool()
        .invalid()
        .and_then(|pool| pool.install(|| run(cli.command)));
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Invalid>().is_some() {
                ExitCode::from(EXIT_INVALID)
            } else {
                ExitCode::from(EXIT_METHOD)
            }
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Solve(a) => solve(a),
        Command::Learn(a) => learn(a),
        Command::Offline(a) => offline(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Experiment(a) => experiment(a),
    }
    .map(|()| ExitCode::SUCCESS)
    .or_else(|e| if e.downcast_ref::<MethodFailed>().is_some() { Ok(ExitCode::from(EXIT_METHOD)) } else { Err(e) })
}

/// Results were written but at least one method failed.
#[derive(Debug)]
struct MethodFailed;

impl std::fmt::Display for MethodFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("method failure")
    }
}

impl std::error::Error for MethodFailed {}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(out, &text)
}

fn actions(policy: &Policy) -> Vec<u8> {
    policy.actions().iter().map(|a| a.index() as u8).collect()
}

fn q_rows(q: &QTable) -> Vec<[Option<f64>; 2]> {
    (0..q.n_states())
        .map(|s| [q.get(s, Action::Drop), q.get(s, Action::Transmit)])
        .collect()
}

fn expected_value(mdp: &TransmitterMdp, policy: &Policy, b0: u32) -> Result<f64> {
    let v = policy_evaluation::<f64, _>(mdp, policy, &DpConfig::default())?;
    Ok(expected_value_from_v(v.as_slice(), mdp.space(), b0))
}

fn solve(a: SolveArgs) -> Result<()> {
    let sc = a.scenario.load()?;
    if a.b0 > sc.battery_capacity {
        return Err(anyhow::anyhow!("b0 {} exceeds battery capacity", a.b0)).invalid();
    }
    let config = DpConfig::default();
    let report = match a.method {
        SolveMethod::Pi => {
            let mdp = TransmitterMdp::new(sc)?;
            if mdp.discount() >= 1.0 {
                return Err(anyhow::anyhow!("policy iteration needs a discount below 1")).invalid();
            }
            let out = policy_iteration::<f64, _>(&mdp, &config)?;
            json!({
                "method": "pi",
                "n_states": mdp.n_states(),
                "rounds": out.rounds,
                "expected_value": expected_value_from_v(out.values.as_slice(), mdp.space(), a.b0),
                "policy": actions(&out.policy),
                "values": out.values.as_slice(),
            })
        }
        SolveMethod::Rvi => {
            let mdp = TransmitterMdp::with_discount(sc, 1.0)?;
            let out = relative_value_iteration::<f64, _>(&mdp, &config)?;
            json!({
                "method": "rvi",
                "n_states": mdp.n_states(),
                "sweeps": out.sweeps,
                "gain": out.gain,
                "policy": actions(&out.policy),
                "bias": out.bias.as_slice(),
            })
        }
        SolveMethod::Greedy => {
            let mdp = TransmitterMdp::new(sc)?;
            let policy = mdp.greedy_policy();
            let mut report = json!({
                "method": "greedy",
                "n_states": mdp.n_states(),
                "policy": actions(&policy),
            });
            if mdp.discount() < 1.0 {
                report["expected_value"] = json!(expected_value(&mdp, &policy, a.b0)?);
            } else {
                report["gain"] = json!(policy_gain::<f64, _>(&mdp, &policy, &config)?);
            }
            report
        }
    };
    emit_json(a.out.as_deref(), &report)
}

fn learn(a: LearnArgs) -> Result<()> {
    let sc = a.scenario.load()?;
    let config = LearningConfig {
        epsilon: a.epsilon,
        alpha: if a.robbins_monro { LearningRate::RobbinsMonro } else { LearningRate::Constant(a.alpha) },
        learning_slots: a.slots,
        seed: a.seed,
        beta: a.beta,
        ..LearningConfig::default()
    };
    config.validate().invalid()?;
    let env_seed = a.seed.wrapping_add(1);
    let report = match a.method {
        LearnMethod::Qlearn => {
            let mdp = TransmitterMdp::new(sc)?;
            if mdp.discount() >= 1.0 {
                return Err(anyhow::anyhow!("q-learning needs a discount below 1")).invalid();
            }
            let out = q_learning_run::<f64>(&mdp, &config, env_seed)?;
            json!({
                "method": "qlearn",
                "slots": a.slots,
                "expected_value": expected_value(&mdp, &out.policy, 0)?,
                "policy": actions(&out.policy),
                "q": q_rows(&out.q),
            })
        }
        LearnMethod::Rlearn => {
            let mdp = TransmitterMdp::with_discount(sc, 1.0)?;
            let out = r_learning_run::<f64>(&mdp, &config, env_seed)?;
            json!({
                "method": "rlearn",
                "slots": a.slots,
                "rho": out.rho,
                "gain": policy_gain::<f64, _>(&mdp, &out.policy, &DpConfig::default())?,
                "policy": actions(&out.policy),
                "q": q_rows(&out.q),
            })
        }
    };
    emit_json(a.out.as_deref(), &report)
}

fn offline(a: OfflineArgs) -> Result<()> {
    let inst: OfflineInstance = match &a.instance {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).invalid()?;
            serde_json::from_str(&text).invalid()?
        }
        None => {
            let Some(seed) = a.seed else {
                bail!(Invalid);
            };
            let sc = a.scenario.load()?;
            if a.b0 > sc.battery_capacity {
                return Err(anyhow::anyhow!("b0 {} exceeds battery capacity", a.b0)).invalid();
            }
            let mdp = TransmitterMdp::new(sc)?;
            let eval = EvalConfig {
                horizon: a.horizon,
                base_seed: seed,
                ..EvalConfig::default()
            };
            sample_realization(&mdp, &eval, a.index).to_offline(&mdp, a.b0)
        }
    };
    inst.validate().invalid()?;
    let solution = match a.method {
        OfflineMethod::Bab => {
            let config = BabConfig {
                timeout: (a.timeout > 0.0).then(|| Duration::from_secs_f64(a.timeout)),
                ..BabConfig::default()
            };
            serde_json::to_value(bab_solve(&inst, &config)?)?
        }
        OfflineMethod::Lp => serde_json::to_value(lp_relaxation_bound::<f64>(&inst)?)?,
        OfflineMethod::Exhaustive => serde_json::to_value(exhaustive_solve(&inst)?)?,
        OfflineMethod::Dp => serde_json::to_value(battery_dp_solve(&inst)?)?,
    };
    emit_json(a.out.as_deref(), &json!({ "instance": inst, "solution": solution }))
}

fn row_json(row: &ResultRow) -> serde_json::Value {
    json!({
        "method": row.method,
        "metric": row.metric,
        "report": row.report.as_ref().map(|r| json!({
            "estimate": r.estimate,
            "sigma_hat": r.sigma_hat,
            "eps_T": r.eps_t,
            "eps_N": r.eps_n,
            "lo": r.lo,
            "hi": r.hi,
        })),
        "error": row.error,
        "seed": row.seed,
        "n_realizations": row.n_realizations,
    })
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let mut spec = ExperimentSpec {
        name: "evaluate".into(),
        scenario: a.scenario.load()?,
        methods: vec![a.method],
        ..ExperimentSpec::default()
    };
    if a.throughput {
        spec.problem = ehopt_core::experiment::Problem::Tp;
    }
    a.eval.apply(&mut spec);
    let table = run_experiment(&spec).invalid()?;
    let row = &table.rows[0];
    emit_json(a.out.as_deref(), &row_json(row))?;
    if let (Some(path), Some(report)) = (&a.values_csv, &row.report) {
        let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let metric = if a.throughput { Metric::Throughput } else { Metric::DiscountedData };
        write_values_csv(std::io::BufWriter::new(file), &spec.eval, metric, &report.values)?;
    }
    if row.report.is_none() {
        bail!(MethodFailed);
    }
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let mut spec = match a.preset {
        Preset::Custom => {
            let Some(path) = &a.spec else {
                return Err(anyhow::anyhow!("`custom` needs --spec")).invalid();
            };
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).invalid()?;
            let mut spec = ExperimentSpec::from_json(&text).invalid()?;
            if let Some(seed) = a.seed {
                spec.eval.base_seed = seed;
            }
            spec
        }
        preset => {
            let Some(seed) = a.seed else {
                return Err(anyhow::anyhow!("figure presets need --seed")).invalid();
            };
            let name = match preset {
                Preset::Fig2 => "fig2",
                Preset::Fig3 => "fig3",
                Preset::Fig4 => "fig4",
                _ => "fig5",
            };
            ExperimentSpec::preset(name, seed).expect("known preset")
        }
    };
    EvalArgs {
        seed: spec.eval.base_seed,
        realizations: a.realizations,
        horizon: a.horizon,
        confidence: None,
        runs: a.runs,
        slots: a.slots,
        bab_timeout: a.bab_timeout,
        bab_dp_incumbent: a.bab_dp_incumbent,
    }
    .apply(&mut spec);
    if let Some(methods) = a.methods {
        spec.methods = methods;
    }
    if let Some(p) = &a.dump_spec {
        emit(Some(p), &spec.to_json())?;
    }
    let table = run_experiment(&spec).invalid()?;
    emit(a.out.as_deref(), &table.to_csv())?;
    if table.failures().next().is_some() {
        for row in table.failures() {
            eprintln!("{} failed: {}", row.method.name(), row.error.as_deref().unwrap_or("unknown error"));
        }
        bail!(MethodFailed);
    }
    Ok(())
}
