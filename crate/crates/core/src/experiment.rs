//! Experiment runner: trace the channel, run the oracle and/or the agent,
//! and write the report files.
//!
//! Output directory contents:
//!
//! - `report.json`: the full [`ReportBundle`].
//! - `sinr.csv`: one row per user and method, `user,method,ap,wavelength,sinr_db`.
//! - `trace.csv`: per-episode training trace, `episode,reward,epsilon,max_dq`.
//! - `config.toml`: the configuration actually used, reloadable as-is.
//! - `qtable.bin`: the trained Q-table checkpoint.
//!
//! Users and access points are numbered from 1 in these files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cache::power_matrix_for;
use crate::link::{LinkBudget, RewardScale};
use crate::mdp::{Assignment, Environment};
use crate::oracle::optimal_over;
use crate::qlearn::{extract_policy, greedy_action, train, TrainTrace};
use crate::scenario::ScenarioConfig;
use crate::{Error, PowerMatrix, Result};

/// Relative tolerance under which two sum-SINR values count as equal.
/// Symmetric assignments can differ in the last bits of their sums.
pub const VALUE_MATCH_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Oracle,
    Compare,
}

impl Mode {
    fn trains(self) -> bool {
        matches!(self, Mode::Train | Mode::Compare)
    }

    fn solves(self) -> bool {
        matches!(self, Mode::Oracle | Mode::Compare)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSinr {
    pub user: usize,
    pub ap: usize,
    pub wavelength: String,
    pub sinr_linear: f64,
    pub sinr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: String,
    pub assignment: Assignment,
    pub action_index: usize,
    pub per_user: Vec<UserSinr>,
    pub sum_sinr: f64,
    pub sum_sinr_db_terms: f64,
    pub sum_sinr_linear: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternateOracle {
    pub scale: RewardScale,
    pub assignment: Assignment,
    pub action_index: usize,
    pub value: f64,
    /// Value of that assignment under the primary scale.
    pub primary_scale_value: f64,
    /// True when the alternate-scale optimum is strictly worse under the
    /// primary scale, i.e. the two scales disagree on the best assignment.
    pub diverges: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub episodes_run: usize,
    pub converged: bool,
    pub final_epsilon: f64,
    pub trace: TrainTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub scenario: String,
    pub mode: Mode,
    pub seed: u64,
    pub reward_scale: RewardScale,
    pub channel_hash: String,
    pub num_actions: usize,
    pub power_matrix: PowerMatrix,
    pub methods: Vec<MethodResult>,
    /// `100 (oracle − qlearning) / oracle`, compare mode only.
    pub optimality_gap_percent: Option<f64>,
    /// Whether the agent's value equals the optimum within
    /// [`VALUE_MATCH_RTOL`], compare mode only.
    pub reaches_optimum: Option<bool>,
    pub oracle_alternate_scale: Option<AlternateOracle>,
    pub training: Option<TrainingSummary>,
    pub config: ScenarioConfig,
}

impl ReportBundle {
    pub fn method(&self, name: &str) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.method == name)
    }
}

fn method_result(
    name: &str,
    cfg: &ScenarioConfig,
    budget: &LinkBudget,
    scale: RewardScale,
    assignment: &Assignment,
    action_index: usize,
) -> Result<MethodResult> {
    let report = budget.report(assignment, scale)?;
    let per_user = assignment
        .iter()
        .map(|(k, slot)| UserSinr {
            user: k + 1,
            ap: slot.ap + 1,
            wavelength: cfg.wavelengths[slot.wavelength].color.to_string(),
            sinr_linear: report.per_user_sinr_linear[k],
            sinr_db: report.per_user_sinr_db[k],
        })
        .collect();
    Ok(MethodResult {
        method: name.to_string(),
        assignment: assignment.clone(),
        action_index,
        per_user,
        sum_sinr: report.sum_sinr,
        sum_sinr_db_terms: budget.sum_sinr(assignment, RewardScale::DB)?,
        sum_sinr_linear: budget.sum_sinr(assignment, RewardScale::Linear)?,
    })
}

/// Relative agreement of two sum-SINR values.
pub fn values_match(a: f64, b: f64) -> bool {
    (a - b).abs() <= VALUE_MATCH_RTOL * a.abs().max(b.abs())
}

/// Runs one experiment without touching the filesystem (apart from the
/// optional power-matrix cache). `seed` overrides the configured seed.
pub fn evaluate(
    config: &ScenarioConfig,
    mode: Mode,
    seed: u64,
    cache_dir: Option<&Path>,
) -> Result<(ReportBundle, Option<crate::QTable>)> {
    let mut cfg = config.clone();
    cfg.hyperparams.seed = seed;
    cfg.validate()?;
    let scale = cfg.reward_scale;
    let pm = power_matrix_for(&cfg, cache_dir)?;
    let env = cfg.environment(pm.clone(), scale)?;
    let budget = env.budget();

    let mut methods = Vec::new();
    let mut oracle_value = None;
    let mut alternate = None;
    if mode.solves() {
        let best = optimal_over(env.actions(), budget, scale)?;
        methods.push(method_result(
            "oracle",
            &cfg,
            budget,
            scale,
            &best.best,
            best.best_index,
        )?);
        oracle_value = Some(best.best_value);

        let alt_scale = scale.alternate();
        let alt = optimal_over(env.actions(), budget, alt_scale)?;
        let primary_scale_value = budget.sum_sinr(&alt.best, scale)?;
        alternate = Some(AlternateOracle {
            scale: alt_scale,
            assignment: alt.best.clone(),
            action_index: alt.best_index,
            value: alt.best_value,
            primary_scale_value,
            diverges: !values_match(primary_scale_value, best.best_value),
        });
    }

    let mut training = None;
    let mut qtable = None;
    let mut learned_value = None;
    if mode.trains() {
        let (qt, trace) = train(&env, &cfg.hyperparams)?;
        let action = greedy_action(&qt, &env);
        let policy = extract_policy(&qt, &env);
        let result = method_result("qlearning", &cfg, budget, scale, &policy, action)?;
        learned_value = Some(result.sum_sinr);
        methods.push(result);
        training = Some(TrainingSummary {
            episodes_run: trace.episodes.len(),
            converged: trace.converged,
            final_epsilon: trace
                .episodes
                .last()
                .map_or(cfg.hyperparams.epsilon0, |e| e.epsilon),
            trace,
        });
        qtable = Some(qt);
    }

    let (gap, reaches) = match (oracle_value, learned_value) {
        (Some(o), Some(q)) => (Some(100.0 * (o - q) / o), Some(values_match(o, q))),
        _ => (None, None),
    };

    let bundle = ReportBundle {
        scenario: cfg.name.clone(),
        mode,
        seed,
        reward_scale: scale,
        channel_hash: cfg.channel_hash(),
        num_actions: env.num_actions(),
        power_matrix: pm,
        methods,
        optimality_gap_percent: gap,
        reaches_optimum: reaches,
        oracle_alternate_scale: alternate,
        training,
        config: cfg,
    };
    Ok((bundle, qtable))
}

/// Runs one experiment and writes its report files into `out_dir`.
pub fn run(
    config: &ScenarioConfig,
    mode: Mode,
    seed: u64,
    out_dir: &Path,
    cache_dir: Option<&Path>,
) -> Result<ReportBundle> {
    let (bundle, qtable) = evaluate(config, mode, seed, cache_dir)?;
    write_reports(&bundle, qtable.as_ref(), out_dir)?;
    Ok(bundle)
}

pub fn write_reports(
    bundle: &ReportBundle,
    qtable: Option<&crate::QTable>,
    out_dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let write = |name: &str, bytes: &[u8]| {
        let path = out_dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(path, e))
    };

    let mut json = serde_json::to_vec_pretty(bundle)?;
    json.push(b'\n');
    write("report.json", &json)?;
    write("config.toml", bundle.config.to_toml_string()?.as_bytes())?;
    write("sinr.csv", &sinr_csv(bundle)?)?;
    if let Some(t) = &bundle.training {
        write("trace.csv", &trace_csv(&t.trace)?)?;
    }
    if let Some(qt) = qtable {
        qt.save(&out_dir.join("qtable.bin"))?;
    }
    Ok(())
}

fn csv_bytes(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::Format {
        kind: "csv",
        reason: e.to_string(),
    })
}

pub fn sinr_csv(bundle: &ReportBundle) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["user", "method", "ap", "wavelength", "sinr_db"])?;
    for m in &bundle.methods {
        for u in &m.per_user {
            w.write_record([
                u.user.to_string(),
                m.method.clone(),
                u.ap.to_string(),
                u.wavelength.clone(),
                u.sinr_db.to_string(),
            ])?;
        }
    }
    csv_bytes(w)
}

pub fn trace_csv(trace: &TrainTrace) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["episode", "reward", "epsilon", "max_dq"])?;
    for e in &trace.episodes {
        w.write_record([
            e.episode.to_string(),
            e.cumulative_reward.to_string(),
            e.epsilon.to_string(),
            e.max_dq.to_string(),
        ])?;
    }
    csv_bytes(w)
}

/// Environment for a configuration, tracing its channel once.
pub fn build_environment(config: &ScenarioConfig, cache_dir: Option<&Path>) -> Result<Environment> {
    let pm = power_matrix_for(config, cache_dir)?;
    config.environment(pm, config.reward_scale)
}
