//! Simulation driver, regret accounting, batch aggregation and the CSV/JSON
//! writers used by the command-line tool.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{check_episode_count, regret_bound_evaluators, AgentConfig, BoundReport};
use crate::envs::{sample_step, EnvConfig};
use crate::error::{Error, Result};
use crate::mdp::{solve_bellman_optimality, MdpProfile, ProfileOptions, TabularMdp};

/// Number of geometrically spaced checkpoints on a regret curve.
pub const DEFAULT_CHECKPOINTS: usize = 100;

/// Up to `count` strictly increasing times in `[1, horizon]`, geometrically
/// spaced, always ending at `horizon`.
pub fn geometric_checkpoints(horizon: u64, count: usize) -> Vec<u64> {
    assert!(horizon >= 1, "horizon must be positive");
    if count <= 1 {
        return vec![horizon];
    }
    let log_t = (horizon as f64).ln();
    let mut points: Vec<u64> = (0..count)
        .map(|i| ((log_t * i as f64 / (count - 1) as f64).exp().round() as u64).clamp(1, horizon))
        .collect();
    points.dedup();
    if *points.last().unwrap() != horizon {
        points.push(horizon);
    }
    points
}

/// One simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub horizon: u64,
    pub seed: u64,
    /// Optimal gain of the true MDP.
    pub gain_opt: f64,
    /// Every collected reward, in order.
    pub rewards: Vec<f64>,
    /// Episode start times `t_k`.
    pub episode_starts: Vec<u64>,
    pub checkpoints: Vec<u64>,
    /// `t g* - sum_{u <= t} r_u` at each checkpoint.
    pub regret: Vec<f64>,
}

impl RegretTrace {
    /// Effective regret at the horizon.
    pub fn final_regret(&self) -> f64 {
        *self
            .regret
            .last()
            .expect("trace has at least one checkpoint")
    }

    pub fn episodes(&self) -> usize {
        self.episode_starts.len()
    }

    /// Regret at the checkpoints, recomputed from the stored rewards.
    pub fn recompute_regret(&self) -> Vec<f64> {
        regret_at(&self.rewards, self.gain_opt, &self.checkpoints)
    }
}

fn regret_at(rewards: &[f64], gain: f64, checkpoints: &[u64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut total = 0.0;
    let mut next = checkpoints.iter().peekable();
    for (i, r) in rewards.iter().enumerate() {
        total += r;
        let t = i as u64 + 1;
        while next.peek().is_some_and(|c| **c == t) {
            out.push(t as f64 * gain - total);
            next.next();
        }
    }
    out
}

/// A built environment together with its optimal gain.
#[derive(Debug, Clone)]
pub struct PreparedEnv {
    pub mdp: TabularMdp,
    pub gain_opt: f64,
}

impl PreparedEnv {
    pub fn new(mdp: TabularMdp) -> Result<Self> {
        let (gain_bias, _) = solve_bellman_optimality(&mdp, 1e-10)?;
        Ok(PreparedEnv {
            gain_opt: gain_bias.gain,
            mdp,
        })
    }

    pub fn from_config(env: &EnvConfig) -> Result<Self> {
        Self::new(env.build()?)
    }

    /// Runs `agent` for `horizon` steps from state 0 with the random stream of
    /// `seed`, then checks the episode-count law.
    pub fn simulate(&self, agent: &AgentConfig, horizon: u64, seed: u64) -> Result<RegretTrace> {
        if horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        let mut learner = agent.build(&self.mdp, horizon)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rewards = Vec::with_capacity(horizon as usize);
        let mut s = 0;
        for _ in 0..horizon {
            let a = learner.act(s)?;
            let (next, r) = sample_step(&self.mdp, s, a, &mut rng);
            learner.observe(s, a, r, next);
            rewards.push(r);
            s = next;
        }
        let episode_starts = learner.episode_starts().to_vec();
        check_episode_count(
            episode_starts.len(),
            self.mdp.n_states(),
            self.mdp.n_actions(),
            horizon,
        )?;
        let checkpoints = geometric_checkpoints(horizon, DEFAULT_CHECKPOINTS);
        let regret = regret_at(&rewards, self.gain_opt, &checkpoints);
        Ok(RegretTrace {
            horizon,
            seed,
            gain_opt: self.gain_opt,
            rewards,
            episode_starts,
            checkpoints,
            regret,
        })
    }
}

pub fn run_simulation(
    env: &EnvConfig,
    agent: &AgentConfig,
    horizon: u64,
    seed: u64,
) -> Result<RegretTrace> {
    PreparedEnv::from_config(env)?.simulate(agent, horizon, seed)
}

/// Per-checkpoint mean and (population) standard deviation over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub checkpoints: Vec<u64>,
    pub regret_mean: Vec<f64>,
    pub regret_std: Vec<f64>,
    /// Sorted by seed.
    pub traces: Vec<RegretTrace>,
}

impl BatchResult {
    pub fn final_mean(&self) -> f64 {
        *self.regret_mean.last().expect("non-empty batch")
    }

    /// Mean regret at the largest checkpoint not exceeding `t`.
    pub fn mean_at(&self, t: u64) -> Option<f64> {
        let idx = self.checkpoints.partition_point(|c| *c <= t);
        idx.checked_sub(1).map(|i| self.regret_mean[i])
    }
}

/// Runs every seed (in parallel) and aggregates in seed order.
pub fn batch_run(
    env: &EnvConfig,
    agent: &AgentConfig,
    horizon: u64,
    seeds: &[u64],
) -> Result<BatchResult> {
    let prepared = PreparedEnv::from_config(env)?;
    batch_run_prepared(&prepared, agent, horizon, seeds)
}

pub fn batch_run_prepared(
    prepared: &PreparedEnv,
    agent: &AgentConfig,
    horizon: u64,
    seeds: &[u64],
) -> Result<BatchResult> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("batch needs at least one seed".into()));
    }
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    let traces = seeds
        .par_iter()
        .map(|seed| prepared.simulate(agent, horizon, *seed))
        .collect::<Result<Vec<_>>>()?;
    let checkpoints = traces[0].checkpoints.clone();
    let n = traces.len() as f64;
    let regret_mean: Vec<f64> = (0..checkpoints.len())
        .map(|i| traces.iter().map(|t| t.regret[i]).sum::<f64>() / n)
        .collect();
    let regret_std = (0..checkpoints.len())
        .map(|i| {
            let m = regret_mean[i];
            (traces
                .iter()
                .map(|t| (t.regret[i] - m).powi(2))
                .sum::<f64>()
                / n)
                .sqrt()
        })
        .collect();
    Ok(BatchResult {
        checkpoints,
        regret_mean,
        regret_std,
        traces,
    })
}

/// One row of the span-versus-variance comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    #[serde(rename = "S")]
    pub n_states: usize,
    pub psi: f64,
    pub v_max: f64,
    #[serde(rename = "psi_sqrt_SA")]
    pub psi_sqrt_sa: f64,
    #[serde(rename = "sqrt_sum_V")]
    pub sqrt_sum_v: f64,
}

impl TableRow {
    pub fn from_profile(profile: &MdpProfile) -> Self {
        let pairs = (profile.n_states * profile.n_actions) as f64;
        TableRow {
            n_states: profile.n_states,
            psi: profile.span_bias,
            v_max: profile.v_max,
            psi_sqrt_sa: profile.span_bias * pairs.sqrt(),
            sqrt_sum_v: profile.sum_bias_variance().sqrt(),
        }
    }
}

/// Options of [`analyze_mdp`]: the profile settings plus the `(T, delta)` at
/// which the regret bounds are evaluated.
#[derive(Debug, Clone, Copy)]
pub struct AnalyzeOptions {
    pub profile: ProfileOptions,
    pub horizon: u64,
    pub delta: f64,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            profile: ProfileOptions::default(),
            horizon: 100_000,
            delta: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub profile: MdpProfile,
    pub bounds: BoundReport,
    pub row: TableRow,
}

pub fn analyze_mdp(env: &EnvConfig, options: &AnalyzeOptions) -> Result<Analysis> {
    analyze_model(&env.build()?, options)
}

pub fn analyze_model(mdp: &TabularMdp, options: &AnalyzeOptions) -> Result<Analysis> {
    let profile = MdpProfile::compute(mdp, &options.profile)?;
    let bounds = regret_bound_evaluators(&profile, options.horizon, options.delta)?;
    let row = TableRow::from_profile(&profile);
    Ok(Analysis {
        profile,
        bounds,
        row,
    })
}

pub fn write_table_csv<W: Write>(out: W, rows: &[TableRow]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct AggregateRow {
    t: u64,
    regret_mean: f64,
    regret_std: f64,
}

#[derive(Serialize)]
struct TraceRow {
    t: u64,
    regret: f64,
}

pub fn write_aggregate_csv<W: Write>(out: W, batch: &BatchResult) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for ((t, m), s) in batch
        .checkpoints
        .iter()
        .zip(&batch.regret_mean)
        .zip(&batch.regret_std)
    {
        writer.serialize(AggregateRow {
            t: *t,
            regret_mean: *m,
            regret_std: *s,
        })?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_trace_csv<W: Write>(out: W, trace: &RegretTrace) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for (t, r) in trace.checkpoints.iter().zip(&trace.regret) {
        writer.serialize(TraceRow { t: *t, regret: *r })?;
    }
    writer.flush()?;
    Ok(())
}

/// Everything needed to rerun a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub gain_opt: f64,
    pub episodes: Vec<usize>,
}

/// Writes `traces/<seed>.csv`, `aggregate.csv` and `config_echo.json` under `dir`.
pub fn write_run_outputs(
    dir: &Path,
    env: &EnvConfig,
    agent: &AgentConfig,
    horizon: u64,
    batch: &BatchResult,
) -> Result<()> {
    let traces = dir.join("traces");
    fs::create_dir_all(&traces)?;
    for trace in &batch.traces {
        write_trace_csv(
            fs::File::create(traces.join(format!("{}.csv", trace.seed)))?,
            trace,
        )?;
    }
    write_aggregate_csv(fs::File::create(dir.join("aggregate.csv"))?, batch)?;
    let echo = ConfigEcho {
        env: env.clone(),
        agent: agent.clone(),
        horizon,
        seeds: batch.traces.iter().map(|t| t.seed).collect(),
        gain_opt: batch.traces[0].gain_opt,
        episodes: batch.traces.iter().map(RegretTrace::episodes).collect(),
    };
    fs::write(
        dir.join("config_echo.json"),
        serde_json::to_string_pretty(&echo)?,
    )?;
    Ok(())
}
