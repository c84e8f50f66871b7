//! Learners behind a single act/observe interface: KL-UCRL, the UCRL2
//! baseline and an oracle that plays the optimal policy of the true MDP.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kl::{
    max_expectation_kl_ball, max_expectation_l1_ball, ConfidenceConstants, Ucrl2Radii,
    DEFAULT_KL_TOL,
};
use crate::mdp::{argmax, solve_bellman_optimality, MdpProfile, TabularMdp};

/// Default cap on extended value iteration sweeps.
pub const DEFAULT_MAX_SWEEPS: usize = 1_000_000;

/// Visit statistics of a learner.
///
/// `visits`, `transitions` and `reward_sum` hold the totals at the start of
/// the current episode; observations made during the episode accumulate in
/// the local tables and are folded in by [`CountsTable::start_episode`].
#[derive(Debug, Clone, PartialEq)]
pub struct CountsTable {
    n_states: usize,
    n_actions: usize,
    visits: Vec<u64>,
    transitions: Vec<u64>,
    reward_sum: Vec<f64>,
    local: Vec<u64>,
    local_transitions: Vec<u64>,
    local_reward: Vec<f64>,
    episode: usize,
    episode_start: u64,
    /// Index of the next step (1-based).
    t: u64,
}

impl CountsTable {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        let pairs = n_states * n_actions;
        CountsTable {
            n_states,
            n_actions,
            visits: vec![0; pairs],
            transitions: vec![0; pairs * n_states],
            reward_sum: vec![0.0; pairs],
            local: vec![0; pairs],
            local_transitions: vec![0; pairs * n_states],
            local_reward: vec![0.0; pairs],
            episode: 0,
            episode_start: 1,
            t: 1,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn pair(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }

    /// `N_k(s,a)`.
    pub fn visits(&self, s: usize, a: usize) -> u64 {
        self.visits[self.pair(s, a)]
    }

    /// `v_k(s,a)`.
    pub fn local_visits(&self, s: usize, a: usize) -> u64 {
        self.local[self.pair(s, a)]
    }

    /// `N_k(s,a,.)`.
    pub fn transitions(&self, s: usize, a: usize) -> &[u64] {
        let start = self.pair(s, a) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    /// Current episode index `k` (0 before the first episode starts).
    pub fn episode(&self) -> usize {
        self.episode
    }

    /// `t_k`.
    pub fn episode_start(&self) -> u64 {
        self.episode_start
    }

    /// Index of the next step.
    pub fn time(&self) -> u64 {
        self.t
    }

    /// Empirical transition row; `None` while the pair is unvisited.
    pub fn empirical_row(&self, s: usize, a: usize) -> Option<Vec<f64>> {
        let n = self.visits(s, a);
        (n > 0).then(|| {
            self.transitions(s, a)
                .iter()
                .map(|c| *c as f64 / n as f64)
                .collect()
        })
    }

    /// Empirical mean reward, 0 while the pair is unvisited.
    pub fn empirical_reward(&self, s: usize, a: usize) -> f64 {
        let n = self.visits(s, a);
        if n == 0 {
            0.0
        } else {
            self.reward_sum[self.pair(s, a)] / n as f64
        }
    }

    pub fn record(&mut self, s: usize, a: usize, reward: f64, next: usize) {
        let pair = self.pair(s, a);
        self.local[pair] += 1;
        self.local_transitions[pair * self.n_states + next] += 1;
        self.local_reward[pair] += reward;
        self.t += 1;
    }

    /// True iff `v_k(s,a) >= max(1, N_k(s,a))`.
    pub fn episode_should_end(&self, s: usize, a: usize) -> bool {
        let pair = self.pair(s, a);
        self.local[pair] >= self.visits[pair].max(1)
    }

    /// Folds the local counts into the totals and opens episode `k + 1` at the
    /// current time.
    pub fn start_episode(&mut self) {
        for (n, v) in self.visits.iter_mut().zip(self.local.iter_mut()) {
            *n += std::mem::take(v);
        }
        for (n, v) in self
            .transitions
            .iter_mut()
            .zip(self.local_transitions.iter_mut())
        {
            *n += std::mem::take(v);
        }
        for (n, v) in self.reward_sum.iter_mut().zip(self.local_reward.iter_mut()) {
            *n += std::mem::take(v);
        }
        self.episode += 1;
        self.episode_start = self.t;
    }

    /// `sum_{s,a} (N + v)(s,a)`, which equals `t - 1`.
    pub fn total_steps(&self) -> u64 {
        self.visits.iter().sum::<u64>() + self.local.iter().sum::<u64>()
    }
}

/// Output of extended value iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimisticPlan {
    pub policy: Vec<usize>,
    /// Midpoint of the range of the last value difference.
    pub gain: f64,
    /// Last iterate before re-centering.
    pub values: Vec<f64>,
    /// Span of the last value difference.
    pub accuracy: f64,
    pub sweeps: usize,
    /// Largest increase of the difference span between consecutive sweeps.
    pub max_span_increase: f64,
}

/// Value iteration on the extended MDP. `step(s, a, u)` returns the optimistic
/// reward plus the optimistic expectation of `u` for the pair.
fn extended_value_iteration<F>(
    n_states: usize,
    n_actions: usize,
    accuracy: f64,
    max_sweeps: usize,
    mut step: F,
) -> Result<OptimisticPlan>
where
    F: FnMut(usize, usize, &[f64]) -> Result<f64>,
{
    if !(accuracy > 0.0) {
        return Err(Error::DomainError(format!(
            "EVI accuracy must be positive, got {accuracy}"
        )));
    }
    let mut u = vec![0.0; n_states];
    let mut next = vec![0.0; n_states];
    let mut policy = vec![0; n_states];
    let mut q = vec![0.0; n_actions];
    let mut previous_span = f64::INFINITY;
    let mut max_span_increase = 0.0f64;
    for sweep in 1..=max_sweeps {
        for s in 0..n_states {
            for (a, slot) in q.iter_mut().enumerate() {
                *slot = step(s, a, &u)?;
            }
            policy[s] = argmax(&q);
            next[s] = q[policy[s]];
        }
        let diff: Vec<f64> = next.iter().zip(&u).map(|(n, o)| n - o).collect();
        let (lo, hi) = diff
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
                (lo.min(*d), hi.max(*d))
            });
        let current = hi - lo;
        if previous_span.is_finite() {
            max_span_increase = max_span_increase.max(current - previous_span);
        }
        previous_span = current;
        if current <= accuracy {
            return Ok(OptimisticPlan {
                policy,
                gain: 0.5 * (lo + hi),
                values: next,
                accuracy: current,
                sweeps: sweep,
                max_span_increase,
            });
        }
        let floor = next.iter().copied().fold(f64::INFINITY, f64::min);
        for (dst, src) in u.iter_mut().zip(&next) {
            *dst = src - floor;
        }
    }
    Err(Error::NoConvergence {
        iterations: max_sweeps,
    })
}

/// Argmax of `u`, ties to the lowest index: the optimistic row when nothing has
/// been observed.
fn point_mass_value(u: &[f64]) -> f64 {
    u[argmax(u)]
}

/// Extended value iteration over the KL confidence sets.
pub fn extended_value_iteration_kl(
    counts: &CountsTable,
    constants: &ConfidenceConstants,
    accuracy: f64,
) -> Result<OptimisticPlan> {
    extended_value_iteration_kl_with(counts, constants, accuracy, DEFAULT_MAX_SWEEPS)
}

pub fn extended_value_iteration_kl_with(
    counts: &CountsTable,
    constants: &ConfidenceConstants,
    accuracy: f64,
    max_sweeps: usize,
) -> Result<OptimisticPlan> {
    let (s_count, a_count) = (counts.n_states(), counts.n_actions());
    let rows = planning_rows(counts);
    let rewards = optimistic_rewards(counts, |n| constants.reward_radius(n));
    let radii: Vec<f64> = (0..s_count * a_count)
        .map(|i| constants.transition_radius(counts.visits(i / a_count, i % a_count)))
        .collect();
    extended_value_iteration(s_count, a_count, accuracy, max_sweeps, |s, a, u| {
        let i = s * a_count + a;
        let future = match &rows[i] {
            None => point_mass_value(u),
            Some(row) => max_expectation_kl_ball(row, u, radii[i], DEFAULT_KL_TOL)?.value,
        };
        Ok(rewards[i] + future)
    })
}

/// Extended value iteration over the UCRL2 L1 confidence sets at time `t_k`.
pub fn extended_value_iteration_l1(
    counts: &CountsTable,
    radii: &Ucrl2Radii,
    accuracy: f64,
) -> Result<OptimisticPlan> {
    extended_value_iteration_l1_with(counts, radii, accuracy, DEFAULT_MAX_SWEEPS)
}

pub fn extended_value_iteration_l1_with(
    counts: &CountsTable,
    radii: &Ucrl2Radii,
    accuracy: f64,
    max_sweeps: usize,
) -> Result<OptimisticPlan> {
    let (s_count, a_count) = (counts.n_states(), counts.n_actions());
    let t = counts.episode_start();
    let rows = planning_rows(counts);
    let rewards = optimistic_rewards(counts, |n| radii.reward_radius(t, n));
    let widths: Vec<f64> = (0..s_count * a_count)
        .map(|i| radii.transition_radius(t, counts.visits(i / a_count, i % a_count)))
        .collect();
    extended_value_iteration(s_count, a_count, accuracy, max_sweeps, |s, a, u| {
        let i = s * a_count + a;
        let future = match &rows[i] {
            None => point_mass_value(u),
            Some(row) => max_expectation_l1_ball(row, u, widths[i]).1,
        };
        Ok(rewards[i] + future)
    })
}

fn planning_rows(counts: &CountsTable) -> Vec<Option<Vec<f64>>> {
    (0..counts.n_states())
        .flat_map(|s| (0..counts.n_actions()).map(move |a| (s, a)))
        .map(|(s, a)| counts.empirical_row(s, a))
        .collect()
}

fn optimistic_rewards(counts: &CountsTable, radius: impl Fn(u64) -> f64) -> Vec<f64> {
    (0..counts.n_states())
        .flat_map(|s| (0..counts.n_actions()).map(move |a| (s, a)))
        .map(|(s, a)| (counts.empirical_reward(s, a) + radius(counts.visits(s, a))).min(1.0))
        .collect()
}

/// A learner: `act` picks the action in the current state, `observe` feeds
/// back the outcome of that action.
pub trait Agent: Send {
    fn act(&mut self, s: usize) -> Result<usize>;
    fn observe(&mut self, s: usize, a: usize, reward: f64, next: usize);
    /// Start times `t_k` of all episodes so far.
    fn episode_starts(&self) -> &[u64];
}

/// Which confidence region the optimistic learner uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Region {
    Kl,
    L1,
}

/// KL-UCRL and UCRL2 share the episode logic and differ in the planner.
pub struct OptimisticAgent {
    region: Region,
    counts: CountsTable,
    constants: ConfidenceConstants,
    radii: Ucrl2Radii,
    accuracy: AccuracyMode,
    max_sweeps: usize,
    policy: Vec<usize>,
    starts: Vec<u64>,
    last_plan: Option<OptimisticPlan>,
}

impl OptimisticAgent {
    fn new(
        region: Region,
        n_states: usize,
        n_actions: usize,
        config: &AgentConfig,
        horizon: u64,
    ) -> Result<Self> {
        let horizon = config.horizon.unwrap_or(horizon);
        Ok(OptimisticAgent {
            region,
            counts: CountsTable::new(n_states, n_actions),
            constants: ConfidenceConstants::new(n_states, n_actions, horizon, config.delta)?,
            radii: Ucrl2Radii {
                n_states,
                n_actions,
                delta: config.delta,
            },
            accuracy: config.accuracy_mode()?,
            max_sweeps: config.max_sweeps,
            policy: vec![0; n_states],
            starts: Vec::new(),
            last_plan: None,
        })
    }

    pub fn kl_ucrl(
        n_states: usize,
        n_actions: usize,
        config: &AgentConfig,
        horizon: u64,
    ) -> Result<Self> {
        Self::new(Region::Kl, n_states, n_actions, config, horizon)
    }

    pub fn ucrl2(
        n_states: usize,
        n_actions: usize,
        config: &AgentConfig,
        horizon: u64,
    ) -> Result<Self> {
        Self::new(Region::L1, n_states, n_actions, config, horizon)
    }

    pub fn counts(&self) -> &CountsTable {
        &self.counts
    }

    pub fn constants(&self) -> &ConfidenceConstants {
        &self.constants
    }

    pub fn last_plan(&self) -> Option<&OptimisticPlan> {
        self.last_plan.as_ref()
    }

    fn replan(&mut self) -> Result<()> {
        self.counts.start_episode();
        let t_k = self.counts.episode_start();
        let accuracy = match self.accuracy {
            AccuracyMode::OneOverSqrtTk => 1.0 / (t_k as f64).sqrt(),
            AccuracyMode::Fixed(value) => value,
        };
        let plan = match self.region {
            Region::Kl => extended_value_iteration_kl_with(
                &self.counts,
                &self.constants,
                accuracy,
                self.max_sweeps,
            )?,
            Region::L1 => extended_value_iteration_l1_with(
                &self.counts,
                &self.radii,
                accuracy,
                self.max_sweeps,
            )?,
        };
        self.policy.clone_from(&plan.policy);
        self.starts.push(t_k);
        self.last_plan = Some(plan);
        Ok(())
    }
}

impl Agent for OptimisticAgent {
    fn act(&mut self, s: usize) -> Result<usize> {
        if self.starts.is_empty() || self.counts.episode_should_end(s, self.policy[s]) {
            self.replan()?;
        }
        Ok(self.policy[s])
    }

    fn observe(&mut self, s: usize, a: usize, reward: f64, next: usize) {
        self.counts.record(s, a, reward, next);
    }

    fn episode_starts(&self) -> &[u64] {
        &self.starts
    }
}

/// Plays the gain-optimal policy of the true MDP.
pub struct OracleAgent {
    policy: Vec<usize>,
    starts: Vec<u64>,
}

impl OracleAgent {
    pub fn new(mdp: &TabularMdp) -> Result<Self> {
        let (_, policy) = solve_bellman_optimality(mdp, 1e-10)?;
        Ok(OracleAgent {
            policy: (0..mdp.n_states()).map(|s| policy.mode(s)).collect(),
            starts: vec![1],
        })
    }

    pub fn policy(&self) -> &[usize] {
        &self.policy
    }
}

impl Agent for OracleAgent {
    fn act(&mut self, s: usize) -> Result<usize> {
        Ok(self.policy[s])
    }

    fn observe(&mut self, _: usize, _: usize, _: f64, _: usize) {}

    fn episode_starts(&self) -> &[u64] {
        &self.starts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    KlUcrl,
    Ucrl2,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AccuracyModeName {
    #[default]
    OneOverSqrtTk,
    Fixed,
}

/// Resolved EVI stopping accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AccuracyMode {
    OneOverSqrtTk,
    Fixed(f64),
}

fn default_delta() -> f64 {
    0.05
}

fn default_max_sweeps() -> usize {
    DEFAULT_MAX_SWEEPS
}

/// Learner description as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub algo: Algo,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Horizon used in the confidence constants; the run length when absent.
    #[serde(rename = "horizon_T", default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(default)]
    pub evi_accuracy_mode: AccuracyModeName,
    /// Required when the mode is `fixed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evi_accuracy: Option<f64>,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
}

impl AgentConfig {
    pub fn new(algo: Algo) -> Self {
        AgentConfig {
            algo,
            delta: default_delta(),
            horizon: None,
            evi_accuracy_mode: AccuracyModeName::OneOverSqrtTk,
            evi_accuracy: None,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: AgentConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("agent: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "agent: delta = {} not in (0, 1]",
                self.delta
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidConfig(
                "agent: max_sweeps must be positive".into(),
            ));
        }
        self.accuracy_mode().map(|_| ())
    }

    fn accuracy_mode(&self) -> Result<AccuracyMode> {
        match (self.evi_accuracy_mode, self.evi_accuracy) {
            (AccuracyModeName::OneOverSqrtTk, None) => Ok(AccuracyMode::OneOverSqrtTk),
            (AccuracyModeName::Fixed, Some(value)) if value > 0.0 => Ok(AccuracyMode::Fixed(value)),
            (AccuracyModeName::Fixed, _) => Err(Error::InvalidConfig(
                "agent: fixed accuracy mode needs a positive evi_accuracy".into(),
            )),
            (AccuracyModeName::OneOverSqrtTk, Some(_)) => Err(Error::InvalidConfig(
                "agent: evi_accuracy is only used with the fixed mode".into(),
            )),
        }
    }

    /// Instantiates the learner for `mdp` (only the oracle looks inside it).
    pub fn build(&self, mdp: &TabularMdp, horizon: u64) -> Result<Box<dyn Agent>> {
        self.validate()?;
        let (s, a) = (mdp.n_states(), mdp.n_actions());
        Ok(match self.algo {
            Algo::KlUcrl => Box::new(OptimisticAgent::kl_ucrl(s, a, self, horizon)?),
            Algo::Ucrl2 => Box::new(OptimisticAgent::ucrl2(s, a, self, horizon)?),
            Algo::Oracle => Box::new(OracleAgent::new(mdp)?),
        })
    }
}

/// `S A log2(8 T / (S A))`, the episode budget of the doubling rule; `None`
/// when `T < S A`, where the bound is not meaningful.
pub fn episode_bound(n_states: usize, n_actions: usize, horizon: u64) -> Option<f64> {
    let pairs = (n_states * n_actions) as f64;
    let t = horizon as f64;
    (t >= pairs).then(|| pairs * (8.0 * t / pairs).log2())
}

pub fn check_episode_count(
    episodes: usize,
    n_states: usize,
    n_actions: usize,
    horizon: u64,
) -> Result<()> {
    match episode_bound(n_states, n_actions, horizon) {
        Some(bound) if episodes as f64 > bound => {
            Err(Error::EpisodeBoundViolated { episodes, bound })
        }
        _ => Ok(()),
    }
}

/// Regret bounds evaluated on a known MDP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub horizon: u64,
    pub delta: f64,
    pub b: f64,
    /// `31 sqrt(S sum V* T B)`.
    pub ub_leading: f64,
    /// `ub_leading + (35 S sqrt(A) + sqrt(2) D + 1) sqrt(T B)`.
    pub ub_full: f64,
    /// `0.0123 sqrt(V_max S A T)`.
    pub lb: f64,
    /// `Psi sqrt(S A)`.
    pub psi_sqrt_sa: f64,
    /// `sqrt(sum V*)`.
    pub sqrt_sum_v: f64,
}

pub fn regret_bound_evaluators(
    profile: &MdpProfile,
    horizon: u64,
    delta: f64,
) -> Result<BoundReport> {
    let (s, a) = (profile.n_states, profile.n_actions);
    let b = ConfidenceConstants::new(s, a, horizon, delta)?.b;
    let (sf, af, t) = (s as f64, a as f64, horizon as f64);
    let sum_v = profile.sum_bias_variance();
    let ub_leading = 31.0 * (sf * sum_v * t * b).sqrt();
    let ub_full = ub_leading
        + (35.0 * sf * af.sqrt() + std::f64::consts::SQRT_2 * profile.diameter + 1.0)
            * (t * b).sqrt();
    Ok(BoundReport {
        horizon,
        delta,
        b,
        ub_leading,
        ub_full,
        lb: 0.0123 * (profile.v_max * sf * af * t).sqrt(),
        psi_sqrt_sa: profile.span_bias * (sf * af).sqrt(),
        sqrt_sum_v: sum_v.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::RewardNoise;
    use approx::assert_abs_diff_eq;

    fn chain() -> TabularMdp {
        TabularMdp::new(
            vec![
                vec![vec![0.9, 0.1], vec![0.2, 0.8]],
                vec![vec![0.7, 0.3], vec![0.1, 0.9]],
            ],
            vec![vec![0.1, 0.0], vec![0.5, 0.9]],
            RewardNoise::Deterministic,
        )
        .unwrap()
    }

    #[test]
    fn counts_bookkeeping() {
        let mut counts = CountsTable::new(2, 2);
        assert!(!counts.episode_should_end(0, 1));
        counts.start_episode();
        counts.record(0, 1, 0.5, 1);
        assert_eq!(counts.local_visits(0, 1), 1);
        assert_eq!(counts.visits(0, 1), 0);
        assert!(counts.episode_should_end(0, 1));
        assert!(!counts.episode_should_end(1, 0));
        counts.start_episode();
        assert_eq!(counts.visits(0, 1), 1);
        assert_eq!(counts.empirical_row(0, 1).unwrap(), vec![0.0, 1.0]);
        assert_eq!(counts.empirical_reward(0, 1), 0.5);
        assert_eq!(counts.episode_start(), 2);
        assert_eq!(counts.total_steps(), counts.time() - 1);
        for _ in 0..3 {
            counts.record(0, 1, 1.0, 0);
        }
        counts.start_episode();
        for _ in 0..3 {
            counts.record(0, 1, 0.0, 0);
            assert!(!counts.episode_should_end(0, 1));
        }
        counts.record(0, 1, 0.0, 0);
        assert!(counts.episode_should_end(0, 1));
        assert_eq!(counts.total_steps(), counts.time() - 1);
        assert!(counts.empirical_row(1, 1).is_none());
    }

    #[test]
    fn cold_start_plan() {
        let counts = {
            let mut c = CountsTable::new(3, 2);
            c.start_episode();
            c
        };
        let constants = ConfidenceConstants::new(3, 2, 1000, 0.05).unwrap();
        let plan = extended_value_iteration_kl(&counts, &constants, 1.0).unwrap();
        assert_eq!(plan.gain, 1.0);
        assert_eq!(plan.policy, vec![0, 0, 0]);
        assert_eq!(plan.sweeps, 1);
        let radii = Ucrl2Radii {
            n_states: 3,
            n_actions: 2,
            delta: 0.05,
        };
        let plan = extended_value_iteration_l1(&counts, &radii, 1.0).unwrap();
        assert_eq!(plan.gain, 1.0);
    }

    #[test]
    fn huge_counts_recover_the_true_gain() {
        let mdp = chain();
        let mut counts = CountsTable::new(2, 2);
        counts.start_episode();
        let scale = 1u64 << 40;
        for s in 0..2 {
            for a in 0..2 {
                let row = mdp.row(s, a);
                let pair = counts.pair(s, a);
                counts.local[pair] = scale;
                counts.local_reward[pair] = mdp.mean_reward(s, a) * scale as f64;
                for y in 0..2 {
                    counts.local_transitions[pair * 2 + y] = (row[y] * scale as f64).round() as u64;
                }
            }
        }
        counts.start_episode();
        let (gb, _) = solve_bellman_optimality(&mdp, 1e-12).unwrap();
        let constants = ConfidenceConstants::new(2, 2, 1000, 0.05).unwrap();
        let plan = extended_value_iteration_kl(&counts, &constants, 1e-8).unwrap();
        assert_abs_diff_eq!(plan.gain, gb.gain, epsilon = 1e-4);
        assert!(plan.gain + 1e-8 >= gb.gain);
        assert!(plan.max_span_increase <= 1e-12);
    }

    #[test]
    fn oracle_plays_optimal_policy() {
        let mdp = chain();
        let mut agent = OracleAgent::new(&mdp).unwrap();
        assert_eq!(agent.act(0).unwrap(), 1);
        assert_eq!(agent.act(1).unwrap(), 1);
        assert_eq!(agent.policy(), &[1, 1]);
    }

    #[test]
    fn replanning_follows_doubling_rule() {
        let config = AgentConfig::new(Algo::KlUcrl);
        let mut agent = OptimisticAgent::kl_ucrl(2, 2, &config, 1000).unwrap();
        let a = agent.act(0).unwrap();
        assert_eq!(agent.episode_starts(), &[1]);
        agent.observe(0, a, 0.0, 0);
        // The pair the current policy would play has v = 1 = max(1, N).
        agent.act(0).unwrap();
        assert_eq!(agent.episode_starts(), &[1, 2]);
        assert_eq!(agent.counts().visits(0, a), 1);
        let b = agent.act(1).unwrap();
        assert_eq!(agent.episode_starts().len(), 2);
        agent.observe(1, b, 1.0, 1);
        assert_eq!(agent.counts().total_steps(), 2);
    }

    #[test]
    fn agent_config_json() {
        let config =
            AgentConfig::from_json(r#"{"algo": "kl_ucrl", "delta": 0.1, "horizon_T": 5000}"#)
                .unwrap();
        assert_eq!(config.horizon, Some(5000));
        assert_eq!(config.evi_accuracy_mode, AccuracyModeName::OneOverSqrtTk);
        let fixed = AgentConfig::from_json(
            r#"{"algo": "ucrl2", "evi_accuracy_mode": "fixed", "evi_accuracy": 0.01}"#,
        )
        .unwrap();
        assert_eq!(fixed.accuracy_mode().unwrap(), AccuracyMode::Fixed(0.01));
        for bad in [
            r#"{"algo": "psrl"}"#,
            r#"{"algo": "kl_ucrl", "delta": 0}"#,
            r#"{"algo": "kl_ucrl", "evi_accuracy_mode": "fixed"}"#,
            r#"{"algo": "kl_ucrl", "typo": 1}"#,
        ] {
            assert!(
                matches!(AgentConfig::from_json(bad), Err(Error::InvalidConfig(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn episode_bound_examples() {
        assert_eq!(episode_bound(2, 2, 3), None);
        assert_abs_diff_eq!(episode_bound(2, 2, 4).unwrap(), 12.0, epsilon = 1e-12);
        assert!(check_episode_count(12, 2, 2, 4).is_ok());
        assert!(matches!(
            check_episode_count(13, 2, 2, 4),
            Err(Error::EpisodeBoundViolated { episodes: 13, .. })
        ));
    }

    #[test]
    fn bounds_vanish_without_variance() {
        let mdp = TabularMdp::new(
            vec![vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]]],
            vec![vec![0.0], vec![1.0]],
            RewardNoise::Deterministic,
        )
        .unwrap();
        let profile = MdpProfile::compute(&mdp, &Default::default()).unwrap();
        let report = regret_bound_evaluators(&profile, 10_000, 0.05).unwrap();
        assert_eq!(report.ub_leading, 0.0);
        assert_eq!(report.lb, 0.0);
        let expected = (35.0 + std::f64::consts::SQRT_2 * profile.diameter + 1.0)
            * 2.0
            * (10_000.0 * report.b).sqrt()
            / 2.0;
        assert_abs_diff_eq!(
            report.ub_full,
            expected + 35.0 * (10_000.0 * report.b).sqrt(),
            epsilon = 1e-9
        );
    }
}
