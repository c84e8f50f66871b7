use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that a vector lies on the probability simplex.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// How a reward is drawn around its mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RewardNoise {
    /// The reward equals its mean.
    #[default]
    Deterministic,
    /// The reward is Bernoulli with the given mean.
    BernoulliWithMean,
}

/// A finite MDP with `S` states, `A` actions, transition kernel `p(s'|s,a)`
/// and mean rewards `mu(s,a)` in `[0, 1]`.
///
/// Storage is flat and row-major: the row `p(.|s,a)` starts at
/// `(s * A + a) * S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMdp", into = "RawMdp")]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    mean_reward: Vec<f64>,
    reward_noise: Vec<RewardNoise>,
}

impl TabularMdp {
    /// Builds an MDP from nested `[s][a][s']` transitions and `[s][a]` mean rewards,
    /// validating every invariant.
    pub fn new(
        transition: Vec<Vec<Vec<f64>>>,
        mean_reward: Vec<Vec<f64>>,
        reward_noise: RewardNoise,
    ) -> Result<Self> {
        let n_states = transition.len();
        let n_actions = transition.first().map_or(0, Vec::len);
        RawMdp {
            n_states,
            n_actions,
            transition,
            mean_reward,
            reward_noise: NoiseSpec::Uniform(reward_noise),
        }
        .try_into()
    }

    /// Builds an MDP from flat row-major buffers.
    pub fn from_flat(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        mean_reward: Vec<f64>,
        reward_noise: Vec<RewardNoise>,
    ) -> Result<Self> {
        let mdp = TabularMdp {
            n_states,
            n_actions,
            transition,
            mean_reward,
            reward_noise,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// The next-state distribution `p(.|s,a)`.
    #[inline]
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    #[inline]
    pub fn mean_reward(&self, s: usize, a: usize) -> f64 {
        self.mean_reward[s * self.n_actions + a]
    }

    #[inline]
    pub fn reward_noise(&self, s: usize, a: usize) -> RewardNoise {
        self.reward_noise[s * self.n_actions + a]
    }

    /// Same MDP with every reward distribution replaced by `noise`.
    pub fn with_reward_noise(mut self, noise: RewardNoise) -> Self {
        self.reward_noise.iter_mut().for_each(|n| *n = noise);
        self
    }

    /// `sum_y p(y|s,a) f(y)`.
    #[inline]
    pub fn expect(&self, s: usize, a: usize, f: &[f64]) -> f64 {
        self.row(s, a).iter().zip(f).map(|(p, v)| p * v).sum()
    }

    /// The lazy version `(P + I) / 2` of the kernel. Gains are unchanged and
    /// biases double.
    pub fn aperiodic_transform(&self) -> TabularMdp {
        let mut out = self.clone();
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let start = (s * self.n_actions + a) * self.n_states;
                for y in 0..self.n_states {
                    let p = &mut out.transition[start + y];
                    *p = 0.5 * *p + if y == s { 0.5 } else { 0.0 };
                }
            }
        }
        out
    }

    /// Nonzero entries of every row, for sweeps over sparse kernels.
    pub(crate) fn sparse_rows(&self) -> SparseRows {
        let mut offsets = Vec::with_capacity(self.n_states * self.n_actions + 1);
        let mut entries = Vec::new();
        offsets.push(0);
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                entries.extend(
                    self.row(s, a)
                        .iter()
                        .enumerate()
                        .filter(|(_, p)| **p > 0.0)
                        .map(|(y, p)| (y, *p)),
                );
                offsets.push(entries.len());
            }
        }
        SparseRows {
            n_actions: self.n_actions,
            offsets,
            entries,
        }
    }

    fn validate(&self) -> Result<()> {
        let invalid = |field: String, message: String| Err(Error::InvalidModel { field, message });
        if self.n_states == 0 {
            return invalid("n_states".into(), "must be at least 1".into());
        }
        if self.n_actions == 0 {
            return invalid("n_actions".into(), "must be at least 1".into());
        }
        let (s_count, a_count) = (self.n_states, self.n_actions);
        if self.transition.len() != s_count * a_count * s_count {
            return invalid(
                "transition".into(),
                format!("expected {s_count}x{a_count}x{s_count} entries"),
            );
        }
        if self.mean_reward.len() != s_count * a_count {
            return invalid(
                "mean_reward".into(),
                format!("expected {s_count}x{a_count} entries"),
            );
        }
        if self.reward_noise.len() != s_count * a_count {
            return invalid(
                "reward_noise".into(),
                format!("expected {s_count}x{a_count} entries"),
            );
        }
        for s in 0..s_count {
            for a in 0..a_count {
                let row = self.row(s, a);
                if let Some((y, p)) = row.iter().enumerate().find(|(_, p)| !(**p >= 0.0)) {
                    return invalid(
                        format!("transition[{s}][{a}][{y}]"),
                        format!("probability {p} is negative or not a number"),
                    );
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > SIMPLEX_TOL {
                    return invalid(
                        format!("transition[{s}][{a}]"),
                        format!("row sums to {total}, expected 1"),
                    );
                }
                let mu = self.mean_reward(s, a);
                if !(0.0..=1.0).contains(&mu) {
                    return invalid(
                        format!("mean_reward[{s}][{a}]"),
                        format!("{mu} is outside [0, 1]"),
                    );
                }
            }
        }
        Ok(())
    }
}

/// Compressed rows of a transition kernel.
#[derive(Debug, Clone)]
pub(crate) struct SparseRows {
    n_actions: usize,
    offsets: Vec<usize>,
    entries: Vec<(usize, f64)>,
}

impl SparseRows {
    #[inline]
    pub(crate) fn row(&self, s: usize, a: usize) -> &[(usize, f64)] {
        let k = s * self.n_actions + a;
        &self.entries[self.offsets[k]..self.offsets[k + 1]]
    }

    #[inline]
    pub(crate) fn expect(&self, s: usize, a: usize, f: &[f64]) -> f64 {
        self.row(s, a).iter().map(|&(y, p)| p * f[y]).sum()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum NoiseSpec {
    Uniform(RewardNoise),
    PerPair(Vec<Vec<RewardNoise>>),
}

/// Wire format of [`TabularMdp`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<Vec<Vec<f64>>>,
    mean_reward: Vec<Vec<f64>>,
    #[serde(default = "default_noise")]
    reward_noise: NoiseSpec,
}

fn default_noise() -> NoiseSpec {
    NoiseSpec::Uniform(RewardNoise::Deterministic)
}

impl TryFrom<RawMdp> for TabularMdp {
    type Error = Error;

    fn try_from(raw: RawMdp) -> Result<Self> {
        let (s_count, a_count) = (raw.n_states, raw.n_actions);
        let shape_err = |field: String, message: String| Error::InvalidModel { field, message };
        if raw.transition.len() != s_count {
            return Err(shape_err(
                "transition".into(),
                format!(
                    "has {} state rows, n_states is {s_count}",
                    raw.transition.len()
                ),
            ));
        }
        let mut transition = Vec::with_capacity(s_count * a_count * s_count);
        for (s, per_state) in raw.transition.iter().enumerate() {
            if per_state.len() != a_count {
                return Err(shape_err(
                    format!("transition[{s}]"),
                    format!("has {} actions, n_actions is {a_count}", per_state.len()),
                ));
            }
            for (a, row) in per_state.iter().enumerate() {
                if row.len() != s_count {
                    return Err(shape_err(
                        format!("transition[{s}][{a}]"),
                        format!("has {} entries, n_states is {s_count}", row.len()),
                    ));
                }
                transition.extend_from_slice(row);
            }
        }
        if raw.mean_reward.len() != s_count {
            return Err(shape_err(
                "mean_reward".into(),
                format!("has {} rows, n_states is {s_count}", raw.mean_reward.len()),
            ));
        }
        let mut mean_reward = Vec::with_capacity(s_count * a_count);
        for (s, row) in raw.mean_reward.iter().enumerate() {
            if row.len() != a_count {
                return Err(shape_err(
                    format!("mean_reward[{s}]"),
                    format!("has {} entries, n_actions is {a_count}", row.len()),
                ));
            }
            mean_reward.extend_from_slice(row);
        }
        let reward_noise = match raw.reward_noise {
            NoiseSpec::Uniform(n) => vec![n; s_count * a_count],
            NoiseSpec::PerPair(table) => {
                if table.len() != s_count || table.iter().any(|r| r.len() != a_count) {
                    return Err(shape_err(
                        "reward_noise".into(),
                        format!("expected a single value or a {s_count}x{a_count} table"),
                    ));
                }
                table.into_iter().flatten().collect()
            }
        };
        TabularMdp::from_flat(s_count, a_count, transition, mean_reward, reward_noise)
    }
}

impl From<TabularMdp> for RawMdp {
    fn from(mdp: TabularMdp) -> Self {
        let (s_count, a_count) = (mdp.n_states, mdp.n_actions);
        let transition = (0..s_count)
            .map(|s| (0..a_count).map(|a| mdp.row(s, a).to_vec()).collect())
            .collect();
        let mean_reward = mdp
            .mean_reward
            .chunks(a_count)
            .map(<[f64]>::to_vec)
            .collect();
        let first = mdp.reward_noise[0];
        let reward_noise = if mdp.reward_noise.iter().all(|n| *n == first) {
            NoiseSpec::Uniform(first)
        } else {
            NoiseSpec::PerPair(
                mdp.reward_noise
                    .chunks(a_count)
                    .map(<[_]>::to_vec)
                    .collect(),
            )
        };
        RawMdp {
            n_states: s_count,
            n_actions: a_count,
            transition,
            mean_reward,
            reward_noise,
        }
    }
}

/// A stationary, possibly stochastic, policy: one action distribution per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryPolicy {
    action_dist: Vec<Vec<f64>>,
}

impl StationaryPolicy {
    pub fn new(action_dist: Vec<Vec<f64>>) -> Result<Self> {
        for (s, dist) in action_dist.iter().enumerate() {
            let total: f64 = dist.iter().sum();
            if dist.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::InvalidModel {
                    field: format!("action_dist[{s}]"),
                    message: format!("not a probability vector (sum {total})"),
                });
            }
        }
        Ok(StationaryPolicy { action_dist })
    }

    pub fn deterministic(actions: &[usize], n_actions: usize) -> Self {
        let action_dist = actions
            .iter()
            .map(|&a| {
                let mut d = vec![0.0; n_actions];
                d[a] = 1.0;
                d
            })
            .collect();
        StationaryPolicy { action_dist }
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        StationaryPolicy {
            action_dist: vec![vec![1.0 / n_actions as f64; n_actions]; n_states],
        }
    }

    pub fn n_states(&self) -> usize {
        self.action_dist.len()
    }

    pub fn action_dist(&self, s: usize) -> &[f64] {
        &self.action_dist[s]
    }

    /// Most probable action at `s`, lowest index on ties.
    pub fn mode(&self, s: usize) -> usize {
        argmax(&self.action_dist[s])
    }

    /// Action table if the policy is deterministic.
    pub fn as_deterministic(&self) -> Option<Vec<usize>> {
        self.action_dist
            .iter()
            .map(|d| {
                let a = argmax(d);
                (d[a] == 1.0).then_some(a)
            })
            .collect()
    }

    pub(crate) fn check_shape(&self, mdp: &TabularMdp) -> Result<()> {
        if self.action_dist.len() != mdp.n_states()
            || self.action_dist.iter().any(|d| d.len() != mdp.n_actions())
        {
            return Err(Error::InvalidModel {
                field: "policy".into(),
                message: format!(
                    "shape does not match the MDP ({} states, {} actions)",
                    mdp.n_states(),
                    mdp.n_actions()
                ),
            });
        }
        Ok(())
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
