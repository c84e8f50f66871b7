//! Benchmark environments: the ergodic RiverSwim family, the two-state
//! hard instance with its closed-form profile, and a random ergodic generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{
    induced_chain, is_irreducible, MdpProfile, ProfileOptions, RewardNoise, StationaryPolicy,
    TabularMdp,
};

/// Tolerance for the closed-form checks of the hard instance.
pub const CLOSED_FORM_TOL: f64 = 1e-9;

fn default_noise() -> RewardNoise {
    RewardNoise::Deterministic
}

/// Parameters of the `N`-state ergodic RiverSwim.
///
/// Action 0 swims left, action 1 swims right. The defaults are calibrated so
/// that the bias-variance profile of the family matches the published
/// benchmark table (see `configs/riverswim_*.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiverSwimConfig {
    pub n_states: usize,
    /// Interior right action: move right.
    pub p_forward: f64,
    /// Interior right action: stay.
    pub p_stay: f64,
    /// Interior right action: drift back left.
    pub p_back: f64,
    /// Right action at the leftmost state: move right (otherwise stay).
    pub start_forward: f64,
    /// Right action at the rightmost state: stay (otherwise drift back).
    pub end_stay: f64,
    /// Left action moves right with this probability instead of left.
    pub left_slip: f64,
    pub reward_left: f64,
    pub reward_right: f64,
    #[serde(default = "default_noise")]
    pub reward_noise: RewardNoise,
}

impl Default for RiverSwimConfig {
    fn default() -> Self {
        RiverSwimConfig {
            n_states: 6,
            p_forward: 0.35,
            p_stay: 0.6,
            p_back: 0.05,
            start_forward: 0.6,
            end_stay: 0.6,
            left_slip: 0.01,
            reward_left: 0.05,
            reward_right: 1.0,
            reward_noise: RewardNoise::Deterministic,
        }
    }
}

impl RiverSwimConfig {
    pub fn with_states(n_states: usize) -> Self {
        RiverSwimConfig {
            n_states,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(format!("riverswim: {msg}")));
        if self.n_states < 3 {
            return bad(format!("n_states must be >= 3, got {}", self.n_states));
        }
        let probs = [
            ("p_forward", self.p_forward),
            ("p_stay", self.p_stay),
            ("p_back", self.p_back),
            ("start_forward", self.start_forward),
            ("end_stay", self.end_stay),
            ("left_slip", self.left_slip),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        let split = self.p_forward + self.p_stay + self.p_back;
        if (split - 1.0).abs() > 1e-12 {
            return bad(format!("p_forward + p_stay + p_back = {split}, expected 1"));
        }
        if self.left_slip <= 0.0 {
            return bad("left_slip must be positive".into());
        }
        for (name, r) in [
            ("reward_left", self.reward_left),
            ("reward_right", self.reward_right),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} = {r} is outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Builds the ergodic RiverSwim with `S = n_states` and `A = 2`.
pub fn make_ergodic_riverswim(config: &RiverSwimConfig) -> Result<TabularMdp> {
    config.validate()?;
    let n = config.n_states;
    let mut transition = vec![vec![vec![0.0; n]; 2]; n];
    let mut reward = vec![vec![0.0; 2]; n];
    for s in 0..n {
        let left = &mut transition[s][0];
        left[s.saturating_sub(1)] += 1.0 - config.left_slip;
        left[(s + 1).min(n - 1)] += config.left_slip;

        let right = &mut transition[s][1];
        if s == 0 {
            right[1] += config.start_forward;
            right[0] += 1.0 - config.start_forward;
        } else if s == n - 1 {
            right[s] += config.end_stay;
            right[s - 1] += 1.0 - config.end_stay;
        } else {
            right[s + 1] += config.p_forward;
            right[s] += config.p_stay;
            right[s - 1] += config.p_back;
        }
    }
    reward[0][0] = config.reward_left;
    reward[n - 1][1] = config.reward_right;
    let mdp = TabularMdp::new(transition, reward, config.reward_noise)?;
    let (chain, _) = induced_chain(&mdp, &StationaryPolicy::uniform(n, 2))?;
    if !is_irreducible(&chain) {
        return Err(Error::InvalidConfig(
            "riverswim: parameters do not yield an ergodic chain".into(),
        ));
    }
    Ok(mdp)
}

/// Two-state lower-bound instance: `S = {s0, s1}`, `A'` actions per state,
/// rewards 0 in `s0` and 1 in `s1`. Every action leaves `s1` with probability
/// `delta`; in `s0` action 0 is the good action `a*` reaching `s1` with
/// probability `delta + eps`, the others with `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoStateHardConfig {
    pub delta: f64,
    pub eps: f64,
    #[serde(default = "one")]
    pub n_actions: usize,
}

fn one() -> usize {
    1
}

/// Closed-form quantities of the two-state hard instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardInstanceProfile {
    pub gain: f64,
    /// Span of the optimal bias, `1 / (2 delta + eps)`.
    pub psi: f64,
    pub v_max: f64,
    pub diameter: f64,
    /// Gap of every bad action in `s0`, `eps * psi`.
    pub bad_action_gap: f64,
    /// `[s][a]` bias variances.
    pub bias_variance: Vec<Vec<f64>>,
}

impl HardInstanceProfile {
    pub fn closed_form(config: &TwoStateHardConfig) -> Self {
        let (d, e) = (config.delta, config.eps);
        let psi = 1.0 / (2.0 * d + e);
        let good = (d + e) * (1.0 - d - e) * psi * psi;
        let bad = d * (1.0 - d) * psi * psi;
        let mut s0 = vec![bad; config.n_actions];
        s0[0] = good;
        HardInstanceProfile {
            gain: (d + e) / (2.0 * d + e),
            psi,
            v_max: good,
            diameter: 1.0 / d,
            bad_action_gap: e * psi,
            bias_variance: vec![s0, vec![bad; config.n_actions]],
        }
    }
}

/// Builds the hard instance and checks the solver output against the closed
/// forms within [`CLOSED_FORM_TOL`].
pub fn make_two_state_hard(
    config: &TwoStateHardConfig,
) -> Result<(TabularMdp, HardInstanceProfile)> {
    let (d, e) = (config.delta, config.eps);
    if !(d > 0.0 && d < 1.0 / 3.0) {
        return Err(Error::InvalidConfig(format!(
            "two_state_hard: delta = {d} not in (0, 1/3)"
        )));
    }
    if !(e > 0.0 && e <= d / 2.0) {
        return Err(Error::InvalidConfig(format!(
            "two_state_hard: eps = {e} not in (0, delta/2]"
        )));
    }
    if config.n_actions == 0 {
        return Err(Error::InvalidConfig(
            "two_state_hard: n_actions must be >= 1".into(),
        ));
    }
    let a_count = config.n_actions;
    let s0: Vec<Vec<f64>> = (0..a_count)
        .map(|a| {
            let up = if a == 0 { d + e } else { d };
            vec![1.0 - up, up]
        })
        .collect();
    let s1 = vec![vec![d, 1.0 - d]; a_count];
    let mdp = TabularMdp::new(
        vec![s0, s1],
        vec![vec![0.0; a_count], vec![1.0; a_count]],
        RewardNoise::Deterministic,
    )?;

    let expected = HardInstanceProfile::closed_form(config);
    let profile = MdpProfile::compute(&mdp, &ProfileOptions::default())?;
    let mut computed = vec![
        ("gain", profile.gain_opt, expected.gain),
        ("psi", profile.span_bias, expected.psi),
        ("v_max", profile.v_max, expected.v_max),
        ("diameter", profile.diameter, expected.diameter),
    ];
    computed.extend(
        profile.gaps[0][1..]
            .iter()
            .map(|g| ("gap", *g, expected.bad_action_gap)),
    );
    for (name, got, want) in computed {
        if (got - want).abs() > CLOSED_FORM_TOL {
            return Err(Error::NumericalFailure(format!(
                "two_state_hard: {name} = {got}, closed form {want}"
            )));
        }
    }
    Ok((mdp, expected))
}

/// Random MDP whose transition entries are all at least `min_prob`: each row
/// is `min_prob + (1 - S min_prob) Dirichlet(1)`, rewards are `U[0, 1]`.
pub fn make_random_ergodic(
    n_states: usize,
    n_actions: usize,
    seed: u64,
    min_prob: f64,
) -> Result<TabularMdp> {
    if n_states == 0 || n_actions == 0 {
        return Err(Error::InvalidConfig(
            "random: need n_states, n_actions >= 1".into(),
        ));
    }
    if !(min_prob >= 0.0) || min_prob * n_states as f64 > 1.0 {
        return Err(Error::InvalidConfig(format!(
            "random: min_prob = {min_prob} must satisfy 0 <= min_prob * S <= 1"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let free = 1.0 - min_prob * n_states as f64;
    let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        let draws: Vec<f64> = (0..n_states).map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = draws.iter().sum();
        let mut row: Vec<f64> = draws.iter().map(|x| min_prob + free * x / total).collect();
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= sum);
        transition.extend(row);
    }
    let mean_reward = (0..n_states * n_actions)
        .map(|_| rng.random::<f64>())
        .collect();
    TabularMdp::from_flat(
        n_states,
        n_actions,
        transition,
        mean_reward,
        vec![RewardNoise::Deterministic; n_states * n_actions],
    )
}

/// Inverse-CDF draw from a probability vector; zero-mass entries are never
/// returned.
pub fn sample_index<R: Rng + ?Sized>(rng: &mut R, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in p.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// One transition of `mdp` from `(s, a)`: `(next state, reward)`.
pub fn sample_step<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    s: usize,
    a: usize,
    rng: &mut R,
) -> (usize, f64) {
    let next = sample_index(rng, mdp.row(s, a));
    let mean = mdp.mean_reward(s, a);
    let reward = match mdp.reward_noise(s, a) {
        RewardNoise::Deterministic => mean,
        RewardNoise::BernoulliWithMean => {
            if rng.random::<f64>() < mean {
                1.0
            } else {
                0.0
            }
        }
    };
    (next, reward)
}

/// Environment description as read from JSON, discriminated by `family`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum EnvConfig {
    Riverswim(RiverSwimConfig),
    TwoStateHard(TwoStateHardConfig),
    Random(RandomConfig),
    Explicit(TabularMdp),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomConfig {
    pub n_states: usize,
    pub n_actions: usize,
    pub seed: u64,
    #[serde(default)]
    pub min_prob: f64,
}

impl EnvConfig {
    pub fn build(&self) -> Result<TabularMdp> {
        match self {
            EnvConfig::Riverswim(c) => make_ergodic_riverswim(c),
            EnvConfig::TwoStateHard(c) => make_two_state_hard(c).map(|(mdp, _)| mdp),
            EnvConfig::Random(c) => {
                make_random_ergodic(c.n_states, c.n_actions, c.seed, c.min_prob)
            }
            EnvConfig::Explicit(mdp) => Ok(mdp.clone()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("environment: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
