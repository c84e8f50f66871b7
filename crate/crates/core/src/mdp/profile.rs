//! Variance of the optimal bias, sub-optimality gaps and the aggregated
//! [`MdpProfile`] used by the regret bounds.

use serde::{Deserialize, Serialize};

use super::chain::GainBias;
use super::model::{StationaryPolicy, TabularMdp};
use super::optimality::solve_bellman_optimality;
use super::structure::{diameter, mixing_time, span, DEFAULT_POLICY_CAP};
use crate::error::Result;

/// Gaps above `-GAP_TOL` are clamped to zero.
pub const GAP_TOL: f64 = 1e-9;

/// `V_{s,a} = Var_{p(.|s,a)}(bias)` for every pair, as an `S x A` table.
pub fn bias_variance_table(mdp: &TabularMdp, bias: &[f64]) -> Vec<Vec<f64>> {
    assert_eq!(
        bias.len(),
        mdp.n_states(),
        "bias length must equal n_states"
    );
    (0..mdp.n_states())
        .map(|s| {
            (0..mdp.n_actions())
                .map(|a| {
                    let row = mdp.row(s, a);
                    let mean = mdp.expect(s, a, bias);
                    row.iter()
                        .zip(bias)
                        .map(|(p, b)| p * (b - mean) * (b - mean))
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// `phi(s,a) = mu(s,*(s)) - mu(s,a) + (p(.|s,*(s)) - p(.|s,a))^T b*`.
///
/// Entries in `[-GAP_TOL, 0)` are clamped to zero; anything more negative is
/// left as is and signals that `opt_policy` is not `b*`-improving.
pub fn suboptimality_gaps(
    mdp: &TabularMdp,
    gain_bias: &GainBias,
    opt_policy: &StationaryPolicy,
) -> Vec<Vec<f64>> {
    let bias = &gain_bias.bias;
    (0..mdp.n_states())
        .map(|s| {
            let star: f64 = opt_policy
                .action_dist(s)
                .iter()
                .enumerate()
                .map(|(a, w)| w * (mdp.mean_reward(s, a) + mdp.expect(s, a, bias)))
                .sum();
            (0..mdp.n_actions())
                .map(|a| {
                    let gap = star - mdp.mean_reward(s, a) - mdp.expect(s, a, bias);
                    if (-GAP_TOL..0.0).contains(&gap) {
                        0.0
                    } else {
                        gap
                    }
                })
                .collect()
        })
        .collect()
}

/// Options for [`MdpProfile::compute`].
#[derive(Debug, Clone, Copy)]
pub struct ProfileOptions {
    pub epsilon: f64,
    /// Enumerate at most this many deterministic policies for the mixing time.
    pub mixing_cap: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            epsilon: 1e-10,
            mixing_cap: DEFAULT_POLICY_CAP,
        }
    }
}

/// Problem-dependent constants of an MDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpProfile {
    pub n_states: usize,
    pub n_actions: usize,
    pub diameter: f64,
    /// Span of the optimal bias.
    pub span_bias: f64,
    pub gain_opt: f64,
    pub bias_opt: Vec<f64>,
    pub optimal_policy: Vec<usize>,
    pub bellman_residual: f64,
    pub bias_variance: Vec<Vec<f64>>,
    pub gaps: Vec<Vec<f64>>,
    pub v_max: f64,
    /// Absent when the policy enumeration exceeded its cap.
    pub mixing_time: Option<f64>,
}

impl MdpProfile {
    pub fn compute(mdp: &TabularMdp, options: &ProfileOptions) -> Result<Self> {
        let (gain_bias, policy) = solve_bellman_optimality(mdp, options.epsilon)?;
        let bias_variance = bias_variance_table(mdp, &gain_bias.bias);
        let gaps = suboptimality_gaps(mdp, &gain_bias, &policy);
        let v_max = bias_variance.iter().flatten().copied().fold(0.0, f64::max);
        Ok(MdpProfile {
            n_states: mdp.n_states(),
            n_actions: mdp.n_actions(),
            diameter: diameter(mdp)?,
            span_bias: span(&gain_bias.bias),
            gain_opt: gain_bias.gain,
            optimal_policy: (0..mdp.n_states()).map(|s| policy.mode(s)).collect(),
            bellman_residual: gain_bias.bellman_residual,
            bias_opt: gain_bias.bias,
            bias_variance,
            gaps,
            v_max,
            mixing_time: mixing_time(mdp, options.mixing_cap)?,
        })
    }

    /// `sum_{s,a} V*_{s,a}`.
    pub fn sum_bias_variance(&self) -> f64 {
        self.bias_variance.iter().flatten().sum()
    }
}
