//! Average-reward Bellman optimality by relative value iteration, with an exact
//! policy-iteration finish.

use super::chain::{chain_gain_bias, induced_chain, GainBias};
use super::model::{StationaryPolicy, TabularMdp};
use crate::error::{Error, Result};

/// Knobs of [`solve_bellman_optimality_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueIterationOptions {
    /// Stop once `span(u_{n+1} - u_n) <= epsilon`.
    pub epsilon: f64,
    /// Sweep cap before declaring [`Error::NoConvergence`].
    pub max_iterations: usize,
    /// Polish the greedy policy with exact policy iteration.
    pub polish: bool,
}

impl Default for ValueIterationOptions {
    fn default() -> Self {
        ValueIterationOptions {
            epsilon: 1e-10,
            max_iterations: 1_000_000,
            polish: true,
        }
    }
}

/// Raw output of relative value iteration.
#[derive(Debug, Clone)]
pub struct ValueIterationOutcome {
    /// `u_n`, shifted so that its minimum is zero.
    pub values: Vec<f64>,
    /// Lower and upper end of `u_{n+1} - u_n` at the stopping sweep.
    pub gain_bounds: (f64, f64),
    /// Greedy actions w.r.t. `u_n`, lowest index on ties.
    pub policy: Vec<usize>,
    pub iterations: usize,
}

/// Relative value iteration `u_{n+1}(s) = max_a mu(s,a) + (P_a u_n)(s)` started at
/// `u_0 = 0`, stopped when `span(u_{n+1} - u_n) <= epsilon`.
pub fn relative_value_iteration(
    mdp: &TabularMdp,
    epsilon: f64,
    max_iterations: usize,
) -> Result<ValueIterationOutcome> {
    if !(epsilon > 0.0) {
        return Err(Error::DomainError(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let rows = mdp.sparse_rows();
    let mut u = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut policy = vec![0; n];
    for iteration in 1..=max_iterations {
        for s in 0..n {
            let mut best = f64::NEG_INFINITY;
            for a in 0..m {
                let q = mdp.mean_reward(s, a) + rows.expect(s, a, &u);
                if q > best {
                    best = q;
                    policy[s] = a;
                }
            }
            next[s] = best;
        }
        let (lo, hi) = next
            .iter()
            .zip(&u)
            .map(|(x, y)| x - y)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
                (lo.min(d), hi.max(d))
            });
        if hi - lo <= epsilon {
            return Ok(ValueIterationOutcome {
                values: u,
                gain_bounds: (lo, hi),
                policy,
                iterations: iteration,
            });
        }
        let shift = next.iter().copied().fold(f64::INFINITY, f64::min);
        for (dst, src) in u.iter_mut().zip(&next) {
            *dst = src - shift;
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iterations,
    })
}

/// `max_s |b(s) + g - max_a (mu(s,a) + p(.|s,a)^T b)|`.
pub fn optimality_residual(mdp: &TabularMdp, gain: f64, bias: &[f64]) -> f64 {
    (0..mdp.n_states())
        .map(|s| {
            let best = (0..mdp.n_actions())
                .map(|a| mdp.mean_reward(s, a) + mdp.expect(s, a, bias))
                .fold(f64::NEG_INFINITY, f64::max);
            (bias[s] + gain - best).abs()
        })
        .fold(0.0, f64::max)
}

/// Optimal gain, bias and a `b*`-improving policy with the default options and
/// the given stopping tolerance.
pub fn solve_bellman_optimality(
    mdp: &TabularMdp,
    epsilon: f64,
) -> Result<(GainBias, StationaryPolicy)> {
    solve_bellman_optimality_with(
        mdp,
        &ValueIterationOptions {
            epsilon,
            ..Default::default()
        },
    )
}

/// Solves the optimality equation `b(s) + g = max_a mu(s,a) + p(.|s,a)^T b`.
///
/// Value iteration runs first; if it hits the sweep cap it is rerun on the lazy
/// kernel `(P + I) / 2`, which has the same gain and optimal policies. The greedy
/// policy is then refined by policy iteration with exact evaluation, so the
/// returned bias is the stationary-centered bias of an optimal policy. When that
/// evaluation is impossible (several recurrent classes) the value-iteration
/// iterate is returned instead.
pub fn solve_bellman_optimality_with(
    mdp: &TabularMdp,
    options: &ValueIterationOptions,
) -> Result<(GainBias, StationaryPolicy)> {
    let (outcome, bias_scale) =
        match relative_value_iteration(mdp, options.epsilon, options.max_iterations) {
            Ok(outcome) => (outcome, 1.0),
            Err(Error::NoConvergence { .. }) => {
                let lazy = mdp.aperiodic_transform();
                (
                    relative_value_iteration(&lazy, options.epsilon, options.max_iterations)?,
                    2.0,
                )
            }
            Err(e) => return Err(e),
        };

    if options.polish {
        if let Ok(solution) = policy_iteration(mdp, outcome.policy.clone()) {
            return Ok(solution);
        }
    }

    let (lo, hi) = outcome.gain_bounds;
    let gain = 0.5 * (lo + hi);
    let bias: Vec<f64> = outcome.values.iter().map(|u| u / bias_scale).collect();
    let residual = optimality_residual(mdp, gain, &bias);
    Ok((
        GainBias {
            gain,
            bias,
            bellman_residual: residual,
        },
        StationaryPolicy::deterministic(&outcome.policy, mdp.n_actions()),
    ))
}

/// Howard policy iteration from `policy`; every iterate must induce a chain with
/// a single recurrent class.
fn policy_iteration(
    mdp: &TabularMdp,
    mut policy: Vec<usize>,
) -> Result<(GainBias, StationaryPolicy)> {
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    for _ in 0..1000 {
        let pi = StationaryPolicy::deterministic(&policy, m);
        let (p, mu) = induced_chain(mdp, &pi)?;
        let mut evaluated = chain_gain_bias(&p, &mu)?;
        let bias = &evaluated.bias;
        let scale = 1.0 + bias.iter().fold(0.0_f64, |acc, b| acc.max(b.abs()));
        let mut changed = false;
        for s in 0..n {
            let current = mdp.mean_reward(s, policy[s]) + mdp.expect(s, policy[s], bias);
            let mut best = current;
            let mut best_action = policy[s];
            for a in 0..m {
                let q = mdp.mean_reward(s, a) + mdp.expect(s, a, bias);
                if q > best + 1e-13 * scale {
                    best = q;
                    best_action = a;
                }
            }
            if best_action != policy[s] {
                policy[s] = best_action;
                changed = true;
            }
        }
        if !changed {
            evaluated.bellman_residual = optimality_residual(mdp, evaluated.gain, &evaluated.bias);
            return Ok((evaluated, pi));
        }
    }
    Err(Error::NoConvergence { iterations: 1000 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::chain::policy_gain_bias;
    use crate::mdp::model::RewardNoise;
    use approx::assert_abs_diff_eq;

    fn two_state_hard(delta: f64, eps: f64) -> TabularMdp {
        TabularMdp::new(
            vec![
                vec![
                    vec![1.0 - delta - eps, delta + eps],
                    vec![1.0 - delta, delta],
                ],
                vec![vec![delta, 1.0 - delta], vec![delta, 1.0 - delta]],
            ],
            vec![vec![0.0, 0.0], vec![1.0, 1.0]],
            RewardNoise::Deterministic,
        )
        .unwrap()
    }

    #[test]
    fn hard_instance_closed_forms() {
        let (delta, eps) = (0.2, 0.05);
        let mdp = two_state_hard(delta, eps);
        let (gb, pi) = solve_bellman_optimality(&mdp, 1e-10).unwrap();
        assert_abs_diff_eq!(
            gb.gain,
            (delta + eps) / (2.0 * delta + eps),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            gb.bias[1] - gb.bias[0],
            1.0 / (2.0 * delta + eps),
            epsilon = 1e-12
        );
        assert_eq!(pi.as_deterministic().unwrap()[0], 0);
        assert!(gb.bellman_residual <= 1e-9);
    }

    #[test]
    fn single_action_matches_policy_evaluation() {
        let mdp = TabularMdp::new(
            vec![vec![vec![0.2, 0.8]], vec![vec![0.6, 0.4]]],
            vec![vec![0.3], vec![0.9]],
            RewardNoise::Deterministic,
        )
        .unwrap();
        let (gb, _) = solve_bellman_optimality(&mdp, 1e-12).unwrap();
        let direct = policy_gain_bias(&mdp, &StationaryPolicy::uniform(2, 1)).unwrap();
        assert_abs_diff_eq!(gb.gain, direct.gain, epsilon = 1e-12);
        assert_abs_diff_eq!(gb.bias[0], direct.bias[0], epsilon = 1e-12);
        assert_abs_diff_eq!(gb.bias[1], direct.bias[1], epsilon = 1e-12);
    }

    #[test]
    fn periodic_chain_falls_back_to_lazy_kernel() {
        let mdp = TabularMdp::new(
            vec![vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]]],
            vec![vec![0.0], vec![1.0]],
            RewardNoise::Deterministic,
        )
        .unwrap();
        assert!(matches!(
            relative_value_iteration(&mdp, 1e-9, 100),
            Err(Error::NoConvergence { iterations: 100 })
        ));
        let options = ValueIterationOptions {
            epsilon: 1e-9,
            max_iterations: 100,
            polish: false,
        };
        let (gb, _) = solve_bellman_optimality_with(&mdp, &options).unwrap();
        assert_abs_diff_eq!(gb.gain, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(gb.bias[1] - gb.bias[0], 0.5, epsilon = 1e-8);
        assert!(gb.bellman_residual < 1e-8);
    }

    #[test]
    fn unpolished_gain_within_epsilon() {
        let mdp = two_state_hard(0.1, 0.03);
        let options = ValueIterationOptions {
            epsilon: 1e-6,
            polish: false,
            ..Default::default()
        };
        let (gb, _) = solve_bellman_optimality_with(&mdp, &options).unwrap();
        assert!((gb.gain - 0.13 / 0.23).abs() <= 1e-6);
    }

    #[test]
    fn rejects_nonpositive_epsilon() {
        let mdp = two_state_hard(0.1, 0.03);
        assert!(matches!(
            solve_bellman_optimality(&mdp, 0.0),
            Err(Error::DomainError(_))
        ));
    }
}
