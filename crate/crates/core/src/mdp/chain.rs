//! Markov chains induced by stationary policies: stationary distributions,
//! gain and bias through the fundamental matrix, and hitting times.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::model::{StationaryPolicy, TabularMdp};
use crate::error::{Error, Result};

/// Largest Bellman residual accepted from the exact policy evaluator.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Gain, bias and Bellman residual of a policy (or of the optimal policy).
///
/// The bias is centered so that its stationary average is zero, which makes it
/// coincide with the Cesaro series `sum_t (P^{t-1} - P_bar) mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainBias {
    pub gain: f64,
    pub bias: Vec<f64>,
    pub bellman_residual: f64,
}

/// Transition matrix `P_pi` and reward vector `mu_pi` of the induced chain.
pub fn induced_chain(
    mdp: &TabularMdp,
    policy: &StationaryPolicy,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    policy.check_shape(mdp)?;
    let n = mdp.n_states();
    let mut p = DMatrix::zeros(n, n);
    let mut mu = DVector::zeros(n);
    for s in 0..n {
        for (a, &w) in policy.action_dist(s).iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            mu[s] += w * mdp.mean_reward(s, a);
            for (y, &q) in mdp.row(s, a).iter().enumerate() {
                p[(s, y)] += w * q;
            }
        }
    }
    Ok((p, mu))
}

/// `reach[i][j]` is true when `j` can be reached from `i` along positive-probability edges.
pub(crate) fn reachability(p: &DMatrix<f64>) -> Vec<Vec<bool>> {
    let n = p.nrows();
    (0..n)
        .map(|start| {
            let mut seen = vec![false; n];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    if p[(i, j)] > 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen
        })
        .collect()
}

/// Number of closed communicating classes of the chain.
pub fn closed_class_count(p: &DMatrix<f64>) -> usize {
    let n = p.nrows();
    let reach = reachability(p);
    let mut counted = vec![false; n];
    let mut count = 0;
    for i in 0..n {
        if counted[i] {
            continue;
        }
        let closed = (0..n).all(|j| !reach[i][j] || reach[j][i]);
        let class: Vec<usize> = (0..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
        for &j in &class {
            counted[j] = true;
        }
        if closed {
            count += 1;
        }
    }
    count
}

/// Whether every state reaches every other state.
pub fn is_irreducible(p: &DMatrix<f64>) -> bool {
    reachability(p).iter().all(|row| row.iter().all(|&r| r))
}

/// Stationary distribution of a chain with a single closed class.
pub fn chain_stationary(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = p.nrows();
    let classes = closed_class_count(p);
    if classes != 1 {
        return Err(Error::ReducibleChain {
            closed_classes: classes,
        });
    }
    // nu (P - I) = 0 with one equation swapped for sum(nu) = 1.
    let mut system = p.transpose() - DMatrix::identity(n, n);
    system.row_mut(n - 1).fill(1.0);
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let mut nu = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem("stationary distribution".into()))?;
    nu.iter_mut().for_each(|x| *x = x.max(0.0));
    let total = nu.sum();
    Ok(nu / total)
}

/// Stationary distribution `nu` of the chain induced by `policy`.
pub fn stationary_distribution(mdp: &TabularMdp, policy: &StationaryPolicy) -> Result<Vec<f64>> {
    let (p, _) = induced_chain(mdp, policy)?;
    Ok(chain_stationary(&p)?.iter().copied().collect())
}

/// Inverse of `I - P + P_bar`, the fundamental matrix of the chain.
pub(crate) fn fundamental_matrix(p: &DMatrix<f64>, nu: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = p.nrows();
    let p_bar = DMatrix::from_fn(n, n, |_, j| nu[j]);
    (DMatrix::identity(n, n) - p + p_bar)
        .try_inverse()
        .ok_or_else(|| Error::SingularSystem("fundamental matrix".into()))
}

/// `max_s |b(s) + g - mu(s) - (P b)(s)|`.
pub fn policy_residual(p: &DMatrix<f64>, mu: &DVector<f64>, gain: f64, bias: &DVector<f64>) -> f64 {
    let lhs = bias.add_scalar(gain);
    let rhs = mu + p * bias;
    (lhs - rhs).amax()
}

/// Gain and bias of a policy whose induced chain has one closed class.
pub fn policy_gain_bias(mdp: &TabularMdp, policy: &StationaryPolicy) -> Result<GainBias> {
    let (p, mu) = induced_chain(mdp, policy)?;
    chain_gain_bias(&p, &mu)
}

pub(crate) fn chain_gain_bias(p: &DMatrix<f64>, mu: &DVector<f64>) -> Result<GainBias> {
    let n = p.nrows();
    let nu = chain_stationary(p)?;
    let z = fundamental_matrix(p, &nu)?;
    let gain = nu.dot(mu);
    let centered = mu.add_scalar(-gain);
    let mut bias = z * centered;
    // Remove the rounding drift of the stationary average.
    let drift = nu.dot(&bias);
    bias.add_scalar_mut(-drift);
    let bellman_residual = policy_residual(p, mu, gain, &bias);
    if !(bellman_residual <= RESIDUAL_TOL) {
        return Err(Error::NumericalFailure(format!(
            "policy evaluation residual {bellman_residual:e} exceeds {RESIDUAL_TOL:e} ({n} states)"
        )));
    }
    Ok(GainBias {
        gain,
        bias: bias.iter().copied().collect(),
        bellman_residual,
    })
}

/// Expected first hitting times `m[i][j]` of an irreducible chain (`m[i][i] = 0`).
/// Column `j` solves `(I - P_{-j}) m = 1` on the states other than `j`.
pub fn hitting_times(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = p.nrows();
    if !is_irreducible(p) {
        return Err(Error::ReducibleChain {
            closed_classes: closed_class_count(p),
        });
    }
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        if n == 1 {
            break;
        }
        let others: Vec<usize> = (0..n).filter(|&i| i != j).collect();
        let a = DMatrix::from_fn(n - 1, n - 1, |r, c| {
            let delta = if r == c { 1.0 } else { 0.0 };
            delta - p[(others[r], others[c])]
        });
        let x = a
            .lu()
            .solve(&DVector::from_element(n - 1, 1.0))
            .ok_or_else(|| Error::SingularSystem(format!("hitting times of state {j}")))?;
        for (r, &i) in others.iter().enumerate() {
            m[(i, j)] = x[r];
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::model::RewardNoise;
    use approx::assert_abs_diff_eq;

    fn chain(rows: Vec<Vec<f64>>, rewards: Vec<f64>) -> TabularMdp {
        let transition = rows.into_iter().map(|r| vec![r]).collect();
        let mean_reward = rewards.into_iter().map(|r| vec![r]).collect();
        TabularMdp::new(transition, mean_reward, RewardNoise::Deterministic).unwrap()
    }

    #[test]
    fn periodic_two_cycle_is_uniform() {
        let mdp = chain(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.0, 1.0]);
        let nu = stationary_distribution(&mdp, &StationaryPolicy::uniform(2, 1)).unwrap();
        assert_abs_diff_eq!(nu[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(nu[1], 0.5, epsilon = 1e-12);
        let gb = policy_gain_bias(&mdp, &StationaryPolicy::uniform(2, 1)).unwrap();
        assert_abs_diff_eq!(gb.gain, 0.5, epsilon = 1e-12);
        // Cesaro bias of the alternating chain is (-1/4, 1/4).
        assert_abs_diff_eq!(gb.bias[0], -0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(gb.bias[1], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn single_state() {
        let mdp = chain(vec![vec![1.0]], vec![0.7]);
        let pi = StationaryPolicy::uniform(1, 1);
        assert_eq!(stationary_distribution(&mdp, &pi).unwrap(), vec![1.0]);
        let gb = policy_gain_bias(&mdp, &pi).unwrap();
        assert_abs_diff_eq!(gb.gain, 0.7, epsilon = 1e-15);
        assert_eq!(gb.bias, vec![0.0]);
    }

    #[test]
    fn two_absorbing_states_are_reducible() {
        let mdp = chain(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 1.0]);
        let err = stationary_distribution(&mdp, &StationaryPolicy::uniform(2, 1)).unwrap_err();
        assert!(matches!(err, Error::ReducibleChain { closed_classes: 2 }));
    }

    #[test]
    fn transient_state_is_allowed() {
        // State 0 leaks into the absorbing state 1: one closed class.
        let mdp = chain(vec![vec![0.5, 0.5], vec![0.0, 1.0]], vec![0.0, 1.0]);
        let pi = StationaryPolicy::uniform(2, 1);
        let nu = stationary_distribution(&mdp, &pi).unwrap();
        assert_abs_diff_eq!(nu[1], 1.0, epsilon = 1e-12);
        let gb = policy_gain_bias(&mdp, &pi).unwrap();
        assert_abs_diff_eq!(gb.gain, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gb.bias[0], -2.0, epsilon = 1e-12);
    }

    #[test]
    fn hitting_times_of_geometric_chain() {
        let p = DMatrix::from_row_slice(2, 2, &[0.75, 0.25, 0.2, 0.8]);
        let m = hitting_times(&p).unwrap();
        assert_abs_diff_eq!(m[(0, 1)], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m[(1, 0)], 5.0, epsilon = 1e-12);
    }
}
