//! Span, diameter and mixing time.

use nalgebra::{DMatrix, DVector};

use super::chain::{hitting_times, induced_chain};
use super::model::{StationaryPolicy, TabularMdp};
use crate::error::{Error, Result};

/// Default bound on `A^S` for exhaustive mixing-time enumeration.
pub const DEFAULT_POLICY_CAP: usize = 4096;

/// `max f - min f`.
pub fn span(f: &[f64]) -> f64 {
    assert!(!f.is_empty(), "span of an empty vector");
    let (lo, hi) = f
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    hi - lo
}

/// Minimal expected hitting times of `target` from every state, minimized over
/// policies (`h(target) = 0`).
///
/// Solved exactly by policy iteration on the shortest-path problem
/// `h(s) = 1 + min_a sum_y p(y|s,a) h(y)`, started from a proper policy that
/// follows a breadth-first tree towards the target.
pub fn min_hitting_times(mdp: &TabularMdp, target: usize) -> Result<Vec<f64>> {
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    // Backward BFS distances to target over the union of all actions.
    let mut dist = vec![usize::MAX; n];
    dist[target] = 0;
    let mut frontier = vec![target];
    let mut policy = vec![0usize; n];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for s in 0..n {
            if dist[s] != usize::MAX {
                continue;
            }
            let step = (0..m).find(|&a| frontier.iter().any(|&y| mdp.row(s, a)[y] > 0.0));
            if let Some(a) = step {
                policy[s] = a;
                next.push(s);
            }
        }
        let level = dist[frontier[0]] + 1;
        for &s in &next {
            dist[s] = level;
        }
        frontier = next;
    }
    if let Some(from) = dist.iter().position(|&d| d == usize::MAX) {
        return Err(Error::NotCommunicating { from, target });
    }
    if n == 1 {
        return Ok(vec![0.0]);
    }

    let others: Vec<usize> = (0..n).filter(|&s| s != target).collect();
    for _ in 0..1000 {
        let h = evaluate_hitting(mdp, target, &others, &policy)?;
        let scale = 1.0 + h.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
        let mut changed = false;
        for &s in &others {
            let current = mdp.expect(s, policy[s], &h);
            let mut best = current;
            for a in 0..m {
                let q = mdp.expect(s, a, &h);
                if q < best - 1e-13 * scale {
                    best = q;
                    policy[s] = a;
                    changed = true;
                }
            }
        }
        if !changed {
            return Ok(h);
        }
    }
    Err(Error::NoConvergence { iterations: 1000 })
}

fn evaluate_hitting(
    mdp: &TabularMdp,
    target: usize,
    others: &[usize],
    policy: &[usize],
) -> Result<Vec<f64>> {
    let k = others.len();
    let system = DMatrix::from_fn(k, k, |i, j| {
        let p = mdp.row(others[i], policy[others[i]])[others[j]];
        if i == j {
            1.0 - p
        } else {
            -p
        }
    });
    let solved = system
        .lu()
        .solve(&DVector::from_element(k, 1.0))
        .ok_or_else(|| Error::SingularSystem(format!("hitting times of state {target}")))?;
    let mut h = vec![0.0; mdp.n_states()];
    for (i, &s) in others.iter().enumerate() {
        h[s] = solved[i];
    }
    Ok(h)
}

/// `max_{s != s'} min_pi E[T_pi(s'|s)]`; zero for a single state.
pub fn diameter(mdp: &TabularMdp) -> Result<f64> {
    let mut worst = 0.0_f64;
    for target in 0..mdp.n_states() {
        let h = min_hitting_times(mdp, target)?;
        worst = h.iter().copied().fold(worst, f64::max);
    }
    Ok(worst)
}

/// Worst expected hitting time between two distinct states of the chain
/// induced by `policy`; infinite if the chain is not irreducible.
pub fn worst_pair_hitting_time(mdp: &TabularMdp, policy: &StationaryPolicy) -> Result<f64> {
    let (p, _) = induced_chain(mdp, policy)?;
    match hitting_times(&p) {
        Ok(m) => Ok(m.iter().copied().fold(0.0, f64::max)),
        Err(Error::ReducibleChain { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Mixing time: the worst-pair expected hitting time maximized over all
/// deterministic policies. `None` when `A^S` exceeds `policy_cap`.
pub fn mixing_time(mdp: &TabularMdp, policy_cap: usize) -> Result<Option<f64>> {
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let count = match u32::try_from(n).ok().and_then(|n| m.checked_pow(n)) {
        Some(c) if c <= policy_cap => c,
        _ => return Ok(None),
    };
    let mut actions = vec![0usize; n];
    let mut worst = 0.0_f64;
    for index in 0..count {
        let mut rest = index;
        for a in actions.iter_mut() {
            *a = rest % m;
            rest /= m;
        }
        let pi = StationaryPolicy::deterministic(&actions, m);
        worst = worst.max(worst_pair_hitting_time(mdp, &pi)?);
    }
    Ok(Some(worst))
}
