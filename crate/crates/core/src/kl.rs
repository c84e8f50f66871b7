//! KL divergence on the simplex, linear maximization over KL and L1 balls,
//! and the confidence radii of the optimistic learners.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{argmax, SIMPLEX_TOL};

/// Default accuracy of [`max_expectation_kl_ball`].
pub const DEFAULT_KL_TOL: f64 = 1e-10;

/// Smallest dual offset `nu - max v` explored by the root finder.
const MIN_OFFSET: f64 = 1e-280;
const MAX_ROOT_ITERATIONS: usize = 200;

/// `KL(p, q) = sum_x p(x) log(p(x) / q(x))` in nats, with `0 log 0 = 0` and
/// `+inf` when `p(x) > 0 = q(x)`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            total += pi * (pi / qi).ln();
        }
    }
    total.max(0.0)
}

/// The set `{q : KL(center, q) <= radius}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlBall {
    center: Vec<f64>,
    radius: f64,
}

impl KlBall {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        let total: f64 = center.iter().sum();
        if center.is_empty()
            || center.iter().any(|p| !(*p >= 0.0))
            || (total - 1.0).abs() > SIMPLEX_TOL
        {
            return Err(Error::DomainError(format!(
                "KL ball center is not a probability vector (sum {total})"
            )));
        }
        if !(radius >= 0.0) {
            return Err(Error::DomainError(format!(
                "KL ball radius must be >= 0, got {radius}"
            )));
        }
        Ok(KlBall { center, radius })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        kl_divergence(&self.center, q) <= self.radius
    }

    /// `max_{q in ball} q^T v`.
    pub fn maximize(&self, v: &[f64], tol: f64) -> Result<KlBallSolution> {
        max_expectation_kl_ball(&self.center, v, self.radius, tol)
    }
}

/// Maximizer of a linear function over a KL ball.
#[derive(Debug, Clone, PartialEq)]
pub struct KlBallSolution {
    pub q: Vec<f64>,
    pub value: f64,
    /// Dual variable `nu` when the solution has the interior form
    /// `q(i) ∝ center(i) / (nu - v(i))`.
    pub nu: Option<f64>,
    /// Index outside the support of the center that received mass.
    pub promoted: Option<usize>,
}

/// Linear maximization `max { q^T v : KL(center, q) <= radius }`.
///
/// On the support of `center` the maximizer is `q(i) ∝ center(i) / (nu - v(i))`
/// where the scalar `nu > max_{center(i) > 0} v(i)` solves
/// `sum_i center(i) log(nu - v(i)) + log sum_i center(i) / (nu - v(i)) = radius`
/// (the left side is `KL(center, q_nu)`, decreasing in `nu`). When the best
/// coordinate `i*` lies outside the support and `KL(center, q_{v(i*)}) < radius`,
/// the remaining budget moves mass `1 - exp(KL - radius)` onto `i*`.
pub fn max_expectation_kl_ball(
    center: &[f64],
    v: &[f64],
    radius: f64,
    tol: f64,
) -> Result<KlBallSolution> {
    if center.len() != v.len() {
        return Err(Error::DomainError(
            "center and value vector lengths differ".into(),
        ));
    }
    if !(radius >= 0.0) || !(tol > 0.0) {
        return Err(Error::DomainError(format!(
            "need radius >= 0 and tol > 0, got {radius} and {tol}"
        )));
    }
    let as_center = || KlBallSolution {
        q: center.to_vec(),
        value: dot(center, v),
        nu: None,
        promoted: None,
    };
    if radius == 0.0 {
        return Ok(as_center());
    }

    let support_max = center
        .iter()
        .zip(v)
        .filter(|(p, _)| **p > 0.0)
        .map(|(_, x)| *x)
        .fold(f64::NEG_INFINITY, f64::max);
    // Best coordinate outside the support, lowest index on ties.
    let outside = center
        .iter()
        .zip(v)
        .enumerate()
        .filter(|(_, (p, x))| **p == 0.0 && **x > support_max)
        .fold(
            None,
            |best: Option<(usize, f64)>, (i, (_, &x))| match best {
                Some((_, bx)) if bx >= x => best,
                _ => Some((i, x)),
            },
        );

    let dual = Dual::new(center, v, support_max);
    if dual.is_flat() && outside.is_none() {
        return Ok(as_center());
    }

    if let Some((star, star_value)) = outside {
        let offset = star_value - support_max;
        let kl_at = dual.kl(offset);
        if kl_at < radius {
            let moved = -(kl_at - radius).exp_m1();
            let mut q = dual.weights(offset);
            q.iter_mut().for_each(|x| *x *= 1.0 - moved);
            q[star] = moved;
            return Ok(KlBallSolution {
                value: dot(&q, v),
                q,
                nu: None,
                promoted: Some(star),
            });
        }
        let offset = dual.solve(radius, offset, tol)?;
        return Ok(dual.solution(offset, v));
    }

    let offset = dual.solve(radius, MIN_OFFSET, tol)?;
    Ok(dual.solution(offset, v))
}

/// Dual function of the KL-ball problem in the shifted variable
/// `x = nu - max_{support} v`.
struct Dual<'a> {
    center: &'a [f64],
    /// `max_{support} v - v(i)`, only meaningful on the support.
    gaps: Vec<f64>,
    support_max: f64,
}

impl<'a> Dual<'a> {
    fn new(center: &'a [f64], v: &[f64], support_max: f64) -> Self {
        Dual {
            center,
            gaps: v.iter().map(|x| support_max - x).collect(),
            support_max,
        }
    }

    fn support(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.center
            .iter()
            .zip(&self.gaps)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, d)| (*p, *d))
    }

    /// All support points share the top value.
    fn is_flat(&self) -> bool {
        self.support().all(|(_, d)| d == 0.0)
    }

    /// `KL(center, q_x)`.
    fn kl(&self, x: f64) -> f64 {
        let (mut log_sum, mut z) = (0.0, 0.0);
        for (p, d) in self.support() {
            log_sum += p * (x + d).ln();
            z += p / (x + d);
        }
        (log_sum + z.ln()).max(0.0)
    }

    /// `KL(center, q_x)` and its derivative in `t = ln x`.
    fn kl_and_slope(&self, x: f64) -> (f64, f64) {
        let (mut log_sum, mut z, mut z2) = (0.0, 0.0, 0.0);
        for (p, d) in self.support() {
            let w = x + d;
            log_sum += p * w.ln();
            z += p / w;
            z2 += p / (w * w);
        }
        let derivative = z - z2 / z;
        (log_sum + z.ln(), x * derivative)
    }

    fn weights(&self, x: f64) -> Vec<f64> {
        let mut q: Vec<f64> = self
            .center
            .iter()
            .zip(&self.gaps)
            .map(|(p, d)| if *p > 0.0 { p / (x + d) } else { 0.0 })
            .collect();
        let z: f64 = q.iter().sum();
        q.iter_mut().for_each(|w| *w /= z);
        q
    }

    fn solution(&self, x: f64, v: &[f64]) -> KlBallSolution {
        let q = self.weights(x);
        KlBallSolution {
            value: dot(&q, v),
            q,
            nu: Some(self.support_max + x),
            promoted: None,
        }
    }

    /// Finds `x >= lower` with `KL(center, q_x) = radius`, returning a point on
    /// the feasible side (`KL <= radius`). Safeguarded Newton in `ln x`.
    fn solve(&self, radius: f64, lower: f64, tol: f64) -> Result<f64> {
        let target = (tol * 1e-6).max(1e-15 * radius.max(1.0));
        let mut lo = lower.max(MIN_OFFSET);
        if self.kl(lo) <= radius {
            // Budget exceeds what any interior point can spend: the optimum is
            // the limit towards the top coordinates.
            return Ok(lo);
        }
        let spread = self.support().map(|(_, d)| d).fold(0.0, f64::max);
        let mut hi = (spread / (-(-radius).exp_m1()))
            .max(2.0 * lo)
            .max(f64::MIN_POSITIVE);
        let mut grow = 0;
        while self.kl(hi) > radius {
            lo = hi;
            hi *= 2.0;
            grow += 1;
            if grow > 2000 || !hi.is_finite() {
                return Err(Error::NumericalFailure(
                    "cannot bracket the KL-ball dual root".into(),
                ));
            }
        }
        let (mut t_lo, mut t_hi) = (lo.ln(), hi.ln());
        let mut t = 0.5 * (t_lo + t_hi);
        for _ in 0..MAX_ROOT_ITERATIONS {
            let (kl, slope) = self.kl_and_slope(t.exp());
            let g = kl - radius;
            if g > 0.0 {
                t_lo = t;
            } else {
                t_hi = t;
            }
            if g.abs() <= target || t_hi - t_lo <= 1e-15 * t_hi.abs().max(1.0) {
                if g <= 0.0 {
                    return Ok(t.exp());
                }
                // Step just past the root onto the feasible side.
                let mut step = (g / slope).abs().max(1e-15 * t.abs().max(1.0));
                for _ in 0..64 {
                    let trial = (t + step).min(t_hi);
                    if self.kl(trial.exp()) <= radius {
                        return Ok(trial.exp());
                    }
                    step *= 2.0;
                }
                return Ok(t_hi.exp());
            }
            let newton = t - g / slope;
            t = if slope < 0.0 && newton > t_lo && newton < t_hi {
                newton
            } else {
                0.5 * (t_lo + t_hi)
            };
        }
        Err(Error::NumericalFailure(format!(
            "KL-ball dual root not found in {MAX_ROOT_ITERATIONS} iterations"
        )))
    }
}

/// Stationarity residual of an interior KL-ball solution.
///
/// With `lambda = 1 / sum_i center(i) / (nu - v(i))` the Lagrangian conditions read
/// `v(i) + lambda center(i) / q(i) = nu` on the support; the residual also
/// covers primal feasibility and tightness of the KL constraint. Returns `None`
/// for solutions that are not of the interior form.
pub fn kkt_residual(
    center: &[f64],
    v: &[f64],
    radius: f64,
    solution: &KlBallSolution,
) -> Option<f64> {
    let nu = solution.nu?;
    let z: f64 = center
        .iter()
        .zip(v)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, x)| p / (nu - x))
        .sum();
    let lambda = 1.0 / z;
    let mut residual = (solution.q.iter().sum::<f64>() - 1.0).abs();
    for ((p, x), q) in center.iter().zip(v).zip(&solution.q) {
        if *p > 0.0 {
            residual = residual.max((x + lambda * p / q - nu).abs());
        } else {
            residual = residual.max(q.abs()).max((x - nu).max(0.0));
        }
    }
    Some(residual.max((kl_divergence(center, &solution.q) - radius).abs()))
}

/// Linear maximization over `{q in simplex : ||q - center||_1 <= radius}`:
/// the best coordinate gains `radius / 2` (capped at 1) and the excess is
/// removed from the worst coordinates first.
pub fn max_expectation_l1_ball(center: &[f64], v: &[f64], radius: f64) -> (Vec<f64>, f64) {
    debug_assert_eq!(center.len(), v.len());
    let mut q = center.to_vec();
    let best = argmax(v);
    let added = (0.5 * radius.max(0.0)).min(1.0 - q[best]).max(0.0);
    q[best] += added;
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]).then(i.cmp(&j)));
    let mut excess = q.iter().sum::<f64>() - 1.0;
    for i in order {
        if excess <= 0.0 {
            break;
        }
        if i == best {
            continue;
        }
        let taken = q[i].min(excess);
        q[i] -= taken;
        excess -= taken;
    }
    let value = dot(&q, v);
    (q, value)
}

/// Constants of the KL confidence sets for horizon `T` and confidence `delta`:
///
/// - `B = log(2e S^2 A log(T) / delta)`
/// - `G = B + 1 / log(T)`
/// - `C_p = S (B + log(G)(1 + 1/G))`
/// - `C_mu = log(4 S A log(T) / delta) / 1.99`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceConstants {
    pub n_states: usize,
    pub n_actions: usize,
    pub horizon: u64,
    pub delta: f64,
    pub b: f64,
    pub g: f64,
    pub c_p: f64,
    pub c_mu: f64,
}

impl ConfidenceConstants {
    pub fn new(n_states: usize, n_actions: usize, horizon: u64, delta: f64) -> Result<Self> {
        if horizon < 3 {
            return Err(Error::DomainError(format!(
                "horizon must be at least 3, got {horizon}"
            )));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::DomainError(format!(
                "delta must lie in (0, 1], got {delta}"
            )));
        }
        if n_states == 0 || n_actions == 0 {
            return Err(Error::DomainError(
                "need at least one state and one action".into(),
            ));
        }
        let (s, a) = (n_states as f64, n_actions as f64);
        let log_t = (horizon as f64).ln();
        let b = (2.0 * std::f64::consts::E * s * s * a * log_t / delta).ln();
        let g = b + 1.0 / log_t;
        let c_p = s * (b + g.ln() * (1.0 + 1.0 / g));
        let c_mu = (4.0 * s * a * log_t / delta).ln() / 1.99;
        let constants = ConfidenceConstants {
            n_states,
            n_actions,
            horizon,
            delta,
            b,
            g,
            c_p,
            c_mu,
        };
        assert!(
            constants.c_p <= constants.coarse_cp_bound(),
            "C_p = {} exceeds 4SB = {}",
            constants.c_p,
            constants.coarse_cp_bound()
        );
        Ok(constants)
    }

    /// The coarse bound `4 S B >= C_p`.
    pub fn coarse_cp_bound(&self) -> f64 {
        4.0 * self.n_states as f64 * self.b
    }

    /// KL radius `C_p / N+` of a transition row observed `visits` times.
    pub fn transition_radius(&self, visits: u64) -> f64 {
        self.c_p / visits.max(1) as f64
    }

    /// Reward radius `sqrt(C_mu / N+)`.
    pub fn reward_radius(&self, visits: u64) -> f64 {
        (self.c_mu / visits.max(1) as f64).sqrt()
    }
}

/// Confidence radii of the UCRL2 baseline at episode start `t`:
/// `sqrt(14 S log(2 A t / delta) / N+)` in L1 for transitions and
/// `sqrt(3.5 log(2 S A t / delta) / N+)` for rewards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ucrl2Radii {
    pub n_states: usize,
    pub n_actions: usize,
    pub delta: f64,
}

impl Ucrl2Radii {
    pub fn transition_radius(&self, t: u64, visits: u64) -> f64 {
        let (s, a) = (self.n_states as f64, self.n_actions as f64);
        (14.0 * s * (2.0 * a * t.max(1) as f64 / self.delta).ln() / visits.max(1) as f64).sqrt()
    }

    pub fn reward_radius(&self, t: u64, visits: u64) -> f64 {
        let (s, a) = (self.n_states as f64, self.n_actions as f64);
        (3.5 * (2.0 * s * a * t.max(1) as f64 / self.delta).ln() / visits.max(1) as f64).sqrt()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
        assert_abs_diff_eq!(
            kl_divergence(&[1.0, 0.0], &[0.5, 0.5]),
            2f64.ln(),
            epsilon = 1e-15
        );
        assert_eq!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]), f64::INFINITY);
    }

    #[test]
    fn zero_radius_returns_center() {
        let sol = max_expectation_kl_ball(&[0.2, 0.8], &[1.0, 0.0], 0.0, DEFAULT_KL_TOL).unwrap();
        assert_eq!(sol.q, vec![0.2, 0.8]);
        assert_abs_diff_eq!(sol.value, 0.2);
    }

    #[test]
    fn constant_values_return_center() {
        let sol = max_expectation_kl_ball(&[0.3, 0.7], &[2.0, 2.0], 1.0, DEFAULT_KL_TOL).unwrap();
        assert_eq!(sol.q, vec![0.3, 0.7]);
    }

    #[test]
    fn point_mass_center_promotes_unseen_state() {
        let sol = max_expectation_kl_ball(&[1.0, 0.0], &[0.0, 1.0], 0.1, DEFAULT_KL_TOL).unwrap();
        let moved = 1.0 - (-0.1f64).exp();
        assert_abs_diff_eq!(sol.q[0], (-0.1f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(sol.q[1], moved, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.value, 0.0952, epsilon = 5e-5);
        assert_eq!(sol.promoted, Some(1));
        assert_abs_diff_eq!(kl_divergence(&[1.0, 0.0], &sol.q), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn binding_constraint_is_tight() {
        let center = [0.2, 0.5, 0.3];
        let v = [0.0, 0.4, 1.0];
        let sol = max_expectation_kl_ball(&center, &v, 0.05, DEFAULT_KL_TOL).unwrap();
        let kl = kl_divergence(&center, &sol.q);
        assert!((0.05 - 1e-10..=0.05 + 1e-12).contains(&kl), "kl = {kl}");
        assert!(kkt_residual(&center, &v, 0.05, &sol).unwrap() < 1e-8);
        assert!(sol.q.iter().all(|q| *q > 0.0));
    }

    #[test]
    fn huge_radius_concentrates_on_top_coordinate() {
        let center = [0.995, 0.005];
        let v = [0.0, 1.0];
        let sol = max_expectation_kl_ball(&center, &v, 90.0, DEFAULT_KL_TOL).unwrap();
        assert!(sol.value > 1.0 - 1e-12, "{sol:?}");
        assert!(kl_divergence(&center, &sol.q) <= 90.0 + 1e-9);
    }

    #[test]
    fn l1_examples() {
        let (q, value) = max_expectation_l1_ball(&[0.5, 0.5], &[0.0, 1.0], 0.4);
        assert_abs_diff_eq!(q[0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(q[1], 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(value, 0.7, epsilon = 1e-15);
        let (q, _) = max_expectation_l1_ball(&[0.25, 0.75], &[3.0, 1.0], 0.0);
        assert_eq!(q, vec![0.25, 0.75]);
        let (q, value) = max_expectation_l1_ball(&[0.2, 0.3, 0.5], &[0.0, 1.0, 0.5], 2.0);
        assert_abs_diff_eq!(q[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q[1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q[2], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(value, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn constants_direct_arithmetic() {
        let c = ConfidenceConstants::new(6, 2, 100_000, 0.05).unwrap();
        let expected_b = (2.0 * std::f64::consts::E * 36.0 * 2.0 * (1e5f64).ln() / 0.05).ln();
        assert_abs_diff_eq!(c.b, expected_b, epsilon = 1e-12);
        assert_abs_diff_eq!(c.g, expected_b + 1.0 / (1e5f64).ln(), epsilon = 1e-12);
        assert!(c.c_p <= c.coarse_cp_bound());
        assert_abs_diff_eq!(c.transition_radius(0), c.c_p);
        assert_abs_diff_eq!(c.reward_radius(4), (c.c_mu / 4.0).sqrt());
    }

    #[test]
    fn constants_reject_short_horizon() {
        assert!(matches!(
            ConfidenceConstants::new(1, 1, 2, 0.1),
            Err(Error::DomainError(_))
        ));
        assert!(ConfidenceConstants::new(1, 1, 10, 0.0).is_err());
    }

    #[test]
    fn ball_rejects_bad_center() {
        assert!(KlBall::new(vec![0.6, 0.6], 0.1).is_err());
        assert!(KlBall::new(vec![0.5, 0.5], -1.0).is_err());
        let ball = KlBall::new(vec![0.5, 0.5], 0.1).unwrap();
        assert!(ball.contains(&[0.5, 0.5]));
        assert!(!ball.contains(&[1.0, 0.0]));
    }
}
