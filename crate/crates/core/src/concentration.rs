//! Transportation-type deviation bounds relating expectations under two
//! distributions to their KL divergence, the semi-variance operator, and a
//! Monte-Carlo harness that certifies the bounds on random and adversarial
//! inputs.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envs::sample_index;
use crate::error::{Error, Result};
use crate::kl::{kl_divergence, ConfidenceConstants};
use crate::mdp::span;

/// Relative slack granted to every inequality check.
pub const RELATIVE_SLACK: f64 = 1e-12;

const SHARD_SIZE: usize = 1024;

pub fn mean(p: &[f64], f: &[f64]) -> f64 {
    p.iter().zip(f).map(|(p, f)| p * f).sum()
}

/// `Var_P(f)`.
pub fn variance(p: &[f64], f: &[f64]) -> f64 {
    let m = mean(p, f);
    p.iter().zip(f).map(|(p, f)| p * (f - m) * (f - m)).sum()
}

/// `V_{P,Q}(f) = sum_{x : P(x) >= Q(x)} P(x) (f(x) - E_P f)^2`.
pub fn semi_variance(p: &[f64], q: &[f64], f: &[f64]) -> f64 {
    let m = mean(p, f);
    p.iter()
        .zip(q)
        .zip(f)
        .filter(|((p, q), _)| p >= q)
        .map(|((p, _), f)| p * (f - m) * (f - m))
        .sum()
}

/// `sqrt(2 Var_P(f) KL(Q,P)) + (2/3) span(f) KL(Q,P)`, an upper bound on
/// `E_Q f - E_P f` for `Q << P`.
pub fn bernstein_transport_upper(var_p: f64, span_f: f64, kl: f64) -> f64 {
    (2.0 * var_p * kl).sqrt() + 2.0 / 3.0 * span_f * kl
}

/// `sqrt(2 Var_P(f) KL(Q,P))`, an upper bound on `E_P f - E_Q f` for `Q << P`.
pub fn bernstein_transport_lower(var_p: f64, kl: f64) -> f64 {
    (2.0 * var_p * kl).sqrt()
}

/// `(sqrt(V_{P,Q}(f)) + sqrt(V_{Q,P}(f))) sqrt(2 KL(P,Q)) + span(f) KL(P,Q)`,
/// an upper bound on `E_Q f - E_P f` for `P << Q` (`+inf` otherwise).
pub fn transport2_bound(p: &[f64], q: &[f64], f: &[f64]) -> f64 {
    let kl = kl_divergence(p, q);
    if kl.is_infinite() {
        return f64::INFINITY;
    }
    if kl == 0.0 {
        return 0.0;
    }
    (semi_variance(p, q, f).sqrt() + semi_variance(q, p, f).sqrt()) * (2.0 * kl).sqrt()
        + span(f) * kl
}

/// `sqrt(2 Var_Q(f)) + 3 span(f) sqrt(|X| KL(Q,P))`, which dominates
/// `sqrt(V_{P,Q}(f))` on alphabets with at least two letters.
pub fn vcal_upper_bound(p: &[f64], q: &[f64], f: &[f64]) -> Result<f64> {
    if p.len() < 2 {
        return Err(Error::DomainError(format!(
            "semi-variance bound needs |X| >= 2, got {}",
            p.len()
        )));
    }
    let kl = kl_divergence(q, p);
    let spread = span(f);
    let tail = if spread == 0.0 {
        0.0
    } else {
        3.0 * spread * (p.len() as f64 * kl).sqrt()
    };
    Ok((2.0 * variance(q, f)).sqrt() + tail)
}

/// `(KL(P,Q), 1/2 sum_{x : P != Q} (P(x) - Q(x))^2 / max(P(x), Q(x)))`.
pub fn refined_pinsker_lhs_rhs(p: &[f64], q: &[f64]) -> (f64, f64) {
    let rhs = 0.5
        * p.iter()
            .zip(q)
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (a - b) * (a - b) / a.max(*b))
            .sum::<f64>();
    (kl_divergence(p, q), rhs)
}

/// `sqrt(2 var_true) + 6 S span(f) B / sqrt(N)`, the high-probability bound on
/// the empirical standard deviation `sqrt(Var_{p_hat}(f))`.
pub fn empirical_variance_bound(
    var_true: f64,
    span_f: f64,
    n_states: usize,
    b: f64,
    n: u64,
) -> f64 {
    assert!(n >= 1, "sample count must be positive");
    (2.0 * var_true).sqrt() + 6.0 * n_states as f64 * span_f * b / (n as f64).sqrt()
}

/// The inequalities certified by [`inequality_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    BernsteinUpper,
    BernsteinLower,
    #[serde(rename = "transport_ii")]
    TransportII,
    SemiVarianceBelowVariance,
    SemiVarianceUpper,
    RefinedPinsker,
}

impl Inequality {
    pub const ALL: [Inequality; 6] = [
        Inequality::BernsteinUpper,
        Inequality::BernsteinLower,
        Inequality::TransportII,
        Inequality::SemiVarianceBelowVariance,
        Inequality::SemiVarianceUpper,
        Inequality::RefinedPinsker,
    ];

    /// `(lhs, rhs)` of the inequality `lhs <= rhs` on one input triple.
    pub fn sides(self, p: &[f64], q: &[f64], f: &[f64]) -> (f64, f64) {
        match self {
            Inequality::BernsteinUpper => {
                let kl = kl_divergence(q, p);
                (
                    mean(q, f) - mean(p, f),
                    bernstein_transport_upper(variance(p, f), span(f), kl),
                )
            }
            Inequality::BernsteinLower => {
                let kl = kl_divergence(q, p);
                (
                    mean(p, f) - mean(q, f),
                    bernstein_transport_lower(variance(p, f), kl),
                )
            }
            Inequality::TransportII => (mean(q, f) - mean(p, f), transport2_bound(p, q, f)),
            Inequality::SemiVarianceBelowVariance => (semi_variance(p, q, f), variance(p, f)),
            Inequality::SemiVarianceUpper => (
                semi_variance(p, q, f).sqrt(),
                vcal_upper_bound(p, q, f).unwrap_or(f64::INFINITY),
            ),
            Inequality::RefinedPinsker => {
                let (kl, rhs) = refined_pinsker_lhs_rhs(p, q);
                (rhs, kl)
            }
        }
    }
}

/// Whether `lhs <= rhs` fails beyond the relative slack.
pub fn violates(lhs: f64, rhs: f64) -> bool {
    lhs > rhs + RELATIVE_SLACK * lhs.abs().max(rhs.abs()).max(1.0)
}

/// Sample set of [`inequality_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Dirichlet(1, ..., 1) pairs drawn for the main suite.
    pub samples: usize,
    pub min_dim: usize,
    pub max_dim: usize,
    pub seed: u64,
    /// Random near-boundary triples added after the fixed degenerate cases.
    pub stress_samples: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            samples: 100_000,
            min_dim: 2,
            max_dim: 8,
            seed: 7,
            stress_samples: 10_000,
        }
    }
}

/// Per-inequality tally. `worst_slack` is the smallest `rhs - lhs` observed
/// (negative values are violations before slack).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityStats {
    pub samples: usize,
    pub violations: usize,
    pub worst_slack: f64,
}

impl InequalityStats {
    fn empty() -> Self {
        InequalityStats {
            samples: 0,
            violations: 0,
            worst_slack: f64::INFINITY,
        }
    }

    fn record(&mut self, lhs: f64, rhs: f64) {
        self.samples += 1;
        if violates(lhs, rhs) {
            self.violations += 1;
        }
        let slack = rhs - lhs;
        if !slack.is_nan() {
            self.worst_slack = self.worst_slack.min(slack);
        }
    }

    fn merge(&mut self, other: &InequalityStats) {
        self.samples += other.samples;
        self.violations += other.violations;
        self.worst_slack = self.worst_slack.min(other.worst_slack);
    }
}

/// Violation report of [`inequality_scan`], one entry per inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub config: ScanConfig,
    pub inequalities: BTreeMap<Inequality, InequalityStats>,
}

impl ScanReport {
    fn new(config: ScanConfig) -> Self {
        ScanReport {
            config,
            inequalities: Inequality::ALL
                .iter()
                .map(|i| (*i, InequalityStats::empty()))
                .collect(),
        }
    }

    fn record_all(&mut self, p: &[f64], q: &[f64], f: &[f64]) {
        for (ineq, stats) in self.inequalities.iter_mut() {
            let (lhs, rhs) = ineq.sides(p, q, f);
            stats.record(lhs, rhs);
        }
    }

    fn merge(&mut self, other: &ScanReport) {
        for (ineq, stats) in self.inequalities.iter_mut() {
            stats.merge(&other.inequalities[ineq]);
        }
    }

    pub fn total_violations(&self) -> usize {
        self.inequalities.values().map(|s| s.violations).sum()
    }
}

/// Random stream of shard `index`, derived from the master seed.
pub(crate) fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Dirichlet(1, ..., 1) sample of dimension `d`.
pub fn uniform_simplex<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    let mut x: Vec<f64> = (0..d).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= total);
    x
}

/// Evaluates every inequality on `config.samples` Dirichlet pairs with uniform
/// `f in [0,1]^d`, then on a stress suite of degenerate and near-boundary
/// inputs. Shards draw from independent substreams of the seed, so the report
/// does not depend on the number of worker threads.
pub fn inequality_scan(config: &ScanConfig) -> Result<ScanReport> {
    if config.min_dim < 2 || config.max_dim < config.min_dim {
        return Err(Error::InvalidConfig(format!(
            "dimension range [{}, {}] must satisfy 2 <= min <= max",
            config.min_dim, config.max_dim
        )));
    }
    let shards = config.samples.div_ceil(SHARD_SIZE);
    let partials: Vec<ScanReport> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let mut rng = substream(config.seed, shard as u64);
            let mut report = ScanReport::new(*config);
            let count = SHARD_SIZE.min(config.samples - shard * SHARD_SIZE);
            for _ in 0..count {
                let d = rng.random_range(config.min_dim..=config.max_dim);
                let p = uniform_simplex(&mut rng, d);
                let q = uniform_simplex(&mut rng, d);
                let f: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                report.record_all(&p, &q, &f);
            }
            report
        })
        .collect();
    let mut report = ScanReport::new(*config);
    for partial in &partials {
        report.merge(partial);
    }
    report.merge(&stress_suite(config));
    Ok(report)
}

fn stress_suite(config: &ScanConfig) -> ScanReport {
    let mut report = ScanReport::new(*config);
    // Fixed degenerate cases.
    for d in config.min_dim..=config.max_dim {
        let uniform = vec![1.0 / d as f64; d];
        let constant = vec![0.5; d];
        let ramp: Vec<f64> = (0..d).map(|i| i as f64 / (d - 1) as f64).collect();
        for i in 0..d {
            let mut point = vec![0.0; d];
            point[i] = 1.0;
            for f in [&constant, &ramp] {
                report.record_all(&point, &uniform, f);
                report.record_all(&uniform, &point, f);
                report.record_all(&point, &point, f);
                report.record_all(&uniform, &uniform, f);
            }
        }
    }
    // Near-boundary random triples: tiny masses on either side.
    let mut rng = substream(config.seed ^ 0x5eed_5eed, u64::MAX);
    for k in 0..config.stress_samples {
        let d = rng.random_range(config.min_dim..=config.max_dim);
        let mut p = uniform_simplex(&mut rng, d);
        let mut q = uniform_simplex(&mut rng, d);
        let tiny = 10f64.powi(-rng.random_range(6..=12));
        let skewed = if k % 2 == 0 { &mut q } else { &mut p };
        let heavy = rng.random_range(0..d);
        for (i, x) in skewed.iter_mut().enumerate() {
            *x = if i == heavy {
                1.0 - tiny * (d - 1) as f64
            } else {
                tiny
            };
        }
        let f: Vec<f64> = match k % 3 {
            0 => (0..d).map(|_| rng.random::<f64>()).collect(),
            1 => (0..d)
                .map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 })
                .collect(),
            _ => (0..d).map(|_| 1e3 * (rng.random::<f64>() - 0.5)).collect(),
        };
        report.record_all(&p, &q, &f);
    }
    report
}

/// Outcome of the empirical-variance check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceCheckReport {
    pub trials: usize,
    pub violations: usize,
    pub delta: f64,
    pub frequency: f64,
    /// `delta + 3 sqrt(delta (1 - delta) / trials)`.
    pub allowed: f64,
}

/// Draws `trials` triples `(p, f, N)` with `p ~ Dirichlet(1)` on `d in [2, 8]`
/// letters, `f ~ U[0,1]^d` and `N` log-uniform in `[10, 10^4]`, forms the
/// empirical law `p_hat` of `N` samples and counts how often
/// `sqrt(Var_{p_hat}(f))` exceeds [`empirical_variance_bound`] with `B` taken
/// from [`ConfidenceConstants`] (`S = d`, `A = 1`, `T = 10^4`).
pub fn empirical_variance_check(
    trials: usize,
    delta: f64,
    seed: u64,
) -> Result<VarianceCheckReport> {
    const MAX_N: u64 = 10_000;
    let outcomes: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = substream(seed, trial as u64);
            let d = rng.random_range(2..=8usize);
            let p = uniform_simplex(&mut rng, d);
            let f: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let n = (10f64.powf(rng.random_range(1.0..4.0))).round() as u64;
            let mut counts = vec![0u64; d];
            for _ in 0..n {
                counts[sample_index(&mut rng, &p)] += 1;
            }
            let p_hat: Vec<f64> = counts.iter().map(|c| *c as f64 / n as f64).collect();
            let b = ConfidenceConstants::new(d, 1, MAX_N, delta)?.b;
            let bound = empirical_variance_bound(variance(&p, &f), span(&f), d, b, n);
            Ok(violates(variance(&p_hat, &f).sqrt(), bound))
        })
        .collect::<Result<_>>()?;
    let violations = outcomes.iter().filter(|v| **v).count();
    let frequency = violations as f64 / trials.max(1) as f64;
    Ok(VarianceCheckReport {
        trials,
        violations,
        delta,
        frequency,
        allowed: delta + 3.0 * (delta * (1.0 - delta) / trials.max(1) as f64).sqrt(),
    })
}
