use klucrl::agents::{
    extended_value_iteration_kl, extended_value_iteration_l1, Agent, AgentConfig, Algo,
    CountsTable, OptimisticAgent,
};
use klucrl::envs::{make_random_ergodic, sample_step, EnvConfig, RiverSwimConfig};
use klucrl::harness::{batch_run, run_simulation, PreparedEnv};
use klucrl::kl::{
    kl_divergence, max_expectation_kl_ball, max_expectation_l1_ball, ConfidenceConstants,
    Ucrl2Radii, DEFAULT_KL_TOL,
};
use klucrl::mdp::{
    optimality_residual, policy_gain_bias, solve_bellman_optimality, stationary_distribution,
    StationaryPolicy, TabularMdp,
};
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|w| {
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    })
}

fn center_and_values() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..7).prop_flat_map(|n| (simplex(n), prop::collection::vec(-2.0f64..2.0, n)))
}

/// `max v.q` over the simplex with `|q - p|_1 <= r`, as a linear program in
/// `(q, t)` with `t >= |q - p|`.
fn l1_lp_oracle(p: &[f64], v: &[f64], radius: f64) -> f64 {
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let q: Vec<_> = v
        .iter()
        .map(|vi| problem.add_var(*vi, (0.0, 1.0)))
        .collect();
    let t: Vec<_> = p.iter().map(|_| problem.add_var(0.0, (0.0, 2.0))).collect();
    problem.add_constraint(
        q.iter().map(|x| (*x, 1.0)).collect::<Vec<_>>(),
        ComparisonOp::Eq,
        1.0,
    );
    problem.add_constraint(
        t.iter().map(|x| (*x, 1.0)).collect::<Vec<_>>(),
        ComparisonOp::Le,
        radius,
    );
    for i in 0..p.len() {
        problem.add_constraint([(t[i], 1.0), (q[i], -1.0)], ComparisonOp::Ge, -p[i]);
        problem.add_constraint([(t[i], 1.0), (q[i], 1.0)], ComparisonOp::Ge, p[i]);
    }
    problem.solve().expect("feasible LP").objective()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kl_ball_is_feasible_and_beats_the_center((p, v) in center_and_values(), radius in 1e-4f64..3.0) {
        let sol = max_expectation_kl_ball(&p, &v, radius, DEFAULT_KL_TOL).unwrap();
        prop_assert!(kl_divergence(&p, &sol.q) <= radius + 1e-12);
        prop_assert!((sol.q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let center_value: f64 = p.iter().zip(&v).map(|(a, b)| a * b).sum();
        prop_assert!(sol.value >= center_value - 1e-12);
        prop_assert!(sol.value <= v.iter().cloned().fold(f64::MIN, f64::max) + 1e-12);
    }

    #[test]
    fn kl_ball_value_grows_with_radius((p, v) in center_and_values(), r in 1e-4f64..1.0, factor in 1.0f64..4.0) {
        let small = max_expectation_kl_ball(&p, &v, r, DEFAULT_KL_TOL).unwrap().value;
        let large = max_expectation_kl_ball(&p, &v, r * factor, DEFAULT_KL_TOL).unwrap().value;
        prop_assert!(large >= small - 1e-10);
    }

    #[test]
    fn kl_ball_shift_invariance((p, v) in center_and_values(), r in 1e-3f64..1.0, shift in -5.0f64..5.0) {
        let base = max_expectation_kl_ball(&p, &v, r, DEFAULT_KL_TOL).unwrap();
        let moved: Vec<f64> = v.iter().map(|x| x + shift).collect();
        let shifted = max_expectation_kl_ball(&p, &moved, r, DEFAULT_KL_TOL).unwrap();
        prop_assert!((shifted.value - base.value - shift).abs() < 1e-9);
    }

    #[test]
    fn l1_ball_matches_linear_program((p, v) in center_and_values(), radius in 0.0f64..2.5) {
        let (q, value) = max_expectation_l1_ball(&p, &v, radius);
        let l1: f64 = q.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
        prop_assert!(l1 <= radius + 1e-12);
        prop_assert!((value - l1_lp_oracle(&p, &v, radius)).abs() < 1e-7);
    }

    #[test]
    fn bellman_consistency_on_random_mdps(seed in 0u64..10_000, s in 1usize..7, a in 1usize..4) {
        let mdp = make_random_ergodic(s, a, seed, 0.0).unwrap();
        let (gb, policy) = solve_bellman_optimality(&mdp, 1e-11).unwrap();
        prop_assert!(optimality_residual(&mdp, gb.gain, &gb.bias) <= 1e-9);
        let evaluated = policy_gain_bias(&mdp, &policy).unwrap();
        prop_assert!((evaluated.gain - gb.gain).abs() <= 1e-9);
        let nu = stationary_distribution(&mdp, &policy).unwrap();
        let nu_gain: f64 = (0..s).map(|x| nu[x] * mdp.mean_reward(x, policy.mode(x))).sum();
        prop_assert!((nu_gain - gb.gain).abs() <= 1e-9);
    }

    #[test]
    fn uniform_policy_gain_matches_stationary_reward(seed in 0u64..10_000, s in 1usize..7, a in 1usize..4) {
        let mdp = make_random_ergodic(s, a, seed, 0.01 / s as f64).unwrap();
        let policy = StationaryPolicy::uniform(s, a);
        let gb = policy_gain_bias(&mdp, &policy).unwrap();
        let nu = stationary_distribution(&mdp, &policy).unwrap();
        let reward: f64 = (0..s)
            .map(|x| nu[x] * (0..a).map(|y| mdp.mean_reward(x, y)).sum::<f64>() / a as f64)
            .sum();
        prop_assert!((gb.gain - reward).abs() < 1e-10);
        prop_assert!(gb.bias.iter().zip(&nu).map(|(b, n)| b * n).sum::<f64>().abs() < 1e-10);
    }
}

/// Counts where every pair was observed `n` times with the exact frequencies
/// of `mdp` (up to rounding).
fn synthetic_counts(mdp: &TabularMdp, n: u64, rng: &mut ChaCha8Rng) -> CountsTable {
    let (s_count, a_count) = (mdp.n_states(), mdp.n_actions());
    let mut counts = CountsTable::new(s_count, a_count);
    counts.start_episode();
    for s in 0..s_count {
        for a in 0..a_count {
            for _ in 0..n {
                let (next, r) = sample_step(mdp, s, a, rng);
                counts.record(s, a, r, next);
            }
        }
    }
    counts.start_episode();
    counts
}

#[test]
fn optimism_under_membership() {
    let mut checked = 0;
    for k in 0..50 {
        let mdp = make_random_ergodic(2 + k % 4, 2 + k % 2, 1000 + k as u64, 0.02).unwrap();
        let (gb, _) = solve_bellman_optimality(&mdp, 1e-12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        let counts = synthetic_counts(&mdp, 5 + 10 * k as u64, &mut rng);
        let constants =
            ConfidenceConstants::new(mdp.n_states(), mdp.n_actions(), 10_000, 0.05).unwrap();
        let inside = (0..mdp.n_states()).all(|s| {
            (0..mdp.n_actions()).all(|a| {
                let n = counts.visits(s, a);
                let p_hat = counts.empirical_row(s, a).unwrap();
                kl_divergence(&p_hat, mdp.row(s, a)) <= constants.transition_radius(n)
                    && (counts.empirical_reward(s, a) - mdp.mean_reward(s, a)).abs()
                        <= constants.reward_radius(n)
            })
        });
        if !inside {
            continue;
        }
        checked += 1;
        let accuracy = 1e-3;
        let plan = extended_value_iteration_kl(&counts, &constants, accuracy).unwrap();
        assert!(
            plan.gain + accuracy >= gb.gain,
            "instance {k}: {} < {}",
            plan.gain,
            gb.gain
        );
        assert!(
            plan.max_span_increase <= 1e-12,
            "span increased by {}",
            plan.max_span_increase
        );
        let radii = Ucrl2Radii {
            n_states: mdp.n_states(),
            n_actions: mdp.n_actions(),
            delta: 0.05,
        };
        let l1 = extended_value_iteration_l1(&counts, &radii, accuracy).unwrap();
        assert!(l1.gain + accuracy >= gb.gain);
    }
    assert!(
        checked >= 40,
        "only {checked} instances inside the confidence set"
    );
}

#[test]
fn l1_plan_converges_to_true_gain_with_vanishing_radii() {
    let mdp = make_random_ergodic(4, 3, 77, 0.01).unwrap();
    let (gb, _) = solve_bellman_optimality(&mdp, 1e-12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let counts = synthetic_counts(&mdp, 200_000, &mut rng);
    let radii = Ucrl2Radii {
        n_states: 4,
        n_actions: 3,
        delta: 0.05,
    };
    let plan = extended_value_iteration_l1(&counts, &radii, 1e-6).unwrap();
    assert!(plan.gain >= gb.gain - 1e-6);
    assert!(plan.gain - gb.gain < 0.05, "{} vs {}", plan.gain, gb.gain);
}

#[test]
fn count_conservation_and_determinism() {
    let mdp = make_random_ergodic(4, 2, 5, 0.02).unwrap();
    let config = AgentConfig::new(Algo::KlUcrl);
    let play = || {
        let mut agent = OptimisticAgent::kl_ucrl(4, 2, &config, 5_000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut s = 0;
        let mut actions = Vec::new();
        for t in 1..=5_000u64 {
            let a = agent.act(s).unwrap();
            let (next, r) = sample_step(&mdp, s, a, &mut rng);
            agent.observe(s, a, r, next);
            assert_eq!(agent.counts().total_steps(), t);
            actions.push(a);
            s = next;
        }
        actions
    };
    assert_eq!(play(), play());
}

#[test]
fn batch_is_permutation_invariant() {
    let env = EnvConfig::Riverswim(RiverSwimConfig::default());
    let agent = AgentConfig::new(Algo::KlUcrl);
    let a = batch_run(&env, &agent, 3_000, &[3, 1, 2]).unwrap();
    let b = batch_run(&env, &agent, 3_000, &[2, 3, 1]).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        a.traces.iter().map(|t| t.seed).collect::<Vec<_>>(),
        vec![1, 2, 3]
    );
}

#[test]
fn oracle_regret_per_step_vanishes() {
    let env = EnvConfig::Riverswim(RiverSwimConfig::default());
    let prepared = PreparedEnv::from_config(&env).unwrap();
    let horizon = 1_000_000;
    let trace = prepared
        .simulate(&AgentConfig::new(Algo::Oracle), horizon, 21)
        .unwrap();
    // Rewards of the optimal chain are bounded by 1, so the reward CLT band
    // for the average is at most a few times sqrt(T_mix / T); a generous 3
    // sigma with sigma = 1 / sqrt(T) times the bias span covers it.
    let per_step = trace.final_regret() / horizon as f64;
    assert!(per_step.abs() < 0.01, "{per_step}");
    assert_eq!(trace.recompute_regret(), trace.regret);
}

#[test]
fn single_step_trace() {
    let env = EnvConfig::Riverswim(RiverSwimConfig::default());
    let trace = run_simulation(&env, &AgentConfig::new(Algo::Oracle), 1, 0).unwrap();
    assert_eq!(trace.regret, vec![trace.gain_opt - trace.rewards[0]]);
}

#[test]
fn agent_trait_objects_are_interchangeable() {
    let mdp = make_random_ergodic(3, 2, 9, 0.05).unwrap();
    for algo in [Algo::KlUcrl, Algo::Ucrl2, Algo::Oracle] {
        let mut agent: Box<dyn Agent> = AgentConfig::new(algo).build(&mdp, 100).unwrap();
        let a = agent.act(0).unwrap();
        assert!(a < 2);
        agent.observe(0, a, 0.5, 1);
        assert!(!agent.episode_starts().is_empty());
    }
}
