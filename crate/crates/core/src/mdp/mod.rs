//! Exact analytics on known tabular MDPs.

mod chain;
mod model;
mod optimality;
mod profile;
mod structure;

pub use chain::{
    closed_class_count, hitting_times, induced_chain, is_irreducible, policy_gain_bias,
    stationary_distribution, GainBias, RESIDUAL_TOL,
};
pub use model::{argmax, RewardNoise, StationaryPolicy, TabularMdp, SIMPLEX_TOL};
pub use optimality::{
    optimality_residual, relative_value_iteration, solve_bellman_optimality,
    solve_bellman_optimality_with, ValueIterationOptions, ValueIterationOutcome,
};
pub use profile::{bias_variance_table, suboptimality_gaps, MdpProfile, ProfileOptions, GAP_TOL};
pub use structure::{
    diameter, min_hitting_times, mixing_time, span, worst_pair_hitting_time, DEFAULT_POLICY_CAP,
};
