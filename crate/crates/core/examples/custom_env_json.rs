//! Loading an explicit MDP from JSON and running the three agents on it.

use klucrl::agents::{AgentConfig, Algo};
use klucrl::envs::EnvConfig;
use klucrl::harness::batch_run;

const MODEL: &str = r#"{
    "family": "explicit",
    "n_states": 3,
    "n_actions": 2,
    "transition": [
        [[0.9, 0.1, 0.0], [0.2, 0.8, 0.0]],
        [[0.5, 0.5, 0.0], [0.0, 0.3, 0.7]],
        [[0.0, 0.4, 0.6], [0.1, 0.0, 0.9]]
    ],
    "mean_reward": [[0.1, 0.0], [0.0, 0.2], [0.3, 0.8]]
}"#;

fn main() -> klucrl::Result<()> {
    let env = EnvConfig::from_json(MODEL)?;
    let seeds: Vec<u64> = (0..8).collect();
    for algo in [Algo::Oracle, Algo::KlUcrl, Algo::Ucrl2] {
        let batch = batch_run(&env, &AgentConfig::new(algo), 20_000, &seeds)?;
        println!(
            "{algo:?}: regret {:.1} +- {:.1}",
            batch.final_mean(),
            batch.regret_std.last().unwrap()
        );
    }
    Ok(())
}
