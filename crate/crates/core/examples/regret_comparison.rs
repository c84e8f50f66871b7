//! KL-UCRL against UCRL2 on the 6-state ergodic RiverSwim.
//!
//! ```text
//! cargo run --release --example regret_comparison -- [T] [seeds]
//! ```

use std::time::Instant;

use klucrl::agents::{AgentConfig, Algo};
use klucrl::envs::{EnvConfig, RiverSwimConfig};
use klucrl::harness::{batch_run_prepared, PreparedEnv};

fn main() -> klucrl::Result<()> {
    let mut args = std::env::args().skip(1);
    let horizon: u64 = args
        .next()
        .map_or(100_000, |a| a.parse().expect("T must be an integer"));
    let n_seeds: u64 = args
        .next()
        .map_or(20, |a| a.parse().expect("seed count must be an integer"));
    let seeds: Vec<u64> = (0..n_seeds).collect();

    let env = EnvConfig::Riverswim(RiverSwimConfig::default());
    let prepared = PreparedEnv::from_config(&env)?;
    println!("g* = {:.6}", prepared.gain_opt);

    for algo in [Algo::KlUcrl, Algo::Ucrl2] {
        let start = Instant::now();
        let batch = batch_run_prepared(&prepared, &AgentConfig::new(algo), horizon, &seeds)?;
        let episodes: f64 = batch
            .traces
            .iter()
            .map(|t| t.episodes() as f64)
            .sum::<f64>()
            / batch.traces.len() as f64;
        println!(
            "{algo:?}: mean regret {:.1} (std {:.1}) at T = {horizon}, R(T/10) = {:.1}, {episodes:.1} episodes, {:.1?}",
            batch.final_mean(),
            batch.regret_std.last().unwrap(),
            batch.mean_at(horizon / 10).unwrap_or(f64::NAN),
            start.elapsed()
        );
    }
    Ok(())
}
