//! Problem constants of RiverSwim for growing state counts.
//!
//! ```text
//! cargo run --release --example riverswim_table
//! ```

use klucrl::envs::{EnvConfig, RiverSwimConfig};
use klucrl::harness::{analyze_mdp, write_table_csv, AnalyzeOptions};

fn main() -> klucrl::Result<()> {
    let options = AnalyzeOptions::default();
    let mut rows = Vec::new();
    for n in [6, 12, 20, 40, 70, 100] {
        let env = EnvConfig::Riverswim(RiverSwimConfig::with_states(n));
        let analysis = analyze_mdp(&env, &options)?;
        eprintln!(
            "S = {n:3}: D = {:8.2}, g* = {:.4}, mixing = {}",
            analysis.profile.diameter,
            analysis.profile.gain_opt,
            analysis
                .profile
                .mixing_time
                .map_or("skipped".into(), |m| format!("{m:.2}"))
        );
        rows.push(analysis.row);
    }
    write_table_csv(std::io::stdout().lock(), &rows)
}
