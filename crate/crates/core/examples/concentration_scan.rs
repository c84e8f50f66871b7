//! Sampling certificate for the transportation inequalities.
//!
//! ```text
//! cargo run --release --example concentration_scan -- [samples]
//! ```

use klucrl::concentration::{empirical_variance_check, inequality_scan, ScanConfig};

fn main() -> klucrl::Result<()> {
    let samples = std::env::args()
        .nth(1)
        .map_or(100_000, |a| a.parse().expect("samples must be an integer"));
    let report = inequality_scan(&ScanConfig {
        samples,
        ..Default::default()
    })?;
    for (ineq, stats) in &report.inequalities {
        println!(
            "{ineq:?}: {} / {} violations, worst slack {:.3e}",
            stats.violations, stats.samples, stats.worst_slack
        );
    }
    let check = empirical_variance_check(1_000, 0.05, 7)?;
    println!(
        "empirical variance bound failed in {:.4} of {} trials (allowed {:.4})",
        check.frequency, check.trials, check.allowed
    );
    Ok(())
}
