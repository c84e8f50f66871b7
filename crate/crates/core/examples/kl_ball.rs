//! Linear maximization over KL and L1 balls around the same center.

use klucrl::kl::{
    kkt_residual, kl_divergence, max_expectation_kl_ball, max_expectation_l1_ball, DEFAULT_KL_TOL,
};

fn main() -> klucrl::Result<()> {
    let center = [0.5, 0.3, 0.2, 0.0];
    let v = [0.0, 1.0, 0.5, 2.0];
    println!("center {center:?}, v {v:?}");
    for radius in [1e-3, 1e-2, 0.1, 0.5, 2.0] {
        let sol = max_expectation_kl_ball(&center, &v, radius, DEFAULT_KL_TOL)?;
        let (q1, value1) = max_expectation_l1_ball(&center, &v, (2.0 * radius).sqrt());
        let q: Vec<String> = sol.q.iter().map(|x| format!("{x:.4}")).collect();
        println!(
            "r = {radius:<6} KL value {:.5} q [{}] KL {:.2e} promoted {:?} kkt {:?}",
            sol.value,
            q.join(", "),
            kl_divergence(&center, &sol.q),
            sol.promoted,
            kkt_residual(&center, &v, radius, &sol)
        );
        println!("           L1 (Pinsker radius) value {value1:.5} q {q1:.4?}");
    }
    Ok(())
}
