//! The two-state hard instance: closed forms against the numerical profile,
//! and the lower bound they imply.

use klucrl::agents::regret_bound_evaluators;
use klucrl::envs::{make_two_state_hard, TwoStateHardConfig};
use klucrl::mdp::{MdpProfile, ProfileOptions};

fn main() -> klucrl::Result<()> {
    let horizon = 1_000_000;
    println!("delta    eps      gain     D        V_max     lb(T=1e6)");
    for delta in [0.05, 0.1, 0.2, 0.3] {
        for eps in [delta / 8.0, delta / 4.0, delta / 2.0] {
            let config = TwoStateHardConfig {
                delta,
                eps,
                n_actions: 2,
            };
            let (mdp, closed) = make_two_state_hard(&config)?;
            let profile = MdpProfile::compute(&mdp, &ProfileOptions::default())?;
            let bounds = regret_bound_evaluators(&profile, horizon, 0.05)?;
            println!(
                "{delta:<8} {eps:<8.4} {:<8.5} {:<8.3} {:<9.6} {:.2}",
                closed.gain, closed.diameter, closed.v_max, bounds.lb
            );
            assert!((profile.v_max - closed.v_max).abs() < 1e-9);
        }
    }
    Ok(())
}
