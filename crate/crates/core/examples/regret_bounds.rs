//! Upper and lower regret bounds for RiverSwim over a range of horizons.

use klucrl::agents::regret_bound_evaluators;
use klucrl::envs::{make_ergodic_riverswim, RiverSwimConfig};
use klucrl::mdp::{MdpProfile, ProfileOptions};

fn main() -> klucrl::Result<()> {
    let mdp = make_ergodic_riverswim(&RiverSwimConfig::default())?;
    let profile = MdpProfile::compute(&mdp, &ProfileOptions::default())?;
    println!("T          B        leading      full         lower");
    for exp in 3..=8 {
        let horizon = 10u64.pow(exp);
        let b = regret_bound_evaluators(&profile, horizon, 0.05)?;
        println!(
            "{horizon:<10} {:<8.3} {:<12.1} {:<12.1} {:.1}",
            b.b, b.ub_leading, b.ub_full, b.lb
        );
    }
    Ok(())
}
