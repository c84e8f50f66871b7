//! Gain, bias, diameter and mixing time of a small random MDP, plus every
//! deterministic policy's gain.

use klucrl::envs::make_random_ergodic;
use klucrl::mdp::{policy_gain_bias, MdpProfile, ProfileOptions, StationaryPolicy};

fn main() -> klucrl::Result<()> {
    let mdp = make_random_ergodic(3, 2, 11, 0.05)?;
    let profile = MdpProfile::compute(&mdp, &ProfileOptions::default())?;
    println!("g* = {:.6}", profile.gain_opt);
    println!("h* = {:.4?}", profile.bias_opt);
    println!("pi* = {:?}", profile.optimal_policy);
    println!(
        "D = {:.4}, span(h*) = {:.4}",
        profile.diameter, profile.span_bias
    );
    println!("T_mix = {:?}", profile.mixing_time);
    println!("gaps = {:.4?}", profile.gaps);

    for code in 0..8usize {
        let actions: Vec<usize> = (0..3).map(|s| (code >> s) & 1).collect();
        let gb = policy_gain_bias(&mdp, &StationaryPolicy::deterministic(&actions, 2))?;
        println!("policy {actions:?}: gain {:.6}", gb.gain);
    }
    Ok(())
}
