//! Drives a single replicate jump by jump and watches the conserved mass,
//! the energy and the internal caches.

use surface_hydro::kmc::{
    kmc_step, replicate_rng, sample_initial_state_with, InitialProfile, ModelParams, ProfileShape,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 64;
    let params = ModelParams::metropolis(1.0, n)?;
    let profile = InitialProfile::from_shape(ProfileShape::Sin { amplitude: 0.0075 }, n)?;
    let mut rng = replicate_rng(42, 0);
    let mut state = sample_initial_state_with(&profile, params, &mut rng)?;
    println!(
        "N = {n}, K = 1, initial energy {}, mass {}",
        state.energy(),
        state.total_mass()
    );
    for block in 1..=5 {
        for _ in 0..20_000 {
            kmc_step(&mut state, &mut rng)?;
        }
        state.verify_caches()?;
        println!(
            "after {:>6} jumps: t = {:.3e} (macro {:.3e}), energy {:>5}, mass {}",
            block * 20_000,
            state.sim_time(),
            state.sim_time() / params.time_scale(),
            state.energy(),
            state.total_mass()
        );
    }
    Ok(())
}
