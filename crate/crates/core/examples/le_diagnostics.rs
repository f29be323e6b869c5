//! Local-equilibrium diagnostics across three lattice sizes with a short
//! run per level: roughness, convergence, variance decay and collapse.

use surface_hydro::harness::{diagnose_le, run_ensemble, LeSettings, Preset, Scale};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut levels = Vec::new();
    for n in [32, 64, 128] {
        let mut cfg = Preset::RoughLe.config(Scale::Desk, Some(n), std::env::temp_dir());
        cfg.n_samples = 40;
        levels.push(run_ensemble(&cfg)?);
        println!("N = {n}: {} jumps", levels.last().unwrap().total_jumps);
    }
    let report = diagnose_le(&levels, &LeSettings::default())?;
    print!("{}", report.to_text());
    Ok(())
}
