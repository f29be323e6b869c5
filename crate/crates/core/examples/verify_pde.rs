//! Compares ensemble height increments with the corrected and uncorrected
//! PDEs. A constant sigma stands in for a fitted curve to keep this quick.

use surface_hydro::current::SigmaCurve;
use surface_hydro::harness::{verify_against_pde, Preset, Scale, VerifySettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let preset = Preset::VerifyExp;
    let levels: Vec<_> = [32, 64]
        .into_iter()
        .map(|n| {
            let mut c = preset.config(Scale::Desk, Some(n), std::env::temp_dir());
            c.n_samples = 64;
            c
        })
        .collect();
    let sigma = SigmaCurve::constant(0.8, levels[0].model.k);
    let report = verify_against_pde(&levels, &sigma, &VerifySettings::default())?;
    print!("{}", report.to_text());
    Ok(())
}
