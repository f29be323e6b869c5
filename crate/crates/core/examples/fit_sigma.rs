//! Fits the mobility correction from a small weak-coupling ensemble, where
//! it should stay close to one.

use surface_hydro::harness::{pipeline_sigma, Preset, Scale};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::temp_dir().join("surface-hydro-example-sigma");
    let _ = std::fs::remove_dir_all(&out);
    let preset = Preset::SigmaWeak;
    let mut cfg = preset.config(Scale::Desk, Some(128), &out);
    cfg.n_samples = 16;
    let fit = pipeline_sigma(&cfg, &preset.sigma_settings(Scale::Desk))?;
    let c = &fit.curve;
    println!(
        "burn-in passed: {}, fit time {:.3e}",
        fit.burn_in_passed, fit.t
    );
    println!(
        "sigma(0) = {:.3}, sigma(+W) = {:.3}, sigma(-W) = {:.3}, W = {:.3}",
        c.eval(0.0),
        c.eval(c.domain),
        c.eval(-c.domain),
        c.domain
    );
    println!(
        "asymmetry {:.4}, min {:.3}; curve and tables in {}",
        c.asymmetry(400),
        c.min_value(400),
        out.display()
    );
    Ok(())
}
