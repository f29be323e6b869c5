//! Recovers a planted mobility correction from synthetic point clouds.

use surface_hydro::harness::{fit_sigma_from_slices, SigmaSettings, SyntheticClouds};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let settings = SigmaSettings::default();
    let planted = |w: f64| 1.0 + 0.5 * (w * w).tanh();
    let clouds = SyntheticClouds::new(2.0, 800, 2.5, 0.02).generate(planted, &settings.fit)?;
    let fit = fit_sigma_from_slices(&clouds, &settings)?;
    let curve = &fit.curve;
    println!(
        "selected epsilon {:.4}, delta {:.3e}, domain |w| <= {:.3}",
        fit.selection.epsilon, fit.selection.delta, curve.domain
    );
    for i in 0..=8 {
        let w = -curve.domain + 2.0 * curve.domain * i as f64 / 8.0;
        println!(
            "  w = {w:+.3}: fitted {:.4}, planted {:.4}",
            curve.eval(w),
            planted(w)
        );
    }
    Ok(())
}
