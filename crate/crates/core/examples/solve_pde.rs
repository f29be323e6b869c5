//! Solves the height equation with the Gibbs current law and compares a
//! small mode's decay with the linearized rate.

use std::f64::consts::PI;

use surface_hydro::pde::{solve_h_pde, CurrentLaw, FieldKind, PdeField, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k = 1.0;
    let law = CurrentLaw::gibbs(k);
    let rate = 2.0 * k * (-1.5 * k).exp() * (2.0 * PI).powi(4);
    for amplitude in [1e-6, 5e-3] {
        let h0 = PdeField::sample(FieldKind::Height, 256, |x| amplitude * (2.0 * PI * x).sin())?;
        let t_end = 1.0 / rate;
        let cfg =
            SolverConfig::default().with_outputs((1..=4).map(|i| t_end * i as f64 / 4.0).collect());
        let traj = solve_h_pde(&h0, &law, t_end, &cfg)?;
        println!(
            "amplitude {amplitude:e}: {} steps accepted",
            traj.stats.accepted
        );
        let b0 = h0.sine_coefficient(1);
        for s in traj.snapshots.iter().skip(1) {
            println!(
                "  t = {:.3e}: mode ratio {:.5}, linear prediction {:.5}",
                s.t,
                s.sine_coefficient(1) / b0,
                (-rate * s.t).exp()
            );
        }
    }
    Ok(())
}
