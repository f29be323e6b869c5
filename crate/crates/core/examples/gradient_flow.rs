//! Minimizing-movement solution of the slope equation: energy and norm
//! decay, and the comparison with the method-of-lines solver.

use std::f64::consts::PI;

use surface_hydro::pde::{
    gradient_flow_solve, solve_z_pde, CurrentLaw, FieldKind, PdeField, SolverConfig,
    VariationalConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let law = CurrentLaw::normalized();
    let t_end = 1.0 / (2.0 * PI).powi(4);
    let z0 = PdeField::sample(FieldKind::Slope, 128, |x| 0.02 * (2.0 * PI * x).cos())?;
    let cfg = VariationalConfig::new(law.clone(), t_end);
    let rep = gradient_flow_solve(&z0, t_end, 200, &cfg)?;
    for i in (0..rep.times.len()).step_by(40) {
        println!(
            "t = {:.3e}: phi = {:.4e}, |z| = {:.4e}",
            rep.times[i], rep.energies[i], rep.l2_norms[i]
        );
    }
    println!(
        "energy nonincreasing: {}, norm nonincreasing: {}, L2 bound holds: {}",
        rep.energy_nonincreasing(1e-12),
        rep.l2_nonincreasing(1e-12),
        rep.l2_bound_holds()
    );
    let mol = solve_z_pde(
        &z0,
        &law,
        t_end,
        &SolverConfig {
            rtol: 1e-7,
            ..SolverConfig::default()
        },
    )?;
    println!(
        "sup distance to the method-of-lines solution: {:.3e}",
        rep.z.sup_distance(mol.last())
    );
    Ok(())
}
