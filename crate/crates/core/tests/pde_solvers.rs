use std::f64::consts::PI;

use surface_hydro::current::SigmaCurve;
use surface_hydro::pde::*;

fn h_profile(c: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| c * ((2.0 * PI * x).sin() + 0.4 * (4.0 * PI * x).cos())
}

fn h_xxx(c: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| {
        c * (-(2.0 * PI).powi(3) * (2.0 * PI * x).cos()
            + 0.4 * (4.0 * PI).powi(3) * (4.0 * PI * x).sin())
    }
}

fn sup_rel(a: &PdeField, b: &PdeField) -> f64 {
    a.sup_distance(b) / b.sup_norm()
}

#[test]
fn height_and_third_derivative_solvers_agree() {
    let k = 2.0;
    let law = CurrentLaw::gibbs(k);
    let c = 0.003;
    let t_end = 2.0 / (law.amplitude() * k * (2.0 * PI).powi(4));
    let mut errs = Vec::new();
    for g in [64usize, 128, 256] {
        let h0 = PdeField::sample(FieldKind::Height, g, h_profile(c)).unwrap();
        let w0 = PdeField::sample(FieldKind::ThirdDeriv, g, h_xxx(c)).unwrap();
        let cfg = SolverConfig::default();
        let h = solve_h_pde(&h0, &law, t_end, &cfg).unwrap();
        let w = solve_w_pde(&w0, &law, t_end, &cfg).unwrap();
        let dw = third_derivative(h.last());
        let e = sup_rel(&dw, w.last());
        // Semi-discretely identical when started from the discrete w0.
        let w_exact = solve_w_pde(&third_derivative(&h0), &law, t_end, &cfg).unwrap();
        assert!(sup_rel(&dw, w_exact.last()) < 1e-5, "g={g}");
        let mass = (h.last().integral() - h0.integral()).abs();
        assert!(mass < 1e-8 * t_end * h0.sup_norm().max(1.0));
        assert!(w.last().integral().abs() < 1e-10);
        errs.push(e);
        eprintln!("g={g} rel err {e:.3e} steps {:?}", h.stats);
    }
    assert!(
        errs[1] < errs[0] / 3.0 && errs[2] < errs[1] / 3.0,
        "{errs:?}"
    );
}

#[test]
fn method_of_lines_matches_gradient_flow() {
    let law = CurrentLaw::normalized();
    let amp = 0.02;
    let t_end = 1.0 / (2.0 * PI).powi(4);
    let g = 128;
    let z0 = PdeField::sample(FieldKind::Slope, g, |x| {
        amp * ((2.0 * PI * x).cos() - 0.8 * (4.0 * PI * x).sin())
    })
    .unwrap();
    let mol = solve_z_pde(&z0, &law, t_end, &SolverConfig::default()).unwrap();
    let mut prev = f64::INFINITY;
    for n in [100usize, 200, 400] {
        let cfg = VariationalConfig::new(law.clone(), t_end);
        let rep = gradient_flow_solve(&z0, t_end, n, &cfg).unwrap();
        let e = sup_rel(&rep.z, mol.last());
        eprintln!("n={n} rel err {e:.3e} inner {}", rep.inner_iterations);
        assert!(rep.l2_nonincreasing(0.0) && rep.energy_nonincreasing(0.0));
        assert!(rep.l2_bound_holds());
        assert!(e < prev * 0.6);
        prev = e;
    }
    assert!(prev < 5e-3);
}

#[test]
fn mirrored_negated_profile_evolves_as_mirror() {
    let k = 2.0;
    let mut curve = SigmaCurve::constant(1.0, k);
    let knots: Vec<f64> = (0..=20).map(|i| -3.0 + 0.3 * i as f64).collect();
    let vals: Vec<f64> = knots.iter().map(|w| 0.5 + 0.2 * w * w + 0.05 * w).collect();
    curve.spline =
        surface_hydro::current::smoothing_spline(&knots, &vals, &vec![1.0; 21], 1.0).unwrap();
    curve.symmetrize = true;
    let law = CurrentLaw::corrected(curve);
    let g = 64;
    let c = 0.003;
    let h0 = PdeField::sample(FieldKind::Height, g, |x| {
        c * (1.0 - (-(2.0 * PI * x).sin()).exp())
    })
    .unwrap();
    let mut m0 = h0.mirrored();
    for v in &mut m0.values {
        *v = -*v;
    }
    let t_end = 5e-3;
    let cfg = SolverConfig::default();
    let a = solve_h_pde(&h0, &law, t_end, &cfg).unwrap();
    let b = solve_h_pde(&m0, &law, t_end, &cfg).unwrap();
    let mut mb = b.last().mirrored();
    for v in &mut mb.values {
        *v = -*v;
    }
    assert!(sup_rel(&mb, a.last()) < 1e-5);
}
