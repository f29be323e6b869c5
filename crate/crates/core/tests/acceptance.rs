//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! Exact and oracle criteria (1, 2, 6, 8, 9) are hard: a failure makes the
//! binary exit non-zero. The scaled statistical reproductions (3, 4, 5, 7,
//! 10) report their verdict and measured numbers without aborting, since at
//! desk scale they can legitimately miss.
//!
//! `ACCEPTANCE_ONLY=1,6,8` restricts the run to the listed criteria.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use surface_hydro::current::SigmaCurve;
use surface_hydro::diagnostics::{
    gibbs_exp_moment, gibbs_f_expectations, LocalGibbsConfig, Smoothness,
};
use surface_hydro::harness::{
    diagnose_le, fit_sigma_from_slices, pipeline_gibbs, pipeline_sigma, run_ensemble,
    verify_against_pde, LeSettings, Preset, Scale, SigmaSettings, SyntheticClouds, VerifySettings,
};
use surface_hydro::kmc::{
    kmc_step, replicate_rng, sample_initial_state_with, Direction, InitialProfile, ModelParams,
    ProfileShape,
};
use surface_hydro::pde::{
    gradient_flow_solve, phi_eval, solve_h_pde, solve_w_pde, solve_z_pde, third_derivative,
    CurrentLaw, FieldKind, PdeField, SolverConfig, VariationalConfig,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn scratch() -> tempfile::TempDir {
    tempfile::tempdir().expect("temporary directory")
}

/// Conservation, per-jump detailed balance and cache consistency.
fn criterion_1() -> Outcome {
    let n = 128;
    let steps = 1_000_000u64;
    let mut worst_db: f64 = 0.0;
    let mut problems = Vec::new();
    let profile = InitialProfile::from_shape(ProfileShape::Sin { amplitude: 0.0075 }, n).unwrap();
    for (r, k) in [0.25, 1.0, 2.0].into_iter().enumerate() {
        let params = ModelParams::metropolis(k, n).unwrap();
        let mut rng = replicate_rng(11, r as u64);
        let mut state = sample_initial_state_with(&profile, params, &mut rng).unwrap();
        let mass = state.total_mass();
        for step in 0..steps {
            let e0 = state.energy();
            let before = state.clone();
            let ev = kmc_step(&mut state, &mut rng).unwrap();
            let forward = before.rate_of(ev.bond, ev.direction);
            let back_dir = match ev.direction {
                Direction::Right => Direction::Left,
                Direction::Left => Direction::Right,
            };
            let backward = state.rate_of(ev.bond, back_dir);
            // r(a -> b) pi(a) = r(b -> a) pi(b) with pi = exp(-K H).
            let de = (state.energy() - e0) as f64;
            let rel = (forward / backward * (k * de).exp() - 1.0).abs();
            worst_db = worst_db.max(rel);
            if state.total_mass() != mass {
                problems.push(format!("K={k}: mass changed at step {step}"));
                break;
            }
            if step % 10_000 == 0 {
                if let Err(e) = state.verify_caches() {
                    problems.push(format!("K={k}: {e} at step {step}"));
                    break;
                }
            }
        }
        if let Err(e) = state.verify_caches() {
            problems.push(format!("K={k}: {e} at the end"));
        }
    }
    outcome(
        problems.is_empty() && worst_db <= 1e-10,
        format!(
            "N=128, 10^6 steps per K in {{0.25, 1, 2}}: worst detailed-balance defect {worst_db:.2e} (tol 1e-10), mass invariant, caches checked every 10^4 steps{}",
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    )
}

fn brute_moment(lambda: f64, c: f64, k: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for m in -40i64..=40 {
        let d = m as f64 - lambda;
        let p = (-k * d * d).exp();
        num += p * (c * k * m as f64).exp();
        den += p;
    }
    num / den
}

/// Gibbs moments against the truncated series, and the product identity.
fn criterion_2() -> Outcome {
    let mut worst_moment: f64 = 0.0;
    for &k in &[0.25, 0.5, 1.0, 2.0] {
        for &c in &[-4.0, -2.0, -1.0, 1.0, 2.0, 4.0] {
            for i in 0..=40 {
                let lambda = -2.0 + 4.0 * i as f64 / 40.0;
                let a = gibbs_exp_moment(lambda, c, k);
                let b = brute_moment(lambda, c, k);
                worst_moment = worst_moment.max(((a - b) / b).abs());
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_product: f64 = 0.0;
    for _ in 0..100 {
        let k = [0.25, 1.0, 2.0][rng.random_range(0..3)];
        let l = (
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
        );
        let (p, m) = gibbs_f_expectations(l, k);
        worst_product = worst_product.max((p * m / (12.0 * k).exp() - 1.0).abs());
    }
    outcome(
        worst_moment <= 1e-10 && worst_product <= 1e-9,
        format!(
            "moment vs |n|<=40 series: worst rel {worst_moment:.2e} (tol 1e-10); E f+ E f- / e^(12K) over 100 triplets: worst rel {worst_product:.2e} (tol 1e-9)"
        ),
    )
}

fn criterion_3() -> Outcome {
    let dir = scratch();
    let cfg = Preset::GibbsTest.config(Scale::Desk, None, dir.path());
    let samples = cfg.n_samples * cfg.model.n;
    let r = pipeline_gibbs(&cfg, &LocalGibbsConfig::default()).unwrap();
    outcome(
        samples >= 20_000 && r.fraction_above >= 0.25 && r.n_below == 0,
        format!(
            "K=1, N=400, {samples} replicate-site samples: {:.1}% of sites above 12 by >=3 SE (need >=25%), {} below",
            100.0 * r.fraction_above,
            r.n_below
        ),
    )
}

/// Criteria 4 and 5 share one multi-level run.
fn criteria_4_5() -> (Outcome, Outcome) {
    let levels: Vec<_> = Preset::RoughLe
        .levels(Scale::Desk)
        .into_iter()
        .map(|n| run_ensemble(&Preset::RoughLe.config(Scale::Desk, Some(n), "unused")).unwrap())
        .collect();
    let rep = diagnose_le(&levels, &LeSettings::default()).unwrap();
    let w = &rep.rough_w;
    let j = &rep.rough_j;
    let w_rough = w.verdict == Smoothness::Rough;
    let j_decreasing = j.per_n_metrics.windows(2).all(|p| p[1] < p[0]);
    let v_ok = rep.v_decay.iter().all(|(_, d)| d.pass);
    let v_slopes: Vec<String> = rep
        .v_decay
        .iter()
        .map(|(_, d)| format!("{:.2}", d.slope))
        .collect();
    let c4 = outcome(
        w_rough && j_decreasing && rep.e_convergence.converged && v_ok,
        format!(
            "N={:?}: E w_i metric {:.3e} -> {:.3e} ({:?}); E J metric {:.3e} -> {:.3e}; (E) distances [{}] tol {:.3e}; Var slopes [{}] (need <= -0.5)",
            w.n_values,
            w.per_n_metrics[0],
            w.per_n_metrics[1],
            w.verdict,
            j.per_n_metrics[0],
            j.per_n_metrics[1],
            rep.e_convergence
                .distances
                .iter()
                .map(|d| format!("{d:.3e}"))
                .collect::<Vec<_>>()
                .join(", "),
            rep.e_convergence.tolerance,
            v_slopes.join(", ")
        ),
    );
    let c5 = outcome(
        rep.collapse_j.pass && rep.collapse_w2.pass,
        format!(
            "epsilon(N) = {:?}: J max {:.2} SE, w^2 max {:.2} SE (need <= 2)",
            rep.epsilons, rep.collapse_j.max_z, rep.collapse_w2.max_z
        ),
    );
    (c4, c5)
}

fn criterion_6() -> Outcome {
    let settings = SigmaSettings::default();
    let planted = |w: f64| 1.0 + 0.5 * (w * w).tanh();
    let noise = 0.02;
    let gen = SyntheticClouds::new(2.0, 800, 2.5, noise);
    let fit =
        fit_sigma_from_slices(&gen.generate(planted, &settings.fit).unwrap(), &settings).unwrap();
    let w = fit.curve.domain;
    let sup = (0..=400)
        .map(|i| -w + 2.0 * w * i as f64 / 400.0)
        .map(|om| (fit.curve.eval(om) - planted(om)).abs())
        .fold(0.0, f64::max);
    let clean = SyntheticClouds::new(2.0, 800, 2.5, 0.0);
    let unit =
        fit_sigma_from_slices(&clean.generate(|_| 1.0, &settings.fit).unwrap(), &settings).unwrap();
    let wu = unit.curve.domain;
    let sup_unit = (0..=400)
        .map(|i| -wu + 2.0 * wu * i as f64 / 400.0)
        .map(|om| (unit.curve.eval(om) - 1.0).abs())
        .fold(0.0, f64::max);
    outcome(
        sup <= 3.0 * noise && sup_unit <= 0.02,
        format!(
            "planted 1 + tanh(w^2)/2 with noise {noise}: sup error {sup:.4} (tol {:.2}); planted 1 noiseless: sup |sigma - 1| {sup_unit:.2e} (tol 0.02)",
            3.0 * noise
        ),
    )
}

fn fit_preset(preset: Preset, n: Option<usize>) -> SigmaCurve {
    let dir = scratch();
    let cfg = preset.config(Scale::Desk, n, dir.path());
    pipeline_sigma(&cfg, &preset.sigma_settings(Scale::Desk))
        .unwrap()
        .curve
}

fn criterion_7() -> Outcome {
    let strong = fit_preset(Preset::Sigma, None);
    let asym = strong.asymmetry(400);
    let slope = strong.min_slope_positive(400);
    let min = strong.min_value(400);
    let weak = fit_preset(Preset::SigmaWeak, None);
    let w = weak.domain;
    let dev = (0..=400)
        .map(|i| -w + 2.0 * w * i as f64 / 400.0)
        .map(|om| (weak.eval(om) - 1.0).abs())
        .fold(0.0, f64::max);
    outcome(
        asym <= 0.05 && slope >= -0.02 && min >= 0.05 && dev <= 0.15,
        format!(
            "K=2, N={}: asymmetry {asym:.4} (<= 0.05), min slope on [0, W] {slope:.4} (>= -0.02), min {min:.3} (>= 0.05), sigma(0) {:.3}, sigma(W={:.2}) {:.3}; K=0.25: sup |sigma - 1| {dev:.3} over |w| <= {w:.2} (<= 0.15)",
            strong.provenance.get("n").map(String::as_str).unwrap_or("?"),
            strong.eval(0.0),
            strong.domain,
            strong.eval(strong.domain)
        ),
    )
}

/// Linearized decay of a small sinusoid at `G = 256`.
fn criterion_8() -> Outcome {
    let g = 256;
    let a = 1e-6;
    let mut worst: f64 = 0.0;
    for k in [0.25, 1.0, 2.0] {
        let law = CurrentLaw::gibbs(k);
        let rate = 2.0 * k * (-1.5 * k).exp() * (2.0 * PI).powi(4);
        let t_end = 1.0 / rate;
        let h0 = PdeField::sample(FieldKind::Height, g, |x| a * (2.0 * PI * x).sin()).unwrap();
        let times: Vec<f64> = (1..=10).map(|i| t_end * i as f64 / 10.0).collect();
        let cfg = SolverConfig {
            rtol: 1e-9,
            atol: 1e-18,
            ..SolverConfig::default()
        }
        .with_outputs(times);
        let tr = solve_h_pde(&h0, &law, t_end, &cfg).unwrap();
        let b0 = h0.sine_coefficient(1);
        for s in &tr.snapshots {
            let expected = (-rate * s.t).exp();
            worst = worst.max((s.sine_coefficient(1) / b0 / expected - 1.0).abs());
        }
    }
    outcome(
        worst <= 0.01,
        format!("A=1e-6, G=256, K in {{0.25, 1, 2}}, one e-folding: worst relative amplitude error {worst:.2e} (tol 1e-2)"),
    )
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|p| p[1] <= p[0] * (1.0 + 1e-12) + 1e-300)
}

/// Cross-solver consistency and the dissipation structure.
fn criterion_9() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let k = 2.0;
    let law = CurrentLaw::gibbs(k);
    let c = 0.003;
    let h = |x: f64| c * ((2.0 * PI * x).sin() + 0.4 * (4.0 * PI * x).cos());
    let hxxx = |x: f64| {
        c * (-(2.0 * PI).powi(3) * (2.0 * PI * x).cos()
            + 0.4 * (4.0 * PI).powi(3) * (4.0 * PI * x).sin())
    };
    let t_end = 2.0 / (law.amplitude() * k * (2.0 * PI).powi(4));
    let mut hw = Vec::new();
    for g in [128usize, 256] {
        let h0 = PdeField::sample(FieldKind::Height, g, h).unwrap();
        let w0 = PdeField::sample(FieldKind::ThirdDeriv, g, hxxx).unwrap();
        let cfg = SolverConfig {
            rtol: 1e-8,
            atol: 1e-14,
            ..SolverConfig::default()
        };
        let ht = solve_h_pde(&h0, &law, t_end, &cfg).unwrap();
        let wt = solve_w_pde(&w0, &law, t_end, &cfg).unwrap();
        // Band: the O(dx^2) stencil mismatch between the two initial fields,
        // which the dissipative flow should not amplify.
        let band = 2.0 * third_derivative(&h0).sup_distance(&w0);
        let err = third_derivative(ht.last()).sup_distance(wt.last());
        ok &= err <= band;
        hw.push(err);
        notes.push(format!("G={g}: h/w {err:.2e} (band {band:.2e})"));
    }
    ok &= hw[1] < hw[0] / 3.0;

    let norm = CurrentLaw::normalized();
    let amp = 0.02;
    let t_flow = 1.0 / (2.0 * PI).powi(4);
    for g in [128usize, 256] {
        let z0 = PdeField::sample(FieldKind::Slope, g, |x| {
            amp * ((2.0 * PI * x).cos() - 0.8 * (4.0 * PI * x).sin())
        })
        .unwrap();
        let times: Vec<f64> = (1..=20).map(|i| t_flow * i as f64 / 20.0).collect();
        let mol = solve_z_pde(
            &z0,
            &norm,
            t_flow,
            &SolverConfig {
                rtol: 1e-7,
                atol: 1e-14,
                ..SolverConfig::default()
            }
            .with_outputs(times),
        )
        .unwrap();
        let vcfg = VariationalConfig::new(norm.clone(), t_flow);
        let psi = vcfg.psi();
        let phis: Vec<f64> = mol.snapshots.iter().map(|s| phi_eval(s, &psi)).collect();
        let l2s: Vec<f64> = mol.snapshots.iter().map(|s| s.l2_norm()).collect();
        let mol_mono = nonincreasing(&phis) && nonincreasing(&l2s);
        let rep = gradient_flow_solve(&z0, t_flow, 400, &vcfg).unwrap();
        let flow_mono = rep.energy_nonincreasing(1e-12) && rep.l2_nonincreasing(1e-12);
        let bound = rep.l2_bound_holds();
        let rel = rep.z.sup_distance(mol.last()) / mol.last().sup_norm();
        // Backward Euler with 400 steps over one unit of decay is first order
        // in tau; the band allows that plus the shared spatial error.
        let band = 2.0 / 400.0;
        ok &= mol_mono && flow_mono && bound && rel <= band;
        notes.push(format!(
            "G={g}: MOL vs flow rel {rel:.2e} (band {band:.1e}), monotone MOL {mol_mono} flow {flow_mono}, L2 bound {bound}"
        ));
    }
    outcome(ok, notes.join("; "))
}

fn criterion_10() -> Outcome {
    // sigma fitted from the reserved sin^2 profile at the largest desk lattice.
    let sigma = fit_preset(Preset::Sigma, Some(256));
    let levels: Vec<_> = Preset::VerifyExp
        .levels(Scale::Desk)
        .into_iter()
        .map(|n| Preset::VerifyExp.config(Scale::Desk, Some(n), "unused"))
        .collect();
    let rep = verify_against_pde(&levels, &sigma, &VerifySettings::default()).unwrap();
    let lines: Vec<String> = rep
        .levels
        .iter()
        .map(|l| {
            format!(
                "N={} M={}: corrected {:.3e}±{:.1e}, sigma=1 {:.3e}±{:.1e}",
                l.n, l.samples, l.dh_sigma, l.dh_sigma_se, l.dh_one, l.dh_one_se
            )
        })
        .collect();
    outcome(
        rep.pass(),
        format!(
            "{}; closer than sigma=1 at largest N: {}; decreasing at 2 SE: {}",
            lines.join("; "),
            rep.separated,
            rep.decreasing
        ),
    )
}

fn main() -> ExitCode {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |c: u32| only.as_ref().is_none_or(|o| o.contains(&c));
    let hard = [1u32, 2, 6, 8, 9];
    let mut hard_failures = Vec::new();
    let mut report = |id: u32, name: &str, o: Outcome, secs: f64| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        let kind = if hard.contains(&id) {
            "hard"
        } else {
            "statistical"
        };
        println!(
            "criterion {id:>2} [{kind}] {tag}: {name} ({secs:.1}s) {}",
            o.detail
        );
        if !o.pass && hard.contains(&id) {
            hard_failures.push(id);
        }
    };
    let timed = |f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        (o, t.elapsed().as_secs_f64())
    };

    let plain: [(u32, &str, fn() -> Outcome); 4] = [
        (1, "conservation and detailed balance", criterion_1),
        (2, "Gibbs analytics", criterion_2),
        (3, "local-Gibbs falsification", criterion_3),
        (6, "sigma pipeline synthetic recovery", criterion_6),
    ];
    for (id, name, f) in plain {
        if wanted(id) {
            let (o, s) = timed(&f);
            report(id, name, o, s);
        }
    }
    if wanted(4) || wanted(5) {
        let t = Instant::now();
        let (c4, c5) = criteria_4_5();
        let s = t.elapsed().as_secs_f64();
        if wanted(4) {
            report(4, "rough LE classification", c4, s);
        }
        if wanted(5) {
            report(5, "(Ef) collapse", c5, s);
        }
    }
    let rest: [(u32, &str, fn() -> Outcome); 4] = [
        (7, "sigma qualitative properties", criterion_7),
        (8, "PDE linearization oracle", criterion_8),
        (9, "cross-solver consistency", criterion_9),
        (10, "corrected vs uncorrected discrimination", criterion_10),
    ];
    for (id, name, f) in rest {
        if wanted(id) {
            let (o, s) = timed(&f);
            report(id, name, o, s);
        }
    }
    if hard_failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("hard acceptance criteria failed: {hard_failures:?}");
        ExitCode::FAILURE
    }
}
