//! Method-of-lines solvers for the height, third-derivative and slope forms of
//! the fourth-order equation, integrated with an adaptive L-stable
//! Rosenbrock method (ROS2).

use super::field::{second_difference, third_difference, wrap, FieldKind, PdeField};
use super::law::CurrentLaw;
use super::linalg::CyclicBand;
use super::PdeError;

/// Right-hand side of `y' = f(y)` with a Jacobian of cyclic bandwidth 2.
pub trait SemiDiscrete {
    fn rhs(&self, y: &[f64]) -> Vec<f64>;
    /// Fills `jac` with `df/dy`.
    fn jacobian(&self, y: &[f64], jac: &mut CyclicBand);
}

/// `h_t = -(F_i - F_{i-1})/dx`, `F_i = J_hat(w_i)`, `w = D^3 h`.
pub struct HeightSystem<'a> {
    pub law: &'a CurrentLaw,
    pub dx: f64,
}

const D3: [f64; 4] = [-1.0, 3.0, -3.0, 1.0];

impl SemiDiscrete for HeightSystem<'_> {
    fn rhs(&self, h: &[f64]) -> Vec<f64> {
        let g = h.len();
        let flux: Vec<f64> = third_difference(h, self.dx)
            .into_iter()
            .map(|w| self.law.flux(w))
            .collect();
        (0..g as isize)
            .map(|i| -(flux[i as usize] - flux[wrap(i - 1, g)]) / self.dx)
            .collect()
    }

    fn jacobian(&self, h: &[f64], jac: &mut CyclicBand) {
        let g = h.len();
        let dfdw: Vec<f64> = third_difference(h, self.dx)
            .into_iter()
            .map(|w| self.law.flux_prime(w))
            .collect();
        let s = 1.0 / self.dx.powi(4);
        for i in 0..g {
            let here = dfdw[i];
            let before = dfdw[wrap(i as isize - 1, g)];
            // w_i uses h_{i-1..i+2}; w_{i-1} uses h_{i-2..i+1}.
            for d in -2isize..=2 {
                let own = if (-1..=2).contains(&d) {
                    D3[(d + 1) as usize]
                } else {
                    0.0
                };
                let prev = if (-2..=1).contains(&d) {
                    D3[(d + 2) as usize]
                } else {
                    0.0
                };
                let v = -(here * own - before * prev) * s;
                if v != 0.0 {
                    jac.add(i, d, v);
                }
            }
        }
    }
}

/// `w_t = -(F_{i-2} - 4F_{i-1} + 6F_i - 4F_{i+1} + F_{i+2})/dx^4`.
pub struct ThirdDerivSystem<'a> {
    pub law: &'a CurrentLaw,
    pub dx: f64,
}

const D4: [f64; 5] = [1.0, -4.0, 6.0, -4.0, 1.0];

impl SemiDiscrete for ThirdDerivSystem<'_> {
    fn rhs(&self, w: &[f64]) -> Vec<f64> {
        let g = w.len();
        let flux: Vec<f64> = w.iter().map(|&u| self.law.flux(u)).collect();
        let s = 1.0 / self.dx.powi(4);
        (0..g as isize)
            .map(|i| {
                -(-2..=2)
                    .map(|d| D4[(d + 2) as usize] * flux[wrap(i + d, g)])
                    .sum::<f64>()
                    * s
            })
            .collect()
    }

    fn jacobian(&self, w: &[f64], jac: &mut CyclicBand) {
        let g = w.len();
        let s = 1.0 / self.dx.powi(4);
        let dfdw: Vec<f64> = w.iter().map(|&u| self.law.flux_prime(u)).collect();
        for i in 0..g {
            for d in -2isize..=2 {
                jac.add(
                    i,
                    d,
                    -D4[(d + 2) as usize] * dfdw[wrap(i as isize + d, g)] * s,
                );
            }
        }
    }
}

/// `z_t = -D2 J_hat(D2 z)`, the slope form and the L2 gradient flow of
/// `phi(z) = sum psi(D2 z) dx`.
pub struct SlopeSystem<'a> {
    pub law: &'a CurrentLaw,
    pub dx: f64,
}

/// Adds `scale * D2 diag(d) D2` to `jac`.
pub(crate) fn add_d2_diag_d2(d: &[f64], dx: f64, scale: f64, jac: &mut CyclicBand) {
    let g = d.len();
    let s = scale / dx.powi(4);
    const C: [f64; 3] = [1.0, -2.0, 1.0];
    for i in 0..g {
        for a in -1isize..=1 {
            let m = wrap(i as isize + a, g);
            let left = C[(a + 1) as usize] * d[m] * s;
            for b in -1isize..=1 {
                jac.add(i, a + b, left * C[(b + 1) as usize]);
            }
        }
    }
}

impl SemiDiscrete for SlopeSystem<'_> {
    fn rhs(&self, z: &[f64]) -> Vec<f64> {
        let flux: Vec<f64> = second_difference(z, self.dx)
            .into_iter()
            .map(|u| self.law.flux(u))
            .collect();
        second_difference(&flux, self.dx)
            .into_iter()
            .map(|v| -v)
            .collect()
    }

    fn jacobian(&self, z: &[f64], jac: &mut CyclicBand) {
        let d: Vec<f64> = second_difference(z, self.dx)
            .into_iter()
            .map(|u| self.law.flux_prime(u))
            .collect();
        add_d2_diag_d2(&d, self.dx, -1.0, jac);
    }
}

/// Integrator tolerances and output schedule.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: Option<f64>,
    pub max_steps: usize,
    /// Times (in `(t0, t_end]`) at which snapshots are stored. The final
    /// time is always stored.
    pub output_times: Vec<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-7,
            atol: 1e-10,
            initial_step: None,
            max_steps: 2_000_000,
            output_times: Vec::new(),
        }
    }
}

impl SolverConfig {
    pub fn with_outputs(mut self, times: Vec<f64>) -> Self {
        self.output_times = times;
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub accepted: usize,
    pub rejected: usize,
    pub dense_fallbacks: usize,
}

/// Snapshots at the requested output times, initial state first.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<PdeField>,
    pub stats: SolverStats,
}

impl Trajectory {
    pub fn last(&self) -> &PdeField {
        self.snapshots
            .last()
            .expect("trajectory holds the initial state")
    }

    pub fn at(&self, t: f64) -> Option<&PdeField> {
        self.snapshots
            .iter()
            .find(|s| (s.t - t).abs() <= 1e-12 * t.abs().max(1e-300))
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }
}

const GAMMA: f64 = 1.0 + std::f64::consts::FRAC_1_SQRT_2;

fn weighted_rms(e: &[f64], y0: &[f64], y1: &[f64], cfg: &SolverConfig) -> f64 {
    let n = e.len() as f64;
    (e.iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = cfg.atol + cfg.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum::<f64>()
        / n)
        .sqrt()
}

/// Integrates `sys` from `y0` at `t0` to `t_end`.
pub fn integrate(
    sys: &impl SemiDiscrete,
    template: &PdeField,
    t_end: f64,
    cfg: &SolverConfig,
) -> Result<Trajectory, PdeError> {
    let t0 = template.t;
    if !(t_end >= t0) || !t_end.is_finite() {
        return Err(PdeError::InvalidInput(format!(
            "t_end = {t_end} must be finite and >= t0 = {t0}"
        )));
    }
    if !(cfg.rtol > 0.0 && cfg.atol > 0.0) {
        return Err(PdeError::InvalidInput("tolerances must be positive".into()));
    }
    let mut outputs: Vec<f64> = cfg
        .output_times
        .iter()
        .copied()
        .filter(|&t| t > t0 && t < t_end)
        .collect();
    outputs.sort_by(f64::total_cmp);
    outputs.dedup();
    if t_end > t0 {
        outputs.push(t_end);
    }

    let g = template.len();
    let snap = |y: &[f64], t: f64| PdeField {
        values: y.to_vec(),
        t,
        ..template.clone()
    };
    let mut traj = Trajectory {
        snapshots: vec![template.clone()],
        stats: SolverStats::default(),
    };
    let mut y = template.values.clone();
    let mut t = t0;
    let span = t_end - t0;
    if outputs.is_empty() {
        return Ok(traj);
    }

    let mut f0 = sys.rhs(&y);
    let mut h = match cfg.initial_step {
        Some(h) => h,
        None => {
            let zeros = vec![0.0; g];
            let fn_ = weighted_rms(&f0, &y, &y, cfg);
            let yn = weighted_rms(&y, &zeros, &zeros, cfg).max(1.0);
            if fn_ > 0.0 {
                (1e-3 * yn / fn_).min(span)
            } else {
                span
            }
        }
    };
    let h_min = 1e-14 * span.max(t0.abs());
    let mut next_out = 0;
    let mut jac_steps = 0usize;
    let mut jac: Option<CyclicBand> = None;

    while next_out < outputs.len() {
        if jac_steps >= cfg.max_steps {
            return Err(PdeError::StepCollapse {
                t,
                step: h,
                reason: format!("exceeded {} steps", cfg.max_steps),
            });
        }
        let target = outputs[next_out];
        let mut step = h.min(target - t);
        let landing = step >= target - t;
        if landing {
            step = target - t;
        }

        if jac.is_none() {
            let mut j = CyclicBand::zeros(g, 2);
            sys.jacobian(&y, &mut j);
            jac = Some(j);
        }
        let mut m = jac.clone().expect("jacobian computed above");
        m.scale_shift(-GAMMA * step, 1.0);
        let lu = m.factor()?;
        if lu.used_dense_fallback() {
            traj.stats.dense_fallbacks += 1;
        }
        jac_steps += 1;

        let k1 = lu.solve(&f0);
        let y1: Vec<f64> = y.iter().zip(&k1).map(|(a, k)| a + step * k).collect();
        let f1 = sys.rhs(&y1);
        let rhs2: Vec<f64> = f1.iter().zip(&k1).map(|(f, k)| f - 2.0 * k).collect();
        let k2 = lu.solve(&rhs2);
        let y_new: Vec<f64> = (0..g)
            .map(|i| y[i] + step * (1.5 * k1[i] + 0.5 * k2[i]))
            .collect();
        // The embedded first-order solution is not L-stable, so its raw
        // difference overstates the error of strongly damped components.
        // Filtering through (I - gamma h J)^{-1} removes that.
        let raw: Vec<f64> = (0..g).map(|i| 0.5 * step * (k1[i] + k2[i])).collect();
        let est = lu.solve(&raw);
        let finite = y_new.iter().all(|v| v.is_finite()) && f1.iter().all(|v| v.is_finite());
        let err = if finite {
            weighted_rms(&est, &y, &y_new, cfg)
        } else {
            f64::INFINITY
        };

        if err <= 1.0 {
            let f_new = sys.rhs(&y_new);
            if f_new.iter().all(|v| v.is_finite()) {
                t = if landing { target } else { t + step };
                y = y_new;
                f0 = f_new;
                jac = None;
                traj.stats.accepted += 1;
                if landing {
                    traj.snapshots.push(snap(&y, t));
                    next_out += 1;
                }
                let fac = if err > 0.0 { 0.9 * err.powf(-0.5) } else { 5.0 };
                // A landing step may be artificially short; do not let it
                // shrink the next step.
                let base = if landing { h.max(step) } else { step };
                h = base * fac.clamp(0.2, 5.0);
                continue;
            }
        }
        traj.stats.rejected += 1;
        let fac = if err.is_finite() {
            (0.9 * err.powf(-0.5)).clamp(0.1, 0.5)
        } else {
            0.25
        };
        h = step * fac;
        if h < h_min {
            return Err(PdeError::StepCollapse {
                t,
                step: h,
                reason: if err.is_finite() {
                    format!(
                        "error estimate {err:.3e} after {} rejections",
                        traj.stats.rejected
                    )
                } else {
                    "non-finite stage values (flux overflow?)".into()
                },
            });
        }
    }
    Ok(traj)
}

fn expect_kind(field: &PdeField, kind: FieldKind) -> Result<(), PdeError> {
    if field.kind != kind {
        return Err(PdeError::KindMismatch {
            expected: kind,
            found: field.kind,
        });
    }
    Ok(())
}

/// Evolves a height profile under `h_t = -(J_hat(h_xxx))_x`.
pub fn solve_h_pde(
    h0: &PdeField,
    law: &CurrentLaw,
    t_end: f64,
    cfg: &SolverConfig,
) -> Result<Trajectory, PdeError> {
    expect_kind(h0, FieldKind::Height)?;
    let sys = HeightSystem { law, dx: h0.dx() };
    integrate(&sys, h0, t_end, cfg)
}

/// Evolves a third derivative under `w_t = -(J_hat(w))_xxxx`.
pub fn solve_w_pde(
    w0: &PdeField,
    law: &CurrentLaw,
    t_end: f64,
    cfg: &SolverConfig,
) -> Result<Trajectory, PdeError> {
    expect_kind(w0, FieldKind::ThirdDeriv)?;
    w0.check_mean_zero()?;
    let sys = ThirdDerivSystem { law, dx: w0.dx() };
    integrate(&sys, w0, t_end, cfg)
}

/// Evolves a slope under `z_t = -(J_hat(z_xx))_xx`.
pub fn solve_z_pde(
    z0: &PdeField,
    law: &CurrentLaw,
    t_end: f64,
    cfg: &SolverConfig,
) -> Result<Trajectory, PdeError> {
    expect_kind(z0, FieldKind::Slope)?;
    z0.check_mean_zero()?;
    let sys = SlopeSystem { law, dx: z0.dx() };
    integrate(&sys, z0, t_end, cfg)
}
