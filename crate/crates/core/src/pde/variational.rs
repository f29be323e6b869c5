//! Minimizing-movement solver for the slope equation, seen as the L2
//! gradient flow of `phi(z) = integral psi(z_xx)`.

use super::field::{second_difference, FieldKind, PdeField};
use super::law::{CurrentLaw, Psi};
use super::linalg::CyclicBand;
use super::solver::add_d2_diag_d2;
use super::PdeError;

#[derive(Clone, Debug)]
pub struct VariationalConfig {
    pub law: CurrentLaw,
    /// Lower bound `c` on sigma, `0 < c <= min sigma`.
    pub c_floor: f64,
    pub tau: f64,
    pub n_steps: usize,
    /// Inner iterations stop once the gradient norm drops below
    /// `inner_tol * (1 + |grad phi(z)|)`, or the Newton decrement falls to
    /// the rounding level of the objective.
    pub inner_tol: f64,
    pub max_inner: usize,
}

impl VariationalConfig {
    /// Defaults: `c_floor` just below the smallest sampled sigma, 100 steps of
    /// size `t_end / 100`.
    pub fn new(law: CurrentLaw, t_end: f64) -> Self {
        let c_floor = 0.999 * law.sigma_min();
        let n_steps = 100;
        Self {
            law,
            c_floor,
            tau: t_end / n_steps as f64,
            n_steps,
            inner_tol: 1e-10,
            max_inner: 100,
        }
    }

    pub fn validate(&self) -> Result<(), PdeError> {
        if !(self.tau > 0.0) {
            return Err(PdeError::InvalidInput(format!(
                "tau = {} must be > 0",
                self.tau
            )));
        }
        if !(self.c_floor > 0.0) || self.c_floor > self.law.sigma_min() {
            return Err(PdeError::InvalidInput(format!(
                "c_floor = {} must lie in (0, min sigma = {}]",
                self.c_floor,
                self.law.sigma_min()
            )));
        }
        if !(self.inner_tol > 0.0) || self.max_inner == 0 {
            return Err(PdeError::InvalidInput(
                "inner tolerance and iteration cap must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Additive constant of `psi`, `c A / K`, which makes
    /// `psi(u) >= (c A / K) cosh(K u) > 0`.
    pub fn psi_offset(&self) -> f64 {
        self.c_floor * self.law.amplitude() / self.law.k()
    }

    /// Constant in `|z_xx|^2 <= C phi(z)`, `C = 8 / (c A K)`.
    pub fn l2_bound_constant(&self) -> f64 {
        8.0 / (self.c_floor * self.law.amplitude() * self.law.k())
    }

    pub fn psi(&self) -> Psi {
        Psi::new(&self.law, self.psi_offset())
    }
}

/// `phi(z) = sum_i psi(D2 z_i) dx`.
pub fn phi_eval(z: &PdeField, psi: &Psi) -> f64 {
    second_difference(&z.values, z.dx())
        .into_iter()
        .map(|u| psi.eval(u))
        .sum::<f64>()
        * z.dx()
}

/// L2 gradient of `phi`, `D2 psi'(D2 z)`.
pub fn phi_gradient(z: &[f64], dx: f64, psi: &Psi) -> Vec<f64> {
    let flux: Vec<f64> = second_difference(z, dx)
        .into_iter()
        .map(|u| psi.first(u))
        .collect();
    second_difference(&flux, dx)
}

fn l2(v: &[f64], dx: f64) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() * dx).sqrt()
}

fn project_mean_zero(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    for x in v {
        *x -= m;
    }
}

#[derive(Clone, Debug)]
pub struct ProximalResult {
    pub z: PdeField,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Objective after each accepted inner iterate, starting at `v = z`.
    pub objectives: Vec<f64>,
}

/// `argmin_v phi(v) + |v - z|^2 / (2 tau)` over mean-zero `v`.
///
/// Damped Newton iteration with Armijo backtracking. The Hessian is
/// `D2 diag(psi'') D2 + I/tau` with `psi''` floored at `c A K`, which keeps
/// it positive definite even where a fitted sigma is not monotone.
pub fn proximal_step(
    z: &PdeField,
    tau: f64,
    cfg: &VariationalConfig,
    psi: &Psi,
) -> Result<ProximalResult, PdeError> {
    if z.kind != FieldKind::Slope {
        return Err(PdeError::KindMismatch {
            expected: FieldKind::Slope,
            found: z.kind,
        });
    }
    if !(tau > 0.0) {
        return Err(PdeError::InvalidInput(format!("tau = {tau} must be > 0")));
    }
    z.check_mean_zero()?;
    let g = z.len();
    let dx = z.dx();
    let mut center = z.values.clone();
    project_mean_zero(&mut center);
    let curvature_floor = cfg.c_floor * cfg.law.amplitude() * cfg.law.k();

    let objective = |v: &[f64]| -> f64 {
        let energy: f64 = second_difference(v, dx)
            .into_iter()
            .map(|u| psi.eval(u))
            .sum();
        let dist: f64 = v.iter().zip(&center).map(|(a, b)| (a - b).powi(2)).sum();
        (energy + dist / (2.0 * tau)) * dx
    };
    let gradient = |v: &[f64]| -> Vec<f64> {
        let mut gr = phi_gradient(v, dx, psi);
        for (gi, (a, b)) in gr.iter_mut().zip(v.iter().zip(&center)) {
            *gi += (a - b) / tau;
        }
        gr
    };

    let mut v = center.clone();
    let mut obj = objective(&v);
    let mut objectives = vec![obj];
    let mut grad = gradient(&v);
    let threshold = cfg.inner_tol * (1.0 + l2(&grad, dx));
    let mut gnorm = l2(&grad, dx);
    let mut iterations = 0;
    while gnorm > threshold {
        if iterations >= cfg.max_inner {
            return Err(PdeError::NonConvergence {
                iterations,
                gradient: gnorm,
            });
        }
        iterations += 1;
        let curv: Vec<f64> = second_difference(&v, dx)
            .into_iter()
            .map(|u| psi.second(u).max(curvature_floor))
            .collect();
        let mut hess = CyclicBand::zeros(g, 2);
        add_d2_diag_d2(&curv, dx, 1.0, &mut hess);
        hess.scale_shift(1.0, 1.0 / tau);
        let neg: Vec<f64> = grad.iter().map(|x| -x).collect();
        let mut step = hess.factor()?.solve(&neg);
        project_mean_zero(&mut step);
        let slope: f64 = grad.iter().zip(&step).map(|(a, b)| a * b).sum::<f64>() * dx;
        // The Newton decrement -slope predicts twice the remaining decrease.
        // Once that is below the rounding level of the objective the
        // minimizer is found to working precision.
        if -slope <= 1e-14 * obj.abs().max(f64::MIN_POSITIVE) {
            break;
        }

        let mut alpha = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = v.iter().zip(&step).map(|(a, s)| a + alpha * s).collect();
            let t_obj = objective(&trial);
            if t_obj.is_finite() && t_obj <= obj + 1e-4 * alpha * slope && t_obj < obj {
                break Some((trial, t_obj));
            }
            alpha *= 0.5;
            if alpha < 1e-12 {
                break None;
            }
        };
        match accepted {
            Some((trial, t_obj)) => {
                v = trial;
                obj = t_obj;
                objectives.push(obj);
                grad = gradient(&v);
                gnorm = l2(&grad, dx);
            }
            None => {
                return Err(PdeError::NonConvergence {
                    iterations,
                    gradient: gnorm,
                });
            }
        }
    }
    Ok(ProximalResult {
        z: PdeField {
            values: v,
            t: z.t + tau,
            ..z.clone()
        },
        iterations,
        gradient_norm: gnorm,
        objectives,
    })
}

/// Empirical and predicted exponential decay rates of `|z_t|`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayRates {
    /// Least-squares slope of `-log |z_t|` against time.
    pub empirical: f64,
    /// `c A K / kappa^2`, `kappa = 1 / (2 pi)`.
    pub kappa_squared: f64,
    /// `c A K / kappa^4`.
    pub kappa_fourth: f64,
}

#[derive(Clone, Debug)]
pub struct GradientFlowReport {
    pub z: PdeField,
    pub times: Vec<f64>,
    pub l2_norms: Vec<f64>,
    pub energies: Vec<f64>,
    /// `|z_k - z_{k-1}| / tau`, attached to `times[k]` for `k >= 1`.
    pub speeds: Vec<f64>,
    /// `C phi(z_k) - |z_xx|^2` for every iterate (must be `>= 0`).
    pub l2_bound_slack: Vec<f64>,
    pub inner_iterations: usize,
    pub decay: Option<DecayRates>,
}

fn nonincreasing(v: &[f64], rel: f64) -> bool {
    v.windows(2)
        .all(|p| p[1] <= p[0] + rel * p[0].abs().max(f64::MIN_POSITIVE))
}

impl GradientFlowReport {
    pub fn l2_nonincreasing(&self, rel: f64) -> bool {
        nonincreasing(&self.l2_norms, rel)
    }

    pub fn energy_nonincreasing(&self, rel: f64) -> bool {
        nonincreasing(&self.energies, rel)
    }

    pub fn speed_nonincreasing(&self, rel: f64) -> bool {
        nonincreasing(&self.speeds, rel)
    }

    pub fn l2_bound_holds(&self) -> bool {
        self.l2_bound_slack.iter().all(|&s| s >= 0.0)
    }
}

/// `n` proximal steps of size `t_end / n` from `z0`.
pub fn gradient_flow_solve(
    z0: &PdeField,
    t_end: f64,
    n: usize,
    cfg: &VariationalConfig,
) -> Result<GradientFlowReport, PdeError> {
    cfg.validate()?;
    if n == 0 || !(t_end > 0.0) {
        return Err(PdeError::InvalidInput("need n >= 1 and t_end > 0".into()));
    }
    let psi = cfg.psi();
    let tau = t_end / n as f64;
    let dx = z0.dx();
    let bound = cfg.l2_bound_constant();
    let slack = |z: &PdeField, phi: f64| {
        let zxx = second_difference(&z.values, dx);
        bound * phi - zxx.iter().map(|u| u * u).sum::<f64>() * dx
    };

    let mut z = z0.clone();
    let phi0 = phi_eval(&z, &psi);
    if !phi0.is_finite() {
        return Err(PdeError::NonFinite("phi(z0)".into()));
    }
    let mut rep = GradientFlowReport {
        z: z0.clone(),
        times: vec![z0.t],
        l2_norms: vec![z0.l2_norm()],
        energies: vec![phi0],
        speeds: Vec::new(),
        l2_bound_slack: vec![slack(z0, phi0)],
        inner_iterations: 0,
        decay: None,
    };
    for _ in 0..n {
        let step = proximal_step(&z, tau, cfg, &psi)?;
        rep.inner_iterations += step.iterations;
        let next = step.z;
        let diff: Vec<f64> = next
            .values
            .iter()
            .zip(&z.values)
            .map(|(a, b)| (a - b) / tau)
            .collect();
        rep.speeds.push(l2(&diff, dx));
        let phi = phi_eval(&next, &psi);
        rep.times.push(next.t);
        rep.l2_norms.push(next.l2_norm());
        rep.energies.push(phi);
        rep.l2_bound_slack.push(slack(&next, phi));
        z = next;
    }

    let pts: Vec<(f64, f64)> = rep
        .times
        .iter()
        .skip(1)
        .zip(&rep.speeds)
        .filter(|(_, s)| **s > 0.0)
        .map(|(t, s)| (*t, s.ln()))
        .collect();
    if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let ms = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ms)).sum();
        let modulus = cfg.c_floor * cfg.law.amplitude() * cfg.law.k();
        let two_pi = 2.0 * std::f64::consts::PI;
        rep.decay = Some(DecayRates {
            empirical: -sxy / sxx,
            kappa_squared: modulus * two_pi.powi(2),
            kappa_fourth: modulus * two_pi.powi(4),
        });
    }
    rep.z = z;
    Ok(rep)
}
