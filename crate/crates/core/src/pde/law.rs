//! Macroscopic current laws `J_hat(u) = sigma(u) A sinh(K u)` and their
//! potentials `psi`.

use std::sync::Arc;

use crate::current::SigmaCurve;

/// `J_hat(u) = sigma(u) * amplitude * sinh(k u)`.
///
/// The Gibbs law has `amplitude = 2 e^{-3K/2}`; the normalized law used by
/// the variational analysis has `amplitude = k = 1`.
#[derive(Clone, Debug)]
pub struct CurrentLaw {
    k: f64,
    amplitude: f64,
    sigma: Option<Arc<SigmaCurve>>,
}

impl CurrentLaw {
    /// Uncorrected law, `sigma == 1`.
    pub fn gibbs(k: f64) -> Self {
        Self {
            k,
            amplitude: 2.0 * (-1.5 * k).exp(),
            sigma: None,
        }
    }

    /// Corrected law using the curve's own `K`.
    pub fn corrected(curve: SigmaCurve) -> Self {
        Self::gibbs(curve.k).with_sigma(curve)
    }

    /// `J_hat(u) = sinh(u)`.
    pub fn normalized() -> Self {
        Self {
            k: 1.0,
            amplitude: 1.0,
            sigma: None,
        }
    }

    pub fn with_sigma(mut self, curve: SigmaCurve) -> Self {
        self.sigma = if curve.is_constant() && curve.eval(0.0) == 1.0 {
            None
        } else {
            Some(Arc::new(curve))
        };
        self
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn sigma_curve(&self) -> Option<&SigmaCurve> {
        self.sigma.as_deref()
    }

    pub fn is_uncorrected(&self) -> bool {
        self.sigma.is_none()
    }

    #[inline]
    pub fn sigma(&self, u: f64) -> f64 {
        self.sigma.as_ref().map_or(1.0, |s| s.eval(u))
    }

    #[inline]
    pub fn sigma_prime(&self, u: f64) -> f64 {
        self.sigma.as_ref().map_or(0.0, |s| s.derivative(u))
    }

    #[inline]
    pub fn flux(&self, u: f64) -> f64 {
        self.sigma(u) * self.amplitude * (self.k * u).sinh()
    }

    /// `d J_hat / du`
    #[inline]
    pub fn flux_prime(&self, u: f64) -> f64 {
        let a = self.amplitude;
        let ku = self.k * u;
        self.sigma_prime(u) * a * ku.sinh() + self.sigma(u) * a * self.k * ku.cosh()
    }

    /// Smallest value of sigma on its fitted range (1 when uncorrected).
    pub fn sigma_min(&self) -> f64 {
        self.sigma.as_ref().map_or(1.0, |s| s.min_value(2000))
    }

    /// Half-width beyond which sigma is constant.
    fn sigma_support(&self) -> f64 {
        self.sigma.as_ref().map_or(0.0, |s| {
            let kn = &s.spline.knots;
            if kn.len() < 2 {
                0.0
            } else {
                kn[0].abs().max(kn[kn.len() - 1].abs())
            }
        })
    }
}

/// `psi(u) = offset + integral_0^u J_hat(q) dq`, so `psi' = J_hat`.
///
/// Inside the support of a fitted sigma, values are tabulated by adaptive
/// Simpson quadrature and interpolated with cubic Hermite polynomials using
/// the exact derivative; outside it sigma is constant and `psi` is closed form.
#[derive(Clone, Debug)]
pub struct Psi {
    law: CurrentLaw,
    offset: f64,
    support: f64,
    step: f64,
    table: Vec<f64>,
}

const PSI_CELLS: usize = 4096;

impl Psi {
    pub fn new(law: &CurrentLaw, offset: f64) -> Self {
        let support = law.sigma_support();
        let mut table = Vec::new();
        let mut step = 0.0;
        if support > 0.0 {
            step = 2.0 * support / PSI_CELLS as f64;
            let f = |q: f64| law.flux(q);
            let origin = PSI_CELLS / 2;
            table = vec![0.0; PSI_CELLS + 1];
            for j in origin..PSI_CELLS {
                let a = -support + j as f64 * step;
                table[j + 1] = table[j] + adaptive_simpson(&f, a, a + step, 1e-14);
            }
            for j in (1..=origin).rev() {
                let b = -support + j as f64 * step;
                table[j - 1] = table[j] - adaptive_simpson(&f, b - step, b, 1e-14);
            }
        }
        Self {
            law: law.clone(),
            offset,
            support,
            step,
            table,
        }
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn law(&self) -> &CurrentLaw {
        &self.law
    }

    pub fn eval(&self, u: f64) -> f64 {
        let (a, k) = (self.law.amplitude, self.law.k);
        let cosh_part = |from: f64, to: f64| ((k * to).cosh() - (k * from).cosh()) / k;
        if self.table.is_empty() {
            return self.offset + a * cosh_part(0.0, u);
        }
        let w = self.support;
        if u >= w {
            let edge = self.table[PSI_CELLS];
            return self.offset + edge + a * self.law.sigma(w) * cosh_part(w, u);
        }
        if u <= -w {
            let edge = self.table[0];
            return self.offset + edge + a * self.law.sigma(-w) * cosh_part(-w, u);
        }
        let pos = (u + w) / self.step;
        let j = (pos.floor() as usize).min(PSI_CELLS - 1);
        let s = pos - j as f64;
        let x0 = -w + j as f64 * self.step;
        let x1 = x0 + self.step;
        let (p0, p1) = (self.table[j], self.table[j + 1]);
        let (m0, m1) = (self.law.flux(x0) * self.step, self.law.flux(x1) * self.step);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        self.offset + h00 * p0 + h10 * m0 + h01 * p1 + h11 * m1
    }

    #[inline]
    pub fn first(&self, u: f64) -> f64 {
        self.law.flux(u)
    }

    #[inline]
    pub fn second(&self, u: f64) -> f64 {
        self.law.flux_prime(u)
    }
}

/// `psi(u)` for the given law and additive offset.
pub fn psi_eval(u: f64, law: &CurrentLaw, offset: f64) -> f64 {
    Psi::new(law, offset).eval(u)
}

pub(crate) fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            left + right + diff / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 30)
}
