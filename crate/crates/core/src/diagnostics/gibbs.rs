use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DiagnosticError;
use crate::observables::PairMoments;

/// Half-width of the summation range in `|m - lambda|`; keeps the Gaussian
/// tail below `1e-14`.
pub fn truncation_bound(k: f64) -> i64 {
    (33.0 / k).sqrt().ceil() as i64 + 2
}

/// Partition function `Z(lambda) = sum_m exp(-K (m - lambda)^2)`.
pub fn gibbs_z(lambda: f64, k: f64) -> f64 {
    let b = truncation_bound(k);
    let lo = lambda.floor() as i64 - b;
    let hi = lambda.ceil() as i64 + b;
    (lo..=hi)
        .map(|m| {
            let d = m as f64 - lambda;
            (-k * d * d).exp()
        })
        .sum()
}

/// `E exp(c K z)` under `rho[lambda]`:
/// `exp(c^2 K / 4 + c K lambda) Z(lambda + c/2) / Z(lambda)`.
pub fn gibbs_exp_moment(lambda: f64, c: f64, k: f64) -> f64 {
    if c == 0.0 {
        return 1.0;
    }
    (c * c * k / 4.0 + c * k * lambda).exp() * gibbs_z(lambda + c / 2.0, k) / gibbs_z(lambda, k)
}

/// `(E f+, E f-)` at a site whose neighbours carry parameters
/// `(lambda_{i-1}, lambda_i, lambda_{i+1})` under the product measure.
pub fn gibbs_f_expectations(lambda: (f64, f64, f64), k: f64) -> (f64, f64) {
    let plus = gibbs_exp_moment(lambda.0, 2.0, k)
        * gibbs_exp_moment(lambda.1, -4.0, k)
        * gibbs_exp_moment(lambda.2, 2.0, k);
    let minus = gibbs_exp_moment(lambda.0, -2.0, k)
        * gibbs_exp_moment(lambda.1, 4.0, k)
        * gibbs_exp_moment(lambda.2, -2.0, k);
    (plus, minus)
}

/// Exact draw from `rho[lambda](n) = exp(-K (n - lambda)^2) / Z(lambda)`.
pub fn sample_gibbs<R: Rng + ?Sized>(lambda: f64, k: f64, rng: &mut R) -> i64 {
    let b = truncation_bound(k);
    let lo = lambda.floor() as i64 - b;
    let hi = lambda.ceil() as i64 + b;
    let z = gibbs_z(lambda, k);
    let mut u = rng.random::<f64>() * z;
    for m in lo..=hi {
        let d = m as f64 - lambda;
        let p = (-k * d * d).exp();
        if u < p {
            return m;
        }
        u -= p;
    }
    hi
}

/// Tabulated partition function on a grid of `lambda` values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsReference {
    pub k: f64,
    pub lambda_grid: Vec<f64>,
    pub z_values: Vec<f64>,
    pub truncation_bound: i64,
}

impl GibbsReference {
    pub fn new(k: f64, lambda_grid: Vec<f64>) -> Result<Self, DiagnosticError> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(DiagnosticError::InvalidInput(format!(
                "K must be positive, got {k}"
            )));
        }
        let z_values = lambda_grid.iter().map(|&l| gibbs_z(l, k)).collect();
        Ok(Self {
            k,
            lambda_grid,
            z_values,
            truncation_bound: truncation_bound(k),
        })
    }

    /// Largest `|Z(lambda) - Z(lambda + 1)|` over the grid.
    pub fn periodicity_defect(&self) -> f64 {
        self.lambda_grid
            .iter()
            .zip(&self.z_values)
            .map(|(&l, &z)| (z - gibbs_z(l + 1.0, self.k)).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalGibbsConfig {
    /// Exceedance threshold in propagated standard errors.
    pub sigma_threshold: f64,
    /// Fraction of sites that must deviate for the verdict "not local Gibbs".
    pub min_fraction: f64,
}

impl Default for LocalGibbsConfig {
    fn default() -> Self {
        Self {
            sigma_threshold: 3.0,
            min_fraction: 0.25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GibbsVerdict {
    NotLocalGibbs,
    ConsistentWithGibbs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalGibbsReport {
    pub k: f64,
    pub log_product: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_above: usize,
    pub n_below: usize,
    pub fraction_above: f64,
    pub fraction_deviating: f64,
    /// No site falls below `12K` by the threshold.
    pub lower_bound_holds: bool,
    pub verdict: GibbsVerdict,
}

impl LocalGibbsReport {
    pub fn reference(&self) -> f64 {
        12.0 * self.k
    }

    pub fn to_text(&self) -> String {
        let mean = self.log_product.iter().sum::<f64>() / self.log_product.len().max(1) as f64;
        format!(
            "test: local-gibbs\nK: {}\nreference_12K: {}\nsites: {}\nmean_log_product: {:.6}\n\
             sites_above: {}\nsites_below: {}\nfraction_above: {:.4}\n\
             lower_bound_holds: {}\nverdict: {}\n",
            self.k,
            self.reference(),
            self.log_product.len(),
            mean,
            self.n_above,
            self.n_below,
            self.fraction_above,
            self.lower_bound_holds,
            match self.verdict {
                GibbsVerdict::NotLocalGibbs => "not-local-gibbs",
                GibbsVerdict::ConsistentWithGibbs => "consistent-with-gibbs",
            }
        )
    }
}

/// Compare `log(E f+ E f-)` per site against the product-measure value `12K`.
///
/// Each entry holds replicate samples of the pair `(f+_i, f-_i)`; the standard
/// error of the log product is propagated to first order including the
/// covariance between the two means.
pub fn local_gibbs_test(
    samples: &[PairMoments],
    k: f64,
    config: &LocalGibbsConfig,
) -> Result<LocalGibbsReport, DiagnosticError> {
    if samples.is_empty() {
        return Err(DiagnosticError::InvalidInput("no sites".into()));
    }
    let reference = 12.0 * k;
    let mut log_product = Vec::with_capacity(samples.len());
    let mut stderr = Vec::with_capacity(samples.len());
    let (mut n_above, mut n_below) = (0, 0);
    for (site, s) in samples.iter().enumerate() {
        let (a, b) = (s.x.mean, s.y.mean);
        if !(a > 0.0 && b > 0.0) {
            return Err(DiagnosticError::NegativeExpectation { site });
        }
        let m = s.x.count.max(1) as f64;
        let var = s.x.variance() / (m * a * a)
            + s.y.variance() / (m * b * b)
            + 2.0 * s.covariance() / (m * a * b);
        let se = var.max(0.0).sqrt();
        let lp = (a * b).ln();
        if lp - reference >= config.sigma_threshold * se {
            n_above += 1;
        }
        if reference - lp >= config.sigma_threshold * se {
            n_below += 1;
        }
        log_product.push(lp);
        stderr.push(se);
    }
    let n = samples.len() as f64;
    let fraction_deviating = (n_above + n_below) as f64 / n;
    Ok(LocalGibbsReport {
        k,
        log_product,
        stderr,
        n_above,
        n_below,
        fraction_above: n_above as f64 / n,
        fraction_deviating,
        lower_bound_holds: n_below == 0,
        verdict: if fraction_deviating >= config.min_fraction {
            GibbsVerdict::NotLocalGibbs
        } else {
            GibbsVerdict::ConsistentWithGibbs
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dominant_term_at_large_k() {
        let z = gibbs_z(0.0, 50.0);
        assert!((z - (1.0 + 2.0 * (-50.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn periodicity() {
        for &k in &[0.25, 1.0, 2.0] {
            assert!((gibbs_z(0.3, k) - gibbs_z(1.3, k)).abs() < 1e-13);
        }
        let r = GibbsReference::new(0.5, vec![0.0, 0.25, 0.7]).unwrap();
        assert!(r.periodicity_defect() < 1e-13);
    }

    #[test]
    fn zero_c_moment_is_one() {
        assert_eq!(gibbs_exp_moment(0.37, 0.0, 1.0), 1.0);
    }

    #[test]
    fn deterministic_zero_slopes_are_not_gibbs() {
        let mut s = PairMoments::default();
        s.push(1.0, 1.0);
        s.push(1.0, 1.0);
        let rep = local_gibbs_test(&[s; 10], 1.0, &LocalGibbsConfig::default()).unwrap();
        assert!(rep.log_product.iter().all(|&v| v == 0.0));
        assert_eq!(rep.verdict, GibbsVerdict::NotLocalGibbs);
        assert!(!rep.lower_bound_holds);
    }

    #[test]
    fn nonpositive_expectation_flags_undersampling() {
        let mut s = PairMoments::default();
        s.push(-1.0, 1.0);
        assert!(matches!(
            local_gibbs_test(&[s], 1.0, &LocalGibbsConfig::default()),
            Err(DiagnosticError::NegativeExpectation { site: 0 })
        ));
    }
}
