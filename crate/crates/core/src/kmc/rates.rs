//! Jump rate families.
//!
//! Metropolis rates depend on the third finite difference
//! `w_i = z_{i-1} - 2 z_i + z_{i+1}` of the height profile, Arrhenius rates on
//! the second difference `z_i - z_{i-1}` at the departure site. All rates are
//! unscaled: the `N^4` time factor is applied to the simulation clock instead.

use serde::{Deserialize, Serialize};

use super::KmcError;

/// Largest admissible exponent magnitude before a rate is reported as saturated.
pub const RATE_SATURATION: f64 = 700.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateFamily {
    Metropolis,
    Arrhenius,
}

impl RateFamily {
    /// Amplitude exponent of the height process in the rough scaling regime.
    pub fn height_amplitude_exponent(self) -> i32 {
        match self {
            RateFamily::Metropolis => 3,
            RateFamily::Arrhenius => 2,
        }
    }
}

fn checked_exp(exponent: f64) -> Result<f64, KmcError> {
    if !exponent.is_finite() || exponent.abs() > RATE_SATURATION {
        return Err(KmcError::RateSaturation { exponent });
    }
    Ok(exponent.exp())
}

/// Metropolis rates `(r_plus, r_minus) = (e^{-3K + Kw}, e^{-3K - Kw})`.
///
/// `r_plus` is the rate of moving a particle from site `i` to `i + 1`,
/// `r_minus` the reverse move across the same bond.
pub fn metropolis_rates(w: i64, k: f64) -> Result<(f64, f64), KmcError> {
    let kw = k * w as f64;
    if kw.abs() > RATE_SATURATION {
        return Err(KmcError::RateSaturation { exponent: kw });
    }
    Ok((checked_exp(-3.0 * k + kw)?, checked_exp(-3.0 * k - kw)?))
}

/// Arrhenius rates `r(w2) = e^{-2K - 2K w2}`, identical for both directions.
pub fn arrhenius_rates(w2: i64, k: f64) -> Result<(f64, f64), KmcError> {
    let kw = 2.0 * k * w2 as f64;
    if kw.abs() > RATE_SATURATION {
        return Err(KmcError::RateSaturation { exponent: kw });
    }
    let r = checked_exp(-2.0 * k - kw)?;
    Ok((r, r))
}

/// Precomputed rates for small integer arguments.
///
/// Entries are produced by the same formulas as [`metropolis_rates`] and
/// [`arrhenius_rates`], so table lookups are bit-identical to direct evaluation.
#[derive(Clone, Debug)]
pub(crate) struct RateTable {
    family: RateFamily,
    k: f64,
    plus: Vec<f64>,
    minus: Vec<f64>,
}

const TABLE_HALF_WIDTH: i64 = 64;

impl RateTable {
    pub(crate) fn new(family: RateFamily, k: f64) -> Self {
        let mut plus = Vec::with_capacity((2 * TABLE_HALF_WIDTH + 1) as usize);
        let mut minus = Vec::with_capacity(plus.capacity());
        for w in -TABLE_HALF_WIDTH..=TABLE_HALF_WIDTH {
            let pair = match family {
                RateFamily::Metropolis => metropolis_rates(w, k),
                RateFamily::Arrhenius => arrhenius_rates(w, k),
            };
            // Saturated entries are never served from the table.
            let (p, m) = pair.unwrap_or((f64::NAN, f64::NAN));
            plus.push(p);
            minus.push(m);
        }
        Self {
            family,
            k,
            plus,
            minus,
        }
    }

    #[inline]
    pub(crate) fn pair(&self, arg: i64) -> Result<(f64, f64), KmcError> {
        if arg.abs() <= TABLE_HALF_WIDTH {
            let idx = (arg + TABLE_HALF_WIDTH) as usize;
            let p = self.plus[idx];
            if p.is_finite() {
                return Ok((p, self.minus[idx]));
            }
        }
        match self.family {
            RateFamily::Metropolis => metropolis_rates(arg, self.k),
            RateFamily::Arrhenius => arrhenius_rates(arg, self.k),
        }
    }
}
