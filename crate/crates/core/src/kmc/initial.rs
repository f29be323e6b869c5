use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::KmcError;

/// Macroscopic lattice position of storage index `k` on an `n`-site torus.
///
/// Sites are labelled `1..=n`; storage index `k` holds site `k + 1`, which
/// sits at `(k + 1) / n` (site `n` coincides with `x = 0`).
#[inline]
pub fn site_position(k: usize, n: usize) -> f64 {
    (k + 1) as f64 / n as f64
}

/// Named macroscopic initial height profiles on the unit torus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum ProfileShape {
    Flat,
    /// `c sin(2 pi x)`
    Sin {
        amplitude: f64,
    },
    /// `c (1 - exp(-sin(2 pi x)))`
    ExpSin {
        amplitude: f64,
    },
    /// `c sin^2(2 pi x)`
    SinSquared {
        amplitude: f64,
    },
}

impl ProfileShape {
    pub fn eval(&self, x: f64) -> f64 {
        let s = (2.0 * PI * x).sin();
        match *self {
            ProfileShape::Flat => 0.0,
            ProfileShape::Sin { amplitude } => amplitude * s,
            ProfileShape::ExpSin { amplitude } => amplitude * (1.0 - (-s).exp()),
            ProfileShape::SinSquared { amplitude } => amplitude * s * s,
        }
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            ProfileShape::Flat => 0.0,
            ProfileShape::Sin { amplitude }
            | ProfileShape::ExpSin { amplitude }
            | ProfileShape::SinSquared { amplitude } => amplitude,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProfileShape::Flat => "flat",
            ProfileShape::Sin { .. } => "sin",
            ProfileShape::ExpSin { .. } => "exp-sin",
            ProfileShape::SinSquared { .. } => "sin-squared",
        }
    }
}

/// Smooth macroscopic height profile sampled on the lattice.
#[derive(Clone)]
pub struct InitialProfile {
    h0: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    grid_values: Vec<f64>,
    mass_target: f64,
}

impl fmt::Debug for InitialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InitialProfile")
            .field("n", &self.grid_values.len())
            .field("mass_target", &self.mass_target)
            .finish()
    }
}

impl InitialProfile {
    pub fn from_fn<F>(h0: F, n: usize) -> Result<Self, KmcError>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let grid_values: Vec<f64> = (0..n).map(|k| h0(site_position(k, n))).collect();
        if let Some(k) = grid_values.iter().position(|v| !v.is_finite()) {
            return Err(KmcError::NonFiniteProfile { site: k });
        }
        let mass_target = grid_values.iter().sum::<f64>() / n.max(1) as f64;
        Ok(Self {
            h0: Arc::new(h0),
            grid_values,
            mass_target,
        })
    }

    pub fn from_shape(shape: ProfileShape, n: usize) -> Result<Self, KmcError> {
        Self::from_fn(move |x| shape.eval(x), n)
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.h0)(x)
    }

    pub fn grid_values(&self) -> &[f64] {
        &self.grid_values
    }

    /// Mean macroscopic height `M`.
    pub fn mass_target(&self) -> f64 {
        self.mass_target
    }

    pub fn n(&self) -> usize {
        self.grid_values.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_follow_one_based_labels() {
        assert_eq!(site_position(0, 8), 0.125);
        assert_eq!(site_position(7, 8), 1.0);
    }

    #[test]
    fn shapes_evaluate() {
        let s = ProfileShape::Sin { amplitude: 2.0 };
        assert!((s.eval(0.25) - 2.0).abs() < 1e-15);
        let e = ProfileShape::ExpSin { amplitude: 1.0 };
        assert!((e.eval(0.25) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        let q = ProfileShape::SinSquared { amplitude: 3.0 };
        assert!((q.eval(0.75) - 3.0).abs() < 1e-14);
        assert_eq!(ProfileShape::Flat.eval(0.3), 0.0);
    }

    #[test]
    fn non_finite_profile_rejected() {
        let err = InitialProfile::from_fn(|x| if x > 0.5 { f64::NAN } else { 0.0 }, 8);
        assert!(matches!(err, Err(KmcError::NonFiniteProfile { .. })));
    }

    #[test]
    fn shape_toml_round_trip() {
        let s = ProfileShape::ExpSin { amplitude: 0.001 };
        let text = toml::to_string(&s).unwrap();
        assert!(text.contains("exp-sin"));
        let back: ProfileShape = toml::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
