use serde::{Deserialize, Serialize};

use super::PdeError;

/// What a grid function represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Height,
    Slope,
    ThirdDeriv,
}

impl FieldKind {
    pub(crate) fn code(self) -> u8 {
        match self {
            FieldKind::Height => 0,
            FieldKind::Slope => 1,
            FieldKind::ThirdDeriv => 2,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(FieldKind::Height),
            1 => Some(FieldKind::Slope),
            2 => Some(FieldKind::ThirdDeriv),
            _ => None,
        }
    }
}

/// Grid function on the periodic grid `x_i = (i + offset) dx`, `dx = 1/G`.
///
/// Heights live on nodes (`offset = 0`). Difference quotients of them live
/// where their stencil is centred: slopes and third derivatives at `+1/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct PdeField {
    pub values: Vec<f64>,
    pub t: f64,
    pub kind: FieldKind,
    pub offset: f64,
}

pub const MIN_GRID: usize = 32;

impl PdeField {
    pub fn new(kind: FieldKind, values: Vec<f64>, t: f64) -> Result<Self, PdeError> {
        let offset = match kind {
            FieldKind::Height => 0.0,
            FieldKind::Slope | FieldKind::ThirdDeriv => 0.5,
        };
        Self::with_offset(kind, values, t, offset)
    }

    pub fn with_offset(
        kind: FieldKind,
        values: Vec<f64>,
        t: f64,
        offset: f64,
    ) -> Result<Self, PdeError> {
        if values.len() < MIN_GRID {
            return Err(PdeError::GridTooSmall(values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(PdeError::NonFinite(format!("initial value at node {i}")));
        }
        Ok(Self {
            values,
            t,
            kind,
            offset,
        })
    }

    /// Sample `f` at the grid points.
    pub fn sample(kind: FieldKind, g: usize, f: impl Fn(f64) -> f64) -> Result<Self, PdeError> {
        let probe = Self::new(kind, vec![0.0; g.max(MIN_GRID)], 0.0)?;
        let offset = probe.offset;
        let values = (0..g).map(|i| f((i as f64 + offset) / g as f64)).collect();
        Self::with_offset(kind, values, 0.0, offset)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.values.len() as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + self.offset) * self.dx()
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    /// `sum values * dx`
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.dx()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Periodic linear interpolation at `x`.
    pub fn interpolate(&self, x: f64) -> f64 {
        let g = self.len();
        let pos = (x * g as f64 - self.offset).rem_euclid(g as f64);
        let i = (pos.floor() as usize).min(g - 1);
        let s = pos - i as f64;
        (1.0 - s) * self.values[i] + s * self.values[(i + 1) % g]
    }

    /// `max_i |self_i - other(x_i)|` with `other` interpolated onto this grid.
    pub fn sup_distance(&self, other: &PdeField) -> f64 {
        (0..self.len())
            .map(|i| (self.values[i] - other.interpolate(self.x(i))).abs())
            .fold(0.0, f64::max)
    }

    /// Sine Fourier coefficient `2 sum v_i sin(2 pi m x_i) dx`.
    pub fn sine_coefficient(&self, m: usize) -> f64 {
        let w = 2.0 * std::f64::consts::PI * m as f64;
        2.0 * (0..self.len())
            .map(|i| self.values[i] * (w * self.x(i)).sin())
            .sum::<f64>()
            * self.dx()
    }

    /// Cosine Fourier coefficient `2 sum v_i cos(2 pi m x_i) dx`.
    pub fn cosine_coefficient(&self, m: usize) -> f64 {
        let w = 2.0 * std::f64::consts::PI * m as f64;
        2.0 * (0..self.len())
            .map(|i| self.values[i] * (w * self.x(i)).cos())
            .sum::<f64>()
            * self.dx()
    }

    /// Image under `x -> -x` (about the origin), on the same grid.
    ///
    /// Only valid for fields whose reflected grid coincides with their own:
    /// node fields map `i -> -i`, half-offset fields map `i -> -1 - i`.
    pub fn mirrored(&self) -> PdeField {
        let g = self.len() as isize;
        let shift = (2.0 * self.offset).round() as isize;
        let values = (0..g)
            .map(|i| self.values[(-i - shift).rem_euclid(g) as usize])
            .collect();
        PdeField {
            values,
            ..self.clone()
        }
    }

    pub(crate) fn check_mean_zero(&self) -> Result<(), PdeError> {
        let scale = self.sup_norm().max(1.0);
        let mean = self.integral();
        if mean.abs() > 1e-10 * scale {
            return Err(PdeError::NotMeanZero(mean));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn wrap(i: isize, g: usize) -> usize {
    i.rem_euclid(g as isize) as usize
}

/// `w_i = (h_{i+2} - 3 h_{i+1} + 3 h_i - h_{i-1}) / dx^3`, the grid form of
/// `z_{i-1} - 2 z_i + z_{i+1}` with `z_i = h_{i+1} - h_i`.
pub fn third_difference(h: &[f64], dx: f64) -> Vec<f64> {
    let g = h.len();
    let s = 1.0 / (dx * dx * dx);
    (0..g as isize)
        .map(|i| {
            (h[wrap(i + 2, g)] - 3.0 * h[wrap(i + 1, g)] + 3.0 * h[wrap(i, g)] - h[wrap(i - 1, g)])
                * s
        })
        .collect()
}

/// `(v_{i-1} - 2 v_i + v_{i+1}) / dx^2`
pub fn second_difference(v: &[f64], dx: f64) -> Vec<f64> {
    let g = v.len();
    let s = 1.0 / (dx * dx);
    (0..g as isize)
        .map(|i| (v[wrap(i - 1, g)] - 2.0 * v[wrap(i, g)] + v[wrap(i + 1, g)]) * s)
        .collect()
}

/// Discrete third derivative of a height field, located at `offset + 1/2`.
pub fn third_derivative(h: &PdeField) -> PdeField {
    PdeField {
        values: third_difference(&h.values, h.dx()),
        t: h.t,
        kind: FieldKind::ThirdDeriv,
        offset: h.offset + 0.5,
    }
}

/// Forward slope `(h_{i+1} - h_i)/dx`, located at `offset + 1/2`.
pub fn slope_of(h: &PdeField) -> PdeField {
    let g = h.len();
    let dx = h.dx();
    PdeField {
        values: (0..g)
            .map(|i| (h.values[(i + 1) % g] - h.values[i]) / dx)
            .collect(),
        t: h.t,
        kind: FieldKind::Slope,
        offset: h.offset + 0.5,
    }
}

/// Periodic height with third derivative `w` and mass `integral h = mass`.
///
/// `w` is first averaged onto the nodes `j dx` (when it is staggered), then
/// integrated three times from 0 with the trapezoid rule, and the quadratic
/// `a x^2 + b x + c` is chosen so that `h` and `h_x` are periodic and the mass
/// matches. Periodicity of `h_xx` needs `integral w = 0`.
pub fn reconstruct_h_from_w(w: &PdeField, mass: f64) -> Result<PdeField, PdeError> {
    w.check_mean_zero()?;
    let g = w.len();
    let dx = w.dx();
    // Node values by periodic linear interpolation (the two-point average
    // for a staggered field).
    let nodes: Vec<f64> = (0..g).map(|j| w.interpolate(j as f64 * dx)).collect();
    let at = |j: usize| nodes[j % g];
    let cumulative = |f: &dyn Fn(usize) -> f64| {
        let mut out = vec![0.0; g + 1];
        for j in 0..g {
            out[j + 1] = out[j] + 0.5 * dx * (f(j) + f(j + 1));
        }
        out
    };
    let w1 = cumulative(&at);
    let w2 = cumulative(&|j| w1[j]);
    let w3 = cumulative(&|j| w2[j]);
    let a = -0.5 * w2[g];
    let b = -w3[g] - a;
    let mut h: Vec<f64> = (0..g)
        .map(|j| {
            let x = j as f64 * dx;
            w3[j] + a * x * x + b * x
        })
        .collect();
    let c = mass - h.iter().sum::<f64>() * dx;
    for v in &mut h {
        *v += c;
    }
    PdeField::with_offset(FieldKind::Height, h, w.t, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn third_difference_matches_h_xxx() {
        let g = 256;
        let h = PdeField::sample(FieldKind::Height, g, |x| (2.0 * PI * x).sin()).unwrap();
        let w = third_derivative(&h);
        assert_eq!(w.offset, 0.5);
        let exact = |x: f64| -(2.0 * PI).powi(3) * (2.0 * PI * x).cos();
        let err = (0..g)
            .map(|i| (w.values[i] - exact(w.x(i))).abs())
            .fold(0.0, f64::max);
        assert!(err < 2e-3 * (2.0 * PI).powi(3), "{err}");
    }

    #[test]
    fn reconstruct_constant_and_sine() {
        let zero = PdeField::new(FieldKind::ThirdDeriv, vec![0.0; 64], 0.0).unwrap();
        let h = reconstruct_h_from_w(&zero, 5.0).unwrap();
        assert!(h.values.iter().all(|v| (v - 5.0).abs() < 1e-14));

        let mut prev = f64::INFINITY;
        for g in [64, 128, 256] {
            let w = PdeField::sample(FieldKind::ThirdDeriv, g, |x| {
                -(2.0 * PI).powi(3) * (2.0 * PI * x).cos()
            })
            .unwrap();
            let h = reconstruct_h_from_w(&w, 0.0).unwrap();
            let err = (0..g)
                .map(|i| (h.values[i] - (2.0 * PI * h.x(i)).sin()).abs())
                .fold(0.0, f64::max);
            assert!(err < 40.0 / (g * g) as f64, "g={g} err={err}");
            assert!(err < prev / 3.0);
            prev = err;
        }
    }

    #[test]
    fn round_trip() {
        let g = 128;
        let h = PdeField::sample(FieldKind::Height, g, |x| {
            0.3 + (2.0 * PI * x).sin() + 0.2 * (4.0 * PI * x).cos()
        })
        .unwrap();
        let back = reconstruct_h_from_w(&third_derivative(&h), h.integral()).unwrap();
        assert!(h.sup_distance(&back) < 1e-2);
        assert!((back.integral() - h.integral()).abs() < 1e-13);
    }

    #[test]
    fn non_mean_zero_is_rejected() {
        let w = PdeField::new(FieldKind::ThirdDeriv, vec![1.0; 32], 0.0).unwrap();
        assert!(matches!(
            reconstruct_h_from_w(&w, 0.0),
            Err(PdeError::NotMeanZero(_))
        ));
    }

    #[test]
    fn mirror_is_involution() {
        let h = PdeField::sample(FieldKind::Height, 40, |x| x * (1.0 - x)).unwrap();
        assert_eq!(h.mirrored().mirrored(), h);
        let w = third_derivative(&h);
        assert_eq!(w.mirrored().mirrored(), w);
        // Reflection about 0 of a staggered field: value at (i+1/2)dx moves to -(i+1/2)dx.
        let m = w.mirrored();
        assert_eq!(m.values[0], w.values[w.len() - 1]);
    }
}
