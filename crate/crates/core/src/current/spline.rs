//! Cubic smoothing spline with zero end slopes.
//!
//! Minimizes `p * sum_j w_j (y_j - s(x_j))^2 + (1 - p) * integral of s''^2`
//! over cubic splines with knots at the data sites and `s' = 0` at both ends.
//! With values `a` and second derivatives `c` at the knots, continuity of `s'`
//! and the end conditions read `Q^T a = R c`; the minimizer solves the
//! pentadiagonal system `(R + alpha Q^T W^{-1} Q) c = Q^T y`, `alpha = (1-p)/p`,
//! and then `a = y - alpha W^{-1} Q c`.

use serde::{Deserialize, Serialize};

use super::FitError;

/// `LDL^T` solve of a symmetric positive definite band matrix.
///
/// `lower[i][k]` holds `A[i][i-k]` for `k = 0..=m`.
pub(crate) fn solve_spd_band(lower: &[Vec<f64>], rhs: &[f64]) -> Result<Vec<f64>, FitError> {
    let n = rhs.len();
    let m = lower.first().map_or(0, |r| r.len() - 1);
    let mut l = vec![vec![0.0; m + 1]; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        let j0 = i.saturating_sub(m);
        for j in j0..i {
            let mut s = lower[i][i - j];
            for k in j0.max(j.saturating_sub(m))..j {
                s -= l[i][i - k] * l[j][j - k] * d[k];
            }
            l[i][i - j] = s / d[j];
        }
        let mut s = lower[i][0];
        for k in j0..i {
            s -= l[i][i - k] * l[i][i - k] * d[k];
        }
        if !(s > 0.0) || !s.is_finite() {
            return Err(FitError::Singular(
                "band system is not positive definite".into(),
            ));
        }
        d[i] = s;
    }
    let mut x = rhs.to_vec();
    for i in 0..n {
        for k in i.saturating_sub(m)..i {
            x[i] -= l[i][i - k] * x[k];
        }
    }
    for (xi, di) in x.iter_mut().zip(&d) {
        *xi /= di;
    }
    for i in (0..n).rev() {
        for j in i + 1..(i + m + 1).min(n) {
            x[i] -= l[j][j - i] * x[j];
        }
    }
    Ok(x)
}

/// Knot values and second derivatives of a cubic spline with constant
/// continuation outside `[knots[0], knots[n-1]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubicSpline {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    pub second_derivs: Vec<f64>,
}

impl CubicSpline {
    pub fn constant(value: f64) -> Self {
        Self {
            knots: vec![0.0],
            values: vec![value],
            second_derivs: vec![0.0],
        }
    }

    fn locate(&self, x: f64) -> Option<(usize, f64, f64)> {
        let n = self.knots.len();
        if n < 2 || x <= self.knots[0] || x >= self.knots[n - 1] {
            return None;
        }
        let j = self.knots.partition_point(|&k| k <= x) - 1;
        let h = self.knots[j + 1] - self.knots[j];
        Some((j, x - self.knots[j], h))
    }

    /// Per-interval polynomial coefficients `[s, s', s''/2, s'''/6]` at the left knot.
    pub fn interval_coefficients(&self) -> Vec<[f64; 4]> {
        (0..self.knots.len().saturating_sub(1))
            .map(|j| {
                let h = self.knots[j + 1] - self.knots[j];
                let (a0, a1) = (self.values[j], self.values[j + 1]);
                let (c0, c1) = (self.second_derivs[j], self.second_derivs[j + 1]);
                let b = (a1 - a0) / h - h * (2.0 * c0 + c1) / 6.0;
                [a0, b, c0 / 2.0, (c1 - c0) / (6.0 * h)]
            })
            .collect()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.knots.len();
        match self.locate(x) {
            Some((j, t, h)) => {
                let (a0, a1) = (self.values[j], self.values[j + 1]);
                let (c0, c1) = (self.second_derivs[j], self.second_derivs[j + 1]);
                let b = (a1 - a0) / h - h * (2.0 * c0 + c1) / 6.0;
                a0 + t * (b + t * (c0 / 2.0 + t * (c1 - c0) / (6.0 * h)))
            }
            None if n == 1 || x <= self.knots[0] => self.values[0],
            None => self.values[n - 1],
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some((j, t, h)) => {
                let (a0, a1) = (self.values[j], self.values[j + 1]);
                let (c0, c1) = (self.second_derivs[j], self.second_derivs[j + 1]);
                let b = (a1 - a0) / h - h * (2.0 * c0 + c1) / 6.0;
                b + t * (c0 + t * (c1 - c0) / (2.0 * h))
            }
            None => 0.0,
        }
    }

    /// Exact integral of the spline (with its constant continuation) over `[lo, hi]`.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        if hi < lo {
            return -self.integral(hi, lo);
        }
        let n = self.knots.len();
        if n < 2 {
            return self.values[0] * (hi - lo);
        }
        let mut total = 0.0;
        let (k0, kn) = (self.knots[0], self.knots[n - 1]);
        if lo < k0 {
            total += self.values[0] * (hi.min(k0) - lo);
        }
        if hi > kn {
            total += self.values[n - 1] * (hi - lo.max(kn));
        }
        let coeffs = self.interval_coefficients();
        for j in 0..n - 1 {
            let a = self.knots[j].max(lo);
            let b = self.knots[j + 1].min(hi);
            if b <= a {
                continue;
            }
            let p = &coeffs[j];
            let prim = |x: f64| {
                let t = x - self.knots[j];
                t * (p[0] + t * (p[1] / 2.0 + t * (p[2] / 3.0 + t * p[3] / 4.0)))
            };
            total += prim(b) - prim(a);
        }
        total
    }
}

/// Fit the clamped smoothing spline to weighted data.
///
/// Abscissas closer than `1e-12` relative are merged into one knot carrying
/// the weighted mean ordinate and the summed weight.
pub fn smoothing_spline(
    x: &[f64],
    y: &[f64],
    weights: &[f64],
    p: f64,
) -> Result<CubicSpline, FitError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(FitError::InvalidInput(format!(
            "smoothing weight {p} outside (0, 1]"
        )));
    }
    if x.len() != y.len() || x.len() != weights.len() {
        return Err(FitError::InvalidInput("data lengths differ".into()));
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut knots: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut ws: Vec<f64> = Vec::new();
    let span = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for &i in &order {
        if !(weights[i] > 0.0) {
            return Err(FitError::InvalidInput("weights must be positive".into()));
        }
        match knots.last() {
            Some(&last) if x[i] - last <= 1e-12 * span => {
                let k = knots.len() - 1;
                ys[k] = (ys[k] * ws[k] + y[i] * weights[i]) / (ws[k] + weights[i]);
                ws[k] += weights[i];
            }
            _ => {
                knots.push(x[i]);
                ys.push(y[i]);
                ws.push(weights[i]);
            }
        }
    }
    let n = knots.len();
    if n < 2 {
        return Err(FitError::InvalidInput(
            "need at least two distinct abscissas".into(),
        ));
    }
    let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
    // Column j of Q (row j of Q^T) as (offset, value) triples at rows j-1, j, j+1.
    let qt_row = |j: usize| -> [(isize, f64); 3] {
        if j == 0 {
            [(0, -1.0 / h[0]), (1, 1.0 / h[0]), (2, 0.0)]
        } else if j == n - 1 {
            [(-1, 1.0 / h[n - 2]), (0, -1.0 / h[n - 2]), (1, 0.0)]
        } else {
            [
                (-1, 1.0 / h[j - 1]),
                (0, -1.0 / h[j - 1] - 1.0 / h[j]),
                (1, 1.0 / h[j]),
            ]
        }
    };
    let qt: Vec<[(isize, f64); 3]> = (0..n).map(qt_row).collect();
    // Dense-by-row representation of Q^T entries: qt_at(j, i) = (Q^T)_{j,i}.
    let qt_at = |j: usize, i: usize| -> f64 {
        qt[j]
            .iter()
            .find(|(off, _)| j as isize + off == i as isize)
            .map_or(0.0, |&(_, v)| v)
    };
    let alpha = (1.0 - p) / p;
    let mut lower = vec![vec![0.0; 3]; n];
    for j in 0..n {
        for k in 0..=2usize.min(j) {
            let i2 = j - k;
            // R part
            let r = if k == 0 {
                let left = if j > 0 { h[j - 1] } else { 0.0 };
                let right = if j < n - 1 { h[j] } else { 0.0 };
                (left + right) / 3.0
            } else if k == 1 {
                h[i2] / 6.0
            } else {
                0.0
            };
            // alpha * (Q^T W^{-1} Q)_{j, i2} = alpha * sum_i Q^T_{j,i} Q^T_{i2,i} / w_i
            let lo = j.saturating_sub(1);
            let hi = (i2 + 1).min(n - 1);
            let mut s = 0.0;
            for i in lo..=hi {
                s += qt_at(j, i) * qt_at(i2, i) / ws[i];
            }
            lower[j][k] = r + alpha * s;
        }
    }
    let rhs: Vec<f64> = (0..n)
        .map(|j| {
            (0..n.min(j + 2))
                .skip(j.saturating_sub(1))
                .map(|i| qt_at(j, i) * ys[i])
                .sum()
        })
        .collect();
    let c = solve_spd_band(&lower, &rhs)?;
    let values: Vec<f64> = (0..n)
        .map(|i| {
            let qc: f64 = (i.saturating_sub(1)..(i + 2).min(n))
                .map(|j| qt_at(j, i) * c[j])
                .sum();
            ys[i] - alpha * qc / ws[i]
        })
        .collect();
    Ok(CubicSpline {
        knots,
        values,
        second_derivs: c,
    })
}
