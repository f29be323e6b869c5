//! Direct solvers for periodic banded systems.

use super::PdeError;

/// Square matrix whose nonzeros satisfy `|i - j| <= p` cyclically.
///
/// Gaussian elimination without pivoting only fills in the band itself, the
/// last `p` columns and the last `p` rows, so those are the only entries
/// stored. When a pivot degenerates the factorization falls back to a dense
/// partially pivoted LU.
#[derive(Clone, Debug)]
pub struct CyclicBand {
    n: usize,
    p: usize,
    band: Vec<f64>,
    right: Vec<f64>,
    bottom: Vec<f64>,
}

enum Factor {
    Band(CyclicBand),
    Dense(DenseLu),
}

pub struct CyclicBandLu {
    factor: Factor,
}

impl CyclicBand {
    pub fn zeros(n: usize, p: usize) -> Self {
        assert!(n > 3 * p + 1, "cyclic band needs n > 3p + 1");
        Self {
            n,
            p,
            band: vec![0.0; n * (2 * p + 1)],
            right: vec![0.0; n * p],
            bottom: vec![0.0; p * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (n, p) = (self.n, self.p);
        if j >= n - p {
            Some(self.band.len() + i * p + (j - (n - p)))
        } else if i >= n - p {
            Some(self.band.len() + self.right.len() + (i - (n - p)) * n + j)
        } else if i.abs_diff(j) <= p {
            Some(i * (2 * p + 1) + (j + p - i))
        } else {
            None
        }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        match self.slot(i, j) {
            Some(s) => self.read(s),
            None => 0.0,
        }
    }

    #[inline]
    fn read(&self, s: usize) -> f64 {
        let (b, r) = (self.band.len(), self.right.len());
        if s < b {
            self.band[s]
        } else if s < b + r {
            self.right[s - b]
        } else {
            self.bottom[s - b - r]
        }
    }

    #[inline]
    fn write(&mut self, s: usize, v: f64) {
        let (b, r) = (self.band.len(), self.right.len());
        if s < b {
            self.band[s] = v;
        } else if s < b + r {
            self.right[s - b] = v;
        } else {
            self.bottom[s - b - r] = v;
        }
    }

    /// Add `v` at row `i`, cyclic offset `d` (`-p <= d <= p`).
    pub fn add(&mut self, i: usize, d: isize, v: f64) {
        let j = (i as isize + d).rem_euclid(self.n as isize) as usize;
        let s = self.slot(i, j).expect("entry outside the cyclic band");
        let cur = self.read(s);
        self.write(s, cur + v);
    }

    /// Entry at row `i`, cyclic offset `d`.
    pub fn entry(&self, i: usize, d: isize) -> f64 {
        let j = (i as isize + d).rem_euclid(self.n as isize) as usize;
        self.get(i, j)
    }

    /// `A <- alpha A + beta I`
    pub fn scale_shift(&mut self, alpha: f64, beta: f64) {
        for v in self
            .band
            .iter_mut()
            .chain(self.right.iter_mut())
            .chain(self.bottom.iter_mut())
        {
            *v *= alpha;
        }
        for i in 0..self.n {
            let s = self.slot(i, i).expect("diagonal is stored");
            let v = self.read(s);
            self.write(s, v + beta);
        }
    }

    /// `y = A x`
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let (n, p) = (self.n, self.p as isize);
        (0..n)
            .map(|i| {
                (-p..=p)
                    .map(|d| {
                        let j = (i as isize + d).rem_euclid(n as isize) as usize;
                        self.get(i, j) * x[j]
                    })
                    .sum()
            })
            .collect()
    }

    fn to_dense(&self) -> Vec<Vec<f64>> {
        let (n, p) = (self.n, self.p as isize);
        let mut a = vec![vec![0.0; n]; n];
        for (i, row) in a.iter_mut().enumerate() {
            for d in -p..=p {
                let j = (i as isize + d).rem_euclid(n as isize) as usize;
                row[j] = self.get(i, j);
            }
        }
        a
    }

    #[inline]
    fn pattern(&self, k: usize) -> impl Iterator<Item = usize> {
        let (n, p) = (self.n, self.p);
        let band_end = (k + p).min(n - 1);
        let tail_start = (n - p).max(band_end + 1);
        (k + 1..=band_end).chain(tail_start..n)
    }

    pub fn factor(self) -> Result<CyclicBandLu, PdeError> {
        let scale = self
            .band
            .iter()
            .chain(&self.right)
            .chain(&self.bottom)
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let dense_backup = self.clone();
        let mut a = self;
        let n = a.n;
        for k in 0..n {
            let piv = a.get(k, k);
            if !(piv.abs() > 1e-13 * scale) {
                let dense = DenseLu::factor(dense_backup.to_dense())?;
                return Ok(CyclicBandLu {
                    factor: Factor::Dense(dense),
                });
            }
            let cols: Vec<usize> = a.pattern(k).collect();
            for i in a.pattern(k).collect::<Vec<_>>() {
                let si = a.slot(i, k).expect("pattern entry");
                let l = a.read(si) / piv;
                a.write(si, l);
                if l == 0.0 {
                    continue;
                }
                for &j in &cols {
                    let akj = a.get(k, j);
                    if akj != 0.0 {
                        let s = a.slot(i, j).expect("fill stays in pattern");
                        let v = a.read(s) - l * akj;
                        a.write(s, v);
                    }
                }
            }
        }
        Ok(CyclicBandLu {
            factor: Factor::Band(a),
        })
    }
}

impl CyclicBandLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        match &self.factor {
            Factor::Dense(d) => d.solve(rhs),
            Factor::Band(a) => {
                let n = a.n;
                let mut y = rhs.to_vec();
                for k in 0..n {
                    let yk = y[k];
                    if yk == 0.0 {
                        continue;
                    }
                    for i in a.pattern(k) {
                        y[i] -= a.get(i, k) * yk;
                    }
                }
                for k in (0..n).rev() {
                    let mut s = y[k];
                    for j in a.pattern(k) {
                        s -= a.get(k, j) * y[j];
                    }
                    y[k] = s / a.get(k, k);
                }
                y
            }
        }
    }

    pub fn used_dense_fallback(&self) -> bool {
        matches!(self.factor, Factor::Dense(_))
    }
}

/// Dense LU with partial pivoting.
pub struct DenseLu {
    lu: Vec<Vec<f64>>,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn factor(mut a: Vec<Vec<f64>>) -> Result<Self, PdeError> {
        let n = a.len();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (piv_row, piv) = (k..n)
                .map(|i| (i, a[i][k].abs()))
                .fold(
                    (k, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
            if !(piv > 0.0) || !piv.is_finite() {
                return Err(PdeError::SingularMatrix);
            }
            a.swap(k, piv_row);
            perm.swap(k, piv_row);
            let (top, rest) = a.split_at_mut(k + 1);
            let row_k = &top[k];
            for row in rest.iter_mut() {
                let l = row[k] / row_k[k];
                row[k] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        row[j] -= l * row_k[j];
                    }
                }
            }
        }
        Ok(Self { lu: a, perm })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.lu.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&i| rhs[i]).collect();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.lu[i][k] * y[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.lu[i][k] * y[k];
            }
            y[i] /= self.lu[i][i];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, p: usize, seed: u64) -> CyclicBand {
        let mut a = CyclicBand::zeros(n, p);
        let mut s = seed;
        let mut next = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for i in 0..n {
            for d in -(p as isize)..=(p as isize) {
                a.add(i, d, next());
            }
            a.add(i, 0, 3.0);
        }
        a
    }

    #[test]
    fn band_solve_matches_product() {
        for &(n, p) in &[(12usize, 2usize), (33, 2), (64, 1), (40, 3)] {
            let a = sample(n, p, n as u64);
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let b = a.mul(&x);
            let lu = a.factor().unwrap();
            assert!(!lu.used_dense_fallback());
            let sol = lu.solve(&b);
            for i in 0..n {
                assert!((sol[i] - x[i]).abs() < 1e-10, "n={n} p={p} i={i}");
            }
        }
    }

    #[test]
    fn zero_pivot_uses_dense_fallback() {
        let n = 10;
        let mut a = CyclicBand::zeros(n, 1);
        // Cyclic permutation-like matrix: zero diagonal.
        for i in 0..n {
            a.add(i, 1, 1.0);
            a.add(i, -1, 0.5);
        }
        let x: Vec<f64> = (0..n).map(|i| i as f64 + 1.0).collect();
        let b = a.mul(&x);
        let lu = a.factor().unwrap();
        assert!(lu.used_dense_fallback());
        let sol = lu.solve(&b);
        for i in 0..n {
            assert!((sol[i] - x[i]).abs() < 1e-10);
        }
    }
}
