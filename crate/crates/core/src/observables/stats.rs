use std::io::Write;

use serde::{Deserialize, Serialize};

use super::ObservableError;
use crate::kmc::site_position;

/// Running count, mean and centred sum of squares.
///
/// Merging two accumulators is exact in exact arithmetic (Chan's update), so
/// any grouping of the samples yields the same statistics up to rounding.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let na = self.count as f64;
        let nb = other.count as f64;
        let d = other.mean - self.mean;
        self.mean += d * nb / n;
        self.m2 += other.m2 + d * d * na * nb / n;
        self.count += other.count;
    }

    /// Unbiased sample variance (divisor `M - 1`); zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Joint moments of a pair of observables, including the cross term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairMoments {
    pub x: Moments,
    pub y: Moments,
    pub cxy: f64,
}

impl PairMoments {
    pub fn push(&mut self, x: f64, y: f64) {
        let n = self.x.count + 1;
        let dx = x - self.x.mean;
        self.x.push(x);
        self.y.push(y);
        // Uses the pre-update x deviation and post-update y mean.
        self.cxy += dx * (y - self.y.mean);
        debug_assert_eq!(self.x.count, n);
    }

    pub fn merge(&mut self, other: &PairMoments) {
        if other.x.count == 0 {
            return;
        }
        if self.x.count == 0 {
            *self = *other;
            return;
        }
        let na = self.x.count as f64;
        let nb = other.x.count as f64;
        let n = na + nb;
        let dx = other.x.mean - self.x.mean;
        let dy = other.y.mean - self.y.mean;
        self.cxy += other.cxy + dx * dy * na * nb / n;
        self.x.merge(&other.x);
        self.y.merge(&other.y);
    }

    /// Unbiased sample covariance.
    pub fn covariance(&self) -> f64 {
        if self.x.count < 2 {
            0.0
        } else {
            self.cxy / (self.x.count - 1) as f64
        }
    }
}

/// One [`Moments`] accumulator per lattice site.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SiteMoments {
    pub sites: Vec<Moments>,
}

impl SiteMoments {
    pub fn new(n: usize) -> Self {
        Self {
            sites: vec![Moments::default(); n],
        }
    }

    pub fn push(&mut self, values: &[f64]) -> Result<(), ObservableError> {
        if values.len() != self.sites.len() {
            return Err(ObservableError::ShapeMismatch {
                expected: self.sites.len(),
                found: values.len(),
            });
        }
        for (m, &v) in self.sites.iter_mut().zip(values) {
            m.push(v);
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &SiteMoments) -> Result<(), ObservableError> {
        if other.sites.len() != self.sites.len() {
            return Err(ObservableError::ShapeMismatch {
                expected: self.sites.len(),
                found: other.sites.len(),
            });
        }
        for (a, b) in self.sites.iter_mut().zip(&other.sites) {
            a.merge(b);
        }
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.sites.first().map_or(0, |m| m.count)
    }

    pub fn means(&self) -> Vec<f64> {
        self.sites.iter().map(|m| m.mean).collect()
    }

    pub fn variances(&self) -> Vec<f64> {
        self.sites.iter().map(Moments::variance).collect()
    }

    pub fn std_errors(&self) -> Vec<f64> {
        self.sites.iter().map(Moments::std_error).collect()
    }

    pub fn into_series(self, t: f64, epsilon: f64, delta: f64) -> MesoSeries {
        let n = self.sites.len();
        MesoSeries {
            x_grid: (0..n).map(|k| site_position(k, n)).collect(),
            t,
            epsilon,
            delta,
            mean: self.means(),
            variance: self.variances(),
            n_samples: self.count(),
        }
    }
}

/// Per-site or window-averaged expectation estimates at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MesoSeries {
    pub x_grid: Vec<f64>,
    pub t: f64,
    /// Window half-width; `1 / (2N)` denotes per-site values.
    pub epsilon: f64,
    /// Time-averaging width; 0 for instantaneous values.
    pub delta: f64,
    pub mean: Vec<f64>,
    /// Sample variance across replicates.
    pub variance: Vec<f64>,
    pub n_samples: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduce {
    Mean,
    MeanAndVariance,
}

impl MesoSeries {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// Standard error of each mean.
    pub fn std_errors(&self) -> Vec<f64> {
        let m = self.n_samples.max(1) as f64;
        self.variance.iter().map(|v| (v / m).sqrt()).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ObservableError> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record([
            "x",
            "t",
            "epsilon",
            "delta",
            "mean",
            "variance",
            "n_samples",
        ])?;
        for k in 0..self.mean.len() {
            wtr.write_record([
                self.x_grid[k].to_string(),
                self.t.to_string(),
                self.epsilon.to_string(),
                self.delta.to_string(),
                self.mean[k].to_string(),
                self.variance[k].to_string(),
                self.n_samples.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self, ObservableError> {
        #[derive(Deserialize)]
        struct Row {
            x: f64,
            t: f64,
            epsilon: f64,
            delta: f64,
            mean: f64,
            variance: f64,
            n_samples: u64,
        }
        let mut rdr = csv::Reader::from_reader(input);
        let mut series = MesoSeries {
            x_grid: Vec::new(),
            t: 0.0,
            epsilon: 0.0,
            delta: 0.0,
            mean: Vec::new(),
            variance: Vec::new(),
            n_samples: 0,
        };
        for row in rdr.deserialize() {
            let row: Row = row?;
            series.x_grid.push(row.x);
            series.t = row.t;
            series.epsilon = row.epsilon;
            series.delta = row.delta;
            series.mean.push(row.mean);
            series.variance.push(row.variance);
            series.n_samples = row.n_samples;
        }
        Ok(series)
    }
}

/// Mean (and sample variance) over replicates of per-site values.
pub fn ensemble_estimate<V: AsRef<[f64]>>(
    replicates: &[V],
    reduce: Reduce,
    t: f64,
    epsilon: f64,
    delta: f64,
) -> Result<MesoSeries, ObservableError> {
    let needed = match reduce {
        Reduce::Mean => 1,
        Reduce::MeanAndVariance => 2,
    };
    if replicates.len() < needed {
        return Err(ObservableError::TooFewSamples {
            needed,
            got: replicates.len(),
        });
    }
    let n = replicates[0].as_ref().len();
    let mut acc = SiteMoments::new(n);
    for r in replicates {
        acc.push(r.as_ref())?;
    }
    let mut series = acc.into_series(t, epsilon, delta);
    if reduce == Reduce::Mean {
        series.variance.iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_replicates() {
        let s = ensemble_estimate(
            &[vec![1.0], vec![3.0]],
            Reduce::MeanAndVariance,
            0.0,
            0.5,
            0.0,
        )
        .unwrap();
        assert_eq!(s.mean, vec![2.0]);
        assert_eq!(s.variance, vec![2.0]);
        assert_eq!(s.n_samples, 2);
    }

    #[test]
    fn identical_replicates_have_zero_variance() {
        let r = vec![vec![0.3, -1.0, 4.0]; 5];
        let s = ensemble_estimate(&r, Reduce::MeanAndVariance, 0.0, 0.5, 0.0).unwrap();
        assert!(s.variance.iter().all(|&v| v.abs() < 1e-30));
    }

    #[test]
    fn variance_needs_two_samples() {
        assert!(ensemble_estimate(&[vec![1.0]], Reduce::MeanAndVariance, 0.0, 0.5, 0.0).is_err());
        assert!(ensemble_estimate(&[vec![1.0]], Reduce::Mean, 0.0, 0.5, 0.0).is_ok());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let r = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(matches!(
            ensemble_estimate(&r, Reduce::Mean, 0.0, 0.5, 0.0),
            Err(ObservableError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn pair_covariance_matches_direct() {
        let xs = [1.0, 2.0, 4.0, 7.0, 11.0];
        let ys = [2.0, 1.0, 5.0, 3.0, 10.0];
        let mut a = PairMoments::default();
        let mut b = PairMoments::default();
        for i in 0..5 {
            if i < 2 {
                a.push(xs[i], ys[i])
            } else {
                b.push(xs[i], ys[i])
            }
        }
        a.merge(&b);
        let mx = xs.iter().sum::<f64>() / 5.0;
        let my = ys.iter().sum::<f64>() / 5.0;
        let c: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>()
            / 4.0;
        assert!((a.covariance() - c).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let s = ensemble_estimate(
            &[vec![1.0, 2.0], vec![3.0, 5.0]],
            Reduce::MeanAndVariance,
            0.25,
            0.1,
            1e-9,
        )
        .unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,t,epsilon,delta,mean,variance,n_samples"));
        let back = MesoSeries::read_csv(&buf[..]).unwrap();
        assert_eq!(back, s);
    }
}
