use serde::{Deserialize, Serialize};

use super::{j_gibbs, FitError};
use crate::observables::MesoSeries;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CloudMeta {
    pub n: usize,
    pub k: f64,
    pub t: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub seeds: Vec<u64>,
}

/// Points `(omega, J / J_gibbs(omega))` with `|omega| >= delta0`.
///
/// Sites with `|omega| < delta0` are kept aside with their raw current so the
/// quadratic core fit can still use them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaPointCloud {
    pub omega: Vec<f64>,
    pub ratio: Vec<f64>,
    pub current: Vec<f64>,
    pub near_omega: Vec<f64>,
    pub near_current: Vec<f64>,
    pub delta0: f64,
    pub meta: CloudMeta,
}

impl SigmaPointCloud {
    /// Build a cloud directly from `(omega, current)` pairs.
    pub fn from_points(
        omega: &[f64],
        current: &[f64],
        delta0: f64,
        meta: CloudMeta,
    ) -> Result<Self, FitError> {
        if omega.len() != current.len() {
            return Err(FitError::InvalidInput(
                "omega and current lengths differ".into(),
            ));
        }
        let mut cloud = SigmaPointCloud {
            omega: Vec::new(),
            ratio: Vec::new(),
            current: Vec::new(),
            near_omega: Vec::new(),
            near_current: Vec::new(),
            delta0,
            meta,
        };
        let k = cloud.meta.k;
        for (&w, &j) in omega.iter().zip(current) {
            if !(w.is_finite() && j.is_finite()) {
                return Err(FitError::InvalidInput(format!(
                    "non-finite point ({w}, {j})"
                )));
            }
            if w.abs() < delta0 {
                cloud.near_omega.push(w);
                cloud.near_current.push(j);
            } else {
                let ratio = j / j_gibbs(w, k);
                if !ratio.is_finite() {
                    return Err(FitError::InvalidInput(format!(
                        "non-finite ratio at omega {w}"
                    )));
                }
                cloud.omega.push(w);
                cloud.ratio.push(ratio);
                cloud.current.push(j);
            }
        }
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// Range of the retained abscissas.
    pub fn omega_range(&self) -> Option<(f64, f64)> {
        if self.omega.is_empty() {
            return None;
        }
        Some(
            self.omega
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &w| {
                    (a.min(w), b.max(w))
                }),
        )
    }

    /// All `(omega, current)` pairs, retained and set aside.
    pub fn all_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.omega
            .iter()
            .copied()
            .zip(self.current.iter().copied())
            .chain(
                self.near_omega
                    .iter()
                    .copied()
                    .zip(self.near_current.iter().copied()),
            )
    }

    /// Concatenate clouds (for example several measurement times).
    pub fn merged(clouds: &[SigmaPointCloud]) -> Result<Self, FitError> {
        let first = clouds
            .first()
            .ok_or_else(|| FitError::InvalidInput("no clouds to merge".into()))?;
        let mut out = first.clone();
        for c in &clouds[1..] {
            if c.meta.k != first.meta.k || c.delta0 != first.delta0 {
                return Err(FitError::MetadataMismatch("K or delta0 differ".into()));
            }
            out.omega.extend(&c.omega);
            out.ratio.extend(&c.ratio);
            out.current.extend(&c.current);
            out.near_omega.extend(&c.near_omega);
            out.near_current.extend(&c.near_current);
            out.meta.seeds.extend(&c.meta.seeds);
        }
        Ok(out)
    }
}

/// Pair window-averaged `omega` with per-site time-averaged currents.
pub fn assemble_point_cloud(
    w_series: &MesoSeries,
    j_series: &MesoSeries,
    k: f64,
    delta0: f64,
    seeds: Vec<u64>,
) -> Result<SigmaPointCloud, FitError> {
    if w_series.len() != j_series.len() {
        return Err(FitError::MetadataMismatch(format!(
            "omega series has {} sites, current series {}",
            w_series.len(),
            j_series.len()
        )));
    }
    if w_series.t != j_series.t || w_series.delta != j_series.delta {
        return Err(FitError::MetadataMismatch(format!(
            "(t, delta) = ({}, {}) vs ({}, {})",
            w_series.t, w_series.delta, j_series.t, j_series.delta
        )));
    }
    let meta = CloudMeta {
        n: w_series.len(),
        k,
        t: w_series.t,
        epsilon: w_series.epsilon,
        delta: w_series.delta,
        seeds,
    };
    SigmaPointCloud::from_points(&w_series.mean, &j_series.mean, delta0, meta)
}

/// Median and robust scatter of the ratios in equal-width omega bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinnedCurve {
    pub edges: Vec<f64>,
    pub median: Vec<Option<f64>>,
    /// `1.4826 * MAD` of the points in each bin.
    pub scatter: Vec<Option<f64>>,
    pub counts: Vec<usize>,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn binned_medians(
    omega: &[f64],
    ratio: &[f64],
    lo: f64,
    hi: f64,
    bins: usize,
    min_count: usize,
) -> BinnedCurve {
    let edges: Vec<f64> = (0..=bins)
        .map(|b| lo + (hi - lo) * b as f64 / bins as f64)
        .collect();
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); bins];
    for (&w, &r) in omega.iter().zip(ratio) {
        if w < lo || w > hi {
            continue;
        }
        let b = (((w - lo) / (hi - lo)) * bins as f64).floor() as usize;
        members[b.min(bins - 1)].push(r);
    }
    let mut med = Vec::with_capacity(bins);
    let mut scatter = Vec::with_capacity(bins);
    let counts = members.iter().map(Vec::len).collect();
    for m in members.iter_mut() {
        if m.len() < min_count.max(1) {
            med.push(None);
            scatter.push(None);
            continue;
        }
        let c = median(m);
        let mut dev: Vec<f64> = m.iter().map(|v| (v - c).abs()).collect();
        med.push(Some(c));
        scatter.push(Some(1.4826 * median(&mut dev)));
    }
    BinnedCurve {
        edges,
        median: med,
        scatter,
        counts,
    }
}

impl BinnedCurve {
    /// Largest median difference over bins populated in both curves.
    pub fn distance(&self, other: &BinnedCurve) -> Option<f64> {
        self.median
            .iter()
            .zip(&other.median)
            .filter_map(|(a, b)| Some((a.as_ref()? - b.as_ref()?).abs()))
            .reduce(f64::max)
    }

    /// Median of the per-bin scatter values.
    pub fn typical_scatter(&self) -> Option<f64> {
        let mut s: Vec<f64> = self.scatter.iter().flatten().copied().collect();
        if s.is_empty() {
            None
        } else {
            Some(median(&mut s))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveTestConfig {
    pub bins: usize,
    pub min_count: usize,
    /// Bound on binned-median discrepancies.
    pub bias_tolerance: f64,
    /// Bound on the typical within-bin scatter.
    pub scatter_tolerance: f64,
}

impl Default for CurveTestConfig {
    fn default() -> Self {
        Self {
            bins: 64,
            min_count: 3,
            bias_tolerance: 0.1,
            scatter_tolerance: 0.25,
        }
    }
}

fn common_range(a: &SigmaPointCloud, b: &SigmaPointCloud) -> Result<(f64, f64), FitError> {
    let (alo, ahi) = a.omega_range().ok_or(FitError::InsufficientOverlap)?;
    let (blo, bhi) = b.omega_range().ok_or(FitError::InsufficientOverlap)?;
    let lo = alo.max(blo);
    let hi = ahi.min(bhi);
    if !(hi > lo) {
        return Err(FitError::InsufficientOverlap);
    }
    Ok((lo, hi))
}

fn curve_of(c: &SigmaPointCloud, lo: f64, hi: f64, cfg: &CurveTestConfig) -> BinnedCurve {
    binned_medians(&c.omega, &c.ratio, lo, hi, cfg.bins, cfg.min_count)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BurnInReport {
    pub distance: f64,
    pub scatter: f64,
    pub pass: bool,
}

impl BurnInReport {
    pub fn to_text(&self) -> String {
        format!(
            "test: burn-in\ndistance: {:.6}\nscatter: {:.6}\npass: {}\n",
            self.distance, self.scatter, self.pass
        )
    }
}

/// Whether the clouds at an earlier and a later time lie on one curve.
pub fn burn_in_test(
    early: &SigmaPointCloud,
    late: &SigmaPointCloud,
    cfg: &CurveTestConfig,
) -> Result<BurnInReport, FitError> {
    let (lo, hi) = common_range(early, late)?;
    let a = curve_of(early, lo, hi, cfg);
    let b = curve_of(late, lo, hi, cfg);
    let distance = a.distance(&b).ok_or(FitError::InsufficientOverlap)?;
    let scatter = a
        .typical_scatter()
        .unwrap_or(0.0)
        .max(b.typical_scatter().unwrap_or(0.0));
    Ok(BurnInReport {
        distance,
        scatter,
        pass: distance < cfg.bias_tolerance && scatter < cfg.scatter_tolerance,
    })
}

/// Cloud measured with window half-width `epsilon` and averaging time `delta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCloud {
    pub epsilon: f64,
    pub delta: f64,
    pub cloud: SigmaPointCloud,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub epsilon: f64,
    pub delta: f64,
    pub bias: f64,
    pub scatter: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub epsilon: f64,
    pub delta: f64,
    pub delta_sweep: Vec<SweepEntry>,
    pub epsilon_sweep: Vec<SweepEntry>,
}

fn distinct(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Choose `(epsilon, delta)` from a sweep of clouds at one lattice size.
///
/// `delta` is the largest averaging time whose curve (at the largest, least
/// noisy window) stays within the bias tolerance of the smallest-`delta`
/// curve. At that `delta`, `epsilon` is the largest window within the bias
/// tolerance of the smallest-window curve whose typical scatter is below the
/// scatter tolerance.
pub fn select_epsilon_delta(
    grid: &[GridCloud],
    cfg: &CurveTestConfig,
) -> Result<Selection, FitError> {
    let eps = distinct(grid.iter().map(|g| g.epsilon));
    let deltas = distinct(grid.iter().map(|g| g.delta));
    if eps.len() < 3 || deltas.len() < 2 {
        return Err(FitError::InvalidInput(
            "need at least three epsilon and two delta values".into(),
        ));
    }
    let find = |e: f64, d: f64| -> Result<&SigmaPointCloud, FitError> {
        grid.iter()
            .find(|g| g.epsilon == e && g.delta == d)
            .map(|g| &g.cloud)
            .ok_or_else(|| {
                FitError::InvalidInput(format!("grid lacks (epsilon, delta) = ({e}, {d})"))
            })
    };
    let compare = |a: &SigmaPointCloud, b: &SigmaPointCloud| -> Result<(f64, f64), FitError> {
        let (lo, hi) = common_range(a, b)?;
        let ca = curve_of(a, lo, hi, cfg);
        let cb = curve_of(b, lo, hi, cfg);
        let bias = ca.distance(&cb).ok_or(FitError::InsufficientOverlap)?;
        Ok((bias, ca.typical_scatter().unwrap_or(f64::INFINITY)))
    };

    let e_ref = *eps.last().unwrap();
    let d_min = deltas[0];
    let mut delta_sweep = Vec::new();
    let mut delta_star = d_min;
    for &d in &deltas {
        let (bias, scatter) = compare(find(e_ref, d)?, find(e_ref, d_min)?)?;
        delta_sweep.push(SweepEntry {
            epsilon: e_ref,
            delta: d,
            bias,
            scatter,
        });
        if bias <= cfg.bias_tolerance {
            delta_star = d;
        }
    }

    let e_min = eps[0];
    let mut epsilon_sweep = Vec::new();
    let mut eps_star = None;
    for &e in &eps {
        let (bias, scatter) = compare(find(e, delta_star)?, find(e_min, delta_star)?)?;
        epsilon_sweep.push(SweepEntry {
            epsilon: e,
            delta: delta_star,
            bias,
            scatter,
        });
        if bias <= cfg.bias_tolerance && scatter <= cfg.scatter_tolerance {
            eps_star = Some(e);
        }
    }
    let Some(epsilon) = eps_star else {
        return Err(FitError::Inconclusive {
            sweep: delta_sweep.into_iter().chain(epsilon_sweep).collect(),
        });
    };
    Ok(Selection {
        epsilon,
        delta: delta_star,
        delta_sweep,
        epsilon_sweep,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(k: f64) -> CloudMeta {
        CloudMeta {
            n: 100,
            k,
            ..Default::default()
        }
    }

    fn cloud_on(f: impl Fn(f64) -> f64, k: f64) -> SigmaPointCloud {
        let om: Vec<f64> = (0..400).map(|i| -2.0 + 4.0 * i as f64 / 399.0).collect();
        let cur: Vec<f64> = om.iter().map(|&w| f(w) * j_gibbs(w, k)).collect();
        SigmaPointCloud::from_points(&om, &cur, 0.1, meta(k)).unwrap()
    }

    #[test]
    fn near_zero_points_are_set_aside() {
        let c = SigmaPointCloud::from_points(&[0.01, -0.02], &[0.0, 0.0], 0.05, meta(2.0)).unwrap();
        assert!(c.is_empty());
        assert_eq!(c.near_omega.len(), 2);
    }

    #[test]
    fn gibbs_current_gives_unit_ratios() {
        let c = cloud_on(|_| 1.0, 2.0);
        assert!(c.ratio.iter().all(|r| (r - 1.0).abs() < 1e-12));
        let c = cloud_on(|w| 1.0 + w * w, 1.0);
        for (w, r) in c.omega.iter().zip(&c.ratio) {
            assert!((r - (1.0 + w * w)).abs() < 1e-12);
        }
    }

    #[test]
    fn burn_in_identical_and_shifted() {
        let cfg = CurveTestConfig::default();
        let a = cloud_on(|w| 1.0 + 0.3 * w * w, 2.0);
        let r = burn_in_test(&a, &a, &cfg).unwrap();
        assert_eq!(r.distance, 0.0);
        assert!(r.pass);
        let b = cloud_on(|w| 1.2 + 0.3 * w * w, 2.0);
        let r = burn_in_test(&a, &b, &cfg).unwrap();
        assert!((r.distance - 0.2).abs() < 1e-9);
        assert!(!r.pass);
    }

    #[test]
    fn identical_sweep_picks_largest() {
        let mut grid = Vec::new();
        for &e in &[0.01, 0.02, 0.04] {
            for &d in &[1e-10, 4e-10] {
                grid.push(GridCloud {
                    epsilon: e,
                    delta: d,
                    cloud: cloud_on(|w| 1.0 + 0.2 * w * w, 2.0),
                });
            }
        }
        let s = select_epsilon_delta(&grid, &CurveTestConfig::default()).unwrap();
        assert_eq!((s.epsilon, s.delta), (0.04, 4e-10));
    }
}
