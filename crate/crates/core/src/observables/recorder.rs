use serde::{Deserialize, Serialize};

use super::path::StepPath;
use crate::kmc::{JumpEvent, Recorder, SurfaceState};

/// Per-site functions of the lattice state that recorders can integrate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SiteObservable {
    /// `w_i`
    W,
    /// `w_i^2`
    W2,
    /// `J(w_i)`
    J,
    /// `exp(2K w_i)`
    FPlus,
    /// `exp(-2K w_i)`
    FMinus,
    /// `h_i`
    Height,
}

impl SiteObservable {
    pub const ALL: [SiteObservable; 6] = [
        SiteObservable::W,
        SiteObservable::W2,
        SiteObservable::J,
        SiteObservable::FPlus,
        SiteObservable::FMinus,
        SiteObservable::Height,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SiteObservable::W => "w",
            SiteObservable::W2 => "w2",
            SiteObservable::J => "j",
            SiteObservable::FPlus => "f_plus",
            SiteObservable::FMinus => "f_minus",
            SiteObservable::Height => "h",
        }
    }

    /// Value as a function of an integer third difference (not for heights).
    pub fn of_w(self, w: i64, k: f64) -> f64 {
        let wf = w as f64;
        match self {
            SiteObservable::W => wf,
            SiteObservable::W2 => wf * wf,
            SiteObservable::J => 2.0 * (-3.0 * k).exp() * (k * wf).sinh(),
            SiteObservable::FPlus => (2.0 * k * wf).exp(),
            SiteObservable::FMinus => (-2.0 * k * wf).exp(),
            SiteObservable::Height => f64::NAN,
        }
    }
}

const TABLE_HALF: i64 = 64;

struct Evaluator {
    observable: SiteObservable,
    k: f64,
    table: Vec<f64>,
}

impl Evaluator {
    fn new(observable: SiteObservable, k: f64) -> Self {
        let table = if observable == SiteObservable::Height {
            Vec::new()
        } else {
            (-TABLE_HALF..=TABLE_HALF)
                .map(|w| observable.of_w(w, k))
                .collect()
        };
        Self {
            observable,
            k,
            table,
        }
    }

    #[inline]
    fn eval(&self, state: &SurfaceState, site: usize) -> f64 {
        if self.observable == SiteObservable::Height {
            return state.heights()[site] as f64;
        }
        let w = state.third_diffs()[site];
        if w.abs() <= TABLE_HALF {
            self.table[(w + TABLE_HALF) as usize]
        } else {
            self.observable.of_w(w, self.k)
        }
    }
}

/// Per-site time averages `(1/Delta) integral over [t, t + Delta]` of several
/// observables, or instantaneous values when `Delta = 0`.
///
/// Sites are integrated lazily: a jump only touches the five sites whose
/// third difference changed, so the cost per jump is independent of `N`.
pub struct SiteAverager {
    window: (f64, f64),
    evaluators: Vec<Evaluator>,
    current: Vec<Vec<f64>>,
    accum: Vec<Vec<f64>>,
    last: Vec<f64>,
    result: Option<Vec<Vec<f64>>>,
}

impl SiteAverager {
    pub fn new(window: (f64, f64), n: usize, k: f64, observables: &[SiteObservable]) -> Self {
        let m = observables.len();
        Self {
            window,
            evaluators: observables.iter().map(|&o| Evaluator::new(o, k)).collect(),
            current: vec![vec![0.0; n]; m],
            accum: vec![vec![0.0; n]; m],
            last: vec![window.0; n],
            result: None,
        }
    }

    pub fn observables(&self) -> Vec<SiteObservable> {
        self.evaluators.iter().map(|e| e.observable).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.result.is_some()
    }

    /// Averages indexed `[observable][site]`, available after the window closed.
    pub fn result(&self) -> Option<&[Vec<f64>]> {
        self.result.as_deref()
    }

    pub fn into_result(self) -> Option<Vec<Vec<f64>>> {
        self.result
    }
}

impl Recorder for SiteAverager {
    fn window(&self) -> (f64, f64) {
        self.window
    }

    fn begin(&mut self, state: &SurfaceState) {
        let n = state.n();
        for (o, ev) in self.evaluators.iter().enumerate() {
            for s in 0..n {
                self.current[o][s] = ev.eval(state, s);
            }
            self.accum[o].iter_mut().for_each(|a| *a = 0.0);
        }
        self.last.iter_mut().for_each(|t| *t = self.window.0);
    }

    fn jump(&mut self, state: &SurfaceState, event: &JumpEvent) {
        let t = state.sim_time();
        for s in event.touched_sites(state.n()) {
            let dt = t - self.last[s];
            for (o, ev) in self.evaluators.iter().enumerate() {
                self.accum[o][s] += self.current[o][s] * dt;
                self.current[o][s] = ev.eval(state, s);
            }
            self.last[s] = t;
        }
    }

    fn end(&mut self, _state: &SurfaceState) {
        let (a, b) = self.window;
        let delta = b - a;
        if delta > 0.0 {
            let mut out = self.accum.clone();
            for (o, row) in out.iter_mut().enumerate() {
                for (s, v) in row.iter_mut().enumerate() {
                    *v = (*v + self.current[o][s] * (b - self.last[s])) / delta;
                }
            }
            self.result = Some(out);
        } else {
            self.result = Some(self.current.clone());
        }
    }
}

/// Records the full step path of a scalar function of the state.
///
/// Intended for small debug runs: memory grows with the number of jumps.
pub struct PathRecorder<F> {
    f: F,
    path: Option<StepPath>,
    window: (f64, f64),
}

impl<F: Fn(&SurfaceState) -> f64> PathRecorder<F> {
    pub fn new(window: (f64, f64), f: F) -> Self {
        Self {
            f,
            path: None,
            window,
        }
    }

    pub fn path(&self) -> Option<&StepPath> {
        self.path.as_ref()
    }

    pub fn into_path(self) -> Option<StepPath> {
        self.path
    }
}

impl<F: Fn(&SurfaceState) -> f64> Recorder for PathRecorder<F> {
    fn window(&self) -> (f64, f64) {
        self.window
    }

    fn begin(&mut self, state: &SurfaceState) {
        self.path = Some(StepPath::new(self.window, (self.f)(state)));
    }

    fn jump(&mut self, state: &SurfaceState, _event: &JumpEvent) {
        let v = (self.f)(state);
        if let Some(p) = self.path.as_mut() {
            p.push(state.sim_time(), v);
        }
    }

    fn end(&mut self, _state: &SurfaceState) {}
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmc::{replicate_rng, run_until, ModelParams, SurfaceState};
    use crate::observables::path_time_average;

    #[test]
    fn lazy_site_averages_match_full_paths() {
        let n = 16;
        let p = ModelParams::metropolis(0.6, n).unwrap();
        let h: Vec<i64> = (0..n as i64).map(|i| (i * i * 3) % 11).collect();
        let mut state = SurfaceState::from_heights(p, h).unwrap();
        let t_scale = p.time_scale();
        let window = (2.0 / t_scale, 40.0 / t_scale);
        let obs = SiteObservable::ALL;
        let mut avg = SiteAverager::new(window, n, 0.6, &obs);
        let mut paths: Vec<_> = (0..n)
            .map(|s| PathRecorder::new(window, move |st: &SurfaceState| st.third_diffs()[s] as f64))
            .collect();
        let mut hpaths: Vec<_> = (0..n)
            .map(|s| PathRecorder::new(window, move |st: &SurfaceState| st.heights()[s] as f64))
            .collect();
        {
            let mut recs: Vec<&mut dyn Recorder> = vec![&mut avg];
            for r in paths.iter_mut() {
                recs.push(r);
            }
            for r in hpaths.iter_mut() {
                recs.push(r);
            }
            let mut rng = replicate_rng(11, 2);
            run_until(&mut state, 50.0 / t_scale, &mut rng, &mut recs).unwrap();
        }
        let res = avg.result().unwrap();
        for s in 0..n {
            let path = paths[s].path().unwrap();
            for (o, ob) in obs.iter().enumerate() {
                let expected = if *ob == SiteObservable::Height {
                    path_time_average(hpaths[s].path().unwrap(), |v| v).unwrap()
                } else {
                    path_time_average(path, |w| ob.of_w(w as i64, 0.6)).unwrap()
                };
                assert!(
                    (res[o][s] - expected).abs() <= 1e-9 * expected.abs().max(1.0),
                    "site {s} obs {ob:?}: {} vs {expected}",
                    res[o][s]
                );
            }
        }
    }

    #[test]
    fn zero_width_window_gives_instantaneous_values() {
        let n = 8;
        let p = ModelParams::metropolis(1.0, n).unwrap();
        let mut state = SurfaceState::from_heights(p, vec![0, 1, 0, 2, 0, 0, 1, 0]).unwrap();
        let mut avg = SiteAverager::new((0.0, 0.0), n, 1.0, &[SiteObservable::W]);
        let mut rng = replicate_rng(0, 0);
        run_until(&mut state, 0.0, &mut rng, &mut [&mut avg]).unwrap();
        let w: Vec<f64> = state.third_diffs().iter().map(|&w| w as f64).collect();
        assert_eq!(avg.result().unwrap()[0], w);
    }
}
