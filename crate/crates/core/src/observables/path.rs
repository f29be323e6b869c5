use super::ObservableError;

/// Right-continuous step function on a closed window.
///
/// `values[0]` holds on `[start, times[0])`, `values[k]` on
/// `[times[k-1], times[k])`, and the last value up to the window end.
#[derive(Clone, Debug, PartialEq)]
pub struct StepPath {
    times: Vec<f64>,
    values: Vec<f64>,
    window: (f64, f64),
}

impl StepPath {
    pub fn new(window: (f64, f64), initial: f64) -> Self {
        Self {
            times: Vec::new(),
            values: vec![initial],
            window,
        }
    }

    pub fn from_parts(
        window: (f64, f64),
        times: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self, ObservableError> {
        if values.len() != times.len() + 1 {
            return Err(ObservableError::InvalidPath(format!(
                "{} values for {} jump times",
                values.len(),
                times.len()
            )));
        }
        let (a, b) = window;
        if !(a <= b) {
            return Err(ObservableError::InvalidPath("reversed window".into()));
        }
        for (k, &t) in times.iter().enumerate() {
            let increasing = if k == 0 { t >= a } else { t > times[k - 1] };
            if !increasing || t > b {
                return Err(ObservableError::InvalidPath(format!(
                    "jump time {t} not increasing inside [{a}, {b}]"
                )));
            }
        }
        Ok(Self {
            times,
            values,
            window,
        })
    }

    /// Record a jump at time `t` after which the path takes `value`.
    pub fn push(&mut self, t: f64, value: f64) {
        debug_assert!(t >= self.window.0 && t <= self.window.1);
        self.times.push(t);
        self.values.push(value);
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    /// Value of the path at time `t` (right-continuous).
    pub fn value_at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        self.values[k]
    }

    /// Exact integral of `f(path)` over the window.
    pub fn integral<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let (a, b) = self.window;
        let mut acc = 0.0;
        let mut left = a;
        for (k, &v) in self.values.iter().enumerate() {
            let right = self.times.get(k).copied().unwrap_or(b);
            acc += f(v) * (right - left);
            left = right;
        }
        acc
    }
}

/// `(1/Delta) * integral of f(path(s)) ds` over the path window, computed exactly.
pub fn path_time_average<F: Fn(f64) -> f64>(path: &StepPath, f: F) -> Result<f64, ObservableError> {
    let (a, b) = path.window;
    let delta = b - a;
    if !(delta > 0.0) {
        return Err(ObservableError::EmptyWindow);
    }
    Ok(path.integral(f) / delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_path() {
        let p = StepPath::new((1.0, 3.5), 7.0);
        assert_eq!(path_time_average(&p, |v| v).unwrap(), 7.0);
    }

    #[test]
    fn worked_example() {
        let p = StepPath::from_parts((0.0, 0.4), vec![0.1, 0.3], vec![2.0, 5.0, 1.0]).unwrap();
        let avg = path_time_average(&p, |v| v).unwrap();
        assert!((avg - 3.25).abs() < 1e-14);
        assert_eq!(p.value_at(0.1), 5.0);
        assert_eq!(p.value_at(0.05), 2.0);
    }

    #[test]
    fn empty_window_rejected() {
        let p = StepPath::new((1.0, 1.0), 2.0);
        assert!(matches!(
            path_time_average(&p, |v| v),
            Err(ObservableError::EmptyWindow)
        ));
    }

    #[test]
    fn malformed_paths_rejected() {
        assert!(StepPath::from_parts((0.0, 1.0), vec![0.5], vec![1.0]).is_err());
        assert!(StepPath::from_parts((0.0, 1.0), vec![0.5, 0.4], vec![1.0, 2.0, 3.0]).is_err());
        assert!(StepPath::from_parts((0.0, 1.0), vec![1.5], vec![1.0, 2.0]).is_err());
    }
}
