use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use super::initial::InitialProfile;
use super::rates::{RateFamily, RateTable};
use super::sum_tree::SumTree;
use super::KmcError;

/// Diffusive time-scale exponent `alpha` shared by both rate families.
pub const TIME_SCALE_EXPONENT: i32 = 4;

/// Smallest lattice for which the width-5 update stencil touches distinct sites.
pub const MIN_SITES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    k: f64,
    n: usize,
    rate_family: RateFamily,
}

impl ModelParams {
    pub fn new(k: f64, n: usize, rate_family: RateFamily) -> Result<Self, KmcError> {
        if !(k.is_finite() && k > 0.0) {
            return Err(KmcError::InvalidParams(format!(
                "K must be positive, got {k}"
            )));
        }
        if n < MIN_SITES {
            return Err(KmcError::InvalidParams(format!(
                "lattice needs at least {MIN_SITES} sites, got {n}"
            )));
        }
        Ok(Self { k, n, rate_family })
    }

    pub fn metropolis(k: f64, n: usize) -> Result<Self, KmcError> {
        Self::new(k, n, RateFamily::Metropolis)
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rate_family(&self) -> RateFamily {
        self.rate_family
    }

    pub fn time_scale_exponent(&self) -> i32 {
        TIME_SCALE_EXPONENT
    }

    /// Amplitude exponent `beta` for heights (3 for Metropolis in the rough regime).
    pub fn height_amplitude_exponent(&self) -> i32 {
        self.rate_family.height_amplitude_exponent()
    }

    /// `N^alpha`: unscaled time units per unit of macroscopic time.
    pub fn time_scale(&self) -> f64 {
        (self.n as f64).powi(TIME_SCALE_EXPONENT)
    }

    /// `N^beta` for heights.
    pub fn height_scale(&self) -> f64 {
        (self.n as f64).powi(self.height_amplitude_exponent())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    /// A particle hops from site `i` to `i + 1`.
    Right,
    /// A particle hops from site `i + 1` to `i`.
    Left,
}

impl Direction {
    #[inline]
    fn sign(self) -> i64 {
        match self {
            Direction::Right => 1,
            Direction::Left => -1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpEvent {
    pub bond: usize,
    pub direction: Direction,
    /// Unscaled waiting time preceding the jump.
    pub waiting_time: f64,
}

impl JumpEvent {
    /// Storage indices whose third difference changed in this jump.
    pub fn touched_sites(&self, n: usize) -> [usize; 5] {
        let i = self.bond;
        [
            (i + n - 2) % n,
            (i + n - 1) % n,
            i,
            (i + 1) % n,
            (i + 2) % n,
        ]
    }
}

/// Height profile on the periodic lattice with cached finite differences and
/// bond rates.
///
/// Bond `i` joins storage indices `i` and `i + 1`. Its two rates live at
/// leaves `2i` (rightward hop) and `2i + 1` (leftward hop) of a sum tree.
#[derive(Clone, Debug)]
pub struct SurfaceState {
    params: ModelParams,
    heights: Vec<i64>,
    /// `z_i = h_{i+1} - h_i`
    slopes: Vec<i64>,
    /// `w_i = z_{i-1} - 2 z_i + z_{i+1}`
    third_diffs: Vec<i64>,
    /// `z_i - z_{i-1}`, the Arrhenius rate argument
    second_diffs: Vec<i64>,
    rates: SumTree,
    table: RateTable,
    sim_time: f64,
    jumps: u64,
}

fn slopes_of(h: &[i64]) -> Vec<i64> {
    let n = h.len();
    (0..n).map(|i| h[(i + 1) % n] - h[i]).collect()
}

fn third_diffs_of(z: &[i64]) -> Vec<i64> {
    let n = z.len();
    (0..n)
        .map(|i| z[(i + n - 1) % n] - 2 * z[i] + z[(i + 1) % n])
        .collect()
}

fn second_diffs_of(z: &[i64]) -> Vec<i64> {
    let n = z.len();
    (0..n).map(|i| z[i] - z[(i + n - 1) % n]).collect()
}

impl SurfaceState {
    pub fn from_heights(params: ModelParams, heights: Vec<i64>) -> Result<Self, KmcError> {
        if heights.len() != params.n {
            return Err(KmcError::ShapeMismatch {
                expected: params.n,
                found: heights.len(),
            });
        }
        let slopes = slopes_of(&heights);
        let third_diffs = third_diffs_of(&slopes);
        let second_diffs = second_diffs_of(&slopes);
        let table = RateTable::new(params.rate_family, params.k);
        let rates = Self::rates_from(&params, &table, &third_diffs, &second_diffs)?;
        Ok(Self {
            params,
            heights,
            slopes,
            third_diffs,
            second_diffs,
            rates: SumTree::new(&rates),
            table,
            sim_time: 0.0,
            jumps: 0,
        })
    }

    fn rates_from(
        params: &ModelParams,
        table: &RateTable,
        third_diffs: &[i64],
        second_diffs: &[i64],
    ) -> Result<Vec<f64>, KmcError> {
        let n = params.n;
        let mut rates = vec![0.0; 2 * n];
        for j in 0..n {
            let (right, left) = Self::bond_pair(params, table, third_diffs, second_diffs, j)?;
            rates[2 * j] = right;
            rates[2 * j + 1] = left;
        }
        Ok(rates)
    }

    #[inline]
    fn bond_pair(
        params: &ModelParams,
        table: &RateTable,
        third_diffs: &[i64],
        second_diffs: &[i64],
        bond: usize,
    ) -> Result<(f64, f64), KmcError> {
        match params.rate_family {
            RateFamily::Metropolis => table.pair(third_diffs[bond]),
            RateFamily::Arrhenius => {
                let right = table.pair(second_diffs[bond])?.0;
                let left = table.pair(second_diffs[(bond + 1) % params.n])?.0;
                Ok((right, left))
            }
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn heights(&self) -> &[i64] {
        &self.heights
    }

    pub fn slopes(&self) -> &[i64] {
        &self.slopes
    }

    pub fn third_diffs(&self) -> &[i64] {
        &self.third_diffs
    }

    pub fn second_diffs(&self) -> &[i64] {
        &self.second_diffs
    }

    /// Unscaled bond rates, `[r(0->1), r(1->0), r(1->2), r(2->1), ...]`.
    pub fn bond_rates(&self) -> &[f64] {
        self.rates.leaves()
    }

    pub fn total_rate(&self) -> f64 {
        self.rates.total()
    }

    /// Macroscopic time; the unscaled clock is `sim_time * N^4`.
    pub fn sim_time(&self) -> f64 {
        self.sim_time
    }

    pub fn set_sim_time(&mut self, t: f64) {
        self.sim_time = t;
    }

    pub fn jump_count(&self) -> u64 {
        self.jumps
    }

    pub fn total_mass(&self) -> i64 {
        self.heights.iter().sum()
    }

    /// `H(z) = sum_i z_i^2`.
    pub fn energy(&self) -> i64 {
        hamiltonian(&self.slopes)
    }

    /// Rate of the transition `(bond, direction)` from the current state.
    pub fn rate_of(&self, bond: usize, direction: Direction) -> f64 {
        match direction {
            Direction::Right => self.rates.get(2 * bond),
            Direction::Left => self.rates.get(2 * bond + 1),
        }
    }

    /// Recompute every cache from the heights and compare: integer caches
    /// exactly, rates and the total within relative `1e-9`.
    pub fn verify_caches(&self) -> Result<(), KmcError> {
        let slopes = slopes_of(&self.heights);
        if slopes != self.slopes {
            return Err(KmcError::CacheMismatch("slopes".into()));
        }
        let third = third_diffs_of(&slopes);
        if third != self.third_diffs {
            return Err(KmcError::CacheMismatch("third differences".into()));
        }
        let second = second_diffs_of(&slopes);
        if second != self.second_diffs {
            return Err(KmcError::CacheMismatch("second differences".into()));
        }
        let fresh = Self::rates_from(&self.params, &self.table, &third, &second)?;
        for (j, (a, b)) in fresh.iter().zip(self.rates.leaves()).enumerate() {
            if (a - b).abs() > 1e-9 * a.abs().max(b.abs()) {
                return Err(KmcError::CacheMismatch(format!("rate at leaf {j}")));
            }
        }
        let total: f64 = fresh.iter().sum();
        if (total - self.total_rate()).abs() > 1e-9 * total {
            return Err(KmcError::CacheMismatch("total rate".into()));
        }
        if self.third_diffs.iter().sum::<i64>() != 0 || self.slopes.iter().sum::<i64>() != 0 {
            return Err(KmcError::CacheMismatch("periodic sums".into()));
        }
        Ok(())
    }

    /// Apply the transition `h -> h^{i,i+1}` (Right) or `h -> h^{i+1,i}` (Left)
    /// and refresh the five affected bonds.
    pub fn apply_jump(&mut self, bond: usize, direction: Direction) -> Result<(), KmcError> {
        let n = self.params.n;
        if bond >= n {
            return Err(KmcError::InvalidParams(format!("bond {bond} out of range")));
        }
        let s = direction.sign();
        let at = |offset: isize| ((bond as isize + offset).rem_euclid(n as isize)) as usize;
        self.heights[bond] -= s;
        self.heights[at(1)] += s;

        self.slopes[at(-1)] -= s;
        self.slopes[bond] += 2 * s;
        self.slopes[at(1)] -= s;

        self.third_diffs[at(-2)] -= s;
        self.third_diffs[at(-1)] += 4 * s;
        self.third_diffs[bond] -= 6 * s;
        self.third_diffs[at(1)] += 4 * s;
        self.third_diffs[at(2)] -= s;

        self.second_diffs[at(-1)] -= s;
        self.second_diffs[bond] += 3 * s;
        self.second_diffs[at(1)] -= 3 * s;
        self.second_diffs[at(2)] += s;

        for offset in -2..=2 {
            let j = at(offset);
            let (right, left) = Self::bond_pair(
                &self.params,
                &self.table,
                &self.third_diffs,
                &self.second_diffs,
                j,
            )?;
            self.rates.set(2 * j, right);
            self.rates.set(2 * j + 1, left);
        }
        self.jumps += 1;
        Ok(())
    }

    #[inline]
    fn draw_waiting_time<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64, KmcError> {
        let total = self.rates.total();
        if !(total > 0.0) {
            return Err(KmcError::ZeroTotalRate);
        }
        let e: f64 = rng.sample(Exp1);
        Ok(e / total)
    }

    #[inline]
    fn select_and_apply<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
    ) -> Result<(usize, Direction), KmcError> {
        let u: f64 = rng.random();
        let leaf = self.rates.sample(u);
        let bond = leaf / 2;
        let direction = if leaf % 2 == 0 {
            Direction::Right
        } else {
            Direction::Left
        };
        self.apply_jump(bond, direction)?;
        Ok((bond, direction))
    }
}

/// `H(z) = sum_i z_i^2`.
pub fn hamiltonian(slopes: &[i64]) -> i64 {
    slopes.iter().map(|z| z * z).sum()
}

/// Draw `h_i = floor(N^beta h0(i/N)) + xi_i`, `xi_i ~ Bernoulli(frac(N^beta h0(i/N)))`.
pub fn sample_initial_state(
    profile: &InitialProfile,
    params: ModelParams,
    seed: u64,
) -> Result<SurfaceState, KmcError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_initial_state_with(profile, params, &mut rng)
}

pub fn sample_initial_state_with<R: Rng + ?Sized>(
    profile: &InitialProfile,
    params: ModelParams,
    rng: &mut R,
) -> Result<SurfaceState, KmcError> {
    if profile.n() != params.n {
        return Err(KmcError::ShapeMismatch {
            expected: params.n,
            found: profile.n(),
        });
    }
    let scale = params.height_scale();
    let mut heights = Vec::with_capacity(params.n);
    for (site, &h0) in profile.grid_values().iter().enumerate() {
        let target = scale * h0;
        let base = target.floor();
        if !base.is_finite() || base.abs() > 1e15 {
            return Err(KmcError::NonFiniteProfile { site });
        }
        let p = target - base;
        let xi = if p > 0.0 && rng.random::<f64>() < p {
            1
        } else {
            0
        };
        heights.push(base as i64 + xi);
    }
    SurfaceState::from_heights(params, heights)
}

/// Independent per-replicate stream: ChaCha8 keyed by the master seed with
/// the replicate index as stream id.
pub fn replicate_rng(master_seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replicate);
    rng
}

/// One exact KMC step: exponential waiting time, rate-proportional move.
pub fn kmc_step<R: Rng + ?Sized>(
    state: &mut SurfaceState,
    rng: &mut R,
) -> Result<JumpEvent, KmcError> {
    let waiting_time = state.draw_waiting_time(rng)?;
    let (bond, direction) = state.select_and_apply(rng)?;
    state.sim_time += waiting_time / state.params.time_scale();
    Ok(JumpEvent {
        bond,
        direction,
        waiting_time,
    })
}

/// Streaming consumer of a trajectory over a fixed macroscopic time window.
///
/// The driver calls `begin` when the clock reaches the window start, `jump`
/// after every jump strictly inside the window (the state is already
/// updated and `sim_time` is the jump time), and `end` at the window end.
pub trait Recorder {
    fn window(&self) -> (f64, f64);
    fn begin(&mut self, state: &SurfaceState);
    fn jump(&mut self, state: &SurfaceState, event: &JumpEvent);
    fn end(&mut self, state: &SurfaceState);
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunStats {
    pub jumps: u64,
    /// `integral of R(s) ds` over the unscaled clock; its expectation equals
    /// the expected number of jumps.
    pub rate_integral: f64,
}

/// Advance `state` to macroscopic time `t_end`.
///
/// The path is a right-continuous step function; the returned state is the
/// value of the path at `t_end`. A pending waiting time that would cross a
/// boundary is discarded, which is exact for a Markov jump process.
pub fn run_until<R: Rng + ?Sized>(
    state: &mut SurfaceState,
    t_end: f64,
    rng: &mut R,
    recorders: &mut [&mut dyn Recorder],
) -> Result<RunStats, KmcError> {
    let t0 = state.sim_time;
    if !(t_end >= t0) {
        return Err(KmcError::Config(format!(
            "end time {t_end} precedes current time {t0}"
        )));
    }
    for rec in recorders.iter() {
        let (a, b) = rec.window();
        if !(a >= t0 && b <= t_end && a <= b) {
            return Err(KmcError::Config(format!(
                "recorder window [{a}, {b}] outside [{t0}, {t_end}]"
            )));
        }
    }
    let mut boundaries: Vec<f64> = recorders
        .iter()
        .flat_map(|r| {
            let (a, b) = r.window();
            [a, b]
        })
        .collect();
    boundaries.push(t_end);
    boundaries.sort_by(|a, b| a.partial_cmp(b).expect("finite window bounds"));
    boundaries.dedup();

    let mut active = vec![false; recorders.len()];
    let mut stats = RunStats::default();
    let scale = state.params.time_scale();

    let open_close =
        |state: &SurfaceState, recorders: &mut [&mut dyn Recorder], active: &mut [bool], b: f64| {
            for (idx, rec) in recorders.iter_mut().enumerate() {
                let (_, hi) = rec.window();
                if active[idx] && hi == b {
                    rec.end(state);
                    active[idx] = false;
                }
            }
            for (idx, rec) in recorders.iter_mut().enumerate() {
                let (lo, hi) = rec.window();
                if !active[idx] && lo == b && state.sim_time <= hi {
                    rec.begin(state);
                    active[idx] = true;
                    if hi == b {
                        rec.end(state);
                        active[idx] = false;
                    }
                }
            }
        };

    for &b in &boundaries {
        if b > state.sim_time {
            loop {
                let total = state.rates.total();
                let dt = state.draw_waiting_time(rng)?;
                let next = state.sim_time + dt / scale;
                if next > b {
                    stats.rate_integral += total * (b - state.sim_time) * scale;
                    state.sim_time = b;
                    break;
                }
                stats.rate_integral += total * dt;
                let (bond, direction) = state.select_and_apply(rng)?;
                state.sim_time = next;
                stats.jumps += 1;
                let event = JumpEvent {
                    bond,
                    direction,
                    waiting_time: dt,
                };
                for (idx, rec) in recorders.iter_mut().enumerate() {
                    if active[idx] {
                        rec.jump(state, &event);
                    }
                }
            }
        }
        open_close(state, recorders, &mut active, b);
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmc::initial::ProfileShape;

    fn flat(k: f64, n: usize) -> SurfaceState {
        SurfaceState::from_heights(ModelParams::metropolis(k, n).unwrap(), vec![0; n]).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::metropolis(0.0, 16).is_err());
        assert!(ModelParams::metropolis(1.0, 7).is_err());
        let p = ModelParams::metropolis(1.0, 10).unwrap();
        assert_eq!(p.time_scale(), 1e4);
        assert_eq!(p.height_amplitude_exponent(), 3);
        assert_eq!(p.time_scale_exponent(), 4);
    }

    #[test]
    fn zero_profile_gives_flat_state() {
        let p = ModelParams::metropolis(2.0, 16).unwrap();
        let prof = InitialProfile::from_shape(ProfileShape::Flat, 16).unwrap();
        let s = sample_initial_state(&prof, p, 9).unwrap();
        assert!(s.heights().iter().all(|&h| h == 0));
        assert!(s.bond_rates().iter().all(|&r| r == (-6.0f64).exp()));
        s.verify_caches().unwrap();
    }

    #[test]
    fn seeded_sampling_is_deterministic() {
        let p = ModelParams::metropolis(1.0, 64).unwrap();
        let prof = InitialProfile::from_shape(ProfileShape::Sin { amplitude: 0.0075 }, 64).unwrap();
        let a = sample_initial_state(&prof, p, 42).unwrap();
        let b = sample_initial_state(&prof, p, 42).unwrap();
        assert_eq!(a.heights(), b.heights());
    }

    #[test]
    fn single_jump_changes_five_third_differences() {
        let p = ModelParams::metropolis(1.0, 12).unwrap();
        let mut s =
            SurfaceState::from_heights(p, (0..12).map(|i| (i * i % 7) as i64).collect()).unwrap();
        let before = s.third_diffs().to_vec();
        s.apply_jump(0, Direction::Right).unwrap();
        s.verify_caches().unwrap();
        let delta: Vec<i64> = s
            .third_diffs()
            .iter()
            .zip(&before)
            .map(|(a, b)| a - b)
            .collect();
        let mut expected = vec![0; 12];
        expected[10] = -1;
        expected[11] = 4;
        expected[0] = -6;
        expected[1] = 4;
        expected[2] = -1;
        assert_eq!(delta, expected);
    }

    #[test]
    fn left_jump_undoes_right_jump() {
        let mut s = flat(1.0, 10);
        let rates = s.bond_rates().to_vec();
        s.apply_jump(4, Direction::Right).unwrap();
        s.apply_jump(4, Direction::Left).unwrap();
        assert!(s.heights().iter().all(|&h| h == 0));
        assert_eq!(s.bond_rates(), &rates[..]);
    }

    #[test]
    fn zero_length_run_only_sees_initial_value() {
        struct Count(usize, usize, usize);
        impl Recorder for Count {
            fn window(&self) -> (f64, f64) {
                (0.0, 0.0)
            }
            fn begin(&mut self, _: &SurfaceState) {
                self.0 += 1;
            }
            fn jump(&mut self, _: &SurfaceState, _: &JumpEvent) {
                self.1 += 1;
            }
            fn end(&mut self, _: &SurfaceState) {
                self.2 += 1;
            }
        }
        let mut s = flat(1.0, 16);
        let mut rng = replicate_rng(1, 0);
        let mut c = Count(0, 0, 0);
        let stats = run_until(&mut s, 0.0, &mut rng, &mut [&mut c]).unwrap();
        assert_eq!(stats.jumps, 0);
        assert_eq!((c.0, c.1, c.2), (1, 0, 1));
    }

    #[test]
    fn window_outside_run_is_rejected() {
        struct W;
        impl Recorder for W {
            fn window(&self) -> (f64, f64) {
                (0.0, 2.0)
            }
            fn begin(&mut self, _: &SurfaceState) {}
            fn jump(&mut self, _: &SurfaceState, _: &JumpEvent) {}
            fn end(&mut self, _: &SurfaceState) {}
        }
        let mut s = flat(1.0, 16);
        let mut rng = replicate_rng(1, 0);
        assert!(matches!(
            run_until(&mut s, 1.0, &mut rng, &mut [&mut W]),
            Err(KmcError::Config(_))
        ));
    }

    #[test]
    fn arrhenius_caches_stay_consistent() {
        let p = ModelParams::new(0.5, 16, RateFamily::Arrhenius).unwrap();
        let mut s = SurfaceState::from_heights(p, vec![0; 16]).unwrap();
        let mut rng = replicate_rng(3, 1);
        for _ in 0..5000 {
            kmc_step(&mut s, &mut rng).unwrap();
        }
        s.verify_caches().unwrap();
        assert_eq!(s.total_mass(), 0);
    }

    #[test]
    fn streams_differ_between_replicates() {
        let a: u64 = replicate_rng(5, 0).random();
        let b: u64 = replicate_rng(5, 1).random();
        let c: u64 = replicate_rng(5, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
