//! Ground-truth sparse trajectories and noisy measurements.
//!
//! Three generators are provided: a Gaussian random walk with support additions and
//! removals, its no-removal special case, and a deterministic bounded-power model whose
//! coefficients ramp up, hold a plateau and ramp back down before removal.

use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::sensing::SensingMatrix;
use crate::support::Support;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomWalkParams {
    pub m: usize,
    pub s0: usize,
    /// Additions per event.
    pub sa: usize,
    /// Removals per event.
    pub sr: usize,
    /// Spacing between addition events.
    pub d: usize,
    pub smax: usize,
    pub sigma_sys0: f64,
    pub sigma_sys: f64,
    pub horizon: usize,
}

impl RandomWalkParams {
    /// Number of addition events in the no-removal model, `⌈(Smax − S0)/Sa⌉`.
    pub fn addition_events(&self) -> usize {
        if self.smax <= self.s0 || self.sa == 0 {
            0
        } else {
            (self.smax - self.s0).div_ceil(self.sa)
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.m == 0 || self.horizon == 0 {
            return bad("m and horizon must be positive".into());
        }
        if self.s0 > self.m || self.smax > self.m {
            return bad(format!("support sizes ({}, {}) exceed m = {}", self.s0, self.smax, self.m));
        }
        if self.smax < self.s0 {
            return bad(format!("Smax = {} below S0 = {}", self.smax, self.s0));
        }
        if (self.sa > 0 || self.sr > 0) && self.d < 2 {
            return bad(format!("event spacing d = {} must be at least 2", self.d));
        }
        if self.sigma_sys < 0.0 || self.sigma_sys0 < 0.0 {
            return bad("standard deviations must be non-negative".into());
        }
        Ok(())
    }
}

/// Signal values and supports for `t = 0..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTrajectory {
    pub x: Vec<DVector<f64>>,
    pub supports: Vec<Support>,
    pub addition_times: Vec<usize>,
    pub removal_times: Vec<usize>,
}

impl SparseTrajectory {
    pub fn horizon(&self) -> usize {
        self.x.len() - 1
    }

    pub fn m(&self) -> usize {
        self.x[0].len()
    }

    pub fn energy(&self, t: usize) -> f64 {
        self.x[t].norm_squared()
    }

    /// `x_t − x_{t−1}` (zero at t = 0).
    pub fn increment(&self, t: usize) -> DVector<f64> {
        if t == 0 {
            DVector::zeros(self.m())
        } else {
            &self.x[t] - &self.x[t - 1]
        }
    }

    /// Writes one `t,index,value` row per support entry.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "index", "value"]).map_err(csv_err)?;
        for (t, (x, s)) in self.x.iter().zip(&self.supports).enumerate() {
            for i in s.iter() {
                w.write_record([t.to_string(), i.to_string(), format!("{:.10e}", x[i])])
                    .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Event times as a small JSON object.
    pub fn events_json(&self) -> String {
        serde_json::json!({
            "horizon": self.horizon(),
            "m": self.m(),
            "addition_times": self.addition_times,
            "removal_times": self.removal_times,
        })
        .to_string()
    }

    /// Writes `<stem>.csv` and `<stem>.events.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join(format!("{stem}.csv")))?)?;
        std::fs::write(dir.join(format!("{stem}.events.json")), self.events_json())?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// `count` indices drawn uniformly without replacement from the complement of `support`.
fn draw_new_indices<R: Rng + ?Sized>(rng: &mut R, m: usize, support: &Support, count: usize) -> Result<Vec<usize>> {
    let pool: Vec<usize> = (0..m).filter(|&i| !support.contains(i)).collect();
    if pool.len() < count {
        return Err(Error::InvalidParameter(format!(
            "cannot add {count} indices, only {} outside the support",
            pool.len()
        )));
    }
    Ok(index::sample(rng, pool.len(), count).into_iter().map(|k| pool[k]).collect())
}

/// Gaussian random walk with support additions at `t_j = 1 + j·d` (j ≥ 1) and removals of
/// the `Sr` smallest-magnitude coefficients at `t_{j+1} − 1`.
pub fn simulate_random_walk(p: &RandomWalkParams, seed: u64) -> Result<SparseTrajectory> {
    simulate_random_walk_with(p, &mut rng::seeded(seed))
}

pub fn simulate_random_walk_with<R: Rng + ?Sized>(p: &RandomWalkParams, rng: &mut R) -> Result<SparseTrajectory> {
    p.validate()?;
    let m = p.m;
    let init = Normal::new(0.0, p.sigma_sys0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let walk = Normal::new(0.0, p.sigma_sys).map_err(|e| Error::InvalidParameter(e.to_string()))?;

    let mut support = Support::from_indices(draw_new_indices(rng, m, &Support::empty(), p.s0)?);
    let mut x = DVector::zeros(m);
    for i in support.iter() {
        x[i] = init.sample(rng);
    }
    let mut xs = vec![x.clone()];
    let mut supports = vec![support.clone()];
    let mut addition_times = Vec::new();
    let mut removal_times = Vec::new();

    for t in 1..=p.horizon {
        let is_addition_slot = p.sa > 0 && t > 1 && (t - 1) % p.d == 0;
        let is_removal_slot = p.sr > 0 && t >= 2 * p.d && t % p.d == 0;
        if is_removal_slot {
            if p.sr > support.len() {
                return Err(Error::InvalidParameter(format!(
                    "removal of {} coefficients at t = {t} underflows support of size {}",
                    p.sr,
                    support.len()
                )));
            }
            let mut by_magnitude: Vec<usize> = support.iter().collect();
            by_magnitude.sort_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs()).then(a.cmp(&b)));
            for &i in by_magnitude.iter().take(p.sr) {
                support.remove(i);
                x[i] = 0.0;
            }
            removal_times.push(t);
        }
        if is_addition_slot {
            let room = p.smax.saturating_sub(support.len()).min(p.sa);
            if room > 0 {
                for i in draw_new_indices(rng, m, &support, room)? {
                    support.insert(i);
                    x[i] = 0.0;
                }
                addition_times.push(t);
            }
        }
        for i in support.iter() {
            x[i] += walk.sample(rng);
        }
        xs.push(x.clone());
        supports.push(support.clone());
    }
    Ok(SparseTrajectory {
        x: xs,
        supports,
        addition_times,
        removal_times,
    })
}

/// The random walk with `Sr = 0`: exactly `⌈(Smax − S0)/Sa⌉` addition events at
/// `t_j = 1 + j·d`, `j = 1..=K`; the last one is truncated so that |N_t| never exceeds Smax.
pub fn simulate_no_removals(p: &RandomWalkParams, seed: u64) -> Result<SparseTrajectory> {
    simulate_no_removals_with(p, &mut rng::seeded(seed))
}

pub fn simulate_no_removals_with<R: Rng + ?Sized>(p: &RandomWalkParams, rng: &mut R) -> Result<SparseTrajectory> {
    let params = RandomWalkParams { sr: 0, ..p.clone() };
    if params.sa == 0 && params.smax > params.s0 {
        return Err(Error::InvalidParameter("Smax > S0 requires Sa > 0".into()));
    }
    simulate_random_walk_with(&params, rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundedPowerParams {
    pub m: usize,
    pub s0: usize,
    /// Additions per event; the same number of coefficients is removed per cycle.
    pub sa: usize,
    /// Ramp-up increment per step (a_i).
    pub rate: f64,
    /// Plateau magnitude (M).
    pub plateau: f64,
    /// Spacing between addition events.
    pub d: usize,
    /// Number of steps a coefficient takes to fall from the plateau to zero.
    pub ramp_down: usize,
    /// Time of the first addition event.
    pub first_addition: usize,
    pub horizon: usize,
}

impl BoundedPowerParams {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.m == 0 || self.horizon == 0 {
            return bad("m and horizon must be positive".into());
        }
        if self.s0 + self.sa > self.m {
            return bad(format!("S0 + Sa = {} exceeds m = {}", self.s0 + self.sa, self.m));
        }
        if !(self.rate > 0.0) || !(self.plateau > 0.0) {
            return bad("ramp rate and plateau must be positive".into());
        }
        if self.sa > 0 {
            if self.ramp_down == 0 || self.ramp_down >= self.d {
                return bad(format!(
                    "ramp-down length {} must lie in 1..{} (the event spacing)",
                    self.ramp_down, self.d
                ));
            }
            if self.first_addition == 0 {
                return bad("first addition time must be at least 1".into());
            }
        }
        Ok(())
    }

    /// Whether `t` is an addition time.
    pub fn is_addition(&self, t: usize) -> bool {
        self.sa > 0 && t >= self.first_addition && (t - self.first_addition).is_multiple_of(self.d)
    }

    /// Whether a ramp-down starts at `t`: `d − r` steps after each addition.
    pub fn is_decrease_start(&self, t: usize) -> bool {
        let offset = self.first_addition + self.d - self.ramp_down;
        self.sa > 0 && t >= offset && (t - offset).is_multiple_of(self.d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Rising,
    Plateau,
    Falling,
}

/// Deterministic-shape model with roughly constant power: new coefficients enter at
/// magnitude `rate` and grow by `rate` per step up to `plateau`; `Sa` plateau coefficients
/// start falling `d − r` steps after each addition, losing `plateau / r` per step, and are
/// removed when they reach zero. Signs and indices are random.
pub fn simulate_bounded_power(p: &BoundedPowerParams, seed: u64) -> Result<SparseTrajectory> {
    simulate_bounded_power_with(p, &mut rng::seeded(seed))
}

pub fn simulate_bounded_power_with<R: Rng + ?Sized>(
    p: &BoundedPowerParams,
    rng: &mut R,
) -> Result<SparseTrajectory> {
    p.validate()?;
    let m = p.m;
    let mut support = Support::from_indices(draw_new_indices(rng, m, &Support::empty(), p.s0)?);
    let mut sign = vec![0.0f64; m];
    let mut magnitude = vec![0.0f64; m];
    let mut phase = vec![Phase::Plateau; m];
    for i in support.iter() {
        sign[i] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        magnitude[i] = p.plateau;
    }
    let signal = |support: &Support, sign: &[f64], magnitude: &[f64]| {
        let mut x = DVector::zeros(m);
        for i in support.iter() {
            x[i] = sign[i] * magnitude[i];
        }
        x
    };
    let step_down = p.plateau / p.ramp_down.max(1) as f64;

    let mut xs = vec![signal(&support, &sign, &magnitude)];
    let mut supports = vec![support.clone()];
    let mut addition_times = Vec::new();
    let mut removal_times = Vec::new();

    for t in 1..=p.horizon {
        let mut removed = Vec::new();
        for i in support.iter() {
            match phase[i] {
                Phase::Rising => {
                    magnitude[i] = (magnitude[i] + p.rate).min(p.plateau);
                    if magnitude[i] >= p.plateau {
                        phase[i] = Phase::Plateau;
                    }
                }
                Phase::Falling => {
                    magnitude[i] -= step_down;
                    if magnitude[i] <= 1e-12 * p.plateau {
                        magnitude[i] = 0.0;
                        removed.push(i);
                    }
                }
                Phase::Plateau => {}
            }
        }
        if !removed.is_empty() {
            for i in removed {
                support.remove(i);
                sign[i] = 0.0;
                phase[i] = Phase::Plateau;
            }
            removal_times.push(t);
        }
        if p.is_decrease_start(t) {
            let steady: Vec<usize> = support.iter().filter(|&i| phase[i] == Phase::Plateau).collect();
            if steady.len() < p.sa {
                return Err(Error::InvalidParameter(format!(
                    "only {} plateau coefficients available to remove at t = {t}",
                    steady.len()
                )));
            }
            for k in index::sample(rng, steady.len(), p.sa) {
                let i = steady[k];
                phase[i] = Phase::Falling;
                magnitude[i] -= step_down;
                if magnitude[i] <= 1e-12 * p.plateau {
                    // r = 1: the coefficient vanishes in the same step.
                    support.remove(i);
                    magnitude[i] = 0.0;
                    if removal_times.last() != Some(&t) {
                        removal_times.push(t);
                    }
                }
            }
        }
        if p.is_addition(t) {
            for i in draw_new_indices(rng, m, &support, p.sa)? {
                support.insert(i);
                sign[i] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                magnitude[i] = p.rate.min(p.plateau);
                phase[i] = if magnitude[i] >= p.plateau { Phase::Plateau } else { Phase::Rising };
            }
            addition_times.push(t);
        }
        xs.push(signal(&support, &sign, &magnitude));
        supports.push(support.clone());
    }
    Ok(SparseTrajectory {
        x: xs,
        supports,
        addition_times,
        removal_times,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Gaussian,
    Uniform,
}

/// Observation noise: standard deviation for Gaussian, half-width for uniform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub scale: f64,
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64) -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            scale: sigma,
        }
    }

    pub fn uniform(half_width: f64) -> Self {
        Self {
            kind: NoiseKind::Uniform,
            scale: half_width,
        }
    }

    /// Per-entry noise variance.
    pub fn variance(&self) -> f64 {
        match self.kind {
            NoiseKind::Gaussian => self.scale * self.scale,
            NoiseKind::Uniform => self.scale * self.scale / 3.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DVector<f64>> {
        if !(self.scale >= 0.0) || !self.scale.is_finite() {
            return Err(Error::InvalidParameter(format!("noise scale {} must be finite and non-negative", self.scale)));
        }
        if self.scale == 0.0 {
            return Ok(DVector::zeros(n));
        }
        Ok(match self.kind {
            NoiseKind::Gaussian => {
                let dist = Normal::new(0.0, self.scale).expect("positive scale");
                DVector::from_fn(n, |_, _| dist.sample(rng))
            }
            NoiseKind::Uniform => {
                let c = self.scale;
                DVector::from_fn(n, |_, _| rng.random_range(-c..=c))
            }
        })
    }
}

/// `y = A x + w`.
pub fn measure(x: &DVector<f64>, a: &SensingMatrix, spec: &NoiseSpec, seed: u64) -> Result<DVector<f64>> {
    measure_with(x, a, spec, &mut rng::seeded(seed))
}

pub fn measure_with<R: Rng + ?Sized>(
    x: &DVector<f64>,
    a: &SensingMatrix,
    spec: &NoiseSpec,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if x.len() != a.m() {
        return Err(Error::Dimension(format!(
            "signal length {} does not match matrix width {}",
            x.len(),
            a.m()
        )));
    }
    let w = spec.sample(a.n(), rng)?;
    Ok(a.apply(x) + w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::generate_gaussian_matrix;

    fn scenario_a() -> RandomWalkParams {
        RandomWalkParams {
            m: 256,
            s0: 8,
            sa: 2,
            sr: 0,
            d: 5,
            smax: 26,
            sigma_sys0: 1.0,
            sigma_sys: 1.0,
            horizon: 60,
        }
    }

    fn check_cardinalities(traj: &SparseTrajectory, sa: usize, sr: usize) {
        for t in 0..=traj.horizon() {
            let s = &traj.supports[t];
            for i in 0..traj.m() {
                if !s.contains(i) {
                    assert_eq!(traj.x[t][i], 0.0, "t = {t}, i = {i}");
                }
            }
            if t == 0 {
                continue;
            }
            let prev = &traj.supports[t - 1];
            let added = s.difference(prev).len();
            let removed = prev.difference(s).len();
            let expect_add = if traj.addition_times.contains(&t) { sa } else { 0 };
            let expect_rem = if traj.removal_times.contains(&t) { sr } else { 0 };
            assert_eq!(added, expect_add, "t = {t}");
            assert_eq!(removed, expect_rem, "t = {t}");
        }
    }

    #[test]
    fn scenario_a_schedule() {
        let traj = simulate_no_removals(&scenario_a(), 3).unwrap();
        assert_eq!(traj.addition_times, vec![6, 11, 16, 21, 26, 31, 36, 41, 46]);
        for t in 0..=60 {
            let expect = 8 + 2 * traj.addition_times.iter().filter(|&&a| a <= t).count();
            assert_eq!(traj.supports[t].len(), expect);
        }
        assert!(traj.supports[46..].iter().all(|s| s.len() == 26));
        check_cardinalities(&traj, 2, 0);
    }

    #[test]
    fn second_scenario_has_three_events() {
        let p = RandomWalkParams {
            sa: 4,
            d: 10,
            smax: 20,
            ..scenario_a()
        };
        assert_eq!(p.addition_events(), 3);
        let traj = simulate_no_removals(&p, 1).unwrap();
        assert_eq!(traj.addition_times, vec![11, 21, 31]);
        assert!(traj.supports[31..].iter().all(|s| s.len() == 20));
        for t in 1..=traj.horizon() {
            assert!(traj.supports[t - 1].is_subset(&traj.supports[t]));
        }
    }

    #[test]
    fn no_events_keeps_support() {
        let p = RandomWalkParams {
            sa: 0,
            sr: 0,
            smax: 8,
            ..scenario_a()
        };
        let traj = simulate_random_walk(&p, 4).unwrap();
        assert!(traj.supports.iter().all(|s| *s == traj.supports[0]));
        assert_eq!(p.addition_events(), 0);
        let traj = simulate_no_removals(&p, 4).unwrap();
        assert!(traj.addition_times.is_empty());
    }

    #[test]
    fn zero_walk_variance_freezes_values() {
        let p = RandomWalkParams {
            sigma_sys: 0.0,
            ..scenario_a()
        };
        let traj = simulate_random_walk(&p, 5).unwrap();
        let n0 = &traj.supports[0];
        for t in 0..=60 {
            for i in traj.supports[t].iter() {
                let expect = if n0.contains(i) { traj.x[0][i] } else { 0.0 };
                assert_eq!(traj.x[t][i], expect);
            }
        }
    }

    #[test]
    fn removals_drop_smallest_coefficients() {
        let p = RandomWalkParams {
            m: 60,
            s0: 6,
            sa: 2,
            sr: 2,
            d: 4,
            smax: 10,
            sigma_sys0: 1.0,
            sigma_sys: 1.0,
            horizon: 40,
        };
        let traj = simulate_random_walk(&p, 9).unwrap();
        assert!(!traj.removal_times.is_empty());
        check_cardinalities(&traj, 2, 2);
        for &t in &traj.removal_times {
            let gone = traj.supports[t - 1].difference(&traj.supports[t]);
            let stayed = traj.supports[t - 1].intersection(&traj.supports[t]);
            let max_gone = gone.iter().map(|i| traj.x[t - 1][i].abs()).fold(0.0, f64::max);
            let min_stayed = stayed.iter().map(|i| traj.x[t - 1][i].abs()).fold(f64::INFINITY, f64::min);
            assert!(max_gone <= min_stayed);
        }
        assert!(traj.supports.iter().all(|s| s.len() <= p.smax));
    }

    #[test]
    fn inconsistent_parameters_rejected() {
        let p = RandomWalkParams { s0: 300, ..scenario_a() };
        assert!(simulate_random_walk(&p, 0).is_err());
        let p = RandomWalkParams { d: 1, ..scenario_a() };
        assert!(simulate_random_walk(&p, 0).is_err());
        let p = RandomWalkParams {
            s0: 1,
            sa: 1,
            sr: 3,
            smax: 2,
            ..scenario_a()
        };
        assert!(simulate_random_walk(&p, 0).is_err());
    }

    fn bounded() -> BoundedPowerParams {
        BoundedPowerParams {
            m: 200,
            s0: 20,
            sa: 2,
            rate: 0.2,
            plateau: 1.0,
            d: 8,
            ramp_down: 3,
            first_addition: 2,
            horizon: 24,
        }
    }

    #[test]
    fn bounded_power_schedule() {
        let traj = simulate_bounded_power(&bounded(), 11).unwrap();
        assert_eq!(traj.addition_times, vec![2, 10, 18]);
        assert_eq!(traj.removal_times, vec![9, 17]);
        let p = bounded();
        let starts: Vec<usize> = (1..=24).filter(|&t| p.is_decrease_start(t)).collect();
        assert_eq!(starts, vec![7, 15, 23]);
        for s in &traj.supports {
            assert!(s.len() == 20 || s.len() == 22);
        }
        check_cardinalities(&traj, 2, 2);
    }

    #[test]
    fn bounded_power_ramp_values() {
        let traj = simulate_bounded_power(&bounded(), 2).unwrap();
        let new: Vec<usize> = traj.supports[2].difference(&traj.supports[1]).iter().collect();
        for &i in &new {
            let mags: Vec<f64> = (2..=7).map(|t| traj.x[t][i].abs()).collect();
            let expect = [0.2, 0.4, 0.6, 0.8, 1.0, 1.0];
            for (got, want) in mags.iter().zip(expect) {
                assert!((got - want).abs() < 1e-12);
            }
        }
        let gone: Vec<usize> = traj.supports[8].difference(&traj.supports[9]).iter().collect();
        for &i in &gone {
            assert!((traj.x[7][i].abs() - 2.0 / 3.0).abs() < 1e-12);
            assert!((traj.x[8][i].abs() - 1.0 / 3.0).abs() < 1e-12);
            assert_eq!(traj.x[9][i], 0.0);
        }
    }

    #[test]
    fn bounded_power_without_events_is_constant() {
        let p = BoundedPowerParams { sa: 0, ..bounded() };
        let traj = simulate_bounded_power(&p, 1).unwrap();
        assert!(traj.x.iter().all(|x| *x == traj.x[0]));
        assert!(traj.x[0].iter().filter(|v| **v != 0.0).all(|v| v.abs() == 1.0));
    }

    #[test]
    fn generators_are_reproducible() {
        assert_eq!(
            simulate_random_walk(&scenario_a(), 8).unwrap(),
            simulate_random_walk(&scenario_a(), 8).unwrap()
        );
        assert_eq!(
            simulate_bounded_power(&bounded(), 8).unwrap(),
            simulate_bounded_power(&bounded(), 8).unwrap()
        );
    }

    #[test]
    fn measurement_edge_cases() {
        let a = generate_gaussian_matrix(10, 30, 1);
        let x = DVector::from_fn(30, |i, _| if i % 7 == 0 { 1.0 } else { 0.0 });
        let y = measure(&x, &a, &NoiseSpec::gaussian(0.0), 3).unwrap();
        assert_eq!(y, a.apply(&x));
        let w = measure(&DVector::zeros(30), &a, &NoiseSpec::uniform(0.1266), 3).unwrap();
        assert!(w.amax() <= 0.1266);
        assert!(w.amax() > 0.0);
        assert!(measure(&DVector::zeros(29), &a, &NoiseSpec::gaussian(1.0), 3).is_err());
        assert_eq!(
            measure(&x, &a, &NoiseSpec::gaussian(0.3), 5).unwrap(),
            measure(&x, &a, &NoiseSpec::gaussian(0.3), 5).unwrap()
        );
    }

    #[test]
    fn csv_and_events_written() {
        let traj = simulate_bounded_power(&bounded(), 3).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,index,value\n"));
        let rows = text.lines().count() - 1;
        assert_eq!(rows, traj.supports.iter().map(|s| s.len()).sum::<usize>());
        let ev: serde_json::Value = serde_json::from_str(&traj.events_json()).unwrap();
        assert_eq!(ev["removal_times"], serde_json::json!([9, 17]));
    }
}
