//! Stability quantities: the Gaussian Q-function, the detection threshold level `B*`,
//! the detection delay `τ_det`, the error-bound recursion for `‖(β_t)_T‖` and an
//! empirical estimate of the delay `τ_KF` for KF-CS to approach the genie-aided KF.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dantzig::DEFAULT_TOL;
use crate::error::{Error, Result};
use crate::estimators::{genie_kf_prior_init, genie_kf_step, kfcs_init, kfcs_step, AlgorithmConfig};
use crate::linalg::{select_columns, sym_extreme_eigenvalues};
use crate::models::{measure_with, simulate_random_walk_with, NoiseSpec, RandomWalkParams, SparseTrajectory};
use crate::par;
use crate::rng::{self, Purpose};
use crate::sensing::{generate_gaussian_with, RipOracle, SensingMatrix};
use crate::support::Support;

/// Upper tail probability of the standard normal, `Q(z) = erfc(z/√2)/2`.
pub fn q_function(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Inverse of [`q_function`] by bisection on a bracket.
///
/// For `p > 1/2` the symmetry `Q⁻¹(p) = −Q⁻¹(1 − p)` is used so that the search always
/// runs on the tail where `Q` has full relative precision.
pub fn q_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("Q-inverse needs p in (0, 1), got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p > 0.5 {
        return q_inverse(1.0 - p).map(|z| -z);
    }
    // Q(40) is below the smallest subnormal, so [0, 40] brackets every p in (0, 1/2).
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if q_function(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Return whichever end lands closer in p.
    Ok(if (q_function(lo) - p).abs() <= (q_function(hi) - p).abs() { lo } else { hi })
}

/// `B* = C₁ · Smax · λ²`.
pub fn bstar(smax: usize, lambda: f64, c1: f64) -> f64 {
    c1 * smax as f64 * lambda * lambda
}

/// `C₁ = 16 / (1 − δ_{2S} − θ_{S,2S})²`, the default error constant of the Dantzig
/// selector bound. Fails when `δ_{2S} + θ_{S,2S} ≥ 1`.
pub fn default_c1(oracle: &dyn RipOracle, s: usize) -> Result<f64> {
    let margin = 1.0 - oracle.delta(2 * s)? - oracle.theta(s, 2 * s)?;
    if margin <= 0.0 {
        return Err(Error::Domain(format!(
            "δ_2S + θ_S,2S ≥ 1 at S = {s}; supply C1 explicitly"
        )));
    }
    Ok(16.0 / (margin * margin))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityInputs {
    pub epsilon: f64,
    /// Coefficients added per event.
    pub s: usize,
    pub smax: usize,
    pub lambda: f64,
    pub c1: f64,
    pub sigma_sys2: f64,
}

impl StabilityInputs {
    pub fn bstar(&self) -> f64 {
        bstar(self.smax, self.lambda, self.c1)
    }
}

/// `τ_det = ⌈4 B* / (σ_sys² z²)⌉ − 1` with `z = Q⁻¹((1 − ε)^{1/S} / 2)`.
pub fn detection_delay(inputs: &StabilityInputs) -> Result<usize> {
    detection_delay_from_bstar(inputs.epsilon, inputs.s, inputs.bstar(), inputs.sigma_sys2)
}

/// [`detection_delay`] with `B*` given directly.
pub fn detection_delay_from_bstar(epsilon: f64, s: usize, bstar: f64, sigma_sys2: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if s == 0 {
        return Err(Error::Domain("S must be positive".into()));
    }
    if !(bstar > 0.0) || !(sigma_sys2 > 0.0) {
        return Err(Error::Domain("B* and sigma_sys2 must be positive".into()));
    }
    let arg = (1.0 - epsilon).powf(1.0 / s as f64) / 2.0;
    let z = q_inverse(arg)?;
    let ratio = 4.0 * bstar / (sigma_sys2 * z * z);
    if !ratio.is_finite() {
        return Err(Error::Domain(format!("detection delay is unbounded (Q-inverse argument {arg})")));
    }
    Ok((ratio.ceil() as usize).saturating_sub(1))
}

/// Eigenvalue bounds of `P/σ²` carried by the recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovBounds {
    pub upper: f64,
    pub lower: f64,
}

impl CovBounds {
    /// Bounds right after a least-squares re-initialization on a support with RIP constant δ.
    /// The upper bound is infinite when δ ≥ 1.
    pub fn fresh(delta: f64) -> Self {
        Self {
            upper: if delta < 1.0 { 1.0 / (1.0 - delta) } else { f64::INFINITY },
            lower: 1.0 / (1.0 + delta),
        }
    }
}

/// One step of the recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepBounds {
    /// Upper bound on `‖M_t⁻¹‖`, which is also the upper bound on `P_t/σ²`.
    pub a: f64,
    /// Lower bound on the eigenvalues of `P_{t|t−1}/σ²`.
    pub b: f64,
    /// Lower bound on the eigenvalues of `M_t⁻¹`.
    pub c: f64,
}

/// `a_t = 1/(1 − δ + 1/(p_max + r))`, `b_t = p_min + r`, `c_t = 1/(1 + δ + 1/(p_min + r))`.
/// `a_t` is infinite (no bound) when the denominator is not positive.
pub fn bound_step(prev: CovBounds, delta: f64, r: f64) -> StepBounds {
    let hi = prev.upper + r;
    let lo = prev.lower + r;
    let denom = 1.0 - delta + 1.0 / hi;
    StepBounds {
        a: if denom > 0.0 { 1.0 / denom } else { f64::INFINITY },
        b: lo,
        c: 1.0 / (1.0 + delta + 1.0 / lo),
    }
}

/// Per-step quantities needed by [`bound_trace`] beyond the true trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundStep {
    /// Support used by the KF at this step (the previous support estimate).
    pub support: Support,
    /// Previous estimate x̂_{t−1}.
    pub xhat_prev: DVector<f64>,
    /// Observation noise realization w_t.
    pub noise: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundTrace {
    pub t: Vec<usize>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub delta: Vec<f64>,
    pub theta: Vec<f64>,
    pub t1: Vec<f64>,
    pub beta_bound: Vec<f64>,
}

impl BoundTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["t", "a", "b", "delta", "theta", "T1", "beta_T_bound"]).map_err(io)?;
        for k in 0..self.len() {
            let row = [self.a[k], self.b[k], self.delta[k], self.theta[k], self.t1[k], self.beta_bound[k]];
            let mut rec = vec![self.t[k].to_string()];
            rec.extend(row.iter().map(|v| format!("{v:.10e}")));
            w.write_record(rec).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates the bound `‖(β_t)_T‖ ≤ a_t [T1 + θ_t ‖(x_t)_Δ‖ + ‖A_T'w_t‖]` along a run.
///
/// `steps[k]` describes time `k + 1`. `p0` is the covariance block on `steps[0].support`
/// at time 0; its exact eigenvalues start the recursion. Later steps use the RIP bounds
/// after a support change and the previous `(a, c)` otherwise. With
/// `Δ = N_t \ T`, `Δe = T \ N_t`:
/// `T1 = (‖(x_{t−1} − x̂_{t−1})_{T∩N_t}‖ + ‖(x̂_{t−1})_{Δe}‖ + √|T∩N_t| ‖ν_t‖∞) / b_t`.
pub fn bound_trace(
    traj: &SparseTrajectory,
    steps: &[BoundStep],
    a: &SensingMatrix,
    cfg: &AlgorithmConfig,
    p0: &DMatrix<f64>,
    oracle: &dyn RipOracle,
) -> Result<BoundTrace> {
    if steps.len() > traj.horizon() {
        return Err(Error::Dimension(format!(
            "{} steps for a trajectory of horizon {}",
            steps.len(),
            traj.horizon()
        )));
    }
    let r = cfg.sigma_sys2 / cfg.sigma2;
    let mut out = BoundTrace::default();
    let mut prev_support: Option<&Support> = None;
    let mut prev_step: Option<StepBounds> = None;
    for (k, step) in steps.iter().enumerate() {
        let t = k + 1;
        let tset = &step.support;
        let nt = &traj.supports[t];
        let delta = oracle.delta(tset.len())?;
        let cov = match (prev_support, prev_step) {
            (None, _) => {
                let (lo, hi) = sym_extreme_eigenvalues(&(p0 / cfg.sigma2));
                CovBounds { upper: hi, lower: lo }
            }
            (Some(ps), Some(sb)) if ps == tset => CovBounds {
                upper: sb.a,
                lower: sb.c,
            },
            _ => CovBounds::fresh(delta),
        };
        let sb = bound_step(cov, delta, r);

        let delta_set = nt.difference(tset);
        let extra_set = tset.difference(nt);
        let common = tset.intersection(nt);
        let theta = if delta_set.is_empty() || tset.is_empty() {
            0.0
        } else {
            oracle.theta(tset.len(), delta_set.len())?
        };
        let x_prev = &traj.x[t - 1];
        let x_t = &traj.x[t];
        let tracking: f64 = common.iter().map(|i| (x_prev[i] - step.xhat_prev[i]).powi(2)).sum::<f64>().sqrt();
        let stale: f64 = extra_set.iter().map(|i| step.xhat_prev[i].powi(2)).sum::<f64>().sqrt();
        let nu_inf = common.iter().map(|i| (x_t[i] - x_prev[i]).abs()).fold(0.0, f64::max);
        let t1 = (tracking + stale + (common.len() as f64).sqrt() * nu_inf) / sb.b;
        let missed: f64 = delta_set.iter().map(|i| x_t[i].powi(2)).sum::<f64>().sqrt();
        let noise_term = if tset.is_empty() {
            0.0
        } else {
            (select_columns(a.entries(), tset.as_slice()).transpose() * &step.noise).norm()
        };
        let bound = if tset.is_empty() {
            0.0
        } else if sb.a.is_infinite() {
            f64::INFINITY
        } else {
            sb.a * (t1 + theta * missed + noise_term)
        };

        out.t.push(t);
        out.a.push(sb.a);
        out.b.push(sb.b);
        out.delta.push(delta);
        out.theta.push(theta);
        out.t1.push(t1);
        out.beta_bound.push(bound);
        prev_support = Some(tset);
        prev_step = Some(sb);
    }
    Ok(out)
}

/// Fixed-support scenario for [`estimate_tau_kf`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauKfScenario {
    pub m: usize,
    pub n: usize,
    pub support_size: usize,
    pub sigma_sys0: f64,
    pub sigma_sys: f64,
    pub noise_sigma: f64,
    pub horizon: usize,
    pub cfg: AlgorithmConfig,
    /// Start KF-CS from the genie's exact state instead of its own initialization.
    #[serde(default)]
    pub genie_start: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauKfEstimate {
    /// Estimated delay; equals the horizon when the target is never reached.
    pub tau: usize,
    /// Mean `‖diff_t‖²` over trials whose support estimate locks on, indexed by t.
    pub mean_diff2: Vec<f64>,
    /// Per trial, the time from which KF-CS holds the true support (if it ever does).
    pub lock_times: Vec<Option<usize>>,
    /// Per trial `‖diff_t‖²` for t = 0..=horizon.
    pub trial_diff2: Vec<Vec<f64>>,
}

struct TauTrial {
    diff2: Vec<f64>,
    lock: Option<usize>,
}

fn tau_trial(sc: &TauKfScenario, a: &SensingMatrix, seed: u64, trial: u64) -> Result<TauTrial> {
    let params = RandomWalkParams {
        m: sc.m,
        s0: sc.support_size,
        sa: 0,
        sr: 0,
        d: 2,
        smax: sc.support_size,
        sigma_sys0: sc.sigma_sys0,
        sigma_sys: sc.sigma_sys,
        horizon: sc.horizon,
    };
    let traj = simulate_random_walk_with(&params, &mut rng::stream(seed, trial, Purpose::Trajectory))?;
    let noise = NoiseSpec::gaussian(sc.noise_sigma);
    let mut noise_rng = rng::stream(seed, trial, Purpose::Noise);
    let truth = &traj.supports[0];

    let y0 = measure_with(&traj.x[0], a, &noise, &mut noise_rng)?;
    let mut genie = genie_kf_prior_init(a, &y0, truth, sc.sigma_sys0 * sc.sigma_sys0, &sc.cfg)?;
    let mut kf = if sc.genie_start {
        genie.clone()
    } else {
        kfcs_init(a, &y0, &sc.cfg, DEFAULT_TOL)?
    };
    let mut diff2 = vec![(&kf.xhat - &genie.xhat).norm_squared()];
    let mut correct = vec![kf.support == *truth];
    for t in 1..=sc.horizon {
        let y = measure_with(&traj.x[t], a, &noise, &mut noise_rng)?;
        let (next_genie, g) = genie_kf_step(&genie, &y, a, truth, &sc.cfg)?;
        let (next_kf, out) = kfcs_step(&kf, &y, a, &sc.cfg, DEFAULT_TOL)?;
        diff2.push((&out.xhat - &g).norm_squared());
        correct.push(next_kf.support == *truth);
        genie = next_genie;
        kf = next_kf;
    }
    let lock = correct.iter().rposition(|&c| !c).map_or(Some(0), |last_bad| {
        (last_bad < sc.horizon).then_some(last_bad + 1)
    });
    Ok(TauTrial { diff2, lock })
}

/// Smallest Δt such that more than a `1 − ε` fraction of trials satisfy
/// `‖x̂_t(KF-CS) − x̂_t(genie KF)‖² ≤ ε_err` for all `t ≥ t* + Δt`, where `t*` is the
/// time from which the trial's KF-CS support estimate equals the true support.
pub fn estimate_tau_kf(
    sc: &TauKfScenario,
    epsilon: f64,
    epsilon_err: f64,
    trials: usize,
    seed: u64,
) -> Result<TauKfEstimate> {
    sc.cfg.validate()?;
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let a = generate_gaussian_with(sc.n, sc.m, &mut rng::stream(seed, 0, Purpose::Matrix));
    let results: Vec<Result<TauTrial>> = par::map_indexed(trials, |k| tau_trial(sc, &a, seed, k as u64));
    let results: Vec<TauTrial> = results.into_iter().collect::<Result<_>>()?;

    let h = sc.horizon;
    let mut sum = vec![0.0; h + 1];
    let mut count = 0usize;
    for r in results.iter().filter(|r| r.lock.is_some()) {
        for (s, d) in sum.iter_mut().zip(&r.diff2) {
            *s += d;
        }
        count += 1;
    }
    let mean_diff2 = sum.into_iter().map(|s| if count > 0 { s / count as f64 } else { f64::NAN }).collect();

    let mut tau = h;
    for dt in 0..=h {
        let ok = results
            .iter()
            .filter(|r| match r.lock {
                Some(t0) => t0 + dt > h || r.diff2[t0 + dt..].iter().all(|&d| d <= epsilon_err),
                None => false,
            })
            .count();
        if ok as f64 > (1.0 - epsilon) * trials as f64 {
            tau = dt;
            break;
        }
    }
    Ok(TauKfEstimate {
        tau,
        mean_diff2,
        lock_times: results.iter().map(|r| r.lock).collect(),
        trial_diff2: results.into_iter().map(|r| r.diff2).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_function_basics() {
        assert_eq!(q_function(0.0), 0.5);
        assert!(q_function(40.0) < 1e-300);
        assert_eq!(q_function(-40.0), 1.0);
        assert!((q_function(1.6448536269514722) - 0.05).abs() < 1e-12);
        assert!((q_function(-1.0) + q_function(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn q_inverse_roundtrip() {
        assert_eq!(q_inverse(0.5).unwrap(), 0.0);
        assert!((q_inverse(0.05).unwrap() - 1.6448536).abs() < 1e-6);
        for k in 0..=120 {
            let z = -6.0 + 0.1 * k as f64;
            assert!((q_inverse(q_function(z)).unwrap() - z).abs() < 1e-8, "z = {z}");
        }
        for p in [1e-10, 1e-6, 0.1, 0.3, 0.7, 0.99, 1.0 - 1e-10] {
            assert!((q_function(q_inverse(p).unwrap()) - p).abs() < 1e-10 * p.max(1e-3));
        }
        assert!(q_inverse(0.0).is_err());
        assert!(q_inverse(1.0).is_err());
        assert!(q_inverse(f64::NAN).is_err());
    }

    #[test]
    fn bstar_is_homogeneous() {
        assert_eq!(bstar(1, 1.0, 1.0), 1.0);
        assert!((bstar(26, 0.64, 3.0) - 3.0 * 26.0 * 0.4096).abs() < 1e-12);
        assert!((bstar(5, 0.3, 2.0) * 4.0 - bstar(5, 0.6, 2.0)).abs() < 1e-12);
    }

    #[test]
    fn detection_delay_limits() {
        let z = q_inverse(0.475).unwrap();
        let expect = (4.0 / (z * z)).ceil() as usize - 1;
        assert_eq!(detection_delay_from_bstar(0.05, 1, 1.0, 1.0).unwrap(), expect);
        assert_eq!(detection_delay_from_bstar(0.05, 3, 1.0, 1e12).unwrap(), 0);
        assert!(detection_delay_from_bstar(0.0, 1, 1.0, 1.0).is_err());
        assert!(detection_delay_from_bstar(0.5, 0, 1.0, 1.0).is_err());
        let mut last = usize::MAX;
        for q in [0.1, 0.5, 1.0, 2.0, 10.0] {
            let tau = detection_delay_from_bstar(0.1, 2, 1.0, q).unwrap();
            assert!(tau <= last);
            last = tau;
        }
    }

    #[test]
    fn worked_recursion_values() {
        let first = bound_step(CovBounds::fresh(0.8), 0.8, 0.5);
        assert!((first.a - 2.62).abs() < 0.01);
        let second = bound_step(CovBounds { upper: first.a, lower: first.c }, 0.8, 0.5);
        assert!((second.a - 1.92).abs() < 0.01);
        let third = bound_step(CovBounds { upper: second.a, lower: second.c }, 0.8, 0.5);
        assert!((third.a - 1.63).abs() < 0.01);
        let ls = bound_step(CovBounds::fresh(0.8), 0.8, 1e12);
        assert!((ls.a - 5.0).abs() < 1e-9);
        assert!((bound_step(CovBounds::fresh(0.0), 0.0, 0.0).a - 0.5).abs() < 1e-15);
    }

    #[test]
    fn a_is_monotone() {
        for i in 0..10 {
            for j in 0..10 {
                let delta = 0.09 * i as f64;
                let r = 0.3 * j as f64;
                let base = bound_step(CovBounds::fresh(delta), delta, r).a;
                let more_delta = bound_step(CovBounds::fresh(delta + 0.05), delta + 0.05, r).a;
                let more_r = bound_step(CovBounds::fresh(delta), delta, r + 0.1).a;
                assert!(more_delta >= base && more_r >= base);
            }
        }
    }
}
