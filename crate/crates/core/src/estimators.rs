//! Recursive estimators: KF-CS, LS-CS, simple CS and the genie-aided KF / LS baselines.
//!
//! Every estimator is a single-step update taking its previous state by reference and
//! returning the next one, so trials can run them side by side on the same data.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dantzig::{self, DantzigProblem};
use crate::error::{Error, Result};
use crate::linalg::{gather, principal, scatter, select_columns, spd_inverse, symmetrize};
use crate::sensing::SensingMatrix;
use crate::support::Support;

fn default_gamma() -> f64 {
    1.0
}

/// Thresholds and model variances shared by the CS-residual estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    /// Dantzig constraint radius.
    pub lambda: f64,
    /// Addition threshold.
    pub alpha: f64,
    /// Deletion threshold.
    #[serde(default)]
    pub alpha_del: f64,
    /// Assumed random-walk variance.
    pub sigma_sys2: f64,
    /// Assumed observation noise variance.
    pub sigma2: f64,
    /// Addition cap factor: at most `⌊γ n / log2 m⌋` new indices per step.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Explicit addition cap, overriding the `γ` rule when set.
    #[serde(default)]
    pub max_additions: Option<usize>,
    /// Measurement count used at initialization.
    pub n0: usize,
}

impl AlgorithmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.lambda > 0.0) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.alpha >= 0.0) || !(self.alpha_del >= 0.0) {
            return bad("thresholds must be non-negative".into());
        }
        if !(self.sigma_sys2 > 0.0) || !(self.sigma2 > 0.0) {
            return bad("model variances must be positive".into());
        }
        if !(self.gamma > 0.0 && self.gamma <= 2.0) {
            return bad(format!("gamma must lie in (0, 2], got {}", self.gamma));
        }
        if self.n0 == 0 {
            return bad("n0 must be positive".into());
        }
        Ok(())
    }

    /// Maximum number of indices added in one step for an `n × m` matrix.
    pub fn addition_cap(&self, n: usize, m: usize) -> usize {
        if let Some(k) = self.max_additions {
            return k;
        }
        if m < 2 {
            return m;
        }
        (self.gamma * n as f64 / (m as f64).log2()).floor() as usize
    }
}

/// State carried between KF-CS steps. `p` is the covariance block on `support`
/// (rows and columns in the support's sorted order); the full covariance is zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct KfcsState {
    pub xhat: DVector<f64>,
    pub p: DMatrix<f64>,
    pub support: Support,
    pub t: usize,
}

impl KfcsState {
    pub fn empty(m: usize) -> Self {
        Self {
            xhat: DVector::zeros(m),
            p: DMatrix::zeros(0, 0),
            support: Support::empty(),
            t: 0,
        }
    }

    pub fn m(&self) -> usize {
        self.xhat.len()
    }

    /// The covariance as a dense `m × m` matrix.
    pub fn p_full(&self) -> DMatrix<f64> {
        let m = self.m();
        let mut out = DMatrix::zeros(m, m);
        for (r, i) in self.support.iter().enumerate() {
            for (c, j) in self.support.iter().enumerate() {
                out[(i, j)] = self.p[(r, c)];
            }
        }
        out
    }

    /// Re-indexes the state to `target`: surviving rows and columns are copied, new ones
    /// are zero-filled and dropped indices are zeroed in the estimate.
    pub fn reindexed(&self, target: &Support) -> Self {
        let k = target.len();
        let pos: Vec<Option<usize>> = target.iter().map(|i| self.support.position(i)).collect();
        let p = DMatrix::from_fn(k, k, |r, c| match (pos[r], pos[c]) {
            (Some(a), Some(b)) => self.p[(a, b)],
            _ => 0.0,
        });
        let mut xhat = DVector::zeros(self.m());
        for i in target.iter() {
            xhat[i] = self.xhat[i];
        }
        Self {
            xhat,
            p,
            support: target.clone(),
            t: self.t,
        }
    }
}

/// State carried between LS-CS steps: only the estimate and its support.
#[derive(Debug, Clone, PartialEq)]
pub struct LsCsState {
    pub xhat: DVector<f64>,
    pub support: Support,
    pub t: usize,
}

impl From<&KfcsState> for LsCsState {
    fn from(s: &KfcsState) -> Self {
        Self {
            xhat: s.xhat.clone(),
            support: s.support.clone(),
            t: s.t,
        }
    }
}

/// Intermediate quantities of one CS-residual step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Final estimate x̂_t.
    pub xhat: DVector<f64>,
    /// x̂_init + β̂.
    pub x_csres: DVector<f64>,
    pub x_init: DVector<f64>,
    /// y − A x̂_init.
    pub residual: DVector<f64>,
    /// Dantzig solution on the residual.
    pub beta_hat: DVector<f64>,
    /// Indices added to the previous support.
    pub detected: Support,
    /// Indices removed by the deletion step.
    pub deleted: Support,
    /// Final support estimate.
    pub support: Support,
    pub lp_iterations: usize,
}

/// Reduced-order KF predict/update on a support block.
#[derive(Debug, Clone, PartialEq)]
pub struct KfUpdate {
    pub x_init: DVector<f64>,
    pub p_pred: DMatrix<f64>,
    pub p_upd: DMatrix<f64>,
    /// Gain rows for the support indices, `|T| × n`.
    pub gain: DMatrix<f64>,
    pub residual: DVector<f64>,
}

/// `σ²(A_T'A_T)⁻¹`, the covariance block after a least-squares re-initialization.
pub fn ls_covariance(a: &SensingMatrix, t: &Support, sigma2: f64) -> Result<DMatrix<f64>> {
    let g = principal(a.gram(), t.as_slice());
    Ok(spd_inverse(&g)? * sigma2)
}

/// Gauss–Dantzig on the initial measurements, followed by the LS covariance on the
/// detected support.
pub fn kfcs_init(a0: &SensingMatrix, y0: &DVector<f64>, cfg: &AlgorithmConfig, tol: f64) -> Result<KfcsState> {
    cfg.validate()?;
    let gd = dantzig::gauss_dantzig(&DantzigProblem::new(a0, y0, cfg.lambda)?, cfg.alpha, tol)?;
    let p = ls_covariance(a0, &gd.support, cfg.sigma2)?;
    Ok(KfcsState {
        xhat: gd.xhat,
        p,
        support: gd.support,
        t: 0,
    })
}

/// Predict with `Q = σ_sys² I_T` and update with `y`, on the state's support only.
///
/// Uses the information form `M = A_T'A_T + σ²P_pred⁻¹`, `K = M⁻¹A_T'`,
/// `P_upd = σ²M⁻¹`, falling back to the innovation form when `P_pred` is singular.
pub fn kf_predict_update(
    state: &KfcsState,
    y: &DVector<f64>,
    a: &SensingMatrix,
    cfg: &AlgorithmConfig,
) -> Result<KfUpdate> {
    check_dims(state.m(), y, a)?;
    let t = &state.support;
    let k = t.len();
    let n = a.n();
    if k == 0 {
        return Ok(KfUpdate {
            x_init: DVector::zeros(a.m()),
            p_pred: DMatrix::zeros(0, 0),
            p_upd: DMatrix::zeros(0, 0),
            gain: DMatrix::zeros(0, n),
            residual: y.clone(),
        });
    }
    let mut p_pred = state.p.clone();
    for i in 0..k {
        p_pred[(i, i)] += cfg.sigma_sys2;
    }
    let at = select_columns(a.entries(), t.as_slice());
    let x_prev = gather(&state.xhat, t);
    let innovation = y - &at * &x_prev;

    let (gain, mut p_upd) = match spd_inverse(&p_pred) {
        Ok(p_inv) => {
            let info = principal(a.gram(), t.as_slice()) + p_inv * cfg.sigma2;
            let m_inv = spd_inverse(&info)?;
            (&m_inv * at.transpose(), m_inv * cfg.sigma2)
        }
        Err(_) => {
            let mut s = &at * &p_pred * at.transpose();
            for i in 0..n {
                s[(i, i)] += cfg.sigma2;
            }
            let s_inv = spd_inverse(&s)?;
            let gain = &p_pred * at.transpose() * s_inv;
            let p_upd = (DMatrix::identity(k, k) - &gain * &at) * &p_pred;
            (gain, p_upd)
        }
    };
    symmetrize(&mut p_upd);
    let x_t = x_prev + &gain * innovation;
    let x_init = scatter(a.m(), t, &x_t);
    let residual = y - a.apply(&x_init);
    Ok(KfUpdate {
        x_init,
        p_pred,
        p_upd,
        gain,
        residual,
    })
}

fn check_dims(m: usize, y: &DVector<f64>, a: &SensingMatrix) -> Result<()> {
    if a.m() != m || a.n() != y.len() {
        return Err(Error::Dimension(format!(
            "state length {m}, observation length {} against a {}x{} matrix",
            y.len(),
            a.n(),
            a.m()
        )));
    }
    Ok(())
}

/// Result of steps 2-4 shared by KF-CS and LS-CS.
struct Refinement {
    out: StepOutput,
    /// True when the final support equals the initial one and x̂_init was kept.
    kept_init: bool,
}

/// CS on the residual, thresholded addition, LS, deletion and final LS.
fn cs_residual_refine(
    t: &Support,
    x_init: DVector<f64>,
    residual: DVector<f64>,
    y: &DVector<f64>,
    a: &SensingMatrix,
    cfg: &AlgorithmConfig,
    tol: f64,
) -> Result<Refinement> {
    let lp = dantzig::solve_dantzig(&DantzigProblem::new(a, &residual, cfg.lambda)?, tol)?.into_result()?;
    let beta_hat = lp.zeta;
    let x_csres = &x_init + &beta_hat;

    let mut candidates: Vec<usize> = (0..a.m())
        .filter(|&i| !t.contains(i) && x_csres[i].abs() > cfg.alpha)
        .collect();
    candidates.sort_by(|&i, &j| x_csres[j].abs().total_cmp(&x_csres[i].abs()).then(i.cmp(&j)));
    candidates.truncate(cfg.addition_cap(a.n(), a.m()));
    let mut t_det = t.clone();
    for &i in &candidates {
        t_det.insert(i);
    }

    let x_det = if t_det == *t {
        x_init.clone()
    } else {
        // Rank repair drops the weakest new indices before touching the old support.
        let lift = 1.0 + x_csres.amax();
        let fit = dantzig::least_squares_with_priority(a, y, &t_det, |i| {
            x_csres[i].abs() + if t.contains(i) { lift } else { 0.0 }
        });
        t_det = fit.support;
        fit.x
    };
    let detected = t_det.difference(t);

    let n_hat: Support = t_det.iter().filter(|&i| !(x_det[i].abs() < cfg.alpha_del)).collect();
    let deleted = t_det.difference(&n_hat);

    let (xhat, support, kept_init) = if n_hat == *t {
        (x_init.clone(), n_hat, true)
    } else {
        let fit = dantzig::least_squares_with_priority(a, y, &n_hat, |i| x_det[i].abs());
        (fit.x, fit.support, false)
    };
    Ok(Refinement {
        out: StepOutput {
            xhat,
            x_csres,
            x_init,
            residual,
            beta_hat,
            detected,
            deleted,
            support,
            lp_iterations: lp.iterations,
        },
        kept_init,
    })
}

/// One KF-CS step: reduced-order KF on the previous support, CS on the KF residual,
/// addition, deletion, and a covariance re-initialization whenever the support changes.
pub fn kfcs_step(
    state: &KfcsState,
    y: &DVector<f64>,
    a: &SensingMatrix,
    cfg: &AlgorithmConfig,
    tol: f64,
) -> Result<(KfcsState, StepOutput)> {
    let kf = kf_predict_update(state, y, a, cfg)?;
    let refined = cs_residual_refine(&state.support, kf.x_init, kf.residual, y, a, cfg, tol)?;
    let out = refined.out;
    let p = if refined.kept_init {
        kf.p_upd
    } else {
        ls_covariance(a, &out.support, cfg.sigma2)?
    };
    let next = KfcsState {
        xhat: out.xhat.clone(),
        p,
        support: out.support.clone(),
        t: state.t + 1,
    };
    Ok((next, out))
}

/// One LS-CS step: as KF-CS with the initial estimate replaced by LS on the previous support.
pub fn lscs_step(
    state: &LsCsState,
    y: &DVector<f64>,
    a: &SensingMatrix,
    cfg: &AlgorithmConfig,
    tol: f64,
) -> Result<(LsCsState, StepOutput)> {
    check_dims(state.xhat.len(), y, a)?;
    let init = dantzig::least_squares_on_support(a, y, &state.support);
    let residual = y - a.apply(&init.x);
    let refined = cs_residual_refine(&init.support, init.x, residual, y, a, cfg, tol)?;
    let out = refined.out;
    let next = LsCsState {
        xhat: out.xhat.clone(),
        support: out.support.clone(),
        t: state.t + 1,
    };
    Ok((next, out))
}

/// Genie-aided KF initialization: LS and its covariance on the true initial support.
pub fn genie_kf_init(a0: &SensingMatrix, y0: &DVector<f64>, true_support: &Support, cfg: &AlgorithmConfig) -> Result<KfcsState> {
    check_dims(a0.m(), y0, a0)?;
    let fit = dantzig::least_squares_on_support(a0, y0, true_support);
    let p = ls_covariance(a0, &fit.support, cfg.sigma2)?;
    Ok(KfcsState {
        xhat: fit.x,
        p,
        support: fit.support,
        t: 0,
    })
}

/// Genie-aided KF started from the prior `x_0 ~ N(0, prior_var I)` on the true support and
/// updated with `y0`: the MMSE estimate of `x_0` under the Gaussian model.
pub fn genie_kf_prior_init(
    a0: &SensingMatrix,
    y0: &DVector<f64>,
    true_support: &Support,
    prior_var: f64,
    cfg: &AlgorithmConfig,
) -> Result<KfcsState> {
    let k = true_support.len();
    let prior = KfcsState {
        xhat: DVector::zeros(a0.m()),
        p: DMatrix::identity(k, k) * prior_var,
        support: true_support.clone(),
        t: 0,
    };
    let no_walk = AlgorithmConfig {
        sigma_sys2: 0.0,
        ..cfg.clone()
    };
    let kf = kf_predict_update(&prior, y0, a0, &no_walk)?;
    Ok(KfcsState {
        xhat: kf.x_init,
        p: kf.p_upd,
        support: prior.support,
        t: 0,
    })
}

/// Genie-aided KF step on the true support: new indices enter with estimate 0 and prior
/// variance `σ_sys²` (added at predict time), removed indices are dropped.
pub fn genie_kf_step(
    state: &KfcsState,
    y: &DVector<f64>,
    a: &SensingMatrix,
    true_support: &Support,
    cfg: &AlgorithmConfig,
) -> Result<(KfcsState, DVector<f64>)> {
    let moved = if state.support == *true_support {
        state.clone()
    } else {
        state.reindexed(true_support)
    };
    let kf = kf_predict_update(&moved, y, a, cfg)?;
    let next = KfcsState {
        xhat: kf.x_init.clone(),
        p: kf.p_upd,
        support: moved.support,
        t: state.t + 1,
    };
    Ok((next, kf.x_init))
}

/// Least squares on the true support.
pub fn genie_ls_step(y: &DVector<f64>, a: &SensingMatrix, true_support: &Support) -> DVector<f64> {
    dantzig::least_squares_on_support(a, y, true_support).x
}

/// Gauss–Dantzig applied to each time independently.
pub fn simple_cs_step(y: &DVector<f64>, a: &SensingMatrix, cfg: &AlgorithmConfig, tol: f64) -> Result<(DVector<f64>, Support)> {
    let gd = dantzig::gauss_dantzig(&DantzigProblem::new(a, y, cfg.lambda)?, cfg.alpha, tol)?;
    Ok((gd.xhat, gd.support))
}
