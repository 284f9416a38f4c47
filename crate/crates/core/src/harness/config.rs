//! Flat experiment configuration. Every key has a default; the defaults describe the
//! random-walk scenario with m = 256, n = 72.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dantzig::DEFAULT_TOL;
use crate::error::{Error, Result};
use crate::estimators::AlgorithmConfig;
use crate::models::{BoundedPowerParams, NoiseKind, NoiseSpec, RandomWalkParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Random walk with additions and removals.
    RandomWalk,
    /// Random walk with additions only.
    NoRemovals,
    /// Ramp-up / plateau / ramp-down coefficients.
    BoundedPower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Kfcs,
    Lscs,
    Cs,
    GenieKf,
    GenieLs,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [Self::Kfcs, Self::Lscs, Self::Cs, Self::GenieKf, Self::GenieLs];

    pub fn name(self) -> &'static str {
        match self {
            Self::Kfcs => "kfcs",
            Self::Lscs => "lscs",
            Self::Cs => "cs",
            Self::GenieKf => "genie_kf",
            Self::GenieLs => "genie_ls",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    /// Signal length.
    pub m: usize,
    /// Measurements per step for t ≥ 1.
    pub n: usize,
    /// Measurements at t = 0; when equal to `n` the same matrix is used.
    pub n0: usize,
    pub horizon: usize,

    // Random-walk models.
    pub s0: usize,
    pub sa: usize,
    pub sr: usize,
    pub d: usize,
    pub smax: usize,
    pub sigma_sys0: f64,
    pub sigma_sys: f64,

    // Bounded-power model (uses m, s0, sa, d, horizon as well).
    pub rate: f64,
    pub plateau: f64,
    pub ramp_down: usize,
    pub first_addition: usize,

    pub noise: NoiseKind,
    /// Standard deviation (gaussian) or half-width (uniform).
    pub noise_scale: f64,

    pub lambda: f64,
    pub alpha: f64,
    pub alpha_del: f64,
    pub sigma_sys2: f64,
    /// Assumed noise variance; defaults to the variance implied by the noise spec.
    pub sigma2: Option<f64>,
    pub gamma: f64,
    pub max_additions: Option<usize>,

    /// Prior variance of the genie KF at t = 0 (defaults to sigma_sys0², or plateau²).
    pub genie_prior_var: Option<f64>,
    /// A step counts as a divergence when ‖x − x̂‖² exceeds this multiple of ‖x‖².
    pub divergence_ratio: f64,
    pub solver_tol: f64,

    pub trials: usize,
    pub seed: u64,
    pub roster: Vec<EstimatorKind>,
    /// One matrix for all trials; otherwise each trial draws its own.
    pub shared_matrix: bool,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::NoRemovals,
            m: 256,
            n: 72,
            n0: 72,
            horizon: 100,
            s0: 8,
            sa: 2,
            sr: 0,
            d: 5,
            smax: 26,
            sigma_sys0: 1.0,
            sigma_sys: 1.0,
            rate: 0.2,
            plateau: 1.0,
            ramp_down: 3,
            first_addition: 2,
            noise: NoiseKind::Gaussian,
            noise_scale: 0.16,
            lambda: 0.64,
            alpha: 0.2304,
            alpha_del: 0.0,
            sigma_sys2: 1.0,
            sigma2: None,
            gamma: 1.0,
            max_additions: None,
            genie_prior_var: None,
            divergence_ratio: 1.0,
            solver_tol: DEFAULT_TOL,
            trials: 100,
            seed: 1,
            roster: vec![EstimatorKind::Kfcs, EstimatorKind::GenieKf],
            shared_matrix: true,
            output: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file. Unreadable files are I/O errors, malformed ones
    /// config errors.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec {
            kind: self.noise,
            scale: self.noise_scale,
        }
    }

    pub fn algorithm(&self) -> AlgorithmConfig {
        AlgorithmConfig {
            lambda: self.lambda,
            alpha: self.alpha,
            alpha_del: self.alpha_del,
            sigma_sys2: self.sigma_sys2,
            sigma2: self.sigma2.unwrap_or_else(|| self.noise_spec().variance()),
            gamma: self.gamma,
            max_additions: self.max_additions,
            n0: self.n0,
        }
    }

    pub fn random_walk_params(&self) -> RandomWalkParams {
        RandomWalkParams {
            m: self.m,
            s0: self.s0,
            sa: self.sa,
            sr: if self.model == ModelKind::NoRemovals { 0 } else { self.sr },
            d: self.d,
            smax: self.smax,
            sigma_sys0: self.sigma_sys0,
            sigma_sys: self.sigma_sys,
            horizon: self.horizon,
        }
    }

    pub fn bounded_power_params(&self) -> BoundedPowerParams {
        BoundedPowerParams {
            m: self.m,
            s0: self.s0,
            sa: self.sa,
            rate: self.rate,
            plateau: self.plateau,
            d: self.d,
            ramp_down: self.ramp_down,
            first_addition: self.first_addition,
            horizon: self.horizon,
        }
    }

    pub fn genie_prior(&self) -> f64 {
        self.genie_prior_var.unwrap_or(match self.model {
            ModelKind::BoundedPower => self.plateau * self.plateau,
            _ => self.sigma_sys0 * self.sigma_sys0,
        })
    }

    /// Roster in canonical order without duplicates.
    pub fn estimators(&self) -> Vec<EstimatorKind> {
        let mut r = self.roster.clone();
        r.sort();
        r.dedup();
        r
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.horizon < 2 {
            return bad(format!("horizon must be at least 2, got {}", self.horizon));
        }
        if self.roster.is_empty() {
            return bad("roster must name at least one estimator".into());
        }
        if self.n == 0 || self.n0 == 0 || self.m == 0 {
            return bad("m, n and n0 must be positive".into());
        }
        if !(self.noise_scale >= 0.0) || !self.noise_scale.is_finite() {
            return bad(format!("noise_scale must be finite and non-negative, got {}", self.noise_scale));
        }
        if !(self.divergence_ratio > 0.0) {
            return bad("divergence_ratio must be positive".into());
        }
        if !(self.solver_tol > 0.0) {
            return bad("solver_tol must be positive".into());
        }
        if !(self.genie_prior() > 0.0) {
            return bad("genie prior variance must be positive".into());
        }
        self.algorithm().validate().map_err(|e| Error::Config(e.to_string()))?;
        // A throwaway trajectory catches inconsistent model parameters up front.
        let probe = match self.model {
            ModelKind::BoundedPower => crate::models::simulate_bounded_power(&self.bounded_power_params(), 0).map(|_| ()),
            ModelKind::NoRemovals => crate::models::simulate_no_removals(&self.random_walk_params(), 0).map(|_| ()),
            ModelKind::RandomWalk => crate::models::simulate_random_walk(&self.random_walk_params(), 0).map(|_| ()),
        };
        probe.map_err(|e| Error::Config(e.to_string()))
    }
}
