//! Monte Carlo runner: every trial draws a trajectory and a noise sequence, feeds the same
//! observations to every estimator in the roster and records per-time errors.

mod config;
mod metrics;

use std::path::{Path, PathBuf};

use nalgebra::DVector;

pub use config::{EstimatorKind, ExperimentConfig, ModelKind};
pub use metrics::{fmt10, support_errors, EstimatorTrace, MetricRow, RunMetrics, Sums, Totals, TrialRecord, CSV_HEADER};

use crate::dantzig;
use crate::error::{Error, Result};
use crate::estimators::{
    genie_kf_prior_init, genie_kf_step, kfcs_init, kfcs_step, lscs_step, simple_cs_step, KfcsState, LsCsState,
};
use crate::models::{self, measure_with, SparseTrajectory};
use crate::par;
use crate::rng::{stream, Purpose};
use crate::sensing::{generate_gaussian_with, ExhaustiveRip, SensingMatrix};
use crate::stability::{bound_trace, BoundStep, BoundTrace};
use crate::support::Support;

/// Sensing matrices for a trial: `(A, A0)`.
pub fn trial_matrices(cfg: &ExperimentConfig, trial: u64) -> (SensingMatrix, SensingMatrix) {
    let key = if cfg.shared_matrix { 0 } else { trial };
    let a = generate_gaussian_with(cfg.n, cfg.m, &mut stream(cfg.seed, key, Purpose::Matrix));
    let a0 = if cfg.n0 == cfg.n {
        a.clone()
    } else {
        generate_gaussian_with(cfg.n0, cfg.m, &mut stream(cfg.seed, key, Purpose::InitMatrix))
    };
    (a, a0)
}

/// Ground truth for a trial.
pub fn trial_trajectory(cfg: &ExperimentConfig, trial: u64) -> Result<SparseTrajectory> {
    let rng = &mut stream(cfg.seed, trial, Purpose::Trajectory);
    match cfg.model {
        ModelKind::RandomWalk => models::simulate_random_walk_with(&cfg.random_walk_params(), rng),
        ModelKind::NoRemovals => models::simulate_no_removals_with(&cfg.random_walk_params(), rng),
        ModelKind::BoundedPower => models::simulate_bounded_power_with(&cfg.bounded_power_params(), rng),
    }
}

/// Observations `y_0..y_T` for a trial; `y_0` uses `A0`.
pub fn trial_observations(
    cfg: &ExperimentConfig,
    trial: u64,
    traj: &SparseTrajectory,
    a: &SensingMatrix,
    a0: &SensingMatrix,
) -> Result<Vec<DVector<f64>>> {
    let spec = cfg.noise_spec();
    let mut ys = vec![measure_with(&traj.x[0], a0, &spec, &mut stream(cfg.seed, trial, Purpose::InitNoise))?];
    let rng = &mut stream(cfg.seed, trial, Purpose::Noise);
    for x in &traj.x[1..] {
        ys.push(measure_with(x, a, &spec, rng)?);
    }
    Ok(ys)
}

enum Lane {
    Kfcs(KfcsState),
    Lscs(LsCsState),
    Cs,
    GenieKf(KfcsState),
    GenieLs,
}

/// Estimate, support and whether the step failed numerically.
struct LaneOutput {
    xhat: DVector<f64>,
    support: Support,
    failed: bool,
}

fn failed_with(prev: &DVector<f64>, support: &Support) -> LaneOutput {
    LaneOutput {
        xhat: prev.clone(),
        support: support.clone(),
        failed: true,
    }
}

impl Lane {
    fn step(&mut self, y: &DVector<f64>, a: &SensingMatrix, truth: &Support, cfg: &ExperimentConfig) -> LaneOutput {
        let alg = cfg.algorithm();
        let tol = cfg.solver_tol;
        match self {
            Lane::Kfcs(state) => match kfcs_step(state, y, a, &alg, tol) {
                Ok((next, out)) => {
                    *state = next;
                    LaneOutput {
                        xhat: out.xhat,
                        support: out.support,
                        failed: false,
                    }
                }
                Err(_) => {
                    state.t += 1;
                    failed_with(&state.xhat, &state.support)
                }
            },
            Lane::Lscs(state) => match lscs_step(state, y, a, &alg, tol) {
                Ok((next, out)) => {
                    *state = next;
                    LaneOutput {
                        xhat: out.xhat,
                        support: out.support,
                        failed: false,
                    }
                }
                Err(_) => {
                    state.t += 1;
                    failed_with(&state.xhat, &state.support)
                }
            },
            Lane::Cs => match simple_cs_step(y, a, &alg, tol) {
                Ok((xhat, support)) => LaneOutput {
                    xhat,
                    support,
                    failed: false,
                },
                Err(_) => failed_with(&DVector::zeros(a.m()), &Support::empty()),
            },
            Lane::GenieKf(state) => match genie_kf_step(state, y, a, truth, &alg) {
                Ok((next, xhat)) => {
                    *state = next;
                    LaneOutput {
                        xhat,
                        support: truth.clone(),
                        failed: false,
                    }
                }
                Err(_) => {
                    *state = state.reindexed(truth);
                    state.t += 1;
                    failed_with(&state.xhat, truth)
                }
            },
            Lane::GenieLs => {
                let fit = dantzig::least_squares_on_support(a, y, truth);
                LaneOutput {
                    xhat: fit.x,
                    support: truth.clone(),
                    failed: false,
                }
            }
        }
    }
}

/// Initializes every lane from `(A0, y0)` and returns the t = 0 outputs.
fn init_lanes(
    roster: &[EstimatorKind],
    y0: &DVector<f64>,
    a0: &SensingMatrix,
    truth: &Support,
    cfg: &ExperimentConfig,
) -> (Vec<Lane>, Vec<LaneOutput>) {
    let alg = cfg.algorithm();
    let m = a0.m();
    let needs_cs_init = roster.iter().any(|k| matches!(k, EstimatorKind::Kfcs | EstimatorKind::Lscs | EstimatorKind::Cs));
    let cs_init = needs_cs_init.then(|| kfcs_init(a0, y0, &alg, cfg.solver_tol));
    let empty = KfcsState::empty(m);
    let from_init = |state: &Option<Result<KfcsState>>| -> (KfcsState, LaneOutput) {
        match state {
            Some(Ok(s)) => (
                s.clone(),
                LaneOutput {
                    xhat: s.xhat.clone(),
                    support: s.support.clone(),
                    failed: false,
                },
            ),
            _ => (empty.clone(), failed_with(&empty.xhat, &empty.support)),
        }
    };
    let mut lanes = Vec::new();
    let mut outs = Vec::new();
    for kind in roster {
        let (lane, out) = match kind {
            EstimatorKind::Kfcs => {
                let (s, o) = from_init(&cs_init);
                (Lane::Kfcs(s), o)
            }
            EstimatorKind::Lscs => {
                let (s, o) = from_init(&cs_init);
                (Lane::Lscs(LsCsState::from(&s)), o)
            }
            EstimatorKind::Cs => (Lane::Cs, from_init(&cs_init).1),
            EstimatorKind::GenieKf => match genie_kf_prior_init(a0, y0, truth, cfg.genie_prior(), &alg) {
                Ok(s) => {
                    let out = LaneOutput {
                        xhat: s.xhat.clone(),
                        support: truth.clone(),
                        failed: false,
                    };
                    (Lane::GenieKf(s), out)
                }
                Err(_) => {
                    let s = empty.reindexed(truth);
                    (Lane::GenieKf(s), failed_with(&empty.xhat, truth))
                }
            },
            EstimatorKind::GenieLs => (
                Lane::GenieLs,
                LaneOutput {
                    xhat: dantzig::least_squares_on_support(a0, y0, truth).x,
                    support: truth.clone(),
                    failed: false,
                },
            ),
        };
        lanes.push(lane);
        outs.push(out);
    }
    (lanes, outs)
}

/// Runs one trial of every estimator in lockstep.
pub fn run_trial(cfg: &ExperimentConfig, trial: u64) -> Result<TrialRecord> {
    let roster = cfg.estimators();
    let (a, a0) = trial_matrices(cfg, trial);
    let traj = trial_trajectory(cfg, trial)?;
    let ys = trial_observations(cfg, trial, &traj, &a, &a0)?;
    let len = traj.horizon() + 1;
    let genie_pos = roster.iter().position(|&k| k == EstimatorKind::GenieKf);
    let mut traces: Vec<(EstimatorKind, EstimatorTrace)> =
        roster.iter().map(|&k| (k, EstimatorTrace::new(len, genie_pos.is_some()))).collect();
    let energy: Vec<f64> = traj.x.iter().map(|x| x.norm_squared()).collect();

    let (mut lanes, mut outs) = init_lanes(&roster, &ys[0], &a0, &traj.supports[0], cfg);
    for t in 0..len {
        if t > 0 {
            outs = lanes
                .iter_mut()
                .map(|lane| lane.step(&ys[t], &a, &traj.supports[t], cfg))
                .collect();
        }
        let x = &traj.x[t];
        for (k, out) in outs.iter().enumerate() {
            let tr = &mut traces[k].1;
            let err2 = (x - &out.xhat).norm_squared();
            let (misses, extras) = support_errors(&traj.supports[t], &out.support);
            tr.err2[t] = err2;
            tr.misses[t] = misses;
            tr.extras[t] = extras;
            tr.diverged[t] = out.failed || (energy[t] > 0.0 && err2 > cfg.divergence_ratio * energy[t]);
            if let (Some(g), Some(d)) = (genie_pos, tr.diff2.as_mut()) {
                d[t] = (&out.xhat - &outs[g].xhat).norm_squared();
            }
        }
    }
    Ok(TrialRecord { energy, traces })
}

/// Sums over trials `first..first + count`.
pub fn run_trials(cfg: &ExperimentConfig, first: u64, count: usize) -> Result<Totals> {
    cfg.validate()?;
    let roster = cfg.estimators();
    let records = par::map_indexed(count, |k| run_trial(cfg, first + k as u64));
    let mut totals = Totals::new(cfg.horizon + 1, &roster, roster.contains(&EstimatorKind::GenieKf));
    for rec in records {
        totals.add(&rec?);
    }
    Ok(totals)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunMetrics> {
    Ok(run_trials(cfg, 0, cfg.trials)?.finish())
}

/// Runs KF-CS on one trial and evaluates the per-step bound on `‖(β_t)_T‖` along it.
/// The bound needs exact RIP/ROC constants of `A` up to the largest support size, so only
/// small problems fit the enumeration budget.
pub fn trial_bound_trace(cfg: &ExperimentConfig, trial: u64) -> Result<BoundTrace> {
    cfg.validate()?;
    let (a, a0) = trial_matrices(cfg, trial);
    let traj = trial_trajectory(cfg, trial)?;
    let ys = trial_observations(cfg, trial, &traj, &a, &a0)?;
    let alg = cfg.algorithm();
    let mut state = kfcs_init(&a0, &ys[0], &alg, cfg.solver_tol)?;
    let p0 = state.p.clone();
    let mut steps = Vec::with_capacity(cfg.horizon);
    for (y, x) in ys.iter().zip(&traj.x).skip(1) {
        steps.push(BoundStep {
            support: state.support.clone(),
            xhat_prev: state.xhat.clone(),
            noise: y - a.apply(x),
        });
        state = kfcs_step(&state, y, &a, &alg, cfg.solver_tol)?.0;
    }
    bound_trace(&traj, &steps, &a, &alg, &p0, &ExhaustiveRip::new(&a))
}

/// Writes `metrics.csv` and `manifest.json` into `dir`; returns the CSV path.
pub fn emit_csv(metrics: &RunMetrics, cfg: &ExperimentConfig, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join("metrics.csv");
    let mut buf = Vec::new();
    metrics.write_csv(&mut buf)?;
    std::fs::write(&csv_path, buf)?;
    let manifest = serde_json::json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "master_seed": cfg.seed,
        "trials": metrics.trials,
        "metrics_file": "metrics.csv",
        "config": cfg,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(dir.join("manifest.json"), text + "\n")?;
    Ok(csv_path)
}
