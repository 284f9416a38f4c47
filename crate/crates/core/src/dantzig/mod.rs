//! Dantzig selector, Gauss–Dantzig refinement and least squares on a support.

mod simplex;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{scatter, select_columns, MAX_CONDITION};
use crate::sensing::SensingMatrix;
use crate::support::Support;

/// Default feasibility / optimality tolerance of the LP solver.
pub const DEFAULT_TOL: f64 = 1e-8;

/// `min ‖ζ‖₁ s.t. ‖A'(y − Aζ)‖∞ ≤ λ`.
#[derive(Debug, Clone, Copy)]
pub struct DantzigProblem<'a> {
    pub a: &'a SensingMatrix,
    pub y: &'a DVector<f64>,
    pub lambda: f64,
}

impl<'a> DantzigProblem<'a> {
    pub fn new(a: &'a SensingMatrix, y: &'a DVector<f64>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        if y.len() != a.n() {
            return Err(Error::Dimension(format!(
                "observation has length {}, matrix has {} rows",
                y.len(),
                a.n()
            )));
        }
        Ok(Self { a, y, lambda })
    }

    /// `‖A'(y − Aζ)‖∞`.
    pub fn constraint_value(&self, zeta: &DVector<f64>) -> f64 {
        let resid = self.y - self.a.apply(zeta);
        self.a.adjoint(&resid).amax()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub zeta: DVector<f64>,
    /// ‖ζ‖₁ at the returned point.
    pub objective: f64,
    pub status: LpStatus,
    pub iterations: usize,
    /// `max(0, ‖A'(y − Aζ)‖∞ − λ)`.
    pub violation: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn into_result(self) -> Result<Self> {
        match self.status {
            LpStatus::Optimal => Ok(self),
            LpStatus::IterationLimit => Err(Error::IterationLimit(self.iterations)),
            LpStatus::Infeasible => Err(Error::Infeasible),
        }
    }
}

/// Solves the Dantzig selector LP with the dual simplex method.
///
/// `tol` is used both as the primal feasibility and the dual optimality tolerance. The
/// iteration cap is 50 pivots per LP variable.
pub fn solve_dantzig(p: &DantzigProblem<'_>, tol: f64) -> Result<LpSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let m = p.a.m();
    let c = p.a.adjoint(p.y);
    let lambda = p.lambda;
    let zero_feasible = c.amax() <= lambda;
    let (zeta, status, iterations) = if zero_feasible {
        (DVector::zeros(m), LpStatus::Optimal, 0)
    } else {
        let solver = simplex::DualSimplex::new(p.a.gram(), c.as_slice(), lambda, tol);
        let out = solver.solve(50 * 4 * m);
        let zeta = DVector::from_fn(m, |i, _| out.values[i] - out.values[m + i]);
        (zeta, out.status, out.iterations)
    };
    let violation = (p.constraint_value(&zeta) - lambda).max(0.0);
    Ok(LpSolution {
        objective: zeta.lp_norm(1),
        zeta,
        status,
        iterations,
        violation,
    })
}

/// Result of a least-squares fit restricted to a support.
#[derive(Debug, Clone, PartialEq)]
pub struct LsFit {
    /// Length-m estimate, zero off `support`.
    pub x: DVector<f64>,
    /// Support actually used after rank repair.
    pub support: Support,
    /// Indices removed to make the column submatrix full rank.
    pub dropped: Support,
}

/// `(A_T'A_T)⁻¹A_T'y` on `T`, zero elsewhere.
///
/// If `A_T` is column-rank deficient (or |T| > n) the index with the smallest magnitude in
/// the minimum-norm least-squares solution is dropped until the remaining columns are full
/// rank.
pub fn least_squares_on_support(a: &SensingMatrix, y: &DVector<f64>, t: &Support) -> LsFit {
    let cols = select_columns(a.entries(), t.as_slice());
    let min_norm = if t.is_empty() {
        DVector::zeros(0)
    } else {
        cols.clone()
            .svd(true, true)
            .solve(y, 1e-12)
            .unwrap_or_else(|_| DVector::zeros(t.len()))
    };
    least_squares_with_priority(a, y, t, |i| {
        let k = t.position(i).expect("index from the support");
        min_norm[k].abs()
    })
}

/// Like [`least_squares_on_support`] but rank repair drops the index with the smallest
/// `priority(i)` first (ties: the larger index goes first).
pub fn least_squares_with_priority<F: Fn(usize) -> f64>(
    a: &SensingMatrix,
    y: &DVector<f64>,
    t: &Support,
    priority: F,
) -> LsFit {
    let m = a.m();
    let mut kept = t.clone();
    let mut dropped = Support::empty();
    loop {
        if kept.is_empty() {
            return LsFit {
                x: DVector::zeros(m),
                support: kept,
                dropped,
            };
        }
        if kept.len() <= a.n() {
            let cols = select_columns(a.entries(), kept.as_slice());
            if let Some(coef) = full_rank_solve(&cols, y) {
                return LsFit {
                    x: scatter(m, &kept, &coef),
                    support: kept,
                    dropped,
                };
            }
        }
        let victim = kept
            .iter()
            .map(|i| (priority(i), i))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
            .map(|(_, i)| i)
            .expect("kept is non-empty");
        kept.remove(victim);
        dropped.insert(victim);
    }
}

/// Solves the full-rank least-squares problem, or `None` when `cols'cols` has condition
/// number above [`MAX_CONDITION`].
fn full_rank_solve(cols: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = cols.clone().svd(true, true);
    let sv = &svd.singular_values;
    let hi = sv.iter().copied().fold(0.0, f64::max);
    let lo = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if !(lo > 0.0) || (hi / lo).powi(2) > MAX_CONDITION {
        return None;
    }
    svd.solve(y, 0.0).ok()
}

/// Output of the Gauss–Dantzig selector.
#[derive(Debug, Clone)]
pub struct GaussDantzig {
    pub xhat: DVector<f64>,
    pub support: Support,
    pub lp: LpSolution,
}

/// Dantzig selector, support `{i : |ζ_i| > threshold}`, then least squares on it.
pub fn gauss_dantzig(
    p: &DantzigProblem<'_>,
    support_threshold: f64,
    tol: f64,
) -> Result<GaussDantzig> {
    if !(support_threshold >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "support threshold must be non-negative, got {support_threshold}"
        )));
    }
    let lp = solve_dantzig(p, tol)?.into_result()?;
    let candidates: Support = (0..p.a.m())
        .filter(|&i| lp.zeta[i].abs() > support_threshold)
        .collect();
    let fit = least_squares_with_priority(p.a, p.y, &candidates, |i| lp.zeta[i].abs());
    Ok(GaussDantzig {
        xhat: fit.x,
        support: fit.support,
        lp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::generate_gaussian_matrix;

    fn soft(v: f64, lambda: f64) -> f64 {
        v.signum() * (v.abs() - lambda).max(0.0)
    }

    #[test]
    fn large_lambda_gives_zero() {
        let a = generate_gaussian_matrix(5, 9, 1);
        let y = DVector::from_fn(5, |i, _| (i as f64) - 2.0);
        let lambda = a.adjoint(&y).amax();
        let sol = solve_dantzig(&DantzigProblem::new(&a, &y, lambda).unwrap(), DEFAULT_TOL).unwrap();
        assert!(sol.is_optimal());
        assert_eq!(sol.objective, 0.0);
        assert!(sol.zeta.iter().all(|&z| z == 0.0));
    }

    #[test]
    fn identity_soft_thresholds() {
        let a = SensingMatrix::identity(6);
        let y = DVector::from_vec(vec![1.5, -0.2, 0.0, -3.0, 0.7, 0.31]);
        let lambda = 0.3;
        let sol = solve_dantzig(&DantzigProblem::new(&a, &y, lambda).unwrap(), DEFAULT_TOL).unwrap();
        assert!(sol.is_optimal());
        for i in 0..6 {
            assert!((sol.zeta[i] - soft(y[i], lambda)).abs() < 1e-10, "i = {i}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = generate_gaussian_matrix(3, 5, 1);
        let y = DVector::zeros(3);
        assert!(DantzigProblem::new(&a, &y, 0.0).is_err());
        let short = DVector::zeros(2);
        assert!(DantzigProblem::new(&a, &short, 1.0).is_err());
        let p = DantzigProblem::new(&a, &y, 1.0).unwrap();
        assert!(solve_dantzig(&p, 0.0).is_err());
    }

    #[test]
    fn feasible_on_random_instances() {
        for seed in 0..20 {
            let a = generate_gaussian_matrix(20, 50, seed);
            let y = DVector::from_fn(20, |i, _| ((i * 7 + seed as usize) % 11) as f64 - 5.0);
            let lambda = 0.5;
            let p = DantzigProblem::new(&a, &y, lambda).unwrap();
            let sol = solve_dantzig(&p, DEFAULT_TOL).unwrap();
            assert!(sol.is_optimal(), "seed {seed}");
            assert!(p.constraint_value(&sol.zeta) <= lambda * (1.0 + 1e-6), "seed {seed}");
            assert!((sol.objective - sol.zeta.lp_norm(1)).abs() < 1e-9);
        }
    }

    #[test]
    fn ls_empty_and_singleton() {
        let a = generate_gaussian_matrix(4, 7, 3);
        let y = DVector::from_vec(vec![0.3, -1.0, 2.0, 0.5]);
        let fit = least_squares_on_support(&a, &y, &Support::empty());
        assert!(fit.x.iter().all(|&v| v == 0.0));
        let fit = least_squares_on_support(&a, &y, &Support::from_indices([2]));
        let expect = a.entries().column(2).dot(&y);
        assert!((fit.x[2] - expect).abs() < 1e-12);
        assert_eq!(fit.x.iter().filter(|v| **v != 0.0).count(), 1);
    }

    #[test]
    fn ls_recovers_coefficients() {
        let a = generate_gaussian_matrix(10, 20, 4);
        let t = Support::from_indices([1, 5, 9, 17]);
        let c = [1.0, -2.0, 0.5, 3.0];
        let mut x = DVector::zeros(20);
        for (k, i) in t.iter().enumerate() {
            x[i] = c[k];
        }
        let y = a.apply(&x);
        let fit = least_squares_on_support(&a, &y, &t);
        assert!((fit.x - x).amax() < 1e-10);
    }

    #[test]
    fn ls_drops_duplicated_column() {
        let mut e = DMatrix::zeros(3, 4);
        e[(0, 0)] = 1.0;
        e[(0, 1)] = 1.0;
        e[(1, 2)] = 1.0;
        e[(2, 3)] = 1.0;
        let a = SensingMatrix::new(e).unwrap();
        let y = DVector::from_vec(vec![2.0, 1.0, 0.0]);
        let fit = least_squares_with_priority(&a, &y, &Support::from_indices([0, 1, 2]), |i| {
            [5.0, 1.0, 3.0, 0.0][i]
        });
        assert_eq!(fit.dropped.as_slice(), &[1]);
        assert_eq!(fit.support.as_slice(), &[0, 2]);
        assert!((fit.x[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_dantzig_zero_observation() {
        let a = generate_gaussian_matrix(6, 12, 9);
        let y = DVector::zeros(6);
        let p = DantzigProblem::new(&a, &y, 0.1).unwrap();
        let gd = gauss_dantzig(&p, 0.0, DEFAULT_TOL).unwrap();
        assert!(gd.support.is_empty());
        assert!(gd.xhat.iter().all(|&v| v == 0.0));
    }
}
