//! Measurement matrices and their restricted isometry / orthogonality constants.
//!
//! The constants are computed by exhaustive subset enumeration, so they are exact but only
//! feasible for small signal lengths.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{principal, sym_extreme_eigenvalues};
use crate::par;
use crate::rng;

/// Unit column norm tolerance.
pub const COLUMN_NORM_TOL: f64 = 1e-10;

/// Default cap on the number of subsets (or subset pairs) an enumeration may visit.
pub const DEFAULT_BUDGET: u128 = 2_000_000;

/// The n×m measurement operator with unit-norm columns.
#[derive(Debug, Clone)]
pub struct SensingMatrix {
    entries: DMatrix<f64>,
    gram: OnceLock<DMatrix<f64>>,
}

impl SensingMatrix {
    /// Wraps `entries`, checking that every column has unit norm.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::Dimension("sensing matrix must be non-empty".into()));
        }
        for (j, col) in entries.column_iter().enumerate() {
            let norm = col.norm();
            if (norm - 1.0).abs() > COLUMN_NORM_TOL {
                return Err(Error::InvalidParameter(format!(
                    "column {j} has norm {norm}, expected 1"
                )));
            }
        }
        Ok(Self {
            entries,
            gram: OnceLock::new(),
        })
    }

    /// Scales every column of `entries` to unit norm.
    pub fn normalized(mut entries: DMatrix<f64>) -> Result<Self> {
        for (j, mut col) in entries.column_iter_mut().enumerate() {
            let norm = col.norm();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::InvalidParameter(format!("column {j} cannot be normalized")));
            }
            col /= norm;
        }
        Self::new(entries)
    }

    pub fn identity(m: usize) -> Self {
        Self::new(DMatrix::identity(m, m)).expect("identity has unit columns")
    }

    /// Measurement count.
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// Signal length.
    pub fn m(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// `A'A`, computed once and shared by every solve against this matrix.
    pub fn gram(&self) -> &DMatrix<f64> {
        self.gram
            .get_or_init(|| self.entries.transpose() * &self.entries)
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.entries * x
    }

    /// `A'v`.
    pub fn adjoint(&self, v: &DVector<f64>) -> DVector<f64> {
        self.entries.tr_mul(v)
    }

    /// Induced 1-norm: the largest absolute column sum.
    pub fn induced_one_norm(&self) -> f64 {
        self.entries
            .column_iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl PartialEq for SensingMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

/// I.i.d. standard normal entries with each column scaled to unit norm.
pub fn generate_gaussian_matrix(n: usize, m: usize, seed: u64) -> SensingMatrix {
    generate_gaussian_with(n, m, &mut rng::seeded(seed))
}

pub(crate) fn generate_gaussian_with<R: rand::Rng + ?Sized>(
    n: usize,
    m: usize,
    rng: &mut R,
) -> SensingMatrix {
    assert!(n >= 1 && m >= 1, "matrix dimensions must be positive");
    loop {
        let entries = DMatrix::from_fn(n, m, |_, _| StandardNormal.sample(rng));
        // A column of exact zeros has probability zero; redraw if it ever happens.
        if let Ok(a) = SensingMatrix::normalized(entries) {
            return a;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RipReport {
    pub order: usize,
    pub delta: f64,
    pub subset_count: u128,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocReport {
    pub orders: (usize, usize),
    pub theta: f64,
    pub pair_count: u128,
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Calls `f` on every increasing `k`-subset of `pool`, reusing one buffer.
fn for_each_subset<F: FnMut(&[usize])>(pool: &[usize], k: usize, mut f: F) {
    let n = pool.len();
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut chosen: Vec<usize> = idx.iter().map(|&i| pool[i]).collect();
    loop {
        f(&chosen);
        // advance to the next combination in lexicographic order
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        if idx[i] == i + n - k {
            return;
        }
        idx[i] += 1;
        for j in (i + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
        for j in i..k {
            chosen[j] = pool[idx[j]];
        }
    }
}

fn check_budget(count: u128, budget: u128) -> Result<()> {
    if count > budget {
        Err(Error::BudgetExceeded { count, budget })
    } else {
        Ok(())
    }
}

/// Exact `δ_S` with the default enumeration budget.
pub fn rip_constant(a: &SensingMatrix, order: usize) -> Result<RipReport> {
    rip_constant_with_budget(a, order, DEFAULT_BUDGET)
}

/// `δ_S = max_T max(λ_max(A_T'A_T) − 1, 1 − λ_min(A_T'A_T))` over all `|T| = S`.
pub fn rip_constant_with_budget(a: &SensingMatrix, order: usize, budget: u128) -> Result<RipReport> {
    let m = a.m();
    if order == 0 || order > m {
        return Err(Error::InvalidParameter(format!("RIP order {order} outside 1..={m}")));
    }
    let count = binomial(m, order);
    check_budget(count, budget)?;
    let gram = a.gram();

    // Split the enumeration on the smallest index of the subset.
    let per_first = par::map_indexed(m - order + 1, |first| {
        let pool: Vec<usize> = ((first + 1)..m).collect();
        let mut worst = 0.0f64;
        let mut subset = Vec::with_capacity(order);
        for_each_subset(&pool, order - 1, |rest| {
            subset.clear();
            subset.push(first);
            subset.extend_from_slice(rest);
            let (lo, hi) = sym_extreme_eigenvalues(&principal(gram, &subset));
            worst = worst.max(hi - 1.0).max(1.0 - lo);
        });
        worst
    });
    let delta = per_first.into_iter().fold(0.0, f64::max).max(0.0);
    Ok(RipReport {
        order,
        delta,
        subset_count: count,
    })
}

/// Exact `θ_{S,S'}` with the default enumeration budget.
pub fn roc_constant(a: &SensingMatrix, s: usize, sp: usize) -> Result<RocReport> {
    roc_constant_with_budget(a, s, sp, DEFAULT_BUDGET)
}

/// `θ_{S,S'} = max ‖A_T'A_{T'}‖` over disjoint `|T| = S`, `|T'| = S'`.
pub fn roc_constant_with_budget(
    a: &SensingMatrix,
    s: usize,
    sp: usize,
    budget: u128,
) -> Result<RocReport> {
    let m = a.m();
    if s == 0 || sp == 0 || s + sp > m {
        return Err(Error::InvalidParameter(format!(
            "ROC orders ({s}, {sp}) need 1 ≤ S, S' and S + S' ≤ {m}"
        )));
    }
    // Enumerate with the smaller order outside; the pair family and the norms are the same
    // either way, which makes θ_{S,S'} = θ_{S',S} exact.
    let (outer, inner) = if s <= sp { (s, sp) } else { (sp, s) };
    let count = binomial(m, outer) * binomial(m - outer, inner);
    check_budget(count, budget)?;
    let gram = a.gram();

    let per_first = par::map_indexed(m - outer + 1, |first| {
        let pool: Vec<usize> = ((first + 1)..m).collect();
        let mut worst = 0.0f64;
        let mut t = Vec::with_capacity(outer);
        let mut complement = Vec::with_capacity(m);
        for_each_subset(&pool, outer - 1, |rest| {
            t.clear();
            t.push(first);
            t.extend_from_slice(rest);
            complement.clear();
            complement.extend((0..m).filter(|i| !t.contains(i)));
            for_each_subset(&complement, inner, |tp| {
                // ‖X‖² = λ_max(X X') with X = G[T, T'] (outer × outer).
                let cross = DMatrix::from_fn(t.len(), tp.len(), |r, c| gram[(t[r], tp[c])]);
                let xxt = &cross * cross.transpose();
                let (_, hi) = sym_extreme_eigenvalues(&xxt);
                worst = worst.max(hi.max(0.0).sqrt());
            });
        });
        worst
    });
    let theta = per_first.into_iter().fold(0.0, f64::max);
    Ok(RocReport {
        orders: (s, sp),
        theta,
        pair_count: count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CriticalSparsities {
    /// Largest S with δ_S < 1/2.
    pub s_star: usize,
    /// Largest S with δ_{2S} + θ_{S,2S} < 1.
    pub s_star_star: usize,
}

/// Scans S upwards to `s_limit`; both defining quantities are nondecreasing in S so the
/// scan stops at the first failure. θ_{S,2S} is taken as 0 when no disjoint pair exists
/// (3S > m).
pub fn critical_sparsities(a: &SensingMatrix, s_limit: usize) -> Result<CriticalSparsities> {
    critical_sparsities_with_budget(a, s_limit, DEFAULT_BUDGET)
}

pub fn critical_sparsities_with_budget(
    a: &SensingMatrix,
    s_limit: usize,
    budget: u128,
) -> Result<CriticalSparsities> {
    let m = a.m();
    let mut s_star = 0;
    for s in 1..=s_limit.min(m) {
        if rip_constant_with_budget(a, s, budget)?.delta < 0.5 {
            s_star = s;
        } else {
            break;
        }
    }
    let mut s_star_star = 0;
    for s in 1..=s_limit {
        if 2 * s > m {
            break;
        }
        if star_star_margin(a, s, budget)? < 1.0 {
            s_star_star = s;
        } else {
            break;
        }
    }
    Ok(CriticalSparsities { s_star, s_star_star })
}

/// `δ_{2S} + θ_{S,2S}`, the quantity bounded by 1 in the definition of S**.
pub fn star_star_margin(a: &SensingMatrix, s: usize, budget: u128) -> Result<f64> {
    let delta = rip_constant_with_budget(a, 2 * s, budget)?.delta;
    let theta = if 3 * s <= a.m() {
        roc_constant_with_budget(a, s, 2 * s, budget)?.theta
    } else {
        0.0
    };
    Ok(delta + theta)
}

/// Source of RIP/ROC constants by order, used by the bound diagnostics.
pub trait RipOracle {
    fn delta(&self, order: usize) -> Result<f64>;
    fn theta(&self, s: usize, sp: usize) -> Result<f64>;
}

/// Exhaustive constants with memoization. Order 0 yields 0 by convention.
pub struct ExhaustiveRip<'a> {
    a: &'a SensingMatrix,
    budget: u128,
    deltas: Mutex<HashMap<usize, f64>>,
    thetas: Mutex<HashMap<(usize, usize), f64>>,
}

impl<'a> ExhaustiveRip<'a> {
    pub fn new(a: &'a SensingMatrix) -> Self {
        Self::with_budget(a, DEFAULT_BUDGET)
    }

    pub fn with_budget(a: &'a SensingMatrix, budget: u128) -> Self {
        Self {
            a,
            budget,
            deltas: Mutex::new(HashMap::new()),
            thetas: Mutex::new(HashMap::new()),
        }
    }
}

impl RipOracle for ExhaustiveRip<'_> {
    fn delta(&self, order: usize) -> Result<f64> {
        if order == 0 {
            return Ok(0.0);
        }
        if let Some(&d) = self.deltas.lock().unwrap().get(&order) {
            return Ok(d);
        }
        let d = rip_constant_with_budget(self.a, order, self.budget)?.delta;
        self.deltas.lock().unwrap().insert(order, d);
        Ok(d)
    }

    fn theta(&self, s: usize, sp: usize) -> Result<f64> {
        if s == 0 || sp == 0 {
            return Ok(0.0);
        }
        let key = (s.min(sp), s.max(sp));
        if let Some(&t) = self.thetas.lock().unwrap().get(&key) {
            return Ok(t);
        }
        let t = roc_constant_with_budget(self.a, key.0, key.1, self.budget)?.theta;
        self.thetas.lock().unwrap().insert(key, t);
        Ok(t)
    }
}
