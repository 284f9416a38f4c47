//! Revised dual simplex specialised to the Dantzig-selector LP.
//!
//! With `G = A'A`, `c = A'y`, `ζ = u − v` the program is
//!
//! ```text
//! min 1'u + 1'v
//!  s.t.  G u − G v + s⁺ = c + λ
//!       −G u + G v + s⁻ = λ − c        u, v, s⁺, s⁻ ≥ 0
//! ```
//!
//! The all-slack basis has reduced costs 1 on every structural column, so it is dual
//! feasible from the start and no phase one is needed; the dual simplex only has to
//! repair rows with `|c_i| > λ`. `B⁻¹` is kept column-wise and only columns that differ
//! from the identity are stored, so a pivot costs O(rows × touched columns).

use nalgebra::DMatrix;

use super::LpStatus;

const PIVOT_TOL: f64 = 1e-9;
const REINVERT_EVERY: usize = 64;
/// Consecutive dual-degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_RUN: usize = 50;

pub(crate) struct Outcome {
    pub values: Vec<f64>,
    pub status: LpStatus,
    pub iterations: usize,
}

pub(crate) struct DualSimplex<'a> {
    gram: &'a DMatrix<f64>,
    m: usize,
    rows: usize,
    b: Vec<f64>,
    /// Variable held by each basis slot.
    basis: Vec<usize>,
    /// Slot of each variable, `NONBASIC` when not basic.
    slot: Vec<usize>,
    /// Columns of B⁻¹ (indexed by constraint row). Empty means the identity column.
    binv: Vec<Vec<f64>>,
    touched: Vec<usize>,
    xb: Vec<f64>,
    reduced: Vec<f64>,
    feas_tol: f64,
    opt_tol: f64,
    bland: bool,
}

const NONBASIC: usize = usize::MAX;

impl<'a> DualSimplex<'a> {
    pub fn new(gram: &'a DMatrix<f64>, c: &[f64], lambda: f64, tol: f64) -> Self {
        let m = c.len();
        let rows = 2 * m;
        let mut b = Vec::with_capacity(rows);
        b.extend(c.iter().map(|ci| ci + lambda));
        b.extend(c.iter().map(|ci| lambda - ci));
        let mut slot = vec![NONBASIC; 4 * m];
        for r in 0..rows {
            slot[2 * m + r] = r;
        }
        let mut reduced = vec![0.0; 4 * m];
        reduced[..2 * m].iter_mut().for_each(|d| *d = 1.0);
        Self {
            gram,
            m,
            rows,
            xb: b.clone(),
            b,
            basis: (2 * m..4 * m).collect(),
            slot,
            binv: vec![Vec::new(); rows],
            touched: Vec::new(),
            reduced,
            feas_tol: tol,
            opt_tol: tol,
            bland: false,
        }
    }

    /// Coefficient of variable `var` in constraint row `row`.
    fn coeff(&self, row: usize, var: usize) -> f64 {
        let m = self.m;
        if var >= 2 * m {
            return if var - 2 * m == row { 1.0 } else { 0.0 };
        }
        let (i, sign) = if var < m { (var, 1.0) } else { (var - m, -1.0) };
        if row < m {
            sign * self.gram[(row, i)]
        } else {
            -sign * self.gram[(row - m, i)]
        }
    }

    fn column(&self, var: usize) -> Vec<f64> {
        let m = self.m;
        let mut col = vec![0.0; self.rows];
        if var >= 2 * m {
            col[var - 2 * m] = 1.0;
            return col;
        }
        let (i, sign) = if var < m { (var, 1.0) } else { (var - m, -1.0) };
        let g = self.gram.column(i);
        for k in 0..m {
            col[k] = sign * g[k];
            col[m + k] = -sign * g[k];
        }
        col
    }

    /// `B⁻¹ a` for a dense constraint column `a`.
    fn ftran(&self, a: &[f64]) -> Vec<f64> {
        let mut out = a.to_vec();
        for &j in &self.touched {
            let coef = a[j];
            if coef != 0.0 {
                let col = &self.binv[j];
                for (o, &v) in out.iter_mut().zip(col.iter()) {
                    *o += coef * v;
                }
                out[j] -= coef;
            }
        }
        out
    }

    /// Row `r` of B⁻¹ as (column, value) pairs.
    fn btran_unit(&self, r: usize) -> Vec<(usize, f64)> {
        let mut rho = Vec::with_capacity(self.touched.len() + 1);
        if self.binv[r].is_empty() {
            rho.push((r, 1.0));
        }
        for &j in &self.touched {
            let v = self.binv[j][r];
            if v != 0.0 {
                rho.push((j, v));
            }
        }
        rho
    }

    /// `α_j = (row vector) · a_j` for every variable, given a sparse row vector over rows.
    fn price(&self, row: &[(usize, f64)]) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        for &(j, v) in row {
            if j < m {
                w[j] += v;
            } else {
                w[j - m] -= v;
            }
        }
        let mut g = vec![0.0; m];
        for (k, &wk) in w.iter().enumerate() {
            if wk != 0.0 {
                let col = self.gram.column(k);
                for (gi, &c) in g.iter_mut().zip(col.iter()) {
                    *gi += wk * c;
                }
            }
        }
        let mut alpha = vec![0.0; 4 * m];
        for i in 0..m {
            alpha[i] = g[i];
            alpha[m + i] = -g[i];
        }
        for &(j, v) in row {
            alpha[2 * m + j] = v;
        }
        alpha
    }

    fn leaving_slot(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (p, &x) in self.xb.iter().enumerate() {
            if x >= -self.feas_tol {
                continue;
            }
            best = match best {
                None => Some(p),
                Some(q) => {
                    let better = if self.bland {
                        self.basis[p] < self.basis[q]
                    } else {
                        x < self.xb[q]
                    };
                    if better {
                        Some(p)
                    } else {
                        Some(q)
                    }
                }
            };
        }
        best
    }

    fn entering(&self, alpha: &[f64]) -> Option<usize> {
        let mut best_ratio = f64::INFINITY;
        for (j, &a) in alpha.iter().enumerate() {
            if self.slot[j] == NONBASIC && a < -PIVOT_TOL {
                let ratio = self.reduced[j].max(0.0) / -a;
                best_ratio = best_ratio.min(ratio);
            }
        }
        if !best_ratio.is_finite() {
            return None;
        }
        let slack = 1e-12 * (1.0 + best_ratio);
        let mut chosen: Option<usize> = None;
        for (j, &a) in alpha.iter().enumerate() {
            if self.slot[j] != NONBASIC || a >= -PIVOT_TOL {
                continue;
            }
            let ratio = self.reduced[j].max(0.0) / -a;
            if ratio > best_ratio + slack {
                continue;
            }
            chosen = match chosen {
                None => Some(j),
                // Bland: first index wins. Otherwise prefer the largest pivot magnitude.
                Some(q) if !self.bland && a.abs() > alpha[q].abs() => Some(j),
                keep => keep,
            };
        }
        chosen
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64], col: &[f64]) {
        let piv = col[r];
        let theta_d = self.reduced[q] / alpha[q];
        for (j, d) in self.reduced.iter_mut().enumerate() {
            if self.slot[j] == NONBASIC {
                *d -= theta_d * alpha[j];
            }
        }
        let leaving = self.basis[r];
        self.reduced[leaving] = -theta_d;
        self.reduced[q] = 0.0;

        let theta_p = self.xb[r] / piv;
        for (x, &c) in self.xb.iter_mut().zip(col.iter()) {
            *x -= theta_p * c;
        }
        self.xb[r] = theta_p;

        if self.binv[r].is_empty() {
            let mut e = vec![0.0; self.rows];
            e[r] = 1.0;
            self.binv[r] = e;
            self.touched.push(r);
        }
        for &j in &self.touched {
            let bj = &mut self.binv[j];
            let f = bj[r] / piv;
            if f == 0.0 {
                continue;
            }
            for (v, &c) in bj.iter_mut().zip(col.iter()) {
                *v -= c * f;
            }
            bj[r] = f;
        }

        self.slot[leaving] = NONBASIC;
        self.slot[q] = r;
        self.basis[r] = q;
    }

    /// Rebuilds B⁻¹, basic values and reduced costs from the current basis.
    ///
    /// Only the k structural columns are non-trivial, so everything follows from the
    /// k×k block of the constraint matrix on the rows whose slacks are nonbasic.
    fn reinvert(&mut self) -> bool {
        let m = self.m;
        let structural: Vec<(usize, usize)> = self
            .basis
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v < 2 * m)
            .map(|(p, &v)| (p, v))
            .collect();
        let tight_rows: Vec<usize> = (0..self.rows)
            .filter(|&i| self.slot[2 * m + i] == NONBASIC)
            .collect();
        let k = structural.len();
        if tight_rows.len() != k {
            return false;
        }
        let core = DMatrix::from_fn(k, k, |a, l| self.coeff(tight_rows[a], structural[l].1));
        let core_inv = if k == 0 {
            DMatrix::zeros(0, 0)
        } else {
            match core.lu().try_inverse() {
                Some(inv) => inv,
                None => return false,
            }
        };

        for j in self.touched.drain(..) {
            self.binv[j] = Vec::new();
        }
        // Columns for the tight rows.
        for (a, &row) in tight_rows.iter().enumerate() {
            let mut col = vec![0.0; self.rows];
            for (l, &(p, _)) in structural.iter().enumerate() {
                col[p] = core_inv[(l, a)];
            }
            for i in 0..self.rows {
                let p = self.slot[2 * m + i];
                if p == NONBASIC {
                    continue;
                }
                let mut s = 0.0;
                for (l, &(_, var)) in structural.iter().enumerate() {
                    s += self.coeff(i, var) * core_inv[(l, a)];
                }
                col[p] = -s;
            }
            self.binv[row] = col;
            self.touched.push(row);
        }
        // Basic slack sitting in a slot other than its own row.
        for i in 0..self.rows {
            let p = self.slot[2 * m + i];
            if p != NONBASIC && p != i {
                let mut col = vec![0.0; self.rows];
                col[p] = 1.0;
                self.binv[i] = col;
                self.touched.push(i);
            }
        }

        self.xb = self.ftran(&self.b);

        // π = c_B' B⁻¹, nonzero only on the tight rows.
        let mut pi = vec![0.0; self.rows];
        for (a, &row) in tight_rows.iter().enumerate() {
            pi[row] = (0..k).map(|l| core_inv[(l, a)]).sum();
        }
        let sparse_pi: Vec<(usize, f64)> = tight_rows.iter().map(|&r| (r, pi[r])).collect();
        let along = self.price(&sparse_pi);
        for j in 0..4 * m {
            let cost = if j < 2 * m { 1.0 } else { 0.0 };
            self.reduced[j] = if self.slot[j] == NONBASIC { cost - along[j] } else { 0.0 };
        }
        true
    }

    pub fn solve(mut self, max_iterations: usize) -> Outcome {
        let mut iterations = 0;
        let mut since_reinvert = 0;
        let mut degenerate = 0;
        let status = loop {
            let r = match self.leaving_slot() {
                Some(r) => r,
                None => {
                    if since_reinvert == 0 {
                        break LpStatus::Optimal;
                    }
                    if !self.reinvert() {
                        break LpStatus::Infeasible;
                    }
                    since_reinvert = 0;
                    continue;
                }
            };
            if iterations >= max_iterations {
                break LpStatus::IterationLimit;
            }
            let rho = self.btran_unit(r);
            let alpha = self.price(&rho);
            let q = match self.entering(&alpha) {
                Some(q) => q,
                None => {
                    // Dual unbounded means primal infeasible, which cannot happen for
                    // λ > 0; retry once from a fresh factorization before giving up.
                    if since_reinvert > 0 && self.reinvert() {
                        since_reinvert = 0;
                        continue;
                    }
                    break LpStatus::Infeasible;
                }
            };
            let col = self.ftran(&self.column(q));
            if (col[r] - alpha[q]).abs() > 1e-7 * (1.0 + alpha[q].abs()) && since_reinvert > 0 {
                if !self.reinvert() {
                    break LpStatus::Infeasible;
                }
                since_reinvert = 0;
                continue;
            }
            if self.reduced[q].abs() <= self.opt_tol * 1e-4 {
                degenerate += 1;
                if degenerate > DEGENERATE_RUN {
                    self.bland = true;
                }
            } else {
                degenerate = 0;
            }
            self.pivot(r, q, &alpha, &col);
            iterations += 1;
            since_reinvert += 1;
            if since_reinvert >= REINVERT_EVERY {
                if !self.reinvert() {
                    break LpStatus::Infeasible;
                }
                since_reinvert = 0;
            }
        };
        let mut values = vec![0.0; 4 * self.m];
        for (p, &var) in self.basis.iter().enumerate() {
            values[var] = self.xb[p];
        }
        Outcome {
            values,
            status,
            iterations,
        }
    }
}
