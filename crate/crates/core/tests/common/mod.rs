//! Independent oracles shared by the integration and acceptance tests. None of them call
//! into the code paths they are used to check.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Gaussian elimination with partial pivoting on a small dense system. `None` if singular.
pub fn solve_small(mat: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let k = mat.nrows();
    let mut a = [[0.0f64; 9]; 8];
    for r in 0..k {
        for c in 0..k {
            a[r][c] = mat[(r, c)];
        }
        a[r][k] = rhs[r];
    }
    let scale = mat.amax().max(1e-300);
    for col in 0..k {
        let piv = (col..k).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() <= 1e-10 * scale {
            return None;
        }
        a.swap(col, piv);
        for r in (col + 1)..k {
            let f = a[r][col] / a[col][col];
            for c in col..=k {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let mut s = a[r][k];
        for c in (r + 1)..k {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    Some(DVector::from_vec(x))
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Optimal value of `min ‖ζ‖₁ s.t. ‖c − Gζ‖∞ ≤ λ` by enumerating every vertex of the
/// standard-form LP: a support F, |F| = k ≤ rank, and k tight rows with a chosen side.
pub fn dantzig_vertex_oracle(a: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> f64 {
    let g = a.transpose() * a;
    let c = a.transpose() * y;
    let m = a.ncols();
    let rank = a.nrows().min(m);
    let feasible = |zeta: &DVector<f64>| {
        let viol = (&c - &g * zeta).amax();
        viol <= lambda * (1.0 + 1e-9) + 1e-12
    };
    let mut best = if feasible(&DVector::zeros(m)) { 0.0 } else { f64::INFINITY };
    for k in 1..=rank {
        let row_sets = subsets(m, k);
        for f in subsets(m, k) {
            for rows in &row_sets {
                let sub = DMatrix::from_fn(k, k, |r, cc| g[(rows[r], f[cc])]);
                for signs in 0..(1u32 << k) {
                    let rhs = DVector::from_fn(k, |r, _| {
                        let s = if signs >> r & 1 == 1 { 1.0 } else { -1.0 };
                        c[rows[r]] + s * lambda
                    });
                    let Some(sol) = solve_small(&sub, &rhs) else { break };
                    let mut zeta = DVector::zeros(m);
                    for (q, &i) in f.iter().enumerate() {
                        zeta[i] = sol[q];
                    }
                    let obj = zeta.lp_norm(1);
                    if obj < best && feasible(&zeta) {
                        best = obj;
                    }
                }
            }
        }
    }
    best
}

/// δ_S by direct enumeration with a full symmetric eigendecomposition per subset.
pub fn brute_force_rip(a: &DMatrix<f64>, s: usize) -> f64 {
    let mut worst = 0.0f64;
    for t in subsets(a.ncols(), s) {
        let cols = DMatrix::from_fn(a.nrows(), s, |r, c| a[(r, t[c])]);
        let eig = SymmetricEigen::new(cols.transpose() * &cols);
        for &l in eig.eigenvalues.iter() {
            worst = worst.max((l - 1.0).abs());
        }
    }
    worst
}

/// θ_{S,S'} by enumerating disjoint pairs and taking the largest singular value.
pub fn brute_force_roc(a: &DMatrix<f64>, s: usize, sp: usize) -> f64 {
    let m = a.ncols();
    let mut worst = 0.0f64;
    for t in subsets(m, s) {
        for tp in subsets(m, sp) {
            if tp.iter().any(|i| t.contains(i)) {
                continue;
            }
            let at = DMatrix::from_fn(a.nrows(), s, |r, c| a[(r, t[c])]);
            let atp = DMatrix::from_fn(a.nrows(), sp, |r, c| a[(r, tp[c])]);
            let cross = at.transpose() * atp;
            let sv = cross.svd(false, false).singular_values;
            worst = worst.max(sv.max());
        }
    }
    worst
}

/// Gaussian upper tail by composite Simpson integration of the density on [z, z + 40].
pub fn q_quadrature(z: f64) -> f64 {
    let upper = z.max(0.0) + 40.0;
    let lower = z;
    let n = 200_000usize;
    let h = (upper - lower) / n as f64;
    let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = pdf(lower) + pdf(upper);
    for i in 1..n {
        let x = lower + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(x);
    }
    s * h / 3.0
}

/// Root of `q_quadrature(z) = p` by bisection.
pub fn q_inverse_bisection(p: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if q_quadrature(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One predict+update of the full m-dimensional Kalman filter in covariance form with
/// `Q = q·I_T` (zero outside `t`).
pub fn full_kf_step(
    a: &DMatrix<f64>,
    x_prev: &DVector<f64>,
    p_prev: &DMatrix<f64>,
    t: &[usize],
    q: f64,
    r: f64,
    y: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let m = a.ncols();
    let n = a.nrows();
    let mut p_pred = p_prev.clone();
    for &i in t {
        p_pred[(i, i)] += q;
    }
    let s = a * &p_pred * a.transpose() + DMatrix::identity(n, n) * r;
    let s_inv = s.try_inverse().expect("innovation is invertible");
    let k = &p_pred * a.transpose() * s_inv;
    let ika = DMatrix::identity(m, m) - &k * a;
    let x = &ika * x_prev + &k * y;
    let p = ika * p_pred;
    (x, p)
}
