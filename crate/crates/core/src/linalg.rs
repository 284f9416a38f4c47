//! Small dense helpers shared by the estimators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::support::Support;

/// Largest acceptable condition number before a symmetric system counts as singular.
pub const MAX_CONDITION: f64 = 1e12;

pub fn select_columns(a: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])])
}

/// Principal submatrix `m[idx, idx]`.
pub fn principal(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

pub fn gather(x: &DVector<f64>, support: &Support) -> DVector<f64> {
    DVector::from_iterator(support.len(), support.iter().map(|i| x[i]))
}

/// Length-`m` vector equal to `values` on `support` and zero elsewhere.
pub fn scatter(m: usize, support: &Support, values: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(m);
    for (k, i) in support.iter().enumerate() {
        out[i] = values[k];
    }
    out
}

/// (smallest, largest) eigenvalue of a symmetric matrix.
pub fn sym_extreme_eigenvalues(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let eig = SymmetricEigen::new(m.clone());
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Inverse of a symmetric positive definite matrix through its eigendecomposition.
///
/// Fails with [`Error::IllConditioned`] when the condition number exceeds
/// [`MAX_CONDITION`] or the matrix is not positive definite.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = m.nrows();
    if k == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(m.clone());
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo > 0.0) || hi / lo > MAX_CONDITION || !hi.is_finite() {
        let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        return Err(Error::IllConditioned(cond));
    }
    let v = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(k, k, |r, c| v[(r, c)] / eig.eigenvalues[c]);
    let mut inv = scaled * v.transpose();
    symmetrize(&mut inv);
    Ok(inv)
}

/// Condition number of a symmetric positive semidefinite matrix (infinite when singular).
pub fn sym_condition(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let (lo, hi) = sym_extreme_eigenvalues(m);
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spd_inverse_matches_identity() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let inv = spd_inverse(&m).unwrap();
        let prod = &m * &inv;
        assert!((prod - DMatrix::identity(3, 3)).abs().max() < 1e-12);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(spd_inverse(&m), Err(Error::IllConditioned(_))));
        assert!(sym_condition(&m) > MAX_CONDITION);
    }

    #[test]
    fn scatter_gather_roundtrip() {
        let s = Support::from_indices([1, 4]);
        let v = DVector::from_vec(vec![2.0, -3.0]);
        let x = scatter(6, &s, &v);
        assert_eq!(x[4], -3.0);
        assert_eq!(x[0], 0.0);
        assert_eq!(gather(&x, &s), v);
    }
}
