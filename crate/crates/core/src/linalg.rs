//! Small dense linear-algebra helpers used across the crate.
//!
//! Everything here operates on `nalgebra` dynamic matrices. Norms are the
//! induced 2-norm unless stated otherwise.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

/// Relative rank tolerance: singular values below `RANK_REL_TOL * sigma_max`
/// count as zero. Matches the double-precision noise floor for the problem
/// sizes handled here.
pub const RANK_REL_TOL: f64 = 1e-9;

/// Symmetric part `(M + M^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mt = m.transpose();
    (m + mt) * 0.5
}

/// Induced 2-norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |acc, &s| acc.max(s))
}

/// Eigenvalues of the symmetric part of `m`, unordered.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    nalgebra::SymmetricEigen::new(symmetrize(m)).eigenvalues
}

/// Largest eigenvalue of the symmetric part of `m`.
pub fn lambda_max(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m)
        .iter()
        .fold(f64::NEG_INFINITY, |acc, &v| acc.max(v))
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn lambda_min(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m)
        .iter()
        .fold(f64::INFINITY, |acc, &v| acc.min(v))
}

/// Spectral radius (largest eigenvalue modulus) of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    assert_eq!(m.nrows(), m.ncols(), "spectral radius needs a square matrix");
    m.complex_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, ev| acc.max(ev.norm()))
}

/// Numerical rank with the documented relative tolerance.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().singular_values();
    let smax = sv.iter().fold(0.0_f64, |acc, &s| acc.max(s));
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_REL_TOL * smax).count()
}

/// Right pseudoinverse of a full-row-rank matrix, computed from its SVD with
/// the crate-wide rank tolerance.
///
/// Returns an error when the matrix is row-rank deficient.
pub fn right_pseudoinverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let rows = m.nrows();
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd requested u");
    let vt = svd.v_t.as_ref().expect("svd requested v_t");
    let smax = svd.singular_values.iter().fold(0.0_f64, |acc, &s| acc.max(s));
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_REL_TOL * smax)
        .count();
    if rank < rows {
        return Err(Error::RankDeficient(format!(
            "matrix has numerical row rank {rank} < {rows}"
        )));
    }
    // pinv = V * S^{-1} * U^T restricted to the leading `rank` singular values
    let k = svd.singular_values.len();
    let mut sinv = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        let s = svd.singular_values[i];
        if s > RANK_REL_TOL * smax {
            sinv[(i, i)] = 1.0 / s;
        }
    }
    Ok(vt.transpose() * sinv * u.transpose())
}

/// Symmetric PSD square root via eigendecomposition; negative eigenvalues
/// (roundoff) are clamped to zero.
pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = nalgebra::SymmetricEigen::new(symmetrize(m));
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Inverse symmetric square root of a positive definite matrix.
pub fn sym_inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = nalgebra::SymmetricEigen::new(symmetrize(m));
    let max = eig.eigenvalues.iter().fold(0.0_f64, |a, &v| a.max(v));
    if eig.eigenvalues.iter().any(|&v| v <= RANK_REL_TOL * max) || max <= 0.0 {
        return Err(Error::Singular(
            "inverse square root of a non positive definite matrix".into(),
        ));
    }
    let vals = eig.eigenvalues.map(|v| 1.0 / v.sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose())
}

/// Whether the symmetric part of `m` is positive definite (Cholesky succeeds).
pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    nalgebra::Cholesky::new(symmetrize(m)).is_some()
}

/// Matrix with i.i.d. entries uniform on `[lo, hi]`.
pub fn uniform_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(lo..=hi))
}

/// Vector with i.i.d. entries uniform on `[lo, hi]`.
pub fn uniform_vector<R: Rng + ?Sized>(n: usize, lo: f64, hi: f64, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(lo..=hi))
}

/// Condition number (2-norm) of a square matrix; `inf` when singular.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let smax = sv.iter().fold(0.0_f64, |acc, &s| acc.max(s));
    let smin = sv.iter().fold(f64::INFINITY, |acc, &s| acc.min(s));
    if smin <= 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Stack `top` over `bottom` (matching column counts).
pub fn vstack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(top.ncols(), bottom.ncols(), "vstack column mismatch");
    let mut out = DMatrix::<f64>::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.view_mut((0, 0), (top.nrows(), top.ncols())).copy_from(top);
    out.view_mut((top.nrows(), 0), (bottom.nrows(), bottom.ncols()))
        .copy_from(bottom);
    out
}
