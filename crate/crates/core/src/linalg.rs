//! Dense SVD and Hermitian eigensolvers.
//!
//! Matrices stay `nalgebra` types across the crate; the factorizations are
//! delegated to `faer`, whose complex SVD is reliable on exactly
//! rank-deficient inputs such as far-field channels.

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::{CMatrix, C64};

fn to_faer(m: &CMatrix) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, C64>) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Decomposition(format!("{what} returned non-finite values")))
    }
}

/// Thin SVD `H = U·diag(σ)·Vᴴ`, singular values descending.
pub(crate) fn svd(h: &CMatrix) -> Result<(Vec<f64>, CMatrix, CMatrix)> {
    let f = to_faer(h);
    let svd = f
        .thin_svd()
        .map_err(|e| Error::Decomposition(format!("SVD did not converge: {e:?}")))?;
    let s: Vec<f64> = svd.S().column_vector().iter().map(|v| v.re).collect();
    check_finite(&s, "SVD")?;
    let (u, v) = (from_faer(svd.U()), from_faer(svd.V()));
    // faer already sorts descending; keep the contract explicit
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    if order.iter().enumerate().all(|(i, &o)| i == o) {
        return Ok((s, u, v));
    }
    let s_sorted = order.iter().map(|&i| s[i]).collect();
    let u_sorted = CMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v_sorted = CMatrix::from_fn(v.nrows(), order.len(), |r, c| v[(r, order[c])]);
    Ok((s_sorted, u_sorted, v_sorted))
}

/// Singular values only, descending.
pub(crate) fn singular_values(h: &CMatrix) -> Result<Vec<f64>> {
    let mut s = to_faer(h)
        .singular_values()
        .map_err(|e| Error::Decomposition(format!("SVD did not converge: {e:?}")))?;
    check_finite(&s, "SVD")?;
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Eigenvalues of a Hermitian matrix, descending. Only the lower triangle is read.
pub(crate) fn hermitian_eigenvalues(a: &CMatrix) -> Result<Vec<f64>> {
    let mut e = to_faer(a)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Decomposition(format!("Hermitian eigen-solver did not converge: {e:?}")))?;
    check_finite(&e, "Hermitian eigen-solver")?;
    e.sort_by(|a, b| b.total_cmp(a));
    Ok(e)
}

/// Eigenpairs of a Hermitian matrix, descending; eigenvectors are columns.
pub(crate) fn hermitian_eigen(a: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let eig = to_faer(a)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Decomposition(format!("Hermitian eigen-solver did not converge: {e:?}")))?;
    let values: Vec<f64> = eig.S().column_vector().iter().map(|v| v.re).collect();
    check_finite(&values, "Hermitian eigen-solver")?;
    let vectors = eig.U();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let sorted = order.iter().map(|&i| values[i]).collect();
    let vecs = CMatrix::from_fn(vectors.nrows(), order.len(), |r, c| vectors[(r, order[c])]);
    Ok((sorted, vecs))
}
