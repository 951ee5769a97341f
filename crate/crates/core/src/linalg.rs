//! Dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Default relative singular-value threshold for rank decisions.
pub const RANK_TOL: f64 = 1e-8;

/// Thin SVD with singular values sorted in decreasing order.
pub struct SortedSvd {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    /// Right singular vectors as columns (`n x min(m, n)`).
    pub v: CMatrix,
}

pub fn svd(a: &CMatrix) -> Result<SortedSvd> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(SortedSvd {
            u: CMatrix::zeros(a.nrows(), 0),
            sigma: Vec::new(),
            v: CMatrix::zeros(a.ncols(), 0),
        });
    }
    let svd = to_faer(a)?.thin_svd().map_err(|_| Error::numerical("SVD did not converge"))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    Ok(SortedSvd {
        u: CMatrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)]),
        sigma: s.iter().map(|z| z.re).collect(),
        v: CMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)]),
    })
}

pub fn singular_values(a: &CMatrix) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vec::new());
    }
    to_faer(a)?
        .singular_values()
        .map_err(|_| Error::numerical("SVD did not converge"))
}

fn to_faer(a: &CMatrix) -> Result<faer::Mat<Complex64>> {
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::numerical("non-finite matrix entry"));
    }
    Ok(faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)]))
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn rank_from_sigma(sigma: &[f64], rel_tol: f64) -> usize {
    match sigma.first() {
        Some(&s0) if s0 > 0.0 => sigma.iter().filter(|&&s| s > rel_tol * s0).count(),
        _ => 0,
    }
}

pub fn numerical_rank(a: &CMatrix, rel_tol: f64) -> Result<usize> {
    Ok(rank_from_sigma(&singular_values(a)?, rel_tol))
}

/// Rank with an absolute threshold scaled by a reference magnitude rather than by the matrix's
/// own largest singular value, so that an all-zero submatrix of a larger system has rank 0.
pub fn rank_with_reference(a: &CMatrix, reference: f64, rel_tol: f64) -> Result<usize> {
    let sigma = singular_values(a)?;
    Ok(sigma.iter().filter(|&&s| s > rel_tol * reference).count())
}

/// Ratio `sigma_rank / sigma_(rank+1)` at the rank cut; infinite when nothing lies below it.
pub fn spectral_gap(sigma: &[f64], rank: usize) -> f64 {
    if rank == 0 || rank >= sigma.len() {
        return f64::INFINITY;
    }
    let below = sigma[rank];
    if below == 0.0 {
        f64::INFINITY
    } else {
        sigma[rank - 1] / below
    }
}

/// Orthonormal basis of the null space of `a` (columns), using the relative threshold.
pub fn null_space(a: &CMatrix, rel_tol: f64) -> Result<CMatrix> {
    let n = a.ncols();
    // Pad with zero rows so that the thin SVD returns a full set of right singular vectors.
    let padded = if a.nrows() < n {
        let mut p = CMatrix::zeros(n, n);
        p.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = svd(&padded)?;
    let rank = rank_from_sigma(&svd.sigma, rel_tol);
    Ok(svd.v.columns(rank, n - rank).into_owned())
}

/// Cosines of the principal angles between the column spans of two orthonormal bases.
pub fn principal_cosines(q1: &CMatrix, q2: &CMatrix) -> Result<Vec<f64>> {
    if q1.ncols() == 0 || q2.ncols() == 0 {
        return Ok(Vec::new());
    }
    singular_values(&(q1.adjoint() * q2))
}

/// Largest principal angle (radians) between two subspaces of equal dimension.
pub fn max_principal_angle(q1: &CMatrix, q2: &CMatrix) -> Result<f64> {
    if q1.ncols() != q2.ncols() {
        return Ok(std::f64::consts::FRAC_PI_2);
    }
    let cos = principal_cosines(q1, q2)?;
    Ok(cos
        .iter()
        .map(|c| c.clamp(0.0, 1.0).acos())
        .fold(0.0, f64::max))
}

pub fn select_rows(a: &CMatrix, rows: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Standard complex inner product `sum conj(a_i) b_i`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}
