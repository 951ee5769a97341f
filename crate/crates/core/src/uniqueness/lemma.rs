//! Three equivalent characterizations of uniqueness within the optical passband, each computed
//! by its own route so that they can be checked against one another.

use nalgebra::DVector;

use crate::error::Result;
use crate::linalg::{null_space, numerical_rank, singular_values, rank_from_sigma, CMatrix};

/// Every passband basis direction `(I_Ns (x) V) e_j` is returned unchanged by the minimum-norm
/// least-squares solve of `Phi p = Phi (I (x) V) e_j`.
pub fn passband_recovery_unique(phi: &CMatrix, v: &CMatrix, ns: usize, tol: f64) -> Result<bool> {
    let nz = v.nrows();
    let r = v.ncols();
    let svd = crate::linalg::svd(phi)?;
    let rank = rank_from_sigma(&svd.sigma, tol);
    let u = svd.u.columns(0, rank);
    let vv = svd.v.columns(0, rank);
    for s in 0..ns {
        for j in 0..r {
            let mut x = DVector::zeros(ns * nz);
            x.rows_mut(s * nz, nz).copy_from(&v.column(j));
            let data = phi * &x;
            let mut coeff = u.adjoint() * data;
            for (c, &sig) in coeff.iter_mut().zip(&svd.sigma) {
                *c /= sig;
            }
            let recovered = &vv * coeff;
            if (recovered - &x).norm() > 1e-6 * x.norm() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// `null(Phi)` equals the block null space `I_Ns (x) null(A)`, whose dimension is `Ns (Nz - r)`.
pub fn solution_nullspace_matches(phi: &CMatrix, v: &CMatrix, ns: usize, tol: f64) -> Result<bool> {
    let nz = v.nrows();
    let r = v.ncols();
    let null = null_space(phi, tol)?;
    if null.ncols() != ns * (nz - r) {
        return Ok(false);
    }
    // The block null space always lies inside null(Phi); check that its basis is captured.
    let kernel_null = null_space(&v.adjoint(), tol)?;
    let mut block = CMatrix::zeros(ns * nz, ns * kernel_null.ncols());
    for s in 0..ns {
        block
            .view_mut((s * nz, s * kernel_null.ncols()), (nz, kernel_null.ncols()))
            .copy_from(&kernel_null);
    }
    if block.ncols() == 0 {
        return Ok(true);
    }
    let residual = &block - &null * (null.adjoint() * &block);
    Ok(singular_values(&residual)?.first().copied().unwrap_or(0.0) < 1e-6)
}

/// `rank(Phi~) = Ns r`.
pub fn restricted_rank_full(phi_tilde: &CMatrix, ns: usize, r: usize, tol: f64) -> Result<bool> {
    Ok(numerical_rank(phi_tilde, tol)? == ns * r)
}
