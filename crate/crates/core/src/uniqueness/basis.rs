use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::{khatri_rao, repeat_h};
use crate::linalg::{max_principal_angle, rank_from_sigma, spectral_gap, svd, CMatrix};
use crate::spectra::SpectraMatrix;

/// Orthonormal basis `V` (`Nz x r`) of the complement of the kernel null space.
#[derive(Clone, Debug)]
pub struct PassbandBasis {
    pub v: CMatrix,
    pub r: usize,
    pub tol: f64,
    /// `sigma_r / sigma_(r+1)` at the rank cut.
    pub gap: f64,
    /// Set when the input had no singular value above the threshold.
    pub degenerate: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BasisSummary {
    pub r: usize,
    pub tol: f64,
    pub gap: f64,
    pub degenerate: bool,
}

impl PassbandBasis {
    pub(crate) fn summary(&self) -> BasisSummary {
        BasisSummary { r: self.r, tol: self.tol, gap: self.gap, degenerate: self.degenerate }
    }

    /// `V V^H x`.
    pub fn project(&self, x: &[num_complex::Complex64]) -> Vec<num_complex::Complex64> {
        let xv = nalgebra::DVector::from_column_slice(x);
        let coeff = self.v.adjoint() * xv;
        (&self.v * coeff).iter().copied().collect()
    }
}

pub fn nullspace_basis(stacked_kernel: &CMatrix, tol: f64) -> Result<PassbandBasis> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::invalid(format!("rank tolerance must lie in (0, 1), got {tol}")));
    }
    let nz = stacked_kernel.ncols();
    let svd = svd(stacked_kernel)?;
    let r = rank_from_sigma(&svd.sigma, tol);
    Ok(PassbandBasis {
        v: svd.v.columns(0, r).into_owned(),
        r,
        tol,
        gap: spectral_gap(&svd.sigma, r),
        degenerate: r == 0 && nz > 0,
    })
}

/// `B = A V` for a stacked kernel `A`.
pub fn restricted_stack(stacked_kernel: &CMatrix, basis: &PassbandBasis) -> CMatrix {
    stacked_kernel * &basis.v
}

/// Restricted system `(1_Nf (x) H) (.) B`.
pub fn restricted_phi(h: &SpectraMatrix, b_stack: &CMatrix) -> Result<CMatrix> {
    let nk = h.nk();
    if nk == 0 || b_stack.nrows() % nk != 0 {
        return Err(Error::dim(format!(
            "stacked restricted matrix has {} rows, not a multiple of Nk = {nk}",
            b_stack.nrows()
        )));
    }
    khatri_rao(&repeat_h(h, b_stack.nrows() / nk), b_stack)
}

/// Largest principal angle between each focal plane's passband and the joint passband.
pub fn max_nullspace_angle(stacked_kernel: &CMatrix, nf: usize, tol: f64) -> Result<f64> {
    let joint = nullspace_basis(stacked_kernel, tol)?;
    let nk = stacked_kernel.nrows() / nf;
    let mut worst: f64 = 0.0;
    for f in 0..nf {
        let block = stacked_kernel.rows(f * nk, nk).into_owned();
        let plane = nullspace_basis(&block, tol)?;
        worst = worst.max(max_principal_angle(&plane.v, &joint.v)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, RANK_TOL};
    use crate::rng::{complex_normal, substream};
    use num_complex::Complex64;

    #[test]
    fn identity_input_gives_full_unitary_basis() {
        let b = nullspace_basis(&CMatrix::identity(5, 5), RANK_TOL).unwrap();
        assert_eq!(b.r, 5);
        assert!(frobenius(&(b.v.adjoint() * &b.v - CMatrix::identity(5, 5))) < 1e-12);
    }

    #[test]
    fn rank_one_input() {
        let mut rng = substream(1, "basis");
        let u = CMatrix::from_fn(7, 1, |_, _| complex_normal(&mut rng));
        let v = CMatrix::from_fn(4, 1, |_, _| complex_normal(&mut rng));
        let b = nullspace_basis(&(&u * v.adjoint()), RANK_TOL).unwrap();
        assert_eq!(b.r, 1);
        let cos = (b.v.adjoint() * &v)[(0, 0)].norm() / v.norm();
        assert!((cos - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_input_is_flagged() {
        let b = nullspace_basis(&CMatrix::zeros(4, 3), RANK_TOL).unwrap();
        assert_eq!(b.r, 0);
        assert!(b.degenerate);
        assert!(nullspace_basis(&CMatrix::zeros(4, 3), 1.5).is_err());
    }

    #[test]
    fn restricted_phi_reductions() {
        let mut rng = substream(2, "rphi");
        let b = CMatrix::from_fn(12, 3, |_, _| complex_normal(&mut rng));
        let ones = SpectraMatrix::ones(6);
        assert_eq!(restricted_phi(&ones, &b).unwrap(), b);
        assert!(restricted_phi(&SpectraMatrix::ones(5), &b).is_err());
    }

    #[test]
    fn shared_null_space_has_zero_angle() {
        let mut rng = substream(3, "angle");
        let v = svd(&CMatrix::from_fn(6, 3, |_, _| complex_normal(&mut rng))).unwrap().u;
        let g = CMatrix::from_fn(10, 3, |_, _| complex_normal(&mut rng));
        let a = g * v.adjoint();
        assert!(max_nullspace_angle(&a, 2, RANK_TOL).unwrap() < 1e-6);
        let mut b = a.clone();
        b[(7, 0)] += Complex64::new(1.0, 0.0);
        assert!(max_nullspace_angle(&b, 2, RANK_TOL).unwrap() > 1e-3);
    }
}
