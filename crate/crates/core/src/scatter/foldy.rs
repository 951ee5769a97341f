use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

use super::hankel::hankel1_0;

/// Two-dimensional free-space Green's function `(i/4) H0(k0 r)`.
pub fn green_2d(k0: f64, r: f64) -> Complex64 {
    Complex64::new(0.0, 0.25) * hankel1_0(k0 * r)
}

/// Solves the Foldy-Lax system `(I - M) psi = e`, `M[n, m] = alpha_m G(r_n, r_m)` (zero diagonal),
/// for every column of `incident` (`N x nrhs`).
pub fn foldy_lax_solve(
    positions: &[(f64, f64)],
    polarizability: &[Complex64],
    incident: &CMatrix,
    k0: f64,
) -> Result<CMatrix> {
    let n = positions.len();
    if polarizability.len() != n || incident.nrows() != n {
        return Err(Error::dim("Foldy-Lax: positions, polarizabilities and fields disagree"));
    }
    if n == 0 {
        return Ok(incident.clone());
    }
    let mut system = CMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let r = ((positions[i].0 - positions[j].0).powi(2) + (positions[i].1 - positions[j].1).powi(2)).sqrt();
            if r == 0.0 {
                return Err(Error::invalid(format!("scatterers {i} and {j} coincide")));
            }
            system[(i, j)] -= polarizability[j] * green_2d(k0, r);
        }
    }
    let lu = system.lu();
    let u = lu.u();
    let pivots: Vec<f64> = (0..n).map(|i| u[(i, i)].norm()).collect();
    let largest = pivots.iter().copied().fold(0.0, f64::max);
    if pivots.iter().any(|&p| p <= 1e-13 * largest.max(1.0)) {
        return Err(Error::numerical("Foldy-Lax system is singular (resonant configuration)"));
    }
    let psi = lu
        .solve(incident)
        .ok_or_else(|| Error::numerical("Foldy-Lax system is singular"))?;
    if psi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::numerical("non-finite Foldy-Lax field"));
    }
    Ok(psi)
}
