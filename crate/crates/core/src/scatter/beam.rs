//! Focused illumination and collection beams as angular-spectrum integrals.
//!
//! With `k' = k0 sin(theta)`:
//!
//! ```text
//! g_inc(x, z) = Int exp(-sin^2(theta) / NA^2) exp(i k0 (x sin(theta) + z cos(theta))) d theta
//! g_col(x, z) = Int exp(-sin^2(theta) / NA^2) k0 cos(theta) exp(i k0 (x sin(theta) + z cos(theta))) d theta
//! ```
//!
//! i.e. pupils `exp(-k'^2/(k0 NA)^2) / kz(k')` and `exp(-k'^2/(k0 NA)^2)`, both over propagating
//! waves. The transverse Fourier transform of `g_inc g_col` is `2 pi` times the ISAM kernel
//! integral, which makes Born-mode data consistent with the inversion kernel.

use num_complex::Complex64;

use crate::error::Result;
use crate::quadrature::gauss_legendre_on;

pub const DEFAULT_BEAM_NODES: usize = 257;

#[derive(Clone, Debug)]
pub struct BeamQuadrature {
    pub k0: f64,
    /// `(k0 sin(theta), k0 cos(theta), weight * pupil)` per node.
    nodes: Vec<(f64, f64, f64)>,
}

impl BeamQuadrature {
    pub fn new(k0: f64, na: f64, nodes: usize) -> Result<Self> {
        let (theta, w) = gauss_legendre_on(nodes, -0.5 * std::f64::consts::PI, 0.5 * std::f64::consts::PI)?;
        let nodes = theta
            .iter()
            .zip(&w)
            .map(|(&t, &wt)| {
                let s = t.sin();
                (k0 * s, k0 * t.cos(), wt * (-(s * s) / (na * na)).exp())
            })
            .collect();
        Ok(BeamQuadrature { k0, nodes })
    }

    /// `(g_inc, g_col)` at offset `(x, z)` from the focus.
    pub fn eval(&self, x: f64, z: f64) -> (Complex64, Complex64) {
        let mut gi = Complex64::new(0.0, 0.0);
        let mut gc = Complex64::new(0.0, 0.0);
        for &(kx, kz, w) in &self.nodes {
            let e = Complex64::from_polar(w, kx * x + kz * z);
            gi += e;
            gc += e * kz;
        }
        (gi, gc)
    }
}

/// Illumination field at `r = (x, z)` for a beam scanned to `r0x` and focused at depth `zf`.
pub fn incident_beam(r: (f64, f64), r0x: f64, zf: f64, k0: f64, na: f64, nodes: usize) -> Result<Complex64> {
    Ok(BeamQuadrature::new(k0, na, nodes)?.eval(r.0 - r0x, r.1 - zf).0)
}
