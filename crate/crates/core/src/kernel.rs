//! ISAM kernel evaluation and discretized kernel tables.
//!
//! The kernel is
//!
//! ```text
//! A(kx, z, k0) = pk2 / (k0 NA)^2 * Int_Omega exp(-(k'^2 + (kx - k')^2) / (k0 NA)^2
//!                    + i z (kz(k') + kz(kx - k'))) / kz(k') dk'
//! ```
//!
//! over `Omega = {|k'| <= k0, |kx - k'| <= k0}`. With `k' = k0 sin(theta)` the measure
//! `dk' / kz(k')` becomes `d theta`, so the integrand is bounded and Gauss-Legendre in `theta`
//! converges quickly.

use std::f64::consts::PI;

use ndarray::{s, Array4};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::ImagingGeometry;
use crate::linalg::CMatrix;
use crate::quadrature::gauss_legendre;

pub const DEFAULT_NODES: usize = 257;

/// Axial wavenumber `sqrt(k0^2 - k_perp^2)` of a propagating plane wave.
pub fn kz(k_perp: f64, k0: f64) -> Result<f64> {
    if !(k_perp.is_finite() && k0.is_finite()) {
        return Err(Error::invalid("non-finite wavenumber"));
    }
    if k_perp.abs() > k0 {
        return Err(Error::invalid(format!("evanescent component |{k_perp}| > k0 = {k0}")));
    }
    Ok((k0 * k0 - k_perp * k_perp).sqrt())
}

fn kz_clamped(k_perp: f64, k0: f64) -> f64 {
    (k0 * k0 - k_perp * k_perp).max(0.0).sqrt()
}

/// Quadrature amplitudes and phases such that `A(kx, z, k0) = sum_i amp_i exp(i z phase_i)`.
fn kernel_nodes(kx: f64, k0: f64, na: f64, pk2: f64, rule: &(Vec<f64>, Vec<f64>)) -> Vec<(f64, f64)> {
    if kx.abs() > 2.0 * k0 || pk2 == 0.0 {
        return Vec::new();
    }
    let lo = ((kx - k0).max(-k0) / k0).clamp(-1.0, 1.0).asin();
    let hi = ((kx + k0).min(k0) / k0).clamp(-1.0, 1.0).asin();
    let (mid, half) = (0.5 * (hi + lo), 0.5 * (hi - lo));
    let pref = pk2 / (k0 * k0 * na * na);
    let width2 = (k0 * na) * (k0 * na);
    rule.0
        .iter()
        .zip(&rule.1)
        .map(|(&t, &w)| {
            let theta = mid + half * t;
            let kp = k0 * theta.sin();
            let kd = kx - kp;
            let amp = pref * half * w * (-(kp * kp + kd * kd) / width2).exp();
            (amp, k0 * theta.cos() + kz_clamped(kd, k0))
        })
        .collect()
}

/// Kernel value at one transverse frequency, depth and wavenumber.
pub fn isam_kernel_point(kx: f64, z: f64, k0: f64, na: f64, pk2: f64, nodes: usize) -> Result<Complex64> {
    if !(kx.is_finite() && z.is_finite() && k0.is_finite() && na.is_finite() && pk2.is_finite()) {
        return Err(Error::invalid("non-finite kernel argument"));
    }
    if !(k0 > 0.0) || pk2 < 0.0 {
        return Err(Error::invalid("kernel needs k0 > 0 and pk2 >= 0"));
    }
    let rule = gauss_legendre(nodes)?;
    Ok(kernel_nodes(kx, k0, na, pk2, &rule)
        .iter()
        .map(|&(a, phi)| Complex64::from_polar(a, z * phi))
        .sum())
}

/// Kernel samples `A(kx, n dz - z_f, k0)` for every focal plane and depth index, laid out
/// `[f * nz + n]`.
fn kernel_column(g: &ImagingGeometry, kx: f64, m: usize, rule: &(Vec<f64>, Vec<f64>)) -> Vec<Complex64> {
    let (nf, nz) = (g.nf(), g.nz);
    let mut out = vec![Complex64::new(0.0, 0.0); nf * nz];
    let nodes = kernel_nodes(kx, g.wavenumber(m), g.na, g.power_spectrum[m], rule);
    if nodes.is_empty() {
        return out;
    }
    let dz = g.dz();
    let steps: Vec<Complex64> = nodes.iter().map(|&(_, phi)| Complex64::from_polar(1.0, dz * phi)).collect();
    for (f, &zf) in g.focal_planes.iter().enumerate() {
        let mut terms: Vec<Complex64> = nodes.iter().map(|&(a, phi)| Complex64::from_polar(a, -zf * phi)).collect();
        for n in 0..nz {
            if n % 64 == 63 {
                // Re-anchor the phase recurrence to keep rounding drift negligible.
                let z = (n as f64) * dz - zf;
                for (t, &(a, phi)) in terms.iter_mut().zip(&nodes) {
                    *t = Complex64::from_polar(a, z * phi);
                }
            }
            out[f * nz + n] = terms.iter().sum();
            for (t, s) in terms.iter_mut().zip(&steps) {
                *t *= s;
            }
        }
    }
    out
}

/// Discretized kernel `A_f[q, m, n] = A(kx(q), kmin + m dk, n dz - z_f)`.
#[derive(Clone, Debug)]
pub struct KernelTable {
    /// Indexed `[f, q, m, n]`.
    pub coefficients: Array4<Complex64>,
    pub geometry: ImagingGeometry,
    pub quadrature_nodes: usize,
}

impl KernelTable {
    pub fn nf(&self) -> usize {
        self.coefficients.dim().0
    }

    /// `A^q_f` as an `Nk x Nz` matrix.
    pub fn block(&self, f: usize, q: usize) -> CMatrix {
        let g = &self.geometry;
        let view = self.coefficients.slice(s![f, q, .., ..]);
        CMatrix::from_fn(g.nk, g.nz, |m, n| view[[m, n]])
    }

    /// The focal-plane blocks stacked vertically, `(Nf Nk) x Nz`.
    pub fn stacked(&self, q: usize) -> CMatrix {
        let g = &self.geometry;
        CMatrix::from_fn(self.nf() * g.nk, g.nz, |row, n| {
            self.coefficients[[row / g.nk, q, row % g.nk, n]]
        })
    }

    /// Cache key combining the geometry hash and the quadrature order.
    pub fn cache_key(geometry: &ImagingGeometry, nodes: usize) -> String {
        format!("{}-{nodes}", &geometry.hash()[..16])
    }
}

pub fn build_kernel_table(geometry: &ImagingGeometry, nodes: usize) -> Result<KernelTable> {
    geometry.validate()?;
    let rule = gauss_legendre(nodes)?;
    let g = geometry;
    let (nf, nx, nk, nz) = (g.nf(), g.nx, g.nk, g.nz);
    let columns: Vec<Vec<Complex64>> = (0..nx * nk)
        .into_par_iter()
        .map(|idx| kernel_column(g, g.kx(idx / nk), idx % nk, &rule))
        .collect();
    let mut coefficients = Array4::zeros((nf, nx, nk, nz));
    for (idx, col) in columns.iter().enumerate() {
        let (q, m) = (idx / nk, idx % nk);
        for f in 0..nf {
            for n in 0..nz {
                coefficients[[f, q, m, n]] = col[f * nz + n];
            }
        }
    }
    if coefficients.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::numerical("non-finite kernel coefficient"));
    }
    Ok(KernelTable {
        coefficients,
        geometry: geometry.clone(),
        quadrature_nodes: nodes,
    })
}

/// Stacked focal-plane blocks `[A^q_1; ...; A^q_Nf]` for one transverse index, without
/// building the full table.
pub fn build_stacked_block(geometry: &ImagingGeometry, q: usize, nodes: usize) -> Result<CMatrix> {
    geometry.validate()?;
    if q >= geometry.nx {
        return Err(Error::invalid(format!("q = {q} out of range")));
    }
    let rule = gauss_legendre(nodes)?;
    let g = geometry;
    let kx = g.kx(q);
    let columns: Vec<Vec<Complex64>> =
        (0..g.nk).into_par_iter().map(|m| kernel_column(g, kx, m, &rule)).collect();
    Ok(CMatrix::from_fn(g.nf() * g.nk, g.nz, |row, n| {
        columns[row % g.nk][(row / g.nk) * g.nz + n]
    }))
}

/// Largest entry change between `nodes` and `2 nodes`, relative to the largest entry.
pub fn quadrature_convergence(geometry: &ImagingGeometry, nodes: usize) -> Result<f64> {
    let a = build_kernel_table(geometry, nodes)?;
    let b = build_kernel_table(geometry, 2 * nodes)?;
    let scale = b.coefficients.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let diff = a
        .coefficients
        .iter()
        .zip(b.coefficients.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    Ok(if scale > 0.0 { diff / scale } else { 0.0 })
}

/// Spatial frequency of DFT index `q` on `n` samples over length `l`.
pub fn dft_to_ft(q: usize, n: usize, l: f64) -> Result<f64> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::invalid(format!("transform length must be even, got {n}")));
    }
    if q >= n {
        return Err(Error::invalid(format!("index {q} out of range for length {n}")));
    }
    let signed = if q < n / 2 { q as f64 } else { q as f64 - n as f64 };
    Ok(2.0 * PI * signed / l)
}

/// Degrees-of-freedom estimate `round(Lz (kmax - kmin) / pi)` for the axial problem.
pub fn effective_rank(lz: f64, kmin: f64, kmax: f64) -> usize {
    (lz * (kmax - kmin) / PI).round().max(0.0) as usize
}

/// Whether `(kx, kz0)` lies in the optical passband of a band `[kmin, kmax]` at aperture `na`.
pub fn passband_contains(kx: f64, kz0: f64, kmin: f64, kmax: f64, na: f64) -> bool {
    if !(kz0 < 0.0) {
        return false;
    }
    let k0 = 0.5 * (kx * kx + kz0 * kz0).sqrt();
    let tol = 1e-12 * kmax.abs().max(1.0);
    if k0 < kmin - tol || k0 > kmax + tol {
        return false;
    }
    kx * kx <= 4.0 * (k0 * na) * (k0 * na) * (1.0 + 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ImagingGeometry {
        ImagingGeometry::new(16, 24, 12, 24.0, 16.8, 0.4, 1.1, 0.4, vec![4.2, 8.4]).unwrap()
    }

    #[test]
    fn kz_examples() {
        assert_eq!(kz(0.0, 1.3).unwrap(), 1.3);
        assert_eq!(kz(1.3, 1.3).unwrap(), 0.0);
        assert!((kz(0.6, 1.0).unwrap() - 0.8).abs() < 1e-15);
        assert!(kz(1.1, 1.0).is_err());
    }

    #[test]
    fn dft_to_ft_examples() {
        assert_eq!(dft_to_ft(0, 8, 3.0).unwrap(), 0.0);
        assert!((dft_to_ft(7, 8, 3.0).unwrap() + 2.0 * PI / 3.0).abs() < 1e-15);
        assert!((dft_to_ft(1, 192, 423.6).unwrap() - 0.014833).abs() < 5e-7);
        assert!((dft_to_ft(4, 8, 1.0).unwrap() + 8.0 * PI).abs() < 1e-12);
        assert!(dft_to_ft(8, 8, 1.0).is_err());
        assert!(dft_to_ft(0, 7, 1.0).is_err());
    }

    #[test]
    fn effective_rank_examples() {
        assert_eq!(effective_rank(150.0, 0.7, 2.1), 67);
        assert_eq!(effective_rank(PI, 0.0, 1.0), 1);
        assert_eq!(effective_rank(282.4, 0.4, 1.1), 63);
    }

    #[test]
    fn passband_examples() {
        let (kmin, kmax, na) = (0.7, 2.1, 0.5);
        assert!(passband_contains(0.0, -2.0 * kmin, kmin, kmax, na));
        assert!(!passband_contains(0.0, 2.0 * kmin, kmin, kmax, na));
        let kx = 2.0 * kmax * na * 1.01;
        for kz0 in [-0.5, -2.0, -4.0] {
            assert!(!passband_contains(kx, kz0, kmin, kmax, na));
        }
        assert!(!passband_contains(0.0, -2.0 * kmax * 1.01, kmin, kmax, na));
    }

    #[test]
    fn kernel_vanishes_outside_support() {
        assert_eq!(isam_kernel_point(2.5, 3.0, 1.0, 0.5, 1.0, 64).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(isam_kernel_point(0.3, 3.0, 1.0, 0.5, 0.0, 64).unwrap(), Complex64::new(0.0, 0.0));
        assert!(isam_kernel_point(f64::NAN, 3.0, 1.0, 0.5, 1.0, 64).is_err());
    }

    #[test]
    fn kernel_at_origin_matches_independent_integration() {
        // At kx = 0, z = 0 the kernel reduces to the real integral
        // pk2/(k0 NA)^2 * Int_{-k0}^{k0} exp(-2 k^2/(k0 NA)^2) / sqrt(k0^2 - k^2) dk,
        // evaluated here by the midpoint rule in theta on a very fine grid.
        let (k0, na) = (0.9, 0.4);
        let n = 200_000;
        let h = PI / n as f64;
        let sum: f64 = (0..n)
            .map(|i| {
                let t = -0.5 * PI + (i as f64 + 0.5) * h;
                (-2.0 * (t.sin() / na).powi(2)).exp()
            })
            .sum::<f64>()
            * h;
        let expect = sum / (k0 * k0 * na * na);
        let got = isam_kernel_point(0.0, 0.0, k0, na, 1.0, 257).unwrap();
        assert!((got.re - expect).abs() < 1e-10 * expect);
        assert!(got.im.abs() < 1e-12);
    }

    #[test]
    fn kernel_is_even_in_kx() {
        for &(kx, z, k0) in &[(0.3, 5.0, 1.0), (1.1, -7.5, 0.8), (0.05, 20.0, 1.4)] {
            let a = isam_kernel_point(kx, z, k0, 0.45, 1.0, 257).unwrap();
            let b = isam_kernel_point(-kx, z, k0, 0.45, 1.0, 257).unwrap();
            assert!((a - b).norm() < 1e-12 * a.norm());
        }
    }

    #[test]
    fn table_matches_pointwise_kernel() {
        let g = small();
        let t = build_kernel_table(&g, 64).unwrap();
        for &(f, q, m, n) in &[(0, 0, 0, 0), (1, 3, 7, 23), (0, 13, 11, 5), (1, 1, 4, 12)] {
            let expect = isam_kernel_point(g.kx(q), g.z(n) - g.focal_planes[f], g.wavenumber(m), g.na, 1.0, 64).unwrap();
            assert!((t.coefficients[[f, q, m, n]] - expect).norm() < 1e-12 * expect.norm().max(1e-12));
        }
    }

    #[test]
    fn table_support_and_symmetry() {
        let g = small();
        let t = build_kernel_table(&g, 64).unwrap();
        for q in 0..g.nx {
            for m in 0..g.nk {
                let zero = t.coefficients.slice(s![.., q, m, ..]).iter().all(|z| z.norm() == 0.0);
                if g.kx(q).abs() > 2.0 * g.wavenumber(m) {
                    assert!(zero, "q={q} m={m}");
                } else {
                    assert!(!zero, "q={q} m={m}");
                }
            }
            let qm = (g.nx - q) % g.nx;
            if q != g.nx / 2 {
                for (a, b) in t.coefficients.slice(s![.., q, .., ..]).iter().zip(t.coefficients.slice(s![.., qm, .., ..]).iter()) {
                    assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-300));
                }
            }
        }
    }

    #[test]
    fn focal_plane_shift_is_an_index_shift() {
        let base = small();
        let delta = 3usize;
        let mut g = base.clone();
        g.focal_planes = vec![4.2, 4.2 + delta as f64 * g.dz()];
        let t = build_kernel_table(&g, 64).unwrap();
        for q in [0usize, 2, 5] {
            for m in 0..g.nk {
                for n in 0..g.nz - delta {
                    let a = t.coefficients[[1, q, m, n + delta]];
                    let b = t.coefficients[[0, q, m, n]];
                    assert!((a - b).norm() < 1e-11 * b.norm().max(1e-9));
                }
            }
        }
    }

    #[test]
    fn stacked_block_matches_table() {
        let g = small();
        let t = build_kernel_table(&g, 48).unwrap();
        for q in [0usize, 5, 15] {
            let direct = build_stacked_block(&g, q, 48).unwrap();
            assert_eq!(direct, t.stacked(q));
        }
    }

    #[test]
    fn quadrature_self_convergence_at_desk_scale() {
        let g = ImagingGeometry::new(8, 96, 24, 12.0, 67.2, 0.4, 1.1, 0.4, vec![16.8, 33.6, 50.4]).unwrap();
        let change = quadrature_convergence(&g, DEFAULT_NODES).unwrap();
        assert!(change < 1e-6, "relative change {change}");
    }
}
