//! Dense method-of-moments Lippmann-Schwinger solver on a coarse pixel grid.
//!
//! Pixel `j` with susceptibility `eta_j` couples to pixel `i` through `k0^2 eta_j I_ij u_j` with
//! `I_ij = dx dz G(r_i - r_j)` off the diagonal and the self term integrated over an
//! equal-area disk of radius `a`:
//!
//! ```text
//! I_ii = (i pi a / (2 k0)) H1(k0 a) - 1 / k0^2
//! ```

use std::f64::consts::PI;

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::ImagingGeometry;
use crate::linalg::CMatrix;
use crate::rng::substream;
use crate::spectra::SpectraMatrix;

use super::beam::BeamQuadrature;
use super::foldy::green_2d;
use super::hankel::hankel1_1;
use super::noise::perturb_spectra;
use super::sim::{data_scale, scan_fields, SimulationConfig};

/// Largest grid accepted by the dense solver.
pub const MAX_CELLS: usize = 64 * 64;

/// Integral of the Green's function over a disk of radius `a` centred on the source.
pub fn disk_self_term(k0: f64, a: f64) -> Complex64 {
    Complex64::new(0.0, PI * a / (2.0 * k0)) * hankel1_1(k0 * a) - 1.0 / (k0 * k0)
}

/// Scattered data `[f, x]` at wavenumber `k0` for pixel susceptibilities `grid_eta[x, z]`.
pub fn lippmann_schwinger_coarse(
    grid_eta: &Array2<Complex64>,
    geometry: &ImagingGeometry,
    k0: f64,
    scale: f64,
    beam_nodes: usize,
) -> Result<Array2<Complex64>> {
    let (nx, nz) = grid_eta.dim();
    if (nx, nz) != (geometry.nx, geometry.nz) {
        return Err(Error::dim(format!("grid {nx}x{nz} does not match the geometry")));
    }
    if nx * nz > MAX_CELLS {
        return Err(Error::Budget(format!("{} cells exceed the dense budget of {MAX_CELLS}", nx * nz)));
    }
    if !(k0 > 0.0) {
        return Err(Error::invalid("k0 must be positive"));
    }
    let nf = geometry.nf();
    let mut out = Array2::zeros((nf, geometry.nx));
    // Pixels with zero susceptibility neither radiate nor feed back, so only the support enters.
    let support: Vec<(usize, usize)> = grid_eta
        .indexed_iter()
        .filter(|(_, v)| v.norm() > 0.0)
        .map(|(ix, _)| ix)
        .collect();
    if support.is_empty() {
        return Ok(out);
    }
    let positions: Vec<(f64, f64)> = support.iter().map(|&(i, n)| (geometry.x(i), geometry.z(n))).collect();
    let eta: Vec<Complex64> = support.iter().map(|&ix| grid_eta[ix]).collect();
    let area = geometry.dx() * geometry.dz();
    let self_term = disk_self_term(k0, (area / PI).sqrt());
    let n = support.len();
    let mut system = CMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            let coupling = if i == j {
                self_term
            } else {
                let r = ((positions[i].0 - positions[j].0).powi(2) + (positions[i].1 - positions[j].1).powi(2)).sqrt();
                green_2d(k0, r) * area
            };
            system[(i, j)] -= eta[j] * (k0 * k0) * coupling;
        }
    }
    let quad = BeamQuadrature::new(k0, geometry.na, beam_nodes)?;
    let (inc, col) = scan_fields(&quad, &positions, geometry);
    let u = system
        .lu()
        .solve(&inc)
        .ok_or_else(|| Error::numerical("Lippmann-Schwinger system is singular"))?;
    if u.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::numerical("non-finite Lippmann-Schwinger field"));
    }
    for c in 0..nf * geometry.nx {
        out[[c / geometry.nx, c % geometry.nx]] =
            (0..n).map(|p| eta[p] * col[(p, c)] * u[(p, c)]).sum::<Complex64>() * scale;
    }
    Ok(out)
}

/// Scan-line data `[f, x, m]` for distributed densities `[s, x, z]` using the dense solver.
///
/// The susceptibility is `delta * sum_s p_s (h_s + e_s)` with per-pixel spectral noise `e_s`.
pub fn simulate_grid_data(
    density: &Array3<Complex64>,
    spectra: &SpectraMatrix,
    config: &SimulationConfig,
) -> Result<Array3<Complex64>> {
    let g = &config.geometry;
    config.validate(spectra.ns())?;
    let (ns, nx, nz) = density.dim();
    if ns != spectra.ns() || nx != g.nx || nz != g.nz || spectra.nk() != g.nk {
        return Err(Error::dim("density, spectra and geometry disagree"));
    }
    let mut eta = Array3::<Complex64>::zeros((g.nk, nx, nz));
    for s in 0..ns {
        let pixels: Vec<(usize, usize)> = (0..nx)
            .flat_map(|i| (0..nz).map(move |n| (i, n)))
            .filter(|&(i, n)| density[[s, i, n]].norm() > 0.0)
            .collect();
        let seed = rand::RngCore::next_u64(&mut substream(config.seed, &format!("grid-species-{s}")));
        let draws = perturb_spectra(&spectra.column(s), config.noise_of(s), pixels.len(), seed)?;
        for ((i, n), h) in pixels.into_iter().zip(draws) {
            for m in 0..g.nk {
                eta[[m, i, n]] += density[[s, i, n]] * h[m] * config.delta;
            }
        }
    }
    let planes: Vec<Result<Array2<Complex64>>> = (0..g.nk)
        .into_par_iter()
        .map(|m| {
            let grid = eta.index_axis(ndarray::Axis(0), m).to_owned();
            lippmann_schwinger_coarse(&grid, g, g.wavenumber(m), data_scale(g, m), config.beam_nodes)
        })
        .collect();
    let mut out = Array3::zeros((g.nf(), nx, g.nk));
    for (m, plane) in planes.into_iter().enumerate() {
        out.index_axis_mut(ndarray::Axis(2), m).assign(&plane?);
    }
    Ok(out)
}
