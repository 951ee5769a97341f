//! Synthetic scan data from point scatterers under the Born or Foldy-Lax model.
//!
//! For scan position `x_i`, focal plane `z_f` and wavenumber `k0` the recorded signal is
//!
//! ```text
//! S = dx / (2 pi) * |P(k0)|^2 / (k0 NA)^2 * sum_n w_n g_col(r_n) psi_n,   w_n = delta * strength_n * h_n(k0)
//! ```
//!
//! with `psi_n = g_inc(r_n)` in Born mode. This normalization makes the transverse DFT of
//! Born-mode data equal to the discrete forward model for on-grid scatterers. Scans are
//! periodic in `x`: beam offsets use the minimum image over `[0, Lx)`.

use std::f64::consts::PI;

use ndarray::Array3;
use num_complex::Complex64;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ImagingGeometry;
use crate::linalg::CMatrix;
use crate::rng::substream;
use crate::spectra::SpectraMatrix;

use super::beam::{BeamQuadrature, DEFAULT_BEAM_NODES};
use super::foldy::foldy_lax_solve;
use super::noise::perturb_spectra;
use super::phantom::{Phantom, PointScatterer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimulationMode {
    Born,
    Foldy,
}

fn default_beam_nodes() -> usize {
    DEFAULT_BEAM_NODES
}

fn default_delta() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub mode: SimulationMode,
    pub geometry: ImagingGeometry,
    /// Spectral noise variance per species; empty means noiseless.
    #[serde(default)]
    pub spectral_noise: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_beam_nodes")]
    pub beam_nodes: usize,
}

impl SimulationConfig {
    pub fn new(mode: SimulationMode, geometry: ImagingGeometry) -> Self {
        SimulationConfig {
            mode,
            geometry,
            spectral_noise: Vec::new(),
            seed: 0,
            delta: 1.0,
            beam_nodes: DEFAULT_BEAM_NODES,
        }
    }

    pub fn validate(&self, ns: usize) -> Result<()> {
        self.geometry.validate()?;
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0, 1], got {}", self.delta)));
        }
        if !self.spectral_noise.is_empty() && self.spectral_noise.len() != ns {
            return Err(Error::invalid(format!(
                "spectral_noise has {} entries for {ns} species",
                self.spectral_noise.len()
            )));
        }
        if self.spectral_noise.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(Error::invalid("spectral noise variances must be >= 0"));
        }
        Ok(())
    }

    pub(crate) fn noise_of(&self, s: usize) -> f64 {
        self.spectral_noise.get(s).copied().unwrap_or(0.0)
    }
}

/// Scale relating `sum_n w_n g_col psi_n` to recorded data at wavenumber index `m`.
pub(crate) fn data_scale(geometry: &ImagingGeometry, m: usize) -> f64 {
    let k0 = geometry.wavenumber(m);
    geometry.dx() / (2.0 * PI) * geometry.power_spectrum[m] / (k0 * k0 * geometry.na * geometry.na)
}

fn wrap(d: f64, l: f64) -> f64 {
    d - l * (d / l).round()
}

/// Illumination and collection fields `[n, f * nx + i]` at every point for every scan.
pub(crate) fn scan_fields(
    quad: &BeamQuadrature,
    positions: &[(f64, f64)],
    geometry: &ImagingGeometry,
) -> (CMatrix, CMatrix) {
    let (nx, nf) = (geometry.nx, geometry.nf());
    let mut inc = CMatrix::zeros(positions.len(), nf * nx);
    let mut col = CMatrix::zeros(positions.len(), nf * nx);
    for (n, &(x, z)) in positions.iter().enumerate() {
        for (f, &zf) in geometry.focal_planes.iter().enumerate() {
            for i in 0..nx {
                let (gi, gc) = quad.eval(wrap(x - geometry.x(i), geometry.lx), z - zf);
                inc[(n, f * nx + i)] = gi;
                col[(n, f * nx + i)] = gc;
            }
        }
    }
    (inc, col)
}

/// Per-scatterer spectra, perturbed per species with independent streams.
fn scatterer_spectra(scatterers: &[PointScatterer], spectra: &SpectraMatrix, config: &SimulationConfig) -> Result<Vec<Vec<Complex64>>> {
    let mut out = vec![Vec::new(); scatterers.len()];
    for s in 0..spectra.ns() {
        let members: Vec<usize> = (0..scatterers.len()).filter(|&n| scatterers[n].species == s).collect();
        let seed = substream(config.seed, &format!("species-{s}")).next_u64();
        let draws = perturb_spectra(&spectra.column(s), config.noise_of(s), members.len(), seed)?;
        for (n, h) in members.into_iter().zip(draws) {
            out[n] = h;
        }
    }
    Ok(out)
}

/// Scan-line data `[f, x, m]` for a set of point scatterers.
pub fn simulate_point_data(
    scatterers: &[PointScatterer],
    spectra: &SpectraMatrix,
    config: &SimulationConfig,
) -> Result<Array3<Complex64>> {
    let g = &config.geometry;
    config.validate(spectra.ns())?;
    if spectra.nk() != g.nk {
        return Err(Error::dim(format!("spectra have {} wavenumbers, geometry {}", spectra.nk(), g.nk)));
    }
    Phantom { scatterers: scatterers.to_vec() }.validate(g, spectra.ns())?;
    let (nf, nx, nk) = (g.nf(), g.nx, g.nk);
    let mut data = Array3::zeros((nf, nx, nk));
    if scatterers.is_empty() {
        return Ok(data);
    }
    let h = scatterer_spectra(scatterers, spectra, config)?;
    let positions: Vec<(f64, f64)> = scatterers.iter().map(|s| (s.x, s.z)).collect();
    let columns: Vec<Result<Vec<Complex64>>> = (0..nk)
        .into_par_iter()
        .map(|m| {
            let k0 = g.wavenumber(m);
            let quad = BeamQuadrature::new(k0, g.na, config.beam_nodes)?;
            let (inc, col) = scan_fields(&quad, &positions, g);
            let w: Vec<Complex64> = scatterers
                .iter()
                .zip(&h)
                .map(|(s, hn)| hn[m] * (config.delta * s.strength))
                .collect();
            let psi = match config.mode {
                SimulationMode::Born => inc,
                SimulationMode::Foldy => {
                    let alpha: Vec<Complex64> = w.iter().map(|x| x * (k0 * k0 * g.dx() * g.dz())).collect();
                    foldy_lax_solve(&positions, &alpha, &inc, k0)?
                }
            };
            let scale = data_scale(g, m);
            Ok((0..nf * nx)
                .map(|c| (0..positions.len()).map(|n| w[n] * col[(n, c)] * psi[(n, c)]).sum::<Complex64>() * scale)
                .collect())
        })
        .collect();
    for (m, column) in columns.into_iter().enumerate() {
        let column = column?;
        for (c, v) in column.into_iter().enumerate() {
            data[[c / nx, c % nx, m]] = v;
        }
    }
    Ok(data)
}

/// `||s - s_born|| / ||s_born||`.
pub fn multiple_scattering_ratio(s: &Array3<Complex64>, s_born: &Array3<Complex64>) -> Result<f64> {
    if s.dim() != s_born.dim() {
        return Err(Error::dim("multiple-scattering ratio needs equal shapes"));
    }
    let den = s_born.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(Error::numerical("Born data is identically zero"));
    }
    let num = s.iter().zip(s_born).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{apply_forward, measurements_to_fourier, DensityStack};
    use crate::kernel::build_kernel_table;
    use crate::spectra::SpectralLibrary;

    fn geom() -> ImagingGeometry {
        ImagingGeometry::new(32, 40, 12, 48.0, 28.0, 0.5, 1.1, 0.4, vec![10.5, 17.5]).unwrap()
    }

    fn spectra(g: &ImagingGeometry, ns: usize) -> SpectraMatrix {
        let lib = SpectralLibrary::lorentzian(5, ns, 20, &Default::default(), &g.wavenumbers()).unwrap();
        crate::spectra::build_h(&lib, &(0..ns).collect::<Vec<_>>()).unwrap()
    }

    fn two_points(strength: f64) -> Vec<PointScatterer> {
        vec![
            PointScatterer { x: 21.0, z: 12.6, species: 0, strength },
            PointScatterer { x: 25.5, z: 14.0, species: 1, strength },
        ]
    }

    #[test]
    fn empty_phantom_gives_zero_data() {
        let g = geom();
        let d = simulate_point_data(&[], &spectra(&g, 2), &SimulationConfig::new(SimulationMode::Foldy, g)).unwrap();
        assert!(d.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn born_single_scatterer_closed_form() {
        let g = geom();
        let h = spectra(&g, 1);
        let sc = PointScatterer { x: 30.0, z: 9.1, species: 0, strength: 0.7 };
        let mut cfg = SimulationConfig::new(SimulationMode::Born, g.clone());
        cfg.delta = 0.5;
        let d = simulate_point_data(&[sc], &h, &cfg).unwrap();
        for (f, &zf) in g.focal_planes.iter().enumerate() {
            for i in [0, 7, 20, 31] {
                for m in [0, 5, 11] {
                    let k0 = g.wavenumber(m);
                    let q = BeamQuadrature::new(k0, g.na, DEFAULT_BEAM_NODES).unwrap();
                    let (gi, gc) = q.eval(wrap(sc.x - g.x(i), g.lx), sc.z - zf);
                    let expect = gi * gc * h.h[(m, 0)] * (0.5 * 0.7) * data_scale(&g, m);
                    assert!((d[[f, i, m]] - expect).norm() <= 1e-12 * expect.norm().max(1e-300));
                }
            }
        }
    }

    #[test]
    fn born_data_matches_discrete_forward_model() {
        let g = geom();
        let h = spectra(&g, 2);
        let sc = vec![
            PointScatterer { x: g.x(12), z: g.z(18), species: 0, strength: 1.0 },
            PointScatterer { x: g.x(20), z: g.z(22), species: 1, strength: 0.5 },
        ];
        let d = simulate_point_data(&sc, &h, &SimulationConfig::new(SimulationMode::Born, g.clone())).unwrap();
        let y = measurements_to_fourier(&d, g.nx).unwrap();
        let p = Phantom { scatterers: sc }.to_density(&g, 2).unwrap();
        let table = build_kernel_table(&g, 257).unwrap();
        let model = apply_forward(&DensityStack::from_spatial(&p), &h, &table).unwrap();
        let err = (&y.s - &model.s).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / model.norm();
        assert!(err < 0.02, "relative mismatch {err}");
    }

    #[test]
    fn born_is_linear_in_strength() {
        let g = geom();
        let h = spectra(&g, 2);
        let cfg = SimulationConfig::new(SimulationMode::Born, g);
        let a = simulate_point_data(&two_points(0.3), &h, &cfg).unwrap();
        let b = simulate_point_data(&two_points(0.6), &h, &cfg).unwrap();
        let diff = (&b - &(&a * Complex64::new(2.0, 0.0))).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff <= 1e-13 * b.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }

    #[test]
    fn multiple_scattering_vanishes_to_first_order() {
        let g = geom();
        let h = spectra(&g, 2);
        let ratio = |strength: f64| {
            let sc = two_points(strength);
            let b = simulate_point_data(&sc, &h, &SimulationConfig::new(SimulationMode::Born, g.clone())).unwrap();
            let f = simulate_point_data(&sc, &h, &SimulationConfig::new(SimulationMode::Foldy, g.clone())).unwrap();
            multiple_scattering_ratio(&f, &b).unwrap()
        };
        let sweep: Vec<f64> = [1.0, 2.0, 4.0, 8.0].iter().map(|&s| ratio(s)).collect();
        assert!(sweep.windows(2).all(|w| w[1] > w[0]), "{sweep:?}");
        let halving = ratio(0.5) / ratio(0.25);
        assert!((halving - 2.0).abs() < 0.4, "halving ratio {halving}");
    }

    #[test]
    fn deterministic_and_label_symmetric() {
        let g = geom();
        let h = spectra(&g, 2);
        let mut cfg = SimulationConfig::new(SimulationMode::Foldy, g);
        cfg.spectral_noise = vec![1e-4, 1e-4];
        cfg.seed = 11;
        let sc = two_points(2.0);
        assert_eq!(simulate_point_data(&sc, &h, &cfg).unwrap(), simulate_point_data(&sc, &h, &cfg).unwrap());
        cfg.spectral_noise.clear();
        let same = vec![
            PointScatterer { x: 21.0, z: 12.6, species: 0, strength: 2.0 },
            PointScatterer { x: 25.5, z: 14.0, species: 0, strength: 2.0 },
        ];
        let swapped: Vec<PointScatterer> = same.iter().rev().copied().collect();
        let a = simulate_point_data(&same, &h, &cfg).unwrap();
        let b = simulate_point_data(&swapped, &h, &cfg).unwrap();
        let diff = (&a - &b).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff <= 1e-12 * a.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }

    #[test]
    fn ratio_edge_cases_and_validation() {
        let a = Array3::from_elem((1, 2, 2), Complex64::new(1.0, 1.0));
        assert_eq!(multiple_scattering_ratio(&a, &a).unwrap(), 0.0);
        assert!((multiple_scattering_ratio(&(&a * Complex64::new(2.0, 0.0)), &a).unwrap() - 1.0).abs() < 1e-15);
        assert!(multiple_scattering_ratio(&a, &Array3::zeros((1, 2, 2))).is_err());
        let g = geom();
        let h = spectra(&g, 2);
        let mut cfg = SimulationConfig::new(SimulationMode::Born, g);
        let outside = [PointScatterer { x: -1.0, z: 3.0, species: 0, strength: 1.0 }];
        assert!(simulate_point_data(&outside, &h, &cfg).is_err());
        cfg.delta = 1.5;
        assert!(simulate_point_data(&two_points(1.0), &h, &cfg).is_err());
    }
}
