//! Imaging geometry: grids, wavenumber band, aperture and focal planes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImagingGeometry {
    pub nx: usize,
    pub nz: usize,
    pub nk: usize,
    /// Transverse extent (µm).
    pub lx: f64,
    /// Axial extent (µm).
    pub lz: f64,
    /// Band edges (rad/µm).
    pub kmin: f64,
    pub kmax: f64,
    pub na: f64,
    /// Focal depths `z_f` (µm), one per focal plane.
    pub focal_planes: Vec<f64>,
    /// Source power spectrum `|P(k0)|^2` on the wavenumber grid.
    pub power_spectrum: Vec<f64>,
}

impl ImagingGeometry {
    /// Geometry with a flat unit power spectrum, validated.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        nx: usize,
        nz: usize,
        nk: usize,
        lx: f64,
        lz: f64,
        kmin: f64,
        kmax: f64,
        na: f64,
        focal_planes: Vec<f64>,
    ) -> Result<Self> {
        let g = ImagingGeometry {
            nx,
            nz,
            nk,
            lx,
            lz,
            kmin,
            kmax,
            na,
            focal_planes,
            power_spectrum: vec![1.0; nk],
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_power_spectrum(mut self, power: Vec<f64>) -> Result<Self> {
        self.power_spectrum = power;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.nz == 0 {
            return Err(Error::invalid("grid sizes must be positive"));
        }
        if self.nx % 2 != 0 {
            return Err(Error::invalid(format!("Nx must be even, got {}", self.nx)));
        }
        if self.nk < 2 {
            return Err(Error::invalid("need at least two wavenumber samples"));
        }
        for (name, v) in [("Lx", self.lx), ("Lz", self.lz)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive and finite")));
            }
        }
        if !(self.kmin.is_finite() && self.kmax.is_finite() && self.kmin > 0.0 && self.kmin < self.kmax) {
            return Err(Error::invalid(format!(
                "need 0 < kmin < kmax, got [{}, {}]",
                self.kmin, self.kmax
            )));
        }
        if !(self.na > 0.0 && self.na < 1.0) {
            return Err(Error::invalid(format!("NA must lie in (0, 1), got {}", self.na)));
        }
        if self.focal_planes.is_empty() {
            return Err(Error::invalid("at least one focal plane is required"));
        }
        if let Some(z) = self
            .focal_planes
            .iter()
            .find(|&&z| !(z.is_finite() && (0.0..=self.lz).contains(&z)))
        {
            return Err(Error::invalid(format!("focal plane {z} lies outside [0, Lz]")));
        }
        if self.power_spectrum.len() != self.nk {
            return Err(Error::invalid(format!(
                "power spectrum has {} samples, expected Nk = {}",
                self.power_spectrum.len(),
                self.nk
            )));
        }
        if self.power_spectrum.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
            return Err(Error::invalid("power spectrum must be finite and non-negative"));
        }
        if !self.satisfies_sampling_rule() {
            log::warn!(
                "transverse sampling dx = {:.4} exceeds pi/(kmax sin NA) = {:.4}",
                self.dx(),
                PI / (self.kmax * self.na.sin())
            );
        }
        Ok(())
    }

    /// `dx < pi / (kmax sin NA)`.
    pub fn satisfies_sampling_rule(&self) -> bool {
        self.dx() < PI / (self.kmax * self.na.sin())
    }

    pub fn nf(&self) -> usize {
        self.focal_planes.len()
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dz(&self) -> f64 {
        self.lz / self.nz as f64
    }

    pub fn dk(&self) -> f64 {
        (self.kmax - self.kmin) / (self.nk - 1) as f64
    }

    pub fn wavenumber(&self, m: usize) -> f64 {
        self.kmin + m as f64 * self.dk()
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.nk).map(|m| self.wavenumber(m)).collect()
    }

    /// Transverse spatial frequency of DFT index `q`.
    pub fn kx(&self, q: usize) -> f64 {
        crate::kernel::dft_to_ft(q, self.nx, self.lx).expect("q within grid")
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn z(&self, n: usize) -> f64 {
        n as f64 * self.dz()
    }

    pub fn effective_rank(&self) -> usize {
        crate::kernel::effective_rank(self.lz, self.kmin, self.kmax)
    }

    /// Content hash over every field, used to key cached kernel tables.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for v in [self.nx, self.nz, self.nk] {
            h.update((v as u64).to_le_bytes());
        }
        for v in [self.lx, self.lz, self.kmin, self.kmax, self.na] {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update((self.focal_planes.len() as u64).to_le_bytes());
        for v in &self.focal_planes {
            h.update(v.to_bits().to_le_bytes());
        }
        for v in &self.power_spectrum {
            h.update(v.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
