use ndarray::Array3;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ImagingGeometry;
use crate::rng::substream;

/// Point scatterer of one species with real density `strength`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointScatterer {
    pub x: f64,
    pub z: f64,
    pub species: usize,
    pub strength: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Phantom {
    pub scatterers: Vec<PointScatterer>,
}

impl Phantom {
    pub fn validate(&self, geometry: &ImagingGeometry, ns: usize) -> Result<()> {
        for (i, s) in self.scatterers.iter().enumerate() {
            if !(s.x >= 0.0 && s.x < geometry.lx && s.z >= 0.0 && s.z < geometry.lz) {
                return Err(Error::invalid(format!("scatterer {i} at ({}, {}) lies outside the domain", s.x, s.z)));
            }
            if s.species >= ns {
                return Err(Error::invalid(format!("scatterer {i} has species {} but only {ns} are defined", s.species)));
            }
            if !(s.strength.is_finite() && s.strength > 0.0) {
                return Err(Error::invalid(format!("scatterer {i} needs a finite positive strength")));
            }
        }
        Ok(())
    }

    /// Nearest-pixel spatial densities `[s, x, z]`.
    pub fn to_density(&self, geometry: &ImagingGeometry, ns: usize) -> Result<Array3<Complex64>> {
        self.validate(geometry, ns)?;
        let mut p = Array3::zeros((ns, geometry.nx, geometry.nz));
        for s in &self.scatterers {
            let (i, n) = pixel_of(geometry, s);
            p[[s.species, i, n]] += Complex64::new(s.strength, 0.0);
        }
        Ok(p)
    }
}

pub fn pixel_of(geometry: &ImagingGeometry, s: &PointScatterer) -> (usize, usize) {
    let i = ((s.x / geometry.dx()).round() as usize).min(geometry.nx - 1);
    let n = ((s.z / geometry.dz()).round() as usize).min(geometry.nz - 1);
    (i, n)
}

/// Options for [`random_phantom`]; separations and margins are in pixels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomOptions {
    pub count: usize,
    pub species: usize,
    pub min_separation: f64,
    pub margin_x: usize,
    pub margin_z: usize,
    pub strength: f64,
}

/// Scatterers on grid points, species assigned round-robin, with pairwise pixel distance at
/// least `min_separation`.
pub fn random_phantom(seed: u64, geometry: &ImagingGeometry, opts: &PhantomOptions) -> Result<Phantom> {
    if opts.species == 0 {
        return Err(Error::invalid("phantom needs at least one species"));
    }
    if 2 * opts.margin_x >= geometry.nx || 2 * opts.margin_z >= geometry.nz {
        return Err(Error::invalid("phantom margins leave no room"));
    }
    let mut rng = substream(seed, "phantom");
    let mut pixels: Vec<(usize, usize)> = Vec::with_capacity(opts.count);
    let mut attempts = 0usize;
    while pixels.len() < opts.count {
        attempts += 1;
        if attempts > 10_000 * opts.count.max(1) {
            return Err(Error::invalid("cannot place scatterers with the requested separation"));
        }
        let i = rng.random_range(opts.margin_x..geometry.nx - opts.margin_x);
        let n = rng.random_range(opts.margin_z..geometry.nz - opts.margin_z);
        let far = pixels.iter().all(|&(a, b)| {
            let d2 = (a as f64 - i as f64).powi(2) + (b as f64 - n as f64).powi(2);
            d2 >= opts.min_separation * opts.min_separation
        });
        if far {
            pixels.push((i, n));
        }
    }
    let scatterers = pixels
        .into_iter()
        .enumerate()
        .map(|(k, (i, n))| PointScatterer {
            x: geometry.x(i),
            z: geometry.z(n),
            species: k % opts.species,
            strength: opts.strength,
        })
        .collect();
    Ok(Phantom { scatterers })
}
