use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::{circular_normal, substream};

/// Per-location copies of `h` with i.i.d. `CN(0, xi)` perturbations over location and
/// wavenumber. `xi = 0` returns exact copies.
pub fn perturb_spectra(h: &[Complex64], xi: f64, n_locations: usize, seed: u64) -> Result<Vec<Vec<Complex64>>> {
    if !(xi.is_finite() && xi >= 0.0) {
        return Err(Error::invalid(format!("spectral noise variance must be >= 0, got {xi}")));
    }
    if xi == 0.0 {
        return Ok(vec![h.to_vec(); n_locations]);
    }
    let mut rng = substream(seed, "spectral-noise");
    Ok((0..n_locations)
        .map(|_| h.iter().map(|&v| v + circular_normal(&mut rng, xi)).collect())
        .collect())
}
