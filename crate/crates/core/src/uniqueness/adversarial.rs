use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Second spectrum `h2 = (D1 B w) / (B v)` (elementwise) for which `[D1 B, D2 B]` loses rank,
/// since `D2 B v = D1 B w`.
pub fn adversarial_spectra(b: &CMatrix, h1: &[Complex64], w: &[Complex64], v: &[Complex64]) -> Result<Vec<Complex64>> {
    let (nk, r) = b.shape();
    if h1.len() != nk || w.len() != r || v.len() != r {
        return Err(Error::dim("adversarial spectra: inconsistent dimensions"));
    }
    let bw = b * nalgebra::DVector::from_column_slice(w);
    let bv = b * nalgebra::DVector::from_column_slice(v);
    let scale = bv.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(i) = bv.iter().position(|z| z.norm() <= 1e-14 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::invalid(format!("entry {i} of B v is zero")));
    }
    Ok((0..nk).map(|i| h1[i] * bw[i] / bv[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{numerical_rank, RANK_TOL};
    use crate::rng::{complex_normal, random_complex_vec, substream};
    use crate::spectra::SpectraMatrix;
    use crate::uniqueness::restricted_phi;

    #[test]
    fn equal_weights_with_flat_spectrum_duplicate() {
        let mut rng = substream(1, "adv");
        let b = CMatrix::from_fn(8, 3, |_, _| complex_normal(&mut rng));
        let w = random_complex_vec(&mut rng, 3);
        let h1 = vec![Complex64::new(1.0, 0.0); 8];
        let h2 = adversarial_spectra(&b, &h1, &w, &w).unwrap();
        assert!(h2.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn construction_drops_rank_and_noise_restores_it() {
        let mut rng = substream(2, "adv-rank");
        let (nk, r) = (10, 4);
        for _ in 0..5 {
            let b = CMatrix::from_fn(nk, r, |_, _| complex_normal(&mut rng));
            let h1 = random_complex_vec(&mut rng, nk);
            let w = random_complex_vec(&mut rng, r);
            let v = random_complex_vec(&mut rng, r);
            let h2 = adversarial_spectra(&b, &h1, &w, &v).unwrap();
            let h = SpectraMatrix::from_columns(&[h1.clone(), h2.clone()]).unwrap();
            let rank = numerical_rank(&restricted_phi(&h, &b).unwrap(), RANK_TOL).unwrap();
            assert!(rank < 2 * r);
            let noisy: Vec<Complex64> = h2.iter().map(|z| z + 1e-2 * complex_normal(&mut rng)).collect();
            let h = SpectraMatrix::from_columns(&[h1, noisy]).unwrap();
            assert_eq!(numerical_rank(&restricted_phi(&h, &b).unwrap(), RANK_TOL).unwrap(), 2 * r);
        }
    }

    #[test]
    fn zero_denominator_rejected() {
        let b = CMatrix::identity(3, 3);
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        assert!(adversarial_spectra(&b, &[one; 3], &[one; 3], &[one, zero, one]).is_err());
    }
}
