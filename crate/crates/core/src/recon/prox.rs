use ndarray::Array3;
use num_complex::Complex64;

/// Complex soft thresholding: magnitudes shrink by `t`, phases are kept.
pub fn prox_l1(x: &mut Array3<Complex64>, t: f64) {
    x.mapv_inplace(|z| {
        let m = z.norm();
        if m <= t {
            Complex64::new(0.0, 0.0)
        } else {
            z * ((m - t) / m)
        }
    });
}

/// Block soft thresholding of each species slice `x[s, .., ..]`.
pub fn prox_group(x: &mut Array3<Complex64>, t: f64) {
    for mut block in x.outer_iter_mut() {
        let n = block.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let scale = if n <= t { 0.0 } else { (n - t) / n };
        block.mapv_inplace(|z| z * scale);
    }
}
