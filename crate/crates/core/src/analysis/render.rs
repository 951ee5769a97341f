use std::io::Write;

use crate::error::{Error, Result};
use crate::forward::DensityStack;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transform {
    Magnitude,
    MagnitudeSquared,
}

/// Species index shown in each of the red, green and blue channels.
pub type ChannelMap = [Option<usize>; 3];

/// 8-bit image with rows indexed by depth and columns by transverse position.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub pixels: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct RenderedImages {
    /// One grayscale image per species.
    pub species: Vec<Image>,
    pub rgb: Option<Image>,
}

fn quantize(values: &[f64]) -> Vec<u8> {
    let max = values.iter().copied().fold(0.0, f64::max);
    values
        .iter()
        .map(|&v| if max > 0.0 { (255.0 * v / max).round() as u8 } else { 0 })
        .collect()
}

/// Spatial images of every species plus an optional RGB composite, each max-normalized.
pub fn render_images(densities: &DensityStack, mapping: Option<ChannelMap>, transform: Transform) -> Result<RenderedImages> {
    let spatial = densities.to_spatial();
    let (ns, nx, nz) = spatial.dim();
    let intensity = |s: usize| -> Vec<f64> {
        let mut out = Vec::with_capacity(nx * nz);
        for n in 0..nz {
            for i in 0..nx {
                let m = spatial[[s, i, n]].norm();
                out.push(match transform {
                    Transform::Magnitude => m,
                    Transform::MagnitudeSquared => m * m,
                });
            }
        }
        out
    };
    let species: Vec<Image> = (0..ns)
        .map(|s| Image { width: nx, height: nz, channels: 1, pixels: quantize(&intensity(s)) })
        .collect();
    let rgb = match mapping {
        None => None,
        Some(map) => {
            let used: Vec<usize> = map.iter().flatten().copied().collect();
            if let Some(&s) = used.iter().find(|&&s| s >= ns) {
                return Err(Error::invalid(format!("channel map names species {s} of {ns}")));
            }
            if (1..used.len()).any(|i| used[..i].contains(&used[i])) {
                return Err(Error::invalid("channel map assigns a species twice"));
            }
            let mut pixels = vec![0u8; 3 * nx * nz];
            for (c, s) in map.iter().enumerate() {
                if let Some(s) = s {
                    for (p, v) in species[*s].pixels.iter().enumerate() {
                        pixels[3 * p + c] = *v;
                    }
                }
            }
            Some(Image { width: nx, height: nz, channels: 3, pixels })
        }
    };
    Ok(RenderedImages { species, rgb })
}

/// Binary PGM (`P5`).
pub fn write_pgm<W: Write>(mut w: W, image: &Image) -> Result<()> {
    if image.channels != 1 {
        return Err(Error::invalid("PGM needs a single-channel image"));
    }
    write!(w, "P5\n{} {}\n255\n", image.width, image.height)?;
    w.write_all(&image.pixels)?;
    Ok(())
}

/// Binary PPM (`P6`).
pub fn write_ppm<W: Write>(mut w: W, image: &Image) -> Result<()> {
    if image.channels != 3 {
        return Err(Error::invalid("PPM needs a three-channel image"));
    }
    write!(w, "P6\n{} {}\n255\n", image.width, image.height)?;
    w.write_all(&image.pixels)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use num_complex::Complex64;

    #[test]
    fn zero_density_is_black() {
        let r = render_images(&DensityStack::zeros(2, 4, 3), Some([Some(0), Some(1), None]), Transform::Magnitude).unwrap();
        assert!(r.species.iter().all(|im| im.pixels.iter().all(|&p| p == 0)));
        assert!(r.rgb.unwrap().pixels.iter().all(|&p| p == 0));
    }

    #[test]
    fn bright_pixel_lands_at_its_index() {
        let mut p = Array3::zeros((1, 4, 3));
        p[[0, 2, 1]] = Complex64::new(0.0, 3.0);
        let r = render_images(&DensityStack::from_spatial(&p), None, Transform::Magnitude).unwrap();
        let im = &r.species[0];
        for (k, &v) in im.pixels.iter().enumerate() {
            let expect = if k == 4 + 2 { 255 } else { 0 };
            assert_eq!(v, expect, "pixel {k}");
        }
        let mut buf = Vec::new();
        write_pgm(&mut buf, im).unwrap();
        assert!(buf.starts_with(b"P5\n4 3\n255\n"));
        assert_eq!(buf.len(), 11 + 12);
    }

    #[test]
    fn squared_magnitude_suppresses_background() {
        let mut p = Array3::zeros((1, 3, 1));
        p[[0, 0, 0]] = Complex64::new(1.0, 0.0);
        p[[0, 1, 0]] = Complex64::new(0.3, 0.0);
        let d = DensityStack::from_spatial(&p);
        let a = render_images(&d, None, Transform::Magnitude).unwrap();
        let b = render_images(&d, None, Transform::MagnitudeSquared).unwrap();
        assert!(b.species[0].pixels[1] < a.species[0].pixels[1]);
        assert_eq!(b.species[0].pixels[0], 255);
    }

    #[test]
    fn channel_collisions_rejected() {
        let d = DensityStack::zeros(3, 2, 2);
        assert!(render_images(&d, Some([Some(0), Some(0), None]), Transform::Magnitude).is_err());
        assert!(render_images(&d, Some([Some(5), None, None]), Transform::Magnitude).is_err());
        let r = render_images(&d, Some([Some(2), None, Some(0)]), Transform::Magnitude).unwrap();
        let mut buf = Vec::new();
        write_ppm(&mut buf, r.rgb.as_ref().unwrap()).unwrap();
        assert!(buf.starts_with(b"P6\n2 2\n255\n"));
        assert!(write_pgm(Vec::new(), r.rgb.as_ref().unwrap()).is_err());
    }
}
