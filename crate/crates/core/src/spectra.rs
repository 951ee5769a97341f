//! Spectral profiles `h_s(k0)`, spectral libraries and the spectra matrix `H`.

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::rng::substream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Physical,
    SyntheticRandom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralProfile {
    pub name: String,
    pub values: Vec<Complex64>,
    pub kind: ProfileKind,
}

impl SpectralProfile {
    pub fn new(name: impl Into<String>, values: Vec<Complex64>, kind: ProfileKind) -> Result<Self> {
        let p = SpectralProfile { name: name.into(), values, kind };
        p.validate()?;
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid(format!("profile '{}' has non-finite values", self.name)));
        }
        if self.kind == ProfileKind::Physical {
            if let Some(m) = self.values.iter().position(|z| z.im < 0.0) {
                return Err(Error::invalid(format!(
                    "physical profile '{}' has negative imaginary part at sample {m}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Susceptibility `eta = n^2 - 1` of a complex refractive index `n_r + i kappa`.
pub fn susceptibility_from_index(n_r: f64, kappa: f64) -> Complex64 {
    Complex64::new(n_r * n_r - kappa * kappa - 1.0, 2.0 * n_r * kappa)
}

/// Sampling ranges for the sum-of-Lorentzians model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorentzianRanges {
    pub sigma0: (f64, f64),
    pub sigma: (f64, f64),
    pub nu: (f64, f64),
    pub gamma: (f64, f64),
}

impl Default for LorentzianRanges {
    fn default() -> Self {
        use std::f64::consts::PI;
        LorentzianRanges {
            sigma0: (0.0, 0.1),
            sigma: (0.0, 0.1),
            nu: (1.2 * PI, 4.4 * PI),
            gamma: (2.0 * PI * 1e-3, 4.0 * PI * 1e-2),
        }
    }
}

pub const DEFAULT_OSCILLATORS: usize = 99;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Oscillator {
    pub sigma: f64,
    pub nu: f64,
    pub gamma: f64,
}

/// `sigma0 + sum_n sigma_n / (nu_n^2 - k0^2 - i gamma_n k0)`.
pub fn lorentzian_value(sigma0: f64, oscillators: &[Oscillator], k0: f64) -> Complex64 {
    let mut h = Complex64::new(sigma0, 0.0);
    for o in oscillators {
        h += o.sigma / Complex64::new(o.nu * o.nu - k0 * k0, -o.gamma * k0);
    }
    h
}

fn uniform<R: Rng>(rng: &mut R, (a, b): (f64, f64)) -> f64 {
    if a == b {
        a
    } else {
        rng.random_range(a..b)
    }
}

/// Random sum-of-Lorentzians profile sampled on `wavenumbers`.
pub fn synth_lorentzian(
    seed: u64,
    n_oscillators: usize,
    ranges: &LorentzianRanges,
    wavenumbers: &[f64],
) -> Result<SpectralProfile> {
    if wavenumbers.is_empty() {
        return Err(Error::invalid("empty wavenumber grid"));
    }
    for (name, (a, b)) in [
        ("sigma0", ranges.sigma0),
        ("sigma", ranges.sigma),
        ("nu", ranges.nu),
        ("gamma", ranges.gamma),
    ] {
        if !(a.is_finite() && b.is_finite() && a <= b) {
            return Err(Error::invalid(format!("invalid {name} range [{a}, {b}]")));
        }
    }
    let mut rng = substream(seed, "lorentzian");
    let sigma0 = uniform(&mut rng, ranges.sigma0);
    let oscillators: Vec<Oscillator> = (0..n_oscillators)
        .map(|_| Oscillator {
            sigma: uniform(&mut rng, ranges.sigma),
            nu: uniform(&mut rng, ranges.nu),
            gamma: uniform(&mut rng, ranges.gamma),
        })
        .collect();
    let values = wavenumbers
        .iter()
        .map(|&k| lorentzian_value(sigma0, &oscillators, k))
        .collect();
    let physical = ranges.sigma.0 >= 0.0 && ranges.gamma.0 > 0.0;
    let kind = if physical { ProfileKind::Physical } else { ProfileKind::SyntheticRandom };
    SpectralProfile::new(format!("lorentzian-{seed}"), values, kind)
}

/// Profile with i.i.d. standard normal real part and Unif[0, 1] imaginary part.
pub fn random_profile(seed: u64, nk: usize) -> SpectralProfile {
    let mut rng = substream(seed, "random-profile");
    let values = (0..nk)
        .map(|_| {
            let re: f64 = rng.sample(rand_distr::StandardNormal);
            Complex64::new(re, rng.random::<f64>())
        })
        .collect();
    SpectralProfile {
        name: format!("random-{seed}"),
        values,
        kind: ProfileKind::SyntheticRandom,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralLibrary {
    pub profiles: Vec<SpectralProfile>,
    pub wavenumbers: Vec<f64>,
}

impl SpectralLibrary {
    pub fn new(profiles: Vec<SpectralProfile>, wavenumbers: Vec<f64>) -> Result<Self> {
        let lib = SpectralLibrary { profiles, wavenumbers };
        lib.validate()?;
        Ok(lib)
    }

    pub fn validate(&self) -> Result<()> {
        let k = &self.wavenumbers;
        if k.is_empty() {
            return Err(Error::invalid("library has an empty wavenumber grid"));
        }
        if k.len() > 1 {
            let dk = (k[k.len() - 1] - k[0]) / (k.len() - 1) as f64;
            if !(dk > 0.0) {
                return Err(Error::invalid("wavenumbers must be strictly increasing"));
            }
            for (i, w) in k.windows(2).enumerate() {
                if !(w[1] > w[0]) || ((w[1] - w[0]) - dk).abs() > 1e-6 * dk {
                    return Err(Error::invalid(format!("wavenumber grid is not uniform at sample {i}")));
                }
            }
        }
        for p in &self.profiles {
            if p.len() != k.len() {
                return Err(Error::dim(format!(
                    "profile '{}' has {} samples, grid has {}",
                    p.name,
                    p.len(),
                    k.len()
                )));
            }
            p.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn nk(&self) -> usize {
        self.wavenumbers.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.profiles.iter().position(|p| p.name == name)
    }

    /// Library of `count` random Lorentzian profiles named `species-<i>`.
    pub fn lorentzian(
        seed: u64,
        count: usize,
        n_oscillators: usize,
        ranges: &LorentzianRanges,
        wavenumbers: &[f64],
    ) -> Result<Self> {
        let profiles = (0..count)
            .map(|i| {
                let sub = seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
                let mut p = synth_lorentzian(sub, n_oscillators, ranges, wavenumbers)?;
                p.name = format!("species-{i}");
                Ok(p)
            })
            .collect::<Result<Vec<_>>>()?;
        SpectralLibrary::new(profiles, wavenumbers.to_vec())
    }

    /// Linear interpolation of every profile onto `target`; extrapolation is an error.
    pub fn resample(&self, target: &[f64]) -> Result<Self> {
        let k = &self.wavenumbers;
        let tol = 1e-9 * (k[k.len() - 1] - k[0]).abs().max(1.0);
        let mut idx = Vec::with_capacity(target.len());
        for &t in target {
            if t < k[0] - tol || t > k[k.len() - 1] + tol {
                return Err(Error::invalid(format!(
                    "wavenumber {t} lies outside the library grid [{}, {}]",
                    k[0],
                    k[k.len() - 1]
                )));
            }
            if k.len() == 1 {
                idx.push((0, 0, 0.0));
                continue;
            }
            let j = match k.partition_point(|&v| v <= t) {
                0 => 0,
                p => (p - 1).min(k.len() - 2),
            };
            let w = ((t - k[j]) / (k[j + 1] - k[j])).clamp(0.0, 1.0);
            idx.push((j, j + 1, w));
        }
        let profiles = self
            .profiles
            .iter()
            .map(|p| SpectralProfile {
                name: p.name.clone(),
                values: idx
                    .iter()
                    .map(|&(a, b, w)| p.values[a] * (1.0 - w) + p.values[b] * w)
                    .collect(),
                kind: p.kind,
            })
            .collect();
        SpectralLibrary::new(profiles, target.to_vec())
    }

    /// Reads the CSV layout `k0,<name>_re,<name>_im,...`. Profiles with any negative imaginary
    /// sample are loaded as synthetic, the rest as physical.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 3 || headers.len() % 2 != 1 || &headers[0] != "k0" {
            return Err(Error::Format(
                "expected header 'k0,<name>_re,<name>_im,...'".into(),
            ));
        }
        let mut names = Vec::new();
        for c in (1..headers.len()).step_by(2) {
            let (re, im) = (&headers[c], &headers[c + 1]);
            let name = re
                .strip_suffix("_re")
                .filter(|n| im.strip_suffix("_im") == Some(*n))
                .ok_or_else(|| Error::Format(format!("columns '{re}', '{im}' are not a re/im pair")))?;
            names.push(name.to_string());
        }
        let mut k = Vec::new();
        let mut cols: Vec<Vec<Complex64>> = vec![Vec::new(); names.len()];
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec[i]
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("bad number '{}': {e}", &rec[i])))
            };
            k.push(parse(0)?);
            for (s, col) in cols.iter_mut().enumerate() {
                col.push(Complex64::new(parse(1 + 2 * s)?, parse(2 + 2 * s)?));
            }
        }
        let profiles = names
            .into_iter()
            .zip(cols)
            .map(|(name, values)| {
                let kind = if values.iter().all(|z| z.im >= 0.0) {
                    ProfileKind::Physical
                } else {
                    ProfileKind::SyntheticRandom
                };
                SpectralProfile { name, values, kind }
            })
            .collect();
        SpectralLibrary::new(profiles, k)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["k0".to_string()];
        for p in &self.profiles {
            header.push(format!("{}_re", p.name));
            header.push(format!("{}_im", p.name));
        }
        w.write_record(&header)?;
        for (m, k) in self.wavenumbers.iter().enumerate() {
            let mut row = vec![format!("{k:e}")];
            for p in &self.profiles {
                row.push(format!("{:e}", p.values[m].re));
                row.push(format!("{:e}", p.values[m].im));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `H[m, s] = h_s[m]`, one column per selected species.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectraMatrix {
    pub h: CMatrix,
    pub names: Vec<String>,
}

impl SpectraMatrix {
    pub fn from_columns(columns: &[Vec<Complex64>]) -> Result<Self> {
        let nk = columns.first().map(|c| c.len()).unwrap_or(0);
        if columns.iter().any(|c| c.len() != nk) {
            return Err(Error::dim("spectra columns differ in length"));
        }
        Ok(SpectraMatrix {
            h: CMatrix::from_fn(nk, columns.len(), |m, s| columns[s][m]),
            names: (0..columns.len()).map(|s| format!("species-{s}")).collect(),
        })
    }

    pub fn from_matrix(h: CMatrix) -> Self {
        let names = (0..h.ncols()).map(|s| format!("species-{s}")).collect();
        SpectraMatrix { h, names }
    }

    /// All-ones single species: the plain single-material imaging problem.
    pub fn ones(nk: usize) -> Self {
        SpectraMatrix::from_matrix(CMatrix::from_element(nk, 1, Complex64::new(1.0, 0.0)))
    }

    pub fn nk(&self) -> usize {
        self.h.nrows()
    }

    pub fn ns(&self) -> usize {
        self.h.ncols()
    }

    pub fn column(&self, s: usize) -> Vec<Complex64> {
        self.h.column(s).iter().copied().collect()
    }

    /// Mean of `|h_s[m]|^2` over all entries.
    pub fn mean_power(&self) -> f64 {
        self.h.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.h.len().max(1) as f64
    }
}

/// Columns of `H` are the library profiles at `selection`, in order.
pub fn build_h(library: &SpectralLibrary, selection: &[usize]) -> Result<SpectraMatrix> {
    for (i, &s) in selection.iter().enumerate() {
        if s >= library.len() {
            return Err(Error::invalid(format!(
                "selection index {s} out of range for a library of {}",
                library.len()
            )));
        }
        if selection[..i].contains(&s) {
            return Err(Error::invalid(format!("duplicate selection index {s}")));
        }
    }
    let nk = library.nk();
    Ok(SpectraMatrix {
        h: CMatrix::from_fn(nk, selection.len(), |m, c| library.profiles[selection[c]].values[m]),
        names: selection.iter().map(|&s| library.profiles[s].name.clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{numerical_rank, RANK_TOL};
    use proptest::prelude::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| 0.4 + 0.7 * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn susceptibility_examples() {
        assert_eq!(susceptibility_from_index(1.0, 0.0), Complex64::new(0.0, 0.0));
        let z = susceptibility_from_index(1.5, 0.0);
        assert_eq!(z, Complex64::new(1.25, 0.0));
        let z = susceptibility_from_index(1.2, 0.1);
        assert!((z.re - 0.43).abs() < 1e-14 && (z.im - 0.24).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn susceptibility_absorbs(n in 0.0f64..5.0, k in 0.0f64..5.0) {
            prop_assert!(susceptibility_from_index(n, k).im >= 0.0);
        }

        #[test]
        fn lorentzian_imaginary_part_non_negative(seed in 0u64..1000) {
            let k = grid(64);
            let p = synth_lorentzian(seed, 20, &LorentzianRanges::default(), &k).unwrap();
            prop_assert!(p.values.iter().all(|z| z.im >= 0.0));
            prop_assert_eq!(p.kind, ProfileKind::Physical);
        }
    }

    #[test]
    fn lorentzian_without_oscillator_weight_is_constant() {
        let mut r = LorentzianRanges::default();
        r.sigma = (0.0, 0.0);
        let p = synth_lorentzian(3, 10, &r, &grid(16)).unwrap();
        assert!(p.values.iter().all(|&z| z == p.values[0] && z.im == 0.0));
    }

    #[test]
    fn single_lorentzian_at_resonance() {
        let (sigma0, sigma, nu, gamma) = (0.05, 0.07, 2.0, 0.03);
        let h = lorentzian_value(sigma0, &[Oscillator { sigma, nu, gamma }], nu);
        let expect = Complex64::new(sigma0, sigma / (gamma * nu));
        assert!((h - expect).norm() < 1e-14 * expect.norm());
    }

    #[test]
    fn lorentzian_is_deterministic_and_validated() {
        let k = grid(32);
        let r = LorentzianRanges::default();
        assert_eq!(synth_lorentzian(9, 99, &r, &k).unwrap(), synth_lorentzian(9, 99, &r, &k).unwrap());
        assert_ne!(synth_lorentzian(9, 99, &r, &k).unwrap(), synth_lorentzian(10, 99, &r, &k).unwrap());
        assert!(synth_lorentzian(9, 99, &r, &[]).is_err());
    }

    #[test]
    fn random_profile_statistics() {
        let p = random_profile(0, 4);
        assert_eq!(p.len(), 4);
        assert!(p.values.iter().all(|z| (0.0..=1.0).contains(&z.im)));
        assert_ne!(random_profile(1, 8).values, random_profile(2, 8).values);
        let big = random_profile(5, 100_000);
        let mean_im = big.values.iter().map(|z| z.im).sum::<f64>() / 1e5;
        assert!((mean_im - 0.5).abs() < 0.01);
    }

    fn library() -> SpectralLibrary {
        SpectralLibrary::lorentzian(1, 5, DEFAULT_OSCILLATORS, &LorentzianRanges::default(), &grid(24)).unwrap()
    }

    #[test]
    fn build_h_selects_columns() {
        let lib = library();
        let h1 = build_h(&lib, &[3]).unwrap();
        assert_eq!(h1.ns(), 1);
        assert_eq!(h1.column(0), lib.profiles[3].values);
        let a = build_h(&lib, &[0, 2]).unwrap();
        let b = build_h(&lib, &[2, 0]).unwrap();
        assert_eq!(a.column(0), b.column(1));
        assert_eq!(a.column(1), b.column(0));
        assert!(build_h(&lib, &[1, 1]).is_err());
        assert!(build_h(&lib, &[5]).is_err());
    }

    #[test]
    fn three_synthetic_species_are_independent() {
        let h = build_h(&library(), &[0, 2, 4]).unwrap();
        assert_eq!(numerical_rank(&h.h, RANK_TOL).unwrap(), 3);
    }

    #[test]
    fn build_h_is_linear_in_profiles() {
        let mut lib = library();
        let before = build_h(&lib, &[1, 3]).unwrap();
        let c = Complex64::new(0.5, -2.0);
        lib.profiles[3].values.iter_mut().for_each(|v| *v *= c);
        let after = build_h(&lib, &[1, 3]).unwrap();
        for m in 0..lib.nk() {
            assert_eq!(after.h[(m, 0)], before.h[(m, 0)]);
            assert!((after.h[(m, 1)] - c * before.h[(m, 1)]).norm() < 1e-15);
        }
    }

    #[test]
    fn csv_round_trip_and_resample() {
        let lib = library();
        let mut buf = Vec::new();
        lib.write_csv(&mut buf).unwrap();
        let back = SpectralLibrary::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 5);
        for (a, b) in lib.profiles.iter().zip(&back.profiles) {
            assert_eq!(a.name, b.name);
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).norm() < 1e-12 * x.norm().max(1e-300));
            }
        }
        let mid: Vec<f64> = lib.wavenumbers.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let r = lib.resample(&mid).unwrap();
        let expect = 0.5 * (lib.profiles[0].values[0] + lib.profiles[0].values[1]);
        assert!((r.profiles[0].values[0] - expect).norm() < 1e-12);
        assert!(lib.resample(&[0.3]).is_err());
    }

    #[test]
    fn csv_rejects_malformed_header() {
        assert!(SpectralLibrary::read_csv("k0,a_re,b_im\n1,2,3\n".as_bytes()).is_err());
        assert!(SpectralLibrary::read_csv("k,a_re,a_im\n1,2,3\n".as_bytes()).is_err());
    }
}
