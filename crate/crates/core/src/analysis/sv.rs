use std::io::Write;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::assemble_block;
use crate::kernel::KernelTable;
use crate::linalg::singular_values;
use crate::rng::substream;
use crate::spectra::{build_h, random_profile, SpectraMatrix, SpectralLibrary};

/// Largest dense block, in complex entries, that singular-value studies will assemble.
pub const DEFAULT_DENSE_BUDGET: usize = 1 << 22;

#[derive(Clone, Debug, Serialize)]
pub struct SvScan {
    pub q: Vec<usize>,
    /// Singular values per scanned block, non-increasing.
    pub spectra: Vec<Vec<f64>>,
    pub geometry_hash: String,
    pub na: f64,
    pub nf: usize,
    pub species: Vec<String>,
    pub normalized: bool,
}

impl SvScan {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["q", "index", "sigma"])?;
        for (q, sigma) in self.q.iter().zip(&self.spectra) {
            for (i, s) in sigma.iter().enumerate() {
                w.write_record([q.to_string(), i.to_string(), format!("{s:e}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn normalize(mut sigma: Vec<f64>) -> Vec<f64> {
    if let Some(&top) = sigma.first() {
        if top > 0.0 {
            sigma.iter_mut().for_each(|s| *s /= top);
        }
    }
    sigma
}

fn check_q(table: &KernelTable, q_list: &[usize]) -> Result<()> {
    match q_list.iter().find(|&&q| q >= table.geometry.nx) {
        Some(q) => Err(Error::invalid(format!("q = {q} out of range"))),
        None => Ok(()),
    }
}

/// Singular values of the assembled blocks `Phi^q`, optionally scaled to unit spectral norm.
pub fn sv_scan(h: &SpectraMatrix, table: &KernelTable, q_list: &[usize], normalize_unit: bool, budget: usize) -> Result<SvScan> {
    check_q(table, q_list)?;
    let g = &table.geometry;
    let entries = table.nf() * g.nk * h.ns() * g.nz;
    if entries > budget {
        return Err(Error::Budget(format!("dense block of {entries} entries exceeds the budget of {budget}")));
    }
    let spectra = q_list
        .par_iter()
        .map(|&q| {
            let sigma = singular_values(&assemble_block(q, h, table)?)?;
            Ok(if normalize_unit { normalize(sigma) } else { sigma })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SvScan {
        q: q_list.to_vec(),
        spectra,
        geometry_hash: g.hash(),
        na: g.na,
        nf: table.nf(),
        species: h.names.clone(),
        normalized: normalize_unit,
    })
}

/// Singular values of the stacked kernel blocks `[A^q_1; ...; A^q_Nf]`.
pub fn kernel_sv_scan(table: &KernelTable, q_list: &[usize]) -> Result<SvScan> {
    check_q(table, q_list)?;
    let spectra = q_list.par_iter().map(|&q| singular_values(&table.stacked(q))).collect::<Result<Vec<_>>>()?;
    Ok(SvScan {
        q: q_list.to_vec(),
        spectra,
        geometry_hash: table.geometry.hash(),
        na: table.geometry.na,
        nf: table.nf(),
        species: Vec::new(),
        normalized: false,
    })
}

/// Number of singular values with `sigma_i / sigma_1 > rel`.
pub fn knee_index(sigma: &[f64], rel: f64) -> usize {
    match sigma.first() {
        Some(&top) if top > 0.0 => sigma.iter().filter(|&&s| s / top > rel).count(),
        _ => 0,
    }
}

/// Focal depths `Lz (f + 1) / (Nf + 1)`.
pub fn evenly_spaced_focal_planes(lz: f64, nf: usize) -> Vec<f64> {
    (0..nf).map(|f| lz * (f + 1) as f64 / (nf + 1) as f64).collect()
}

pub enum EnsembleSource<'a> {
    /// Random `Ns`-subsets of a spectral library.
    Library(&'a SpectralLibrary),
    /// Random profiles with standard normal real and uniform imaginary parts.
    RandomProfiles,
}

#[derive(Clone, Debug, Serialize)]
pub struct Envelope {
    pub nf: usize,
    /// Worst (smallest) normalized singular value per index over all trials.
    pub min: Vec<f64>,
    /// Best (largest) normalized singular value per index over all trials.
    pub max: Vec<f64>,
}

/// Best/worst envelopes of unit-normalized singular values of `Phi^q` over random spectra draws,
/// one envelope per kernel table (one table per focal-plane count). Each trial uses the same
/// spectra for every table.
pub fn sv_ensemble(
    source: &EnsembleSource,
    ns: usize,
    tables: &[KernelTable],
    q: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<Envelope>> {
    let nk = match tables.first() {
        Some(t) => t.geometry.nk,
        None => return Ok(Vec::new()),
    };
    if tables.iter().any(|t| t.geometry.nk != nk) {
        return Err(Error::dim("ensemble tables disagree on Nk"));
    }
    if let EnsembleSource::Library(lib) = source {
        if lib.len() < ns {
            return Err(Error::invalid(format!("library has {} profiles, need {ns}", lib.len())));
        }
        if lib.nk() != nk {
            return Err(Error::dim("library and tables disagree on Nk"));
        }
    }
    let draws: Vec<SpectraMatrix> = (0..trials)
        .map(|t| match source {
            EnsembleSource::Library(lib) => {
                let mut rng = substream(seed, &format!("ensemble-{t}"));
                build_h(lib, &sample(&mut rng, lib.len(), ns).into_vec())
            }
            EnsembleSource::RandomProfiles => {
                let cols: Vec<_> = (0..ns)
                    .map(|s| random_profile(seed.wrapping_mul(1_000_003).wrapping_add((t * ns + s) as u64), nk).values)
                    .collect();
                SpectraMatrix::from_columns(&cols)
            }
        })
        .collect::<Result<_>>()?;
    tables
        .iter()
        .map(|table| {
            let spectra: Vec<Vec<f64>> = draws
                .par_iter()
                .map(|h| sv_scan(h, table, &[q], true, DEFAULT_DENSE_BUDGET).map(|s| s.spectra.into_iter().next().unwrap()))
                .collect::<Result<_>>()?;
            let len = spectra.first().map_or(0, Vec::len);
            let min = (0..len).map(|i| spectra.iter().map(|s| s[i]).fold(f64::INFINITY, f64::min)).collect();
            let max = (0..len).map(|i| spectra.iter().map(|s| s[i]).fold(0.0, f64::max)).collect();
            Ok(Envelope { nf: table.nf(), min, max })
        })
        .collect()
}
