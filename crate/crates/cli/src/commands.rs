//! One function per subcommand; each fills a run directory and finishes its manifest.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use spectomo::analysis::{
    evenly_spaced_focal_planes, kernel_sv_scan, render_images, sv_ensemble, sv_scan, write_pgm, write_ppm,
    ChannelMap, EnsembleSource, Transform,
};
use spectomo::forward::measurements_to_fourier;
use spectomo::recon::{solve_fista, solve_tikhonov, Regularizer};
use spectomo::rng::substream;
use spectomo::scatter::{random_phantom, simulate_grid_data, simulate_point_data, Phantom, SimulationConfig};
use spectomo::spectra::{build_h, LorentzianRanges};
use spectomo::uniqueness::audit_block;
use spectomo::{DensityStack, ImagingGeometry, MeasurementStack, SpectraMatrix, SpectralLibrary};

use crate::config::{Config, ConfigError, EnsembleKind, RenderTransform};
use crate::run::{kernel_table, read_stack, RunDir};

fn library(config: &Config, geometry: &ImagingGeometry, run: &mut RunDir) -> Result<SpectralLibrary> {
    let k = geometry.wavenumbers();
    let spectra = &config.spectra;
    if let Some(path) = &spectra.library {
        run.record_input(path)?;
        let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let lib = SpectralLibrary::read_csv(std::io::BufReader::new(file))?;
        let same_grid = lib.wavenumbers.len() == k.len()
            && lib.wavenumbers.iter().zip(&k).all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs().max(1.0));
        return Ok(if same_grid { lib } else { lib.resample(&k)? });
    }
    let ranges = spectra
        .ranges
        .clone()
        .unwrap_or(LorentzianRanges { nu: (geometry.kmin, geometry.kmax), ..Default::default() });
    let seed = rand::RngCore::next_u64(&mut substream(config.seed, "library"));
    Ok(SpectralLibrary::lorentzian(seed, spectra.count, spectra.oscillators, &ranges, &k)?)
}

fn select(lib: &SpectralLibrary, indices: &[usize], what: &str) -> Result<SpectraMatrix> {
    if indices.is_empty() {
        bail!(ConfigError(format!("{what} is empty")));
    }
    if let Some(i) = indices.iter().find(|&&i| i >= lib.len()) {
        bail!(ConfigError(format!("{what} index {i} exceeds library size {}", lib.len())));
    }
    Ok(build_h(lib, indices)?)
}

fn active_species(config: &Config, lib: &SpectralLibrary) -> Result<SpectraMatrix> {
    select(lib, &config.spectra.selection, "spectra.selection")
}

fn dictionary(config: &Config, lib: &SpectralLibrary) -> Result<(SpectraMatrix, Vec<usize>)> {
    let indices = config.spectra.recon_species.clone().unwrap_or_else(|| (0..lib.len()).collect());
    Ok((select(lib, &indices, "spectra.recon_species")?, indices))
}

fn names(lib: &SpectralLibrary, indices: &[usize]) -> Vec<String> {
    indices.iter().map(|&i| lib.profiles[i].name.clone()).collect()
}

fn phantom(config: &Config, geometry: &ImagingGeometry, ns: usize, run: &mut RunDir) -> Result<Phantom> {
    let p = match &config.phantom.file {
        Some(path) => {
            run.record_input(path)?;
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?
        }
        None => random_phantom(config.seed, geometry, &config.phantom.options(ns))?,
    };
    p.validate(geometry, ns).map_err(|e| ConfigError(format!("phantom: {e}")))?;
    Ok(p)
}

fn check_geometry(metadata: &Value, geometry: &ImagingGeometry, path: &Path) -> Result<()> {
    if let Some(stored) = metadata.get("geometry") {
        let stored: ImagingGeometry = serde_json::from_value(stored.clone())
            .map_err(|e| ConfigError(format!("{}: bad geometry metadata: {e}", path.display())))?;
        if &stored != geometry {
            bail!(ConfigError(format!("{} was produced for a different geometry", path.display())));
        }
    }
    Ok(())
}

pub fn kernel_build(config: &Config, mut run: RunDir) -> Result<()> {
    let g = config.geometry.build()?;
    let (table, cache) = kernel_table(config, &g)?;
    let max = table.coefficients.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let summary = json!({
        "shape": table.coefficients.shape(),
        "max_abs": max,
        "geometry_hash": g.hash(),
        "effective_rank": g.effective_rank(),
    });
    run.write_text("kernel.json", &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    run.note("kernel_cache", serde_json::to_value(cache)?);
    run.finish(config.seed)
}

pub fn synth_spectra(config: &Config, mut run: RunDir) -> Result<()> {
    let g = config.geometry.build()?;
    let lib = library(config, &g, &mut run)?;
    let w = run.create_file("library.csv")?;
    lib.write_csv(w)?;
    run.finish(config.seed)
}

pub fn simulate(config: &Config, mut run: RunDir) -> Result<()> {
    let g = config.geometry.build()?;
    let lib = library(config, &g, &mut run)?;
    let active = active_species(config, &lib)?;
    let ns = active.ns();
    let phantom = phantom(config, &g, ns, &mut run)?;
    let sim = &config.simulate;
    let noise = sim.noise.clone().unwrap_or_else(|| vec![sim.noise_rel * active.mean_power(); ns]);
    let sim_config = SimulationConfig {
        mode: sim.mode,
        geometry: g.clone(),
        spectral_noise: noise,
        seed: config.seed,
        delta: sim.delta,
        beam_nodes: sim.beam_nodes,
    };
    sim_config.validate(ns).map_err(|e| ConfigError(format!("simulate: {e}")))?;
    let truth = phantom.to_density(&g, ns)?;
    let spatial = if sim.grid {
        simulate_grid_data(&truth, &active, &sim_config)?
    } else {
        simulate_point_data(&phantom.scatterers, &active, &sim_config)?
    };
    let data = measurements_to_fourier(&spatial, g.nx)?;
    let species = names(&lib, &config.spectra.selection);
    let meta = json!({ "kind": "measurements", "layout": "f,q,m", "geometry": g });
    run.write_stack("measurements.cast", &data.s, &meta)?;
    let meta = json!({ "kind": "densities", "layout": "s,q,n", "species": species, "geometry": g });
    run.write_stack("truth.cast", &DensityStack::from_spatial(&truth).p, &meta)?;
    run.write_text("phantom.toml", &toml::to_string(&phantom)?)?;
    run.finish(config.seed)
}

pub fn reconstruct(config: &Config, input: &Path, mut run: RunDir) -> Result<()> {
    let g = config.geometry.build()?;
    let recon = config.recon.build(config.seed)?;
    run.record_input(input)?;
    let (s, meta) = read_stack(input)?;
    check_geometry(&meta, &g, input)?;
    let lib = library(config, &g, &mut run)?;
    let (h, indices) = dictionary(config, &lib)?;
    let (table, cache) = kernel_table(config, &g)?;
    let data = MeasurementStack { s };
    let result = match recon.regularizer {
        Regularizer::Tikhonov => solve_tikhonov(&data, &h, &table, &recon)?,
        Regularizer::L1 | Regularizer::GroupL21 => solve_fista(&data, &h, &table, &recon)?,
    };
    let meta = json!({ "kind": "densities", "layout": "s,q,n", "species": names(&lib, &indices), "geometry": g });
    run.write_stack("densities.cast", &result.densities.p, &meta)?;
    let w = run.create_file("trace.csv")?;
    result.write_trace_csv(w)?;
    run.note("kernel_cache", serde_json::to_value(cache)?);
    run.note(
        "result",
        json!({
            "iterations": result.iterations_run,
            "residual_norm": result.residual_norm,
            "data_weight": result.data_weight,
            "final_objective": result.objective_trace.last(),
        }),
    );
    run.finish(config.seed)
}

pub fn audit(config: &Config, mut run: RunDir) -> Result<()> {
    let g = config.geometry.build()?;
    let lib = library(config, &g, &mut run)?;
    let h = active_species(config, &lib)?;
    let dict = if config.audit.block_sparse { Some(dictionary(config, &lib)?.0) } else { None };
    let (table, cache) = kernel_table(config, &g)?;
    let opts = config.audit.options(config.seed);
    let mut reports = Vec::with_capacity(config.audit.q.len());
    for &q in &config.audit.q {
        if q >= g.nx {
            bail!(ConfigError(format!("audit.q = {q} is out of range for Nx = {}", g.nx)));
        }
        reports.push(audit_block(&table, &h, q, dict.as_ref(), &opts)?);
    }
    run.write_text("audit.json", &(serde_json::to_string_pretty(&reports)? + "\n"))?;
    let text: String = reports.iter().map(|r| r.to_text() + "\n").collect();
    run.write_text("audit.txt", &text)?;
    run.note("kernel_cache", serde_json::to_value(cache)?);
    run.finish(config.seed)
}

pub fn sv_scan_cmd(config: &Config, mut run: RunDir) -> Result<()> {
    let g = config.geometry.build()?;
    let sv = &config.sv;
    let q: Vec<usize> = if sv.q.is_empty() { (0..g.nx).collect() } else { sv.q.clone() };
    let (table, cache) = kernel_table(config, &g)?;
    let scan = if sv.kernel_only {
        kernel_sv_scan(&table, &q)?
    } else {
        let lib = library(config, &g, &mut run)?;
        let h = active_species(config, &lib)?;
        sv_scan(&h, &table, &q, sv.normalize, sv.budget)?
    };
    let w = run.create_file("sv_scan.csv")?;
    scan.write_csv(w)?;
    run.note("kernel_cache", serde_json::to_value(cache)?);
    run.note("effective_rank", json!(g.effective_rank()));
    run.finish(config.seed)
}

pub fn sv_ensemble_cmd(config: &Config, mut run: RunDir) -> Result<()> {
    let g = config.geometry.build()?;
    let sv = &config.sv;
    if sv.ensemble_q >= g.nx {
        bail!(ConfigError(format!("sv.ensemble_q = {} is out of range for Nx = {}", sv.ensemble_q, g.nx)));
    }
    let mut tables = Vec::with_capacity(sv.ensemble_nf.len());
    let mut caches = Vec::with_capacity(sv.ensemble_nf.len());
    for &nf in &sv.ensemble_nf {
        let geometry = ImagingGeometry { focal_planes: evenly_spaced_focal_planes(g.lz, nf), ..g.clone() };
        geometry.validate().map_err(|e| ConfigError(format!("sv.ensemble_nf = {nf}: {e}")))?;
        let (table, cache) = kernel_table(config, &geometry)?;
        tables.push(table);
        caches.push(cache);
    }
    let lib;
    let source = match sv.ensemble_source {
        EnsembleKind::Library => {
            lib = library(config, &g, &mut run)?;
            EnsembleSource::Library(&lib)
        }
        EnsembleKind::Random => EnsembleSource::RandomProfiles,
    };
    let envelopes = sv_ensemble(&source, sv.ensemble_species, &tables, sv.ensemble_q, sv.trials, config.seed)?;
    let mut w = csv::Writer::from_writer(run.create_file("ensemble.csv")?);
    w.write_record(["nf", "index", "min", "max"])?;
    for e in &envelopes {
        for (i, (lo, hi)) in e.min.iter().zip(&e.max).enumerate() {
            w.write_record([e.nf.to_string(), i.to_string(), format!("{lo:e}"), format!("{hi:e}")])?;
        }
    }
    w.flush()?;
    drop(w);
    run.note("kernel_cache", serde_json::to_value(caches)?);
    run.finish(config.seed)
}

pub fn render(config: &Config, input: &Path, mut run: RunDir) -> Result<()> {
    run.record_input(input)?;
    let (p, meta) = read_stack(input)?;
    let ns = p.dim().0;
    let channels = &config.render.channels;
    let mapping = match channels.len() {
        0 => None,
        1..=3 => {
            let mut map: ChannelMap = [None; 3];
            for (slot, &s) in map.iter_mut().zip(channels) {
                *slot = Some(s);
            }
            Some(map)
        }
        n => bail!(ConfigError(format!("render.channels lists {n} species, at most 3 fit in RGB"))),
    };
    let transform = match config.render.transform {
        RenderTransform::Magnitude => Transform::Magnitude,
        RenderTransform::MagnitudeSquared => Transform::MagnitudeSquared,
    };
    let images = render_images(&DensityStack { p }, mapping, transform)?;
    let species: Vec<String> = meta
        .get("species")
        .and_then(|v| serde_json::from_value::<Vec<String>>(v.clone()).ok())
        .filter(|n| n.len() == ns)
        .unwrap_or_else(|| (0..ns).map(|s| format!("species-{s}")).collect());
    for (name, image) in species.iter().zip(&images.species) {
        let mut w = run.create_file(&format!("{name}.pgm"))?;
        write_pgm(&mut w, image)?;
        w.flush()?;
    }
    if let Some(rgb) = &images.rgb {
        let mut w = run.create_file("composite.ppm")?;
        write_ppm(&mut w, rgb)?;
        w.flush()?;
    }
    run.finish(config.seed)
}
