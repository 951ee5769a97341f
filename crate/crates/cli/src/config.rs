//! Run configuration: one TOML file plus `key=value` overrides.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use spectomo::analysis::DEFAULT_DENSE_BUDGET;
use spectomo::recon::{DataScaling, ReconConfig, Regularizer};
use spectomo::scatter::{PhantomOptions, SimulationMode};
use spectomo::spectra::{LorentzianRanges, DEFAULT_OSCILLATORS};
use spectomo::uniqueness::{AuditOptions, SearchStrategy};
use spectomo::ImagingGeometry;

/// Error in the configuration itself; maps to exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid config: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(ConfigError(msg.into()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    pub geometry: GeometryConfig,
    #[serde(default = "default_nodes")]
    pub kernel_nodes: usize,
    #[serde(default = "default_cache_dir")]
    pub cache_dir: PathBuf,
    #[serde(default)]
    pub spectra: SpectraConfig,
    #[serde(default)]
    pub phantom: PhantomConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub recon: ReconSection,
    #[serde(default)]
    pub audit: AuditSection,
    #[serde(default)]
    pub sv: SvSection,
    #[serde(default)]
    pub render: RenderSection,
}

fn default_nodes() -> usize {
    spectomo::kernel::DEFAULT_NODES
}

fn default_cache_dir() -> PathBuf {
    PathBuf::from("kernel-cache")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub nx: usize,
    pub nz: usize,
    pub nk: usize,
    pub lx: f64,
    pub lz: f64,
    pub kmin: f64,
    pub kmax: f64,
    pub na: f64,
    pub focal_planes: Vec<f64>,
    /// Flat unit spectrum when omitted.
    #[serde(default)]
    pub power_spectrum: Option<Vec<f64>>,
}

impl GeometryConfig {
    pub fn build(&self) -> Result<ImagingGeometry> {
        let g = ImagingGeometry::new(
            self.nx,
            self.nz,
            self.nk,
            self.lx,
            self.lz,
            self.kmin,
            self.kmax,
            self.na,
            self.focal_planes.clone(),
        )
        .map_err(|e| config_error(format!("geometry: {e}")))?;
        match &self.power_spectrum {
            Some(p) => g.with_power_spectrum(p.clone()).map_err(|e| config_error(format!("geometry: {e}"))),
            None => Ok(g),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectraConfig {
    /// Library CSV; synthesized from Lorentzians when absent.
    pub library: Option<PathBuf>,
    pub count: usize,
    pub oscillators: usize,
    /// Lorentzian sampling ranges; the default centres oscillators inside the imaging band.
    pub ranges: Option<LorentzianRanges>,
    /// Library indices of the species present in simulated objects.
    pub selection: Vec<usize>,
    /// Library indices used as the reconstruction dictionary; the whole library when absent.
    pub recon_species: Option<Vec<usize>>,
}

impl Default for SpectraConfig {
    fn default() -> Self {
        SpectraConfig {
            library: None,
            count: 5,
            oscillators: DEFAULT_OSCILLATORS,
            ranges: None,
            selection: vec![0, 2, 4],
            recon_species: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomConfig {
    /// TOML file with `[[scatterers]]` tables; a random phantom is drawn when absent.
    pub file: Option<PathBuf>,
    pub count: usize,
    pub min_separation: f64,
    pub margin_x: usize,
    pub margin_z: usize,
    pub strength: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig { file: None, count: 10, min_separation: 6.0, margin_x: 8, margin_z: 10, strength: 1.0 }
    }
}

impl PhantomConfig {
    pub fn options(&self, species: usize) -> PhantomOptions {
        PhantomOptions {
            count: self.count,
            species,
            min_separation: self.min_separation,
            margin_x: self.margin_x,
            margin_z: self.margin_z,
            strength: self.strength,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub mode: SimulationMode,
    /// Spectral noise variance per active species.
    pub noise: Option<Vec<f64>>,
    /// Spectral noise variance as a fraction of the mean spectral power, used when `noise` is absent.
    pub noise_rel: f64,
    pub delta: f64,
    pub beam_nodes: usize,
    /// Rasterize the phantom and use the dense volume solver instead of point scatterers.
    pub grid: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            mode: SimulationMode::Born,
            noise: None,
            noise_rel: 0.0,
            delta: 1.0,
            beam_nodes: spectomo::scatter::DEFAULT_BEAM_NODES,
            grid: false,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconSection {
    pub regularizer: Option<Regularizer>,
    pub lambda_r: Option<f64>,
    pub max_iters: Option<usize>,
    pub cg_tol: Option<f64>,
    pub scaling: Option<DataScaling>,
    pub power_iters: Option<usize>,
    pub restart: Option<bool>,
}

impl ReconSection {
    /// Defaults of the chosen regularizer with the configured fields applied on top.
    pub fn build(&self, seed: u64) -> Result<ReconConfig> {
        let base = match self.regularizer.unwrap_or(Regularizer::Tikhonov) {
            Regularizer::Tikhonov => ReconConfig::tikhonov(),
            Regularizer::L1 => ReconConfig::l1(),
            Regularizer::GroupL21 => ReconConfig { regularizer: Regularizer::GroupL21, ..ReconConfig::l1() },
        };
        let cfg = ReconConfig {
            lambda_r: self.lambda_r.unwrap_or(base.lambda_r),
            max_iters: self.max_iters.unwrap_or(base.max_iters),
            cg_tol: self.cg_tol.unwrap_or(base.cg_tol),
            scaling: self.scaling.unwrap_or(base.scaling),
            power_iters: self.power_iters.unwrap_or(base.power_iters),
            restart: self.restart.unwrap_or(base.restart),
            seed,
            ..base
        };
        cfg.validate().map_err(|e| config_error(format!("recon: {e}")))?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditSection {
    pub q: Vec<usize>,
    pub tol: f64,
    pub subset_budget: usize,
    pub search_budget: usize,
    pub kruskal_budget: usize,
    pub strategy: SearchStrategy,
    /// Also run the block-sparse audit with the reconstruction dictionary.
    pub block_sparse: bool,
}

impl Default for AuditSection {
    fn default() -> Self {
        let o = AuditOptions::default();
        AuditSection {
            q: vec![0],
            tol: o.tol,
            subset_budget: o.subset_budget,
            search_budget: o.search_budget,
            kruskal_budget: o.kruskal_budget,
            strategy: o.strategy,
            block_sparse: false,
        }
    }
}

impl AuditSection {
    pub fn options(&self, seed: u64) -> AuditOptions {
        AuditOptions {
            tol: self.tol,
            subset_budget: self.subset_budget,
            search_budget: self.search_budget,
            kruskal_budget: self.kruskal_budget,
            strategy: self.strategy,
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    Library,
    Random,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvSection {
    /// Transverse indices to scan; every index when empty.
    pub q: Vec<usize>,
    pub normalize: bool,
    /// Scan the stacked kernel blocks instead of the full system.
    pub kernel_only: bool,
    pub budget: usize,
    pub ensemble_source: EnsembleKind,
    pub ensemble_species: usize,
    pub ensemble_nf: Vec<usize>,
    pub ensemble_q: usize,
    pub trials: usize,
}

impl Default for SvSection {
    fn default() -> Self {
        SvSection {
            q: Vec::new(),
            normalize: true,
            kernel_only: false,
            budget: DEFAULT_DENSE_BUDGET,
            ensemble_source: EnsembleKind::Library,
            ensemble_species: 3,
            ensemble_nf: vec![1, 2, 3],
            ensemble_q: 0,
            trials: 200,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RenderTransform {
    Magnitude,
    MagnitudeSquared,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderSection {
    pub transform: RenderTransform,
    /// Species shown in red, green and blue; at most three. No composite when empty.
    pub channels: Vec<usize>,
}

impl Default for RenderSection {
    fn default() -> Self {
        RenderSection { transform: RenderTransform::MagnitudeSquared, channels: vec![0, 1, 2] }
    }
}

/// Reads `path`, applies `key=value` overrides (dotted keys, TOML values, bare strings allowed)
/// and deserializes the result.
pub fn load(path: &Path, overrides: &[String]) -> Result<Config> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut table: toml::Table =
        text.parse().map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    for item in overrides {
        apply_override(&mut table, item)?;
    }
    let config: Config = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| config_error(e.to_string()))?;
    Ok(config)
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

pub fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| config_error(format!("override `{item}` is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!(ConfigError(format!("override key `{key}` is malformed")));
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| config_error(format!("override `{key}`: `{part}` is not a table")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}
