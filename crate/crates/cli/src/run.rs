//! Run directories, provenance manifests, the kernel cache and CAST stack files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ndarray::{Array3, Array4, Ix3, Ix4};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use spectomo::cast::{read_cast, write_cast, CastArray};
use spectomo::kernel::build_kernel_table;
use spectomo::{ImagingGeometry, KernelTable};

use crate::config::{Config, ConfigError};

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Serialize)]
struct FileRecord {
    path: String,
    sha256: String,
}

/// Output directory of one command together with the provenance it records.
pub struct RunDir {
    pub root: PathBuf,
    command: String,
    config: Value,
    inputs: Vec<FileRecord>,
    outputs: Vec<PathBuf>,
    extra: serde_json::Map<String, Value>,
}

impl RunDir {
    pub fn create(root: &Path, command: &str, config: &Config) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(RunDir {
            root: root.to_path_buf(),
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            inputs: Vec::new(),
            outputs: Vec::new(),
            extra: serde_json::Map::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        self.inputs.push(FileRecord { path: path.display().to_string(), sha256 });
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: Value) {
        self.extra.insert(key.to_string(), value);
    }

    /// Creates `name` inside the run directory and registers it as an output.
    pub fn create_file(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.outputs.push(path);
        Ok(BufWriter::new(file))
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let mut w = self.create_file(name)?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn write_stack(&mut self, name: &str, data: &Array3<Complex64>, metadata: &Value) -> Result<()> {
        let mut w = self.create_file(name)?;
        write_cast(&mut w, &CastArray::Complex(data.clone().into_dyn()), &metadata.to_string())?;
        w.flush()?;
        Ok(())
    }

    /// Writes `manifest.json` listing the resolved config, inputs and output hashes.
    pub fn finish(self, seed: u64) -> Result<()> {
        let config_text = serde_json::to_string(&self.config)?;
        let mut outputs = Vec::with_capacity(self.outputs.len());
        for path in &self.outputs {
            let name = path.strip_prefix(&self.root).unwrap_or(path).display().to_string();
            outputs.push(FileRecord { path: name, sha256: sha256_file(path)? });
        }
        let mut manifest = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "config": self.config,
            "config_sha256": hex::encode(Sha256::digest(config_text.as_bytes())),
            "inputs": self.inputs,
            "outputs": outputs,
        });
        manifest.as_object_mut().expect("object").extend(self.extra);
        let path = self.root.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

/// Reads a complex 3-D CAST file and its JSON metadata.
pub fn read_stack(path: &Path) -> Result<(Array3<Complex64>, Value)> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let (array, metadata) = read_cast(BufReader::new(file))?;
    let data = match array {
        CastArray::Complex(a) => a.into_dimensionality::<Ix3>().map_err(|_| {
            ConfigError(format!("{} does not hold a 3-D array", path.display()))
        })?,
        CastArray::Real(_) => bail!(ConfigError(format!("{} holds real data, expected complex", path.display()))),
    };
    let metadata = serde_json::from_str(&metadata).unwrap_or(Value::Null);
    Ok((data, metadata))
}

#[derive(Serialize)]
pub struct CacheRecord {
    pub key: String,
    pub path: String,
    pub hit: bool,
}

fn load_cached(path: &Path, geometry: &ImagingGeometry, nodes: usize) -> Option<KernelTable> {
    let file = File::open(path).ok()?;
    let (array, metadata) = read_cast(BufReader::new(file)).ok()?;
    let meta: Value = serde_json::from_str(&metadata).ok()?;
    let cached: ImagingGeometry = serde_json::from_value(meta.get("geometry")?.clone()).ok()?;
    if &cached != geometry || meta.get("nodes")?.as_u64()? != nodes as u64 {
        return None;
    }
    let coefficients = match array {
        CastArray::Complex(a) => a.into_dimensionality::<Ix4>().ok()?,
        CastArray::Real(_) => return None,
    };
    let expect = (geometry.nf(), geometry.nx, geometry.nk, geometry.nz);
    (coefficients.dim() == expect).then(|| KernelTable { coefficients, geometry: geometry.clone(), quadrature_nodes: nodes })
}

fn store(path: &Path, coefficients: &Array4<Complex64>, geometry: &ImagingGeometry, nodes: usize) -> Result<()> {
    let dir = path.parent().expect("cache file has a parent");
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let tmp = path.with_extension("cast.tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?);
        let meta = json!({ "kind": "kernel-table", "geometry": geometry, "nodes": nodes });
        write_cast(&mut w, &CastArray::Complex(coefficients.clone().into_dyn()), &meta.to_string())?;
        w.flush()?;
    }
    std::fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Kernel table for `geometry`, loaded from the cache when an entry with the same geometry and
/// node count exists, otherwise built and stored.
pub fn kernel_table(config: &Config, geometry: &ImagingGeometry) -> Result<(KernelTable, CacheRecord)> {
    let nodes = config.kernel_nodes;
    let key = KernelTable::cache_key(geometry, nodes);
    let path = config.cache_dir.join(format!("kernel-{key}.cast"));
    let record = |hit| CacheRecord { key: key.clone(), path: path.display().to_string(), hit };
    if let Some(table) = load_cached(&path, geometry, nodes) {
        log::info!("kernel cache hit {}", path.display());
        return Ok((table, record(true)));
    }
    log::info!("building kernel table {key}");
    let table = build_kernel_table(geometry, nodes)?;
    store(&path, &table.coefficients, geometry, nodes)?;
    Ok((table, record(false)))
}
