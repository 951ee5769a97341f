//! End-to-end runs of the `spectomo` binary on a small geometry.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::Command;

use ndarray::Array3;
use num_complex::Complex64;
use serde_json::Value;
use sha2::{Digest, Sha256};

use spectomo::cast::{read_cast, write_cast, CastArray};

const CONFIG: &str = r#"
seed = 5
kernel_nodes = 65

[geometry]
nx = 8
nz = 12
nk = 16
lx = 12.0
lz = 10.0
kmin = 0.6
kmax = 1.1
na = 0.45
focal_planes = [3.3, 6.6]

[spectra]
count = 3
oscillators = 12
selection = [0, 2]

[phantom]
count = 3
min_separation = 2.0
margin_x = 1
margin_z = 2

[simulate]
noise_rel = 1e-4

[sv]
q = [0, 1]
ensemble_nf = [1, 2]
ensemble_species = 2
trials = 4
"#;

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
        Workspace { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Runs a subcommand with the working directory set to the workspace; returns the exit code.
    fn run(&self, command: &str, out: &str, extra: &[&str]) -> i32 {
        let output = Command::new(env!("CARGO_BIN_EXE_spectomo"))
            .current_dir(self.dir.path())
            .args([command, "--config", "run.toml", "--out", out])
            .args(extra)
            .output()
            .unwrap();
        if !output.status.success() {
            eprintln!("{command}: {}", String::from_utf8_lossy(&output.stderr));
        }
        output.status.code().unwrap()
    }

    fn manifest(&self, out: &str) -> Value {
        serde_json::from_str(&std::fs::read_to_string(self.path(out).join("manifest.json")).unwrap()).unwrap()
    }
}

fn output_hashes(manifest: &Value) -> Vec<(String, String)> {
    manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| (o["path"].as_str().unwrap().to_string(), o["sha256"].as_str().unwrap().to_string()))
        .collect()
}

fn sha256(path: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

#[test]
fn simulate_reconstruct_render_pipeline() {
    let ws = Workspace::new();
    assert_eq!(ws.run("simulate", "sim", &[]), 0);
    let manifest = ws.manifest("sim");
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["seed"], 5);
    for (name, hash) in output_hashes(&manifest) {
        assert_eq!(sha256(&ws.path("sim").join(&name)), hash, "{name}");
    }
    let (data, meta) = read_cast(File::open(ws.path("sim/measurements.cast")).unwrap()).unwrap();
    assert_eq!(data.shape(), &[2, 8, 16]);
    assert!(meta.contains("\"measurements\""));
    let phantom = std::fs::read_to_string(ws.path("sim/phantom.toml")).unwrap();
    assert_eq!(phantom.matches("[[scatterers]]").count(), 3);

    for (out, reg) in [("tik", "tikhonov"), ("l1", "l1")] {
        let set = format!("recon.regularizer={reg}");
        assert_eq!(ws.run("reconstruct", out, &["--input", "sim/measurements.cast", "--set", &set, "--set", "recon.max_iters=50"]), 0);
        let (p, _) = read_cast(File::open(ws.path(out).join("densities.cast")).unwrap()).unwrap();
        assert_eq!(p.shape(), &[3, 8, 12]);
        let trace = std::fs::read_to_string(ws.path(out).join("trace.csv")).unwrap();
        assert!(trace.starts_with("iteration,objective,residual"));
        assert!(ws.manifest(out)["result"]["iterations"].as_u64().unwrap() >= 1);
    }

    assert_eq!(ws.run("render", "img", &["--input", "l1/densities.cast"]), 0);
    for name in ["species-0.pgm", "species-1.pgm", "species-2.pgm", "composite.ppm"] {
        let bytes = std::fs::read(ws.path("img").join(name)).unwrap();
        assert!(bytes.starts_with(if name.ends_with("pgm") { b"P5" } else { b"P6" }), "{name}");
    }
}

#[test]
fn identical_config_gives_identical_outputs() {
    let ws = Workspace::new();
    assert_eq!(ws.run("simulate", "a", &[]), 0);
    assert_eq!(ws.run("simulate", "b", &[]), 0);
    assert_eq!(output_hashes(&ws.manifest("a")), output_hashes(&ws.manifest("b")));
    assert_eq!(ws.run("simulate", "c", &["--set", "seed=6"]), 0);
    assert_ne!(output_hashes(&ws.manifest("a")), output_hashes(&ws.manifest("c")));
}

#[test]
fn kernel_cache_is_reused() {
    let ws = Workspace::new();
    assert_eq!(ws.run("kernel-build", "k1", &[]), 0);
    assert_eq!(ws.manifest("k1")["kernel_cache"]["hit"], false);
    assert_eq!(ws.run("kernel-build", "k2", &[]), 0);
    assert_eq!(ws.manifest("k2")["kernel_cache"]["hit"], true);
    assert_eq!(
        std::fs::read(ws.path("k1/kernel.json")).unwrap(),
        std::fs::read(ws.path("k2/kernel.json")).unwrap()
    );
    assert_eq!(ws.run("kernel-build", "k3", &["--set", "geometry.na=0.4"]), 0);
    assert_eq!(ws.manifest("k3")["kernel_cache"]["hit"], false);
}

#[test]
fn analysis_commands_write_tables() {
    let ws = Workspace::new();
    assert_eq!(ws.run("synth-spectra", "lib", &[]), 0);
    let lib = std::fs::read_to_string(ws.path("lib/library.csv")).unwrap();
    assert_eq!(lib.lines().count(), 17);

    assert_eq!(ws.run("sv-scan", "sv", &["--set", "spectra.library=\"lib/library.csv\""]), 0);
    let sv = std::fs::read_to_string(ws.path("sv/sv_scan.csv")).unwrap();
    assert!(sv.starts_with("q,index,sigma"));
    assert_eq!(sv.lines().count(), 1 + 2 * 24);
    assert_eq!(ws.manifest("sv")["inputs"].as_array().unwrap().len(), 2);

    assert_eq!(ws.run("sv-ensemble", "ens", &[]), 0);
    let ens = std::fs::read_to_string(ws.path("ens/ensemble.csv")).unwrap();
    assert!(ens.starts_with("nf,index,min,max"));
    assert_eq!(ens.lines().count(), 1 + 16 + 24);

    assert_eq!(ws.run("audit-uniqueness", "audit", &["--set", "audit.q=[0, 1]", "--set", "audit.block_sparse=true"]), 0);
    let reports: Value = serde_json::from_str(&std::fs::read_to_string(ws.path("audit/audit.json")).unwrap()).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 2);
    assert!(reports[0]["block_sparse"].is_object());
}

#[test]
fn phantom_file_is_read_from_toml() {
    let ws = Workspace::new();
    std::fs::write(
        ws.path("targets.toml"),
        "[[scatterers]]\nx = 3.0\nz = 4.0\nspecies = 1\nstrength = 0.5\n",
    )
    .unwrap();
    assert_eq!(ws.run("simulate", "sim", &["--set", "phantom.file=\"targets.toml\""]), 0);
    let (truth, _) = read_cast(File::open(ws.path("sim/truth.cast")).unwrap()).unwrap();
    let CastArray::Complex(p) = truth else { panic!("complex truth") };
    let spatial = spectomo::DensityStack { p: p.into_dimensionality().unwrap() }.to_spatial();
    let total: f64 = spatial.iter().map(|z| z.norm()).sum();
    assert!((spatial[[1, 2, 5]].re - 0.5).abs() < 1e-12);
    assert!((total - 0.5).abs() < 1e-9);

    std::fs::write(ws.path("bad.toml"), "[[scatterers]]\nx = 300.0\nz = 4.0\nspecies = 0\nstrength = 1.0\n").unwrap();
    assert_eq!(ws.run("simulate", "bad", &["--set", "phantom.file=\"bad.toml\""]), 1);
}

#[test]
fn exit_codes_classify_failures() {
    let ws = Workspace::new();
    assert_eq!(ws.run("simulate", "x", &["--set", "geometry.nx=0"]), 1);
    assert_eq!(ws.run("simulate", "x", &["--set", "no_such_key=1"]), 1);
    assert_eq!(ws.run("simulate", "x", &["--set", "spectra.selection=[7]"]), 1);
    assert_eq!(ws.run("reconstruct", "x", &["--input", "missing.cast"]), 1);
    assert_eq!(ws.run("sv-scan", "x", &["--set", "sv.budget=10"]), 3);

    let mut s = Array3::<Complex64>::zeros((2, 8, 16));
    s[[0, 0, 0]] = Complex64::new(f64::NAN, 0.0);
    let mut w = BufWriter::new(File::create(ws.path("nan.cast")).unwrap());
    write_cast(&mut w, &CastArray::Complex(s.into_dyn()), "{}").unwrap();
    drop(w);
    assert_eq!(ws.run("reconstruct", "x", &["--input", "nan.cast"]), 2);
}
