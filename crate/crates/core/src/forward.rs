//! Matrix-free N-species forward operator, its adjoint, and dense block assembly.
//!
//! Per transverse index `q` the data at focal plane `f` are `y^q_f = sum_s D_s A^q_f p^q_s`
//! with `D_s = diag(h_s)`. Transverse transforms are unnormalized forward DFTs; the inverse
//! divides by `Nx`.

use ndarray::{Array3, ArrayView3, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::kernel::KernelTable;
use crate::linalg::CMatrix;
use crate::spectra::SpectraMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Transverse-DFT densities, indexed `[s, q, n]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityStack {
    pub p: Array3<Complex64>,
}

/// Transverse-DFT measurements, indexed `[f, q, m]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementStack {
    pub s: Array3<Complex64>,
}

/// Forward (or inverse, divided by the length) DFT along axis 1 of a 3-D array.
pub fn dft_axis1(a: &Array3<Complex64>, inverse: bool) -> Array3<Complex64> {
    let (d0, n, d2) = a.dim();
    let mut out = a.clone();
    if n == 0 {
        return out;
    }
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    let scale = if inverse { 1.0 / n as f64 } else { 1.0 };
    let mut line = vec![ZERO; n];
    for i in 0..d0 {
        for k in 0..d2 {
            for (j, v) in line.iter_mut().enumerate() {
                *v = a[[i, j, k]];
            }
            fft.process(&mut line);
            for (j, v) in line.iter().enumerate() {
                out[[i, j, k]] = v * scale;
            }
        }
    }
    out
}

impl DensityStack {
    pub fn zeros(ns: usize, nx: usize, nz: usize) -> Self {
        DensityStack { p: Array3::zeros((ns, nx, nz)) }
    }

    /// From spatial densities indexed `[s, x, z]`.
    pub fn from_spatial(spatial: &Array3<Complex64>) -> Self {
        DensityStack { p: dft_axis1(spatial, false) }
    }

    /// Spatial densities indexed `[s, x, z]`.
    pub fn to_spatial(&self) -> Array3<Complex64> {
        dft_axis1(&self.p, true)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.p.dim()
    }

    /// Stacked block vector `[p^q_1; ...; p^q_Ns]` of length `Ns Nz`.
    pub fn block_vector(&self, q: usize) -> Vec<Complex64> {
        let (ns, _, nz) = self.p.dim();
        (0..ns * nz).map(|i| self.p[[i / nz, q, i % nz]]).collect()
    }

    pub fn set_block_vector(&mut self, q: usize, v: &[Complex64]) {
        let (ns, _, nz) = self.p.dim();
        assert_eq!(v.len(), ns * nz);
        for (i, &x) in v.iter().enumerate() {
            self.p[[i / nz, q, i % nz]] = x;
        }
    }

    pub fn norm(&self) -> f64 {
        self.p.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &DensityStack) -> Complex64 {
        self.p.iter().zip(other.p.iter()).map(|(a, b)| a.conj() * b).sum()
    }
}

impl MeasurementStack {
    pub fn zeros(nf: usize, nx: usize, nk: usize) -> Self {
        MeasurementStack { s: Array3::zeros((nf, nx, nk)) }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.s.dim()
    }

    /// Scan-line data indexed `[f, x, m]`.
    pub fn to_spatial(&self) -> Array3<Complex64> {
        dft_axis1(&self.s, true)
    }

    /// Stacked block vector `[y^q_1; ...; y^q_Nf]` of length `Nf Nk`.
    pub fn block_vector(&self, q: usize) -> Vec<Complex64> {
        let (nf, _, nk) = self.s.dim();
        (0..nf * nk).map(|i| self.s[[i / nk, q, i % nk]]).collect()
    }

    pub fn set_block_vector(&mut self, q: usize, v: &[Complex64]) {
        let (nf, _, nk) = self.s.dim();
        assert_eq!(v.len(), nf * nk);
        for (i, &x) in v.iter().enumerate() {
            self.s[[i / nk, q, i % nk]] = x;
        }
    }

    pub fn norm(&self) -> f64 {
        self.s.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &MeasurementStack) -> Complex64 {
        self.s.iter().zip(other.s.iter()).map(|(a, b)| a.conj() * b).sum()
    }
}

/// Unnormalized transverse DFT of scan-line data indexed `[f, x, m]`.
pub fn measurements_to_fourier(spatial: &Array3<Complex64>, nx: usize) -> Result<MeasurementStack> {
    if spatial.dim().1 != nx {
        return Err(Error::dim(format!(
            "expected {nx} scan positions, got {}",
            spatial.dim().1
        )));
    }
    Ok(MeasurementStack { s: dft_axis1(spatial, false) })
}

/// Row-wise Kronecker product: row `i` is `a[i, :] (x) b[i, :]`.
pub fn khatri_rao(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.nrows() != b.nrows() {
        return Err(Error::dim(format!(
            "Khatri-Rao factors have {} and {} rows",
            a.nrows(),
            b.nrows()
        )));
    }
    let n2 = b.ncols();
    Ok(CMatrix::from_fn(a.nrows(), a.ncols() * n2, |i, j| a[(i, j / n2)] * b[(i, j % n2)]))
}

fn check_dims(h: &SpectraMatrix, table: &KernelTable) -> Result<()> {
    let g = &table.geometry;
    if h.nk() != g.nk {
        return Err(Error::dim(format!("H has {} rows, geometry has Nk = {}", h.nk(), g.nk)));
    }
    Ok(())
}

fn check_density(p: &DensityStack, h: &SpectraMatrix, table: &KernelTable) -> Result<()> {
    check_dims(h, table)?;
    let g = &table.geometry;
    if p.dims() != (h.ns(), g.nx, g.nz) {
        return Err(Error::dim(format!(
            "density stack {:?} does not match (Ns, Nx, Nz) = {:?}",
            p.dims(),
            (h.ns(), g.nx, g.nz)
        )));
    }
    Ok(())
}

fn check_measurement(y: &MeasurementStack, h: &SpectraMatrix, table: &KernelTable) -> Result<()> {
    check_dims(h, table)?;
    let g = &table.geometry;
    if y.dims() != (table.nf(), g.nx, g.nk) {
        return Err(Error::dim(format!(
            "measurement stack {:?} does not match (Nf, Nx, Nk) = {:?}",
            y.dims(),
            (table.nf(), g.nx, g.nk)
        )));
    }
    Ok(())
}

/// Forward map for one block: `p` has length `Ns Nz`, the result `Nf Nk`.
fn forward_block(coef: ArrayView3<Complex64>, h: &CMatrix, p: &[Complex64], nz: usize) -> Vec<Complex64> {
    let (nf, nk, _) = coef.dim();
    let ns = h.ncols();
    let mut y = vec![ZERO; nf * nk];
    for f in 0..nf {
        for m in 0..nk {
            let row = coef.slice(ndarray::s![f, m, ..]);
            let row = row.as_slice().expect("contiguous kernel row");
            let mut acc = ZERO;
            for s in 0..ns {
                let hm = h[(m, s)];
                if hm == ZERO {
                    continue;
                }
                let ps = &p[s * nz..(s + 1) * nz];
                let dot: Complex64 = row.iter().zip(ps).map(|(a, b)| a * b).sum();
                acc += hm * dot;
            }
            y[f * nk + m] = acc;
        }
    }
    y
}

/// Adjoint map for one block: `y` has length `Nf Nk`, the result `Ns Nz`.
fn adjoint_block(coef: ArrayView3<Complex64>, h: &CMatrix, y: &[Complex64], nz: usize) -> Vec<Complex64> {
    let (nf, nk, _) = coef.dim();
    let ns = h.ncols();
    let mut w = vec![ZERO; ns * nz];
    for f in 0..nf {
        for m in 0..nk {
            let yfm = y[f * nk + m];
            if yfm == ZERO {
                continue;
            }
            let row = coef.slice(ndarray::s![f, m, ..]);
            let row = row.as_slice().expect("contiguous kernel row");
            for s in 0..ns {
                let c = h[(m, s)].conj() * yfm;
                for (wn, a) in w[s * nz..(s + 1) * nz].iter_mut().zip(row) {
                    *wn += a.conj() * c;
                }
            }
        }
    }
    w
}

pub fn apply_forward(p: &DensityStack, h: &SpectraMatrix, table: &KernelTable) -> Result<MeasurementStack> {
    check_density(p, h, table)?;
    let g = &table.geometry;
    let blocks: Vec<Vec<Complex64>> = (0..g.nx)
        .into_par_iter()
        .map(|q| {
            let coef = table.coefficients.index_axis(Axis(1), q);
            forward_block(coef, &h.h, &p.block_vector(q), g.nz)
        })
        .collect();
    let mut y = MeasurementStack::zeros(table.nf(), g.nx, g.nk);
    for (q, b) in blocks.iter().enumerate() {
        y.set_block_vector(q, b);
    }
    Ok(y)
}

pub fn apply_adjoint(y: &MeasurementStack, h: &SpectraMatrix, table: &KernelTable) -> Result<DensityStack> {
    check_measurement(y, h, table)?;
    let g = &table.geometry;
    let blocks: Vec<Vec<Complex64>> = (0..g.nx)
        .into_par_iter()
        .map(|q| {
            let coef = table.coefficients.index_axis(Axis(1), q);
            adjoint_block(coef, &h.h, &y.block_vector(q), g.nz)
        })
        .collect();
    let mut p = DensityStack::zeros(h.ns(), g.nx, g.nz);
    for (q, b) in blocks.iter().enumerate() {
        p.set_block_vector(q, b);
    }
    Ok(p)
}

/// Dense `Phi^q`, `(Nf Nk) x (Ns Nz)`, entry `[(f Nk + m), (s Nz + n)] = h_s[m] A^q_f[m, n]`.
pub fn assemble_block(q: usize, h: &SpectraMatrix, table: &KernelTable) -> Result<CMatrix> {
    check_dims(h, table)?;
    let g = &table.geometry;
    if q >= g.nx {
        return Err(Error::invalid(format!("q = {q} out of range")));
    }
    let (nk, nz) = (g.nk, g.nz);
    Ok(CMatrix::from_fn(table.nf() * nk, h.ns() * nz, |row, col| {
        let (f, m, s, n) = (row / nk, row % nk, col / nz, col % nz);
        h.h[(m, s)] * table.coefficients[[f, q, m, n]]
    }))
}

/// `1_Nf (x) H`: the spectra matrix repeated once per focal plane.
pub fn repeat_h(h: &SpectraMatrix, nf: usize) -> CMatrix {
    let nk = h.nk();
    CMatrix::from_fn(nf * nk, h.ns(), |row, s| h.h[(row % nk, s)])
}

/// One transverse-frequency block of the system, applied matrix-free.
pub struct BlockSystem<'a> {
    pub h: &'a SpectraMatrix,
    pub table: &'a KernelTable,
    pub q: usize,
}

impl<'a> BlockSystem<'a> {
    pub fn new(h: &'a SpectraMatrix, table: &'a KernelTable, q: usize) -> Result<Self> {
        check_dims(h, table)?;
        if q >= table.geometry.nx {
            return Err(Error::invalid(format!("q = {q} out of range")));
        }
        Ok(BlockSystem { h, table, q })
    }

    pub fn rows(&self) -> usize {
        self.table.nf() * self.table.geometry.nk
    }

    pub fn cols(&self) -> usize {
        self.h.ns() * self.table.geometry.nz
    }

    pub fn apply(&self, p: &[Complex64]) -> Vec<Complex64> {
        let coef = self.table.coefficients.index_axis(Axis(1), self.q);
        forward_block(coef, &self.h.h, p, self.table.geometry.nz)
    }

    pub fn adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        let coef = self.table.coefficients.index_axis(Axis(1), self.q);
        adjoint_block(coef, &self.h.h, y, self.table.geometry.nz)
    }

    pub fn assemble(&self) -> CMatrix {
        assemble_block(self.q, self.h, self.table).expect("dimensions checked at construction")
    }
}
