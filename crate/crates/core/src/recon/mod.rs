//! Regularized reconstruction of species densities.
//!
//! The objective is
//!
//! ```text
//! J(P) = c / 2 * sum_q ||s^q - Phi^q p^q||^2 + lambda_r R(P)
//! ```
//!
//! with data weight `c = 1` (no scaling) or `c = 1 / ||Phi||^2` measured on the variable the
//! regularizer acts on (unit scaling). Tikhonov uses `R = 1/2 sum_s ||p_s||^2` on the transverse
//! Fourier coefficients, which yields the normal equations `(c Phi^H Phi + lambda_r I) p = c Phi^H s`
//! per block. The sparse regularizers act on spatial densities: `R = sum_s ||p_s||_1` or
//! `R = sum_s ||p_s||_2`.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{apply_forward, BlockSystem, DensityStack, MeasurementStack};
use crate::kernel::KernelTable;
use crate::linalg::vec_norm;
use crate::rng::{random_complex_vec, substream};
use crate::spectra::SpectraMatrix;

mod fista;
mod passband;
mod prox;
mod tikhonov;

pub use fista::solve_fista;
pub use passband::{passband_bases, project_passband};
pub use prox::{prox_group, prox_l1};
pub use tikhonov::solve_tikhonov;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regularizer {
    Tikhonov,
    L1,
    GroupL21,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataScaling {
    /// `c = 1`.
    None,
    /// Unit spectral norm of the data term's Hessian.
    Unit,
    /// Unit mean squared norm of the spatial columns of `Phi F`, so that `lambda_r` is measured in
    /// units of density amplitude.
    Column,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconConfig {
    pub regularizer: Regularizer,
    pub lambda_r: f64,
    pub max_iters: usize,
    /// Relative normal-equation residual at which a Tikhonov block stops.
    pub cg_tol: f64,
    pub scaling: DataScaling,
    pub power_iters: usize,
    /// Reset momentum whenever the objective would increase.
    pub restart: bool,
    pub seed: u64,
}

impl Default for ReconConfig {
    fn default() -> Self {
        ReconConfig::tikhonov()
    }
}

impl ReconConfig {
    pub fn tikhonov() -> Self {
        ReconConfig {
            regularizer: Regularizer::Tikhonov,
            lambda_r: 1e-5,
            max_iters: 300,
            cg_tol: 1e-10,
            scaling: DataScaling::Unit,
            power_iters: 30,
            restart: true,
            seed: 0,
        }
    }

    pub fn l1() -> Self {
        ReconConfig {
            regularizer: Regularizer::L1,
            lambda_r: 1e-3,
            max_iters: 2000,
            scaling: DataScaling::Column,
            ..ReconConfig::tikhonov()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_r > 0.0 && self.lambda_r.is_finite()) {
            return Err(Error::invalid(format!("lambda_r must be positive, got {}", self.lambda_r)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.cg_tol >= 0.0 && self.cg_tol.is_finite()) {
            return Err(Error::invalid("cg_tol must be non-negative"));
        }
        if self.power_iters < 30 {
            return Err(Error::invalid("power_iters must be at least 30"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ReconResult {
    /// Recovered densities in the transverse Fourier domain.
    pub densities: DensityStack,
    pub objective_trace: Vec<f64>,
    /// Unweighted data residual `||S - Phi P||` after each iteration.
    pub residual_trace: Vec<f64>,
    pub residual_norm: f64,
    pub iterations_run: usize,
    pub data_weight: f64,
}

impl ReconResult {
    pub fn write_trace_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["iteration", "objective", "residual"])?;
        for (i, (o, r)) in self.objective_trace.iter().zip(&self.residual_trace).enumerate() {
            w.write_record([(i + 1).to_string(), format!("{o:e}"), format!("{r:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn check_shapes(s: &MeasurementStack, h: &SpectraMatrix, table: &KernelTable) -> Result<()> {
    let g = &table.geometry;
    if s.dims() != (table.nf(), g.nx, g.nk) {
        return Err(Error::dim(format!("data {:?} do not match (Nf, Nx, Nk) = {:?}", s.dims(), (table.nf(), g.nx, g.nk))));
    }
    if h.nk() != g.nk {
        return Err(Error::dim("spectra and kernel table disagree on Nk"));
    }
    Ok(())
}

/// Largest `||Phi^q||^2` over all blocks, by power iteration on `Phi^H Phi`.
pub fn block_norm_sq(h: &SpectraMatrix, table: &KernelTable, iters: usize, seed: u64) -> Result<f64> {
    let nx = table.geometry.nx;
    let norms: Vec<f64> = (0..nx)
        .into_par_iter()
        .map(|q| -> Result<f64> {
            let sys = BlockSystem::new(h, table, q)?;
            let mut x = random_complex_vec(&mut substream(seed, &format!("power-{q}")), sys.cols());
            let mut estimate = 0.0;
            for _ in 0..iters {
                let n = vec_norm(&x);
                if n == 0.0 {
                    return Ok(0.0);
                }
                x.iter_mut().for_each(|v| *v /= n);
                x = sys.adjoint(&sys.apply(&x));
                estimate = vec_norm(&x);
            }
            Ok(estimate)
        })
        .collect::<Result<_>>()?;
    let max = norms.into_iter().fold(0.0, f64::max);
    if !max.is_finite() {
        return Err(Error::numerical("non-finite operator norm estimate"));
    }
    Ok(max)
}

/// Data weight `c` for the configured scaling.
pub fn data_weight(h: &SpectraMatrix, table: &KernelTable, config: &ReconConfig) -> Result<f64> {
    match config.scaling {
        DataScaling::None => Ok(1.0),
        DataScaling::Unit => {
            let mut l = block_norm_sq(h, table, config.power_iters, config.seed)?;
            if config.regularizer != Regularizer::Tikhonov {
                l *= table.geometry.nx as f64;
            }
            if l == 0.0 {
                return Err(Error::numerical("operator is identically zero"));
            }
            Ok(1.0 / l)
        }
        DataScaling::Column => {
            let energy = column_energy(h, table);
            if energy == 0.0 {
                return Err(Error::numerical("operator is identically zero"));
            }
            Ok((h.ns() * table.geometry.nz) as f64 / energy)
        }
    }
}

/// `sum_q ||Phi^q||_F^2`, the total squared norm of the spatial columns of `Phi F`.
pub fn column_energy(h: &SpectraMatrix, table: &KernelTable) -> f64 {
    let power: Vec<f64> = (0..h.nk()).map(|m| (0..h.ns()).map(|s| h.h[(m, s)].norm_sqr()).sum()).collect();
    table
        .coefficients
        .indexed_iter()
        .map(|((_, _, m, _), a)| power[m] * a.norm_sqr())
        .sum()
}

pub(crate) fn regularizer_value(p: &DensityStack, regularizer: Regularizer) -> f64 {
    match regularizer {
        Regularizer::Tikhonov => 0.5 * p.p.iter().map(|z| z.norm_sqr()).sum::<f64>(),
        Regularizer::L1 => p.to_spatial().iter().map(|z| z.norm()).sum(),
        Regularizer::GroupL21 => p
            .to_spatial()
            .outer_iter()
            .map(|ps| ps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .sum(),
    }
}

pub(crate) fn residual_sq(s: &MeasurementStack, model: &MeasurementStack) -> f64 {
    s.s.iter().zip(&model.s).map(|(a, b)| (a - b).norm_sqr()).sum()
}

pub(crate) fn objective_with_weight(
    p: &DensityStack,
    s: &MeasurementStack,
    h: &SpectraMatrix,
    table: &KernelTable,
    config: &ReconConfig,
    weight: f64,
) -> Result<f64> {
    check_shapes(s, h, table)?;
    let model = apply_forward(p, h, table)?;
    Ok(0.5 * weight * residual_sq(s, &model) + config.lambda_r * regularizer_value(p, config.regularizer))
}

/// Value of the configured objective at Fourier-domain densities `p`.
pub fn objective(
    p: &DensityStack,
    s: &MeasurementStack,
    h: &SpectraMatrix,
    table: &KernelTable,
    config: &ReconConfig,
) -> Result<f64> {
    let weight = data_weight(h, table, config)?;
    objective_with_weight(p, s, h, table, config, weight)
}

pub(crate) fn all_finite<'a, I: IntoIterator<Item = &'a Complex64>>(values: I) -> bool {
    values.into_iter().all(|z| z.re.is_finite() && z.im.is_finite())
}


#[cfg(test)]
mod tests {
    use super::test_support::small;
    use super::*;
    use crate::forward::assemble_block;
    use crate::rng::complex_normal;
    use ndarray::Array3;

    fn random_stacks(seed: u64, h: &SpectraMatrix, table: &KernelTable) -> (DensityStack, MeasurementStack) {
        let g = &table.geometry;
        let mut rng = substream(seed, "recon-test");
        let p = DensityStack { p: Array3::from_shape_fn((h.ns(), g.nx, g.nz), |_| complex_normal(&mut rng)) };
        let s = MeasurementStack { s: Array3::from_shape_fn((table.nf(), g.nx, g.nk), |_| complex_normal(&mut rng)) };
        (p, s)
    }

    #[test]
    fn zero_density_objective_is_half_data_energy() {
        let (h, table) = small();
        let (_, s) = random_stacks(1, &h, &table);
        for cfg in [ReconConfig::tikhonov(), ReconConfig::l1()] {
            let cfg = ReconConfig { scaling: DataScaling::None, ..cfg };
            let p0 = DensityStack::zeros(2, 4, 8);
            let j = objective(&p0, &s, &h, &table, &cfg).unwrap();
            assert!((j - 0.5 * s.norm().powi(2)).abs() < 1e-12 * j);
        }
    }

    #[test]
    fn objective_matches_dense_evaluation() {
        let (h, table) = small();
        let (p, s) = random_stacks(2, &h, &table);
        let spatial = p.to_spatial();
        for reg in [Regularizer::Tikhonov, Regularizer::L1, Regularizer::GroupL21] {
            let cfg = ReconConfig { regularizer: reg, scaling: DataScaling::None, lambda_r: 0.3, ..ReconConfig::l1() };
            let mut fid = 0.0;
            for q in 0..4 {
                let phi = assemble_block(q, &h, &table).unwrap();
                let pv = nalgebra::DVector::from_vec(p.block_vector(q));
                let sv = nalgebra::DVector::from_vec(s.block_vector(q));
                fid += (sv - phi * pv).norm_squared();
            }
            let r = match reg {
                Regularizer::Tikhonov => 0.5 * p.p.iter().map(|z| z.norm_sqr()).sum::<f64>(),
                Regularizer::L1 => spatial.iter().map(|z| z.norm()).sum(),
                Regularizer::GroupL21 => (0..2)
                    .map(|sp| spatial.index_axis(ndarray::Axis(0), sp).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
                    .sum(),
            };
            let expect = 0.5 * fid + 0.3 * r;
            let got = objective(&p, &s, &h, &table, &cfg).unwrap();
            assert!((got - expect).abs() < 1e-10 * expect, "{reg:?}: {got} vs {expect}");
        }
    }

    #[test]
    fn column_scaling_normalizes_mean_pixel_response() {
        let (h, table) = small();
        let cfg = ReconConfig { scaling: DataScaling::Column, ..ReconConfig::l1() };
        let c = data_weight(&h, &table, &cfg).unwrap();
        let mut total = 0.0;
        for idx in ndarray::indices((2, 4, 8)) {
            let mut x = Array3::<Complex64>::zeros((2, 4, 8));
            x[idx] = Complex64::new(1.0, 0.0);
            total += apply_forward(&DensityStack::from_spatial(&x), &h, &table).unwrap().norm().powi(2);
        }
        let mean = c * total / 64.0;
        assert!((mean - 1.0).abs() < 1e-12, "{mean}");
    }

    #[test]
    fn exact_data_has_zero_fidelity_at_truth() {
        let (h, table) = small();
        let (p, _) = random_stacks(3, &h, &table);
        let s = apply_forward(&p, &h, &table).unwrap();
        let cfg = ReconConfig { lambda_r: 1e-300, scaling: DataScaling::None, ..ReconConfig::tikhonov() };
        assert!(objective(&p, &s, &h, &table, &cfg).unwrap() < 1e-250);
    }

    #[test]
    fn power_iteration_matches_dense_norm() {
        let (h, table) = small();
        let est = block_norm_sq(&h, &table, 200, 4).unwrap();
        let exact = (0..4)
            .map(|q| crate::linalg::singular_values(&assemble_block(q, &h, &table).unwrap()).unwrap()[0].powi(2))
            .fold(0.0, f64::max);
        assert!((est - exact).abs() < 1e-6 * exact);
    }

    #[test]
    fn config_validation() {
        assert!(ReconConfig { lambda_r: 0.0, ..ReconConfig::tikhonov() }.validate().is_err());
        assert!(ReconConfig { max_iters: 0, ..ReconConfig::tikhonov() }.validate().is_err());
        assert!(ReconConfig { power_iters: 5, ..ReconConfig::l1() }.validate().is_err());
        assert!(ReconConfig::l1().validate().is_ok());
    }
}
