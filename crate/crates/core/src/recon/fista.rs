use ndarray::Array3;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forward::{apply_adjoint, apply_forward, DensityStack, MeasurementStack};
use crate::kernel::KernelTable;
use crate::spectra::SpectraMatrix;

use super::prox::{prox_group, prox_l1};
use super::{all_finite, block_norm_sq, check_shapes, data_weight, regularizer_value, residual_sq, ReconConfig, ReconResult, Regularizer};

/// Composite operator `Phi F` on spatial densities and its adjoint `F^H Phi^H`.
struct SpatialOperator<'a> {
    h: &'a SpectraMatrix,
    table: &'a KernelTable,
}

impl SpatialOperator<'_> {
    fn apply(&self, x: &Array3<Complex64>) -> Result<MeasurementStack> {
        apply_forward(&DensityStack::from_spatial(x), self.h, self.table)
    }

    fn adjoint(&self, y: &MeasurementStack) -> Result<Array3<Complex64>> {
        let nx = self.table.geometry.nx as f64;
        Ok(apply_adjoint(y, self.h, self.table)?.to_spatial() * Complex64::new(nx, 0.0))
    }
}

fn prox(x: &mut Array3<Complex64>, reg: Regularizer, t: f64) {
    match reg {
        Regularizer::L1 => prox_l1(x, t),
        Regularizer::GroupL21 => prox_group(x, t),
        Regularizer::Tikhonov => unreachable!("checked by solve_fista"),
    }
}

/// FISTA on spatial densities with `l1` or group `l2,1` regularization.
///
/// The step is `1 / L` with `L` from power iteration inflated by 1%. With `restart` set, momentum
/// is reset whenever a step would increase the objective, and a plain proximal-gradient step
/// that still increases it doubles `L`, so the objective trace is non-increasing.
pub fn solve_fista(s: &MeasurementStack, h: &SpectraMatrix, table: &KernelTable, config: &ReconConfig) -> Result<ReconResult> {
    config.validate()?;
    if config.regularizer == Regularizer::Tikhonov {
        return Err(Error::invalid("solve_fista needs the l1 or group-l21 regularizer"));
    }
    check_shapes(s, h, table)?;
    if !all_finite(s.s.iter()) {
        return Err(Error::numerical("non-finite measurements"));
    }
    let g = &table.geometry;
    let op = SpatialOperator { h, table };
    let weight = data_weight(h, table, config)?;
    let mut lip = 1.01 * weight * g.nx as f64 * block_norm_sq(h, table, config.power_iters, config.seed)?;
    if lip == 0.0 {
        return Err(Error::numerical("operator is identically zero"));
    }
    let lambda = config.lambda_r;
    let value = |x: &Array3<Complex64>, model: &MeasurementStack| {
        0.5 * weight * residual_sq(s, model) + lambda * regularizer_value(&DensityStack::from_spatial(x), config.regularizer)
    };

    let shape = (h.ns(), g.nx, g.nz);
    let mut x = Array3::<Complex64>::zeros(shape);
    let mut model_x = MeasurementStack::zeros(table.nf(), g.nx, g.nk);
    let mut f_x = value(&x, &model_x);
    let mut y = x.clone();
    let mut model_y = model_x.clone();
    let mut t = 1.0f64;
    let mut momentum = false;
    let mut objective_trace = Vec::with_capacity(config.max_iters);
    let mut residual_trace = Vec::with_capacity(config.max_iters);

    for _ in 0..config.max_iters {
        let mut retries = 0;
        let (z, model_z, f_z) = loop {
            let resid = MeasurementStack { s: &model_y.s - &s.s };
            let grad = op.adjoint(&resid)?;
            let mut z = &y - &(grad * Complex64::new(weight / lip, 0.0));
            prox(&mut z, config.regularizer, lambda / lip);
            if !all_finite(z.iter()) {
                return Err(Error::numerical("non-finite FISTA iterate"));
            }
            let model_z = op.apply(&z)?;
            let f_z = value(&z, &model_z);
            if !config.restart || f_z <= f_x || retries >= 60 {
                break (z, model_z, f_z);
            }
            retries += 1;
            if momentum {
                momentum = false;
                t = 1.0;
            } else {
                lip *= 2.0;
            }
            y = x.clone();
            model_y = model_x.clone();
        };
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        y = &z + &((&z - &x) * Complex64::new(beta, 0.0));
        model_y = MeasurementStack {
            s: &model_z.s * Complex64::new(1.0 + beta, 0.0) - &model_x.s * Complex64::new(beta, 0.0),
        };
        momentum = beta != 0.0;
        t = t_next;
        x = z;
        model_x = model_z;
        f_x = f_z;
        objective_trace.push(f_x);
        residual_trace.push(residual_sq(s, &model_x).sqrt());
        if !f_x.is_finite() {
            return Err(Error::numerical("non-finite FISTA objective"));
        }
    }
    Ok(ReconResult {
        densities: DensityStack::from_spatial(&x),
        iterations_run: objective_trace.len(),
        residual_norm: *residual_trace.last().unwrap_or(&s.norm()),
        objective_trace,
        residual_trace,
        data_weight: weight,
    })
}


/// Plain proximal gradient with step `1 / ||Phi F||^2` from dense block SVDs, used as a slow
/// independent oracle.
#[cfg(test)]
pub(crate) fn proximal_gradient_reference(
    s: &MeasurementStack,
    h: &SpectraMatrix,
    table: &KernelTable,
    config: &ReconConfig,
    iters: usize,
) -> DensityStack {
    use crate::forward::assemble_block;
    use crate::linalg::{singular_values, CMatrix};
    use nalgebra::DVector;

    let g = &table.geometry;
    let (ns, nx, nz) = (h.ns(), g.nx, g.nz);
    let blocks: Vec<CMatrix> = (0..nx).map(|q| assemble_block(q, h, table).unwrap()).collect();
    let norm_sq = blocks.iter().map(|b| singular_values(b).unwrap()[0].powi(2)).fold(0.0, f64::max);
    let weight = match config.scaling {
        super::DataScaling::None => 1.0,
        super::DataScaling::Unit => 1.0 / (nx as f64 * norm_sq),
        super::DataScaling::Column => super::data_weight(h, table, config).unwrap(),
    };
    let step = 1.0 / (weight * nx as f64 * norm_sq);
    let normal: Vec<CMatrix> = blocks.iter().map(|b| b.adjoint() * b).collect();
    let rhs: Vec<DVector<Complex64>> = blocks.iter().enumerate().map(|(q, b)| b.adjoint() * DVector::from_vec(s.block_vector(q))).collect();
    let mut x = Array3::<Complex64>::zeros((ns, nx, nz));
    for _ in 0..iters {
        let p = DensityStack::from_spatial(&x);
        let mut grad_hat = DensityStack::zeros(ns, nx, nz);
        for q in 0..nx {
            let gq = &normal[q] * DVector::from_vec(p.block_vector(q)) - &rhs[q];
            grad_hat.set_block_vector(q, gq.as_slice());
        }
        let grad = grad_hat.to_spatial() * Complex64::new(weight * nx as f64, 0.0);
        x = &x - &(grad * Complex64::new(step, 0.0));
        prox(&mut x, config.regularizer, config.lambda_r * step);
    }
    DensityStack::from_spatial(&x)
}
