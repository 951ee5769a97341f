use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{BlockSystem, DensityStack, MeasurementStack};
use crate::kernel::KernelTable;
use crate::linalg::{inner, vec_norm};
use crate::spectra::SpectraMatrix;

use super::{all_finite, check_shapes, data_weight, ReconConfig, ReconResult, Regularizer};

/// Conjugate-gradient state for one block of `(c Phi^H Phi + lambda I) x = c Phi^H s`.
struct BlockCg {
    x: Vec<Complex64>,
    r: Vec<Complex64>,
    d: Vec<Complex64>,
    /// Data residual `s - Phi x`, updated alongside `x`.
    e: Vec<Complex64>,
    rr: f64,
    target: f64,
    done: bool,
}

impl BlockCg {
    fn start(sys: &BlockSystem, s: Vec<Complex64>, weight: f64, tol: f64) -> Self {
        let r: Vec<Complex64> = sys.adjoint(&s).into_iter().map(|v| v * weight).collect();
        let rr = r.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let target = tol * rr.sqrt();
        BlockCg {
            x: vec![Complex64::new(0.0, 0.0); sys.cols()],
            d: r.clone(),
            r,
            e: s,
            rr,
            target,
            done: rr == 0.0 || rr.sqrt() <= target,
        }
    }

    fn step(&mut self, sys: &BlockSystem, weight: f64, lambda: f64) {
        if self.done {
            return;
        }
        let ad = sys.apply(&self.d);
        let nd: Vec<Complex64> = sys
            .adjoint(&ad)
            .into_iter()
            .zip(&self.d)
            .map(|(a, d)| a * weight + d * lambda)
            .collect();
        let curvature = inner(&self.d, &nd).re;
        if !(curvature > 0.0) {
            self.done = true;
            return;
        }
        let alpha = self.rr / curvature;
        for i in 0..self.x.len() {
            self.x[i] += self.d[i] * alpha;
            self.r[i] -= nd[i] * alpha;
        }
        for (e, a) in self.e.iter_mut().zip(&ad) {
            *e -= a * alpha;
        }
        let rr_new = self.r.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let beta = rr_new / self.rr;
        self.rr = rr_new;
        for (d, r) in self.d.iter_mut().zip(&self.r) {
            *d = r + *d * beta;
        }
        self.done = rr_new.sqrt() <= self.target;
    }

    fn objective(&self, weight: f64, lambda: f64) -> f64 {
        0.5 * weight * self.e.iter().map(|z| z.norm_sqr()).sum::<f64>()
            + 0.5 * lambda * self.x.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }
}

/// Tikhonov-regularized reconstruction by conjugate gradients on the per-block normal
/// equations, all blocks advanced in lock step so the objective can be traced per iteration.
pub fn solve_tikhonov(
    s: &MeasurementStack,
    h: &SpectraMatrix,
    table: &KernelTable,
    config: &ReconConfig,
) -> Result<ReconResult> {
    config.validate()?;
    if config.regularizer != Regularizer::Tikhonov {
        return Err(Error::invalid("solve_tikhonov needs the tikhonov regularizer"));
    }
    check_shapes(s, h, table)?;
    if !all_finite(s.s.iter()) {
        return Err(Error::numerical("non-finite measurements"));
    }
    let g = &table.geometry;
    let weight = data_weight(h, table, config)?;
    let lambda = config.lambda_r;
    let systems: Vec<BlockSystem> = (0..g.nx).map(|q| BlockSystem::new(h, table, q)).collect::<Result<_>>()?;
    let mut states: Vec<BlockCg> = systems
        .par_iter()
        .enumerate()
        .map(|(q, sys)| BlockCg::start(sys, s.block_vector(q), weight, config.cg_tol))
        .collect();
    let mut objective_trace = Vec::new();
    let mut residual_trace = Vec::new();
    while objective_trace.len() < config.max_iters && states.iter().any(|st| !st.done) {
        states.par_iter_mut().zip(&systems).for_each(|(st, sys)| st.step(sys, weight, lambda));
        if !states.iter().all(|st| all_finite(st.x.iter())) {
            return Err(Error::numerical("non-finite conjugate-gradient iterate"));
        }
        objective_trace.push(states.iter().map(|st| st.objective(weight, lambda)).sum());
        residual_trace.push(states.iter().map(|st| vec_norm(&st.e).powi(2)).sum::<f64>().sqrt());
        log::debug!("cg iteration {}: objective {:e}", objective_trace.len(), objective_trace.last().unwrap());
    }
    let mut densities = DensityStack::zeros(h.ns(), g.nx, g.nz);
    for (q, st) in states.iter().enumerate() {
        densities.set_block_vector(q, &st.x);
    }
    let residual_norm = states.iter().map(|st| vec_norm(&st.e).powi(2)).sum::<f64>().sqrt();
    Ok(ReconResult {
        densities,
        iterations_run: objective_trace.len(),
        objective_trace,
        residual_trace,
        residual_norm,
        data_weight: weight,
    })
}
