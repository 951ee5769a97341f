use crate::error::{Error, Result};
use crate::forward::DensityStack;
use crate::kernel::KernelTable;
use crate::uniqueness::{nullspace_basis, PassbandBasis};

/// Passband basis of every block's stacked kernel.
pub fn passband_bases(table: &KernelTable, tol: f64) -> Result<Vec<PassbandBasis>> {
    (0..table.geometry.nx).map(|q| nullspace_basis(&table.stacked(q), tol)).collect()
}

/// `p^q_s <- V^q V^qH p^q_s` for every block and species.
pub fn project_passband(p: &DensityStack, bases: &[PassbandBasis]) -> Result<DensityStack> {
    let (ns, nx, nz) = p.dims();
    if bases.len() != nx {
        return Err(Error::dim(format!("{} bases for {nx} blocks", bases.len())));
    }
    let mut out = DensityStack::zeros(ns, nx, nz);
    for (q, basis) in bases.iter().enumerate() {
        if basis.v.nrows() != nz {
            return Err(Error::dim(format!("basis {q} has {} rows, expected {nz}", basis.v.nrows())));
        }
        for s in 0..ns {
            let column: Vec<_> = (0..nz).map(|n| p.p[[s, q, n]]).collect();
            for (n, v) in basis.project(&column).into_iter().enumerate() {
                out.p[[s, q, n]] = v;
            }
        }
    }
    Ok(out)
}
