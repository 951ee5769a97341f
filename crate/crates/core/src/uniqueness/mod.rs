//! Optical-passband bases and identifiability audits for one transverse-frequency block.
//!
//! All rank decisions use a relative singular-value threshold (default `1e-8`); the measured
//! gap at the cut is reported alongside each verdict.

mod adversarial;
mod basis;
mod block_sparse;
mod kruskal;
mod lemma;
mod necessary;
mod report;
mod sufficient;

pub use adversarial::adversarial_spectra;
pub use basis::{max_nullspace_angle, nullspace_basis, restricted_phi, restricted_stack, PassbandBasis};
pub use block_sparse::{check_block_sparse, BlockSparseReport};
pub use kruskal::{kruskal_rank, KruskalRank};
pub use lemma::{passband_recovery_unique, restricted_rank_full, solution_nullspace_matches};
pub use necessary::{check_necessary, Condition, NecessaryReport};
pub use report::{audit_block, AuditOptions, UniquenessReport};
pub use sufficient::{check_sufficient, SearchStrategy, SufficientReport};

use crate::linalg::CMatrix;

/// Rows `f * nk + j` of the stacked restricted matrix for every plane `f` and every `j` in `js`.
pub(crate) fn wavenumber_rows(b_stack: &CMatrix, nf: usize, js: &[usize]) -> CMatrix {
    let nk = b_stack.nrows() / nf;
    let rows: Vec<usize> = js.iter().flat_map(|&j| (0..nf).map(move |f| f * nk + j)).collect();
    crate::linalg::select_rows(b_stack, &rows)
}
