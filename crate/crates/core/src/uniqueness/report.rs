use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernel::KernelTable;
use crate::linalg::{numerical_rank, RANK_TOL};
use crate::spectra::SpectraMatrix;

use super::basis::BasisSummary;
use super::{
    check_block_sparse, check_necessary, check_sufficient, kruskal_rank, max_nullspace_angle,
    nullspace_basis, restricted_phi, restricted_stack, BlockSparseReport, KruskalRank, NecessaryReport,
    SearchStrategy, SufficientReport,
};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditOptions {
    pub tol: f64,
    pub subset_budget: usize,
    pub search_budget: usize,
    pub kruskal_budget: usize,
    pub strategy: SearchStrategy,
    pub seed: u64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            tol: RANK_TOL,
            subset_budget: 100_000,
            search_budget: 100_000,
            kruskal_budget: 100_000,
            strategy: SearchStrategy::Exhaustive,
            seed: 0,
        }
    }
}

/// Identifiability audit of one transverse-frequency block.
#[derive(Clone, Debug, Serialize)]
pub struct UniquenessReport {
    pub q: usize,
    pub kx: f64,
    pub ns: usize,
    pub nf: usize,
    pub r: usize,
    pub effective_rank: usize,
    pub basis: BasisSummary,
    /// Largest principal angle between a single plane's passband and the joint passband.
    pub nullspace_angle: f64,
    pub necessary: NecessaryReport,
    pub sufficient: SufficientReport,
    pub kruskal: KruskalRank,
    pub block_sparse: Option<BlockSparseReport>,
    /// Measured `rank(Phi~)`; full means `Ns r`.
    pub restricted_rank: usize,
    /// False only if a sufficient-condition pass disagrees with the measured rank.
    pub consistent: bool,
}

/// Runs every audit on block `q`. `library`, when given, is the dictionary for the
/// block-sparse audit with `h.ns()` active species.
pub fn audit_block(
    table: &KernelTable,
    h: &SpectraMatrix,
    q: usize,
    library: Option<&SpectraMatrix>,
    opts: &AuditOptions,
) -> Result<UniquenessReport> {
    let g = &table.geometry;
    let nf = table.nf();
    let stacked = table.stacked(q);
    let basis = nullspace_basis(&stacked, opts.tol)?;
    let r = basis.r;
    let b = restricted_stack(&stacked, &basis);
    let nullspace_angle = if r > 0 { max_nullspace_angle(&stacked, nf, opts.tol)? } else { 0.0 };
    let necessary = check_necessary(h, &b, nf, r, opts.subset_budget, opts.tol, opts.seed)?;
    let sufficient = check_sufficient(&b, nf, h.ns(), r, opts.strategy, opts.tol, opts.search_budget)?;
    let kruskal = kruskal_rank(&b, opts.tol, opts.kruskal_budget)?;
    let block_sparse = match library {
        Some(lib) => Some(check_block_sparse(lib, &b, h.ns(), opts.tol, opts.search_budget)?),
        None => None,
    };
    let restricted_rank = if r > 0 { numerical_rank(&restricted_phi(h, &b)?, opts.tol)? } else { 0 };
    let consistent = !sufficient.pass || restricted_rank == h.ns() * r;
    Ok(UniquenessReport {
        q,
        kx: g.kx(q),
        ns: h.ns(),
        nf,
        r,
        effective_rank: g.effective_rank(),
        basis: basis.summary(),
        nullspace_angle,
        necessary,
        sufficient,
        kruskal,
        block_sparse,
        restricted_rank,
        consistent,
    })
}

fn verdict(pass: bool) -> &'static str {
    if pass { "pass" } else { "FAIL" }
}

impl UniquenessReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_text(&self) -> String {
        let n = &self.necessary;
        let mut out = String::new();
        out.push_str(&format!("block q = {} (kx = {:.6})\n", self.q, self.kx));
        out.push_str(&format!(
            "  passband rank r = {} (tol {:.1e}, gap {:.3e}); effective-rank estimate {}\n",
            self.r, self.basis.tol, self.basis.gap, self.effective_rank
        ));
        out.push_str(&format!("  max focal-plane null-space angle = {:.3e} rad\n", self.nullspace_angle));
        for (name, c) in [("N1", &n.n1), ("N2", &n.n2), ("N3", &n.n3), ("N4", &n.n4), ("N5", &n.n5)] {
            out.push_str(&format!("  {name}: {} ({})\n", verdict(c.pass), c.detail));
        }
        if n.n4_sampled {
            out.push_str("  N4 verdict is based on sampled subsets\n");
        }
        let s = &self.sufficient;
        let tag = if s.applicable { verdict(s.pass) } else { "n/a" };
        out.push_str(&format!("  sufficient partition: {tag} ({})\n", s.detail));
        out.push_str(&format!(
            "  Kruskal rank: {}{}{}\n",
            if self.kruskal.exact { "" } else { ">= " },
            self.kruskal.value,
            if self.kruskal.full { " (full)" } else { "" }
        ));
        if let Some(bs) = &self.block_sparse {
            out.push_str(&format!("  block-sparse theorem: {} ({})\n", verdict(bs.theorem_pass), bs.detail));
            match bs.brute_force_pass {
                Some(p) => out.push_str(&format!("  block-sparse supports: {}\n", verdict(p))),
                None => out.push_str("  block-sparse supports: not enumerated (budget)\n"),
            }
        }
        out.push_str(&format!(
            "  rank(restricted system) = {} of {}{}\n",
            self.restricted_rank,
            self.ns * self.r,
            if self.consistent { "" } else { "  INCONSISTENT with sufficient verdict" }
        ));
        out
    }
}
