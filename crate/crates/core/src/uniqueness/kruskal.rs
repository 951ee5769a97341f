use itertools::Itertools;
use serde::Serialize;

use crate::error::Result;
use crate::linalg::{rank_with_reference, select_rows, CMatrix};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KruskalRank {
    /// Exact Kruskal rank, or a certified lower bound when `exact` is false.
    pub value: usize,
    pub exact: bool,
    /// `value == min(rows, cols)`.
    pub full: bool,
}

/// Largest `k` such that every set of `k` rows is linearly independent. Enumerates row subsets
/// of increasing size until `budget` rank tests have been spent.
pub fn kruskal_rank(x: &CMatrix, tol: f64, budget: usize) -> Result<KruskalRank> {
    let (n, m) = x.shape();
    let cap = n.min(m);
    let reference = (0..n).map(|i| x.row(i).norm()).fold(0.0, f64::max);
    if reference == 0.0 {
        return Ok(KruskalRank { value: 0, exact: true, full: cap == 0 });
    }
    let mut spent = 0usize;
    for k in 1..=cap {
        for rows in (0..n).combinations(k) {
            if spent >= budget {
                return Ok(KruskalRank { value: k - 1, exact: false, full: false });
            }
            spent += 1;
            if rank_with_reference(&select_rows(x, &rows), reference, tol)? < k {
                return Ok(KruskalRank { value: k - 1, exact: true, full: false });
            }
        }
    }
    Ok(KruskalRank { value: cap, exact: true, full: true })
}
