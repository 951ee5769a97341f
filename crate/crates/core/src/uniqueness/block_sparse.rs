use itertools::Itertools;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, rank_with_reference, singular_values, CMatrix};
use crate::spectra::SpectraMatrix;

use super::{restricted_phi, wavenumber_rows};

#[derive(Clone, Debug, Serialize)]
pub struct BlockSparseReport {
    /// Verdict of the sufficient condition: `Nk > r`, `Nf >= 2 Ns`, and `2 Ns` disjoint
    /// wavenumber sets whose rows (over all focal planes) have rank `r`.
    pub theorem_pass: bool,
    pub detail: String,
    pub disjoint_sets: Option<Vec<Vec<usize>>>,
    /// Every library support of size `2 Ns` gives a full-column-rank restricted system;
    /// `None` when the number of supports exceeds the budget.
    pub brute_force_pass: Option<bool>,
    pub failing_support: Option<Vec<usize>>,
}

/// Audits unique recovery of block-`Ns`-sparse densities over a library of `Ms` spectra.
pub fn check_block_sparse(
    library: &SpectraMatrix,
    b_stack: &CMatrix,
    ns: usize,
    tol: f64,
    budget: usize,
) -> Result<BlockSparseReport> {
    let (nk, ms) = (library.nk(), library.ns());
    if ms <= ns {
        return Err(Error::invalid(format!("library size {ms} must exceed Ns = {ns}")));
    }
    if nk == 0 || b_stack.nrows() % nk != 0 {
        return Err(Error::dim("stacked restricted matrix is not a multiple of Nk rows"));
    }
    let nf = b_stack.nrows() / nk;
    let sigma = singular_values(b_stack)?;
    let reference = sigma.first().copied().unwrap_or(0.0);
    let r = sigma.iter().filter(|&&s| s > tol * reference).count();

    let (theorem_pass, detail, disjoint_sets) = if nk <= r {
        (false, format!("Nk = {nk} <= r = {r}"), None)
    } else if nf < 2 * ns {
        (false, format!("Nf = {nf} < 2 Ns = {}", 2 * ns), None)
    } else {
        let full = |js: &[usize]| -> Result<bool> {
            Ok(rank_with_reference(&wavenumber_rows(b_stack, nf, js), reference, tol)? == r)
        };
        match disjoint_full_rank_sets(nk, 2 * ns, &full, budget)? {
            Some(sets) => (true, format!("disjoint sets {sets:?}"), Some(sets)),
            None => (false, "no 2 Ns disjoint full-rank wavenumber sets found".into(), None),
        }
    };

    let k = (2 * ns).min(ms);
    let supports = (0..k).fold(1.0, |acc, i| acc * (ms - i) as f64 / (i + 1) as f64);
    let (brute_force_pass, failing_support) = if supports <= budget as f64 {
        let mut failing = None;
        for support in (0..ms).combinations(k) {
            let cols: Vec<Vec<_>> = support.iter().map(|&s| library.column(s)).collect();
            let hs = SpectraMatrix::from_columns(&cols)?;
            if numerical_rank(&restricted_phi(&hs, b_stack)?, tol)? < k * r {
                failing = Some(support);
                break;
            }
        }
        (Some(failing.is_none()), failing)
    } else {
        (None, None)
    };

    Ok(BlockSparseReport { theorem_pass, detail, disjoint_sets, brute_force_pass, failing_support })
}

/// Greedy-with-backtracking search for `count` disjoint index sets, each of minimal size
/// reaching full rank.
fn disjoint_full_rank_sets<F: Fn(&[usize]) -> Result<bool>>(
    nk: usize,
    count: usize,
    full: &F,
    budget: usize,
) -> Result<Option<Vec<Vec<usize>>>> {
    let mut spent = 0usize;
    let mut used = vec![false; nk];
    let mut chosen = Vec::new();
    search(nk, count, full, &mut used, &mut chosen, &mut spent, budget)
}

fn search<F: Fn(&[usize]) -> Result<bool>>(
    nk: usize,
    count: usize,
    full: &F,
    used: &mut Vec<bool>,
    chosen: &mut Vec<Vec<usize>>,
    spent: &mut usize,
    budget: usize,
) -> Result<Option<Vec<Vec<usize>>>> {
    if chosen.len() == count {
        return Ok(Some(chosen.clone()));
    }
    let free: Vec<usize> = (0..nk).filter(|&i| !used[i]).collect();
    let remaining = count - chosen.len();
    for size in 1..=free.len() / remaining {
        for js in free.iter().copied().combinations(size) {
            if *spent >= budget {
                return Ok(None);
            }
            if chosen.last().is_some_and(|prev| js[0] < prev[0]) {
                continue;
            }
            *spent += 1;
            if !full(&js)? {
                continue;
            }
            js.iter().for_each(|&i| used[i] = true);
            chosen.push(js.clone());
            if let Some(found) = search(nk, count, full, used, chosen, spent, budget)? {
                return Ok(Some(found));
            }
            chosen.pop();
            js.iter().for_each(|&i| used[i] = false);
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RANK_TOL;
    use crate::rng::{complex_normal, substream};
    use num_complex::Complex64;

    fn random(m: usize, n: usize, seed: u64) -> CMatrix {
        let mut rng = substream(seed, "block-sparse");
        CMatrix::from_fn(m, n, |_, _| complex_normal(&mut rng))
    }

    #[test]
    fn two_stacked_identities_pass_for_one_species() {
        // Each plane sees [I_r; I_r], so wavenumbers {0..r} and {r..2r} are two disjoint
        // full-rank sets.
        let (r, nf) = (3, 2);
        let nk = 2 * r;
        let b = CMatrix::from_fn(nf * nk, r, |row, col| {
            if (row % nk) % r == col { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
        });
        let lib = SpectraMatrix::from_matrix(random(nk, 3, 1));
        let rep = check_block_sparse(&lib, &b, 1, RANK_TOL, 10_000).unwrap();
        assert!(rep.theorem_pass, "{}", rep.detail);
        assert_eq!(rep.disjoint_sets.unwrap().len(), 2);
        assert_eq!(rep.brute_force_pass, Some(true));
    }

    #[test]
    fn too_few_planes_fail_the_theorem_path() {
        let lib = SpectraMatrix::from_matrix(random(6, 4, 2));
        let rep = check_block_sparse(&lib, &random(18, 3, 3), 2, RANK_TOL, 10_000).unwrap();
        assert!(!rep.theorem_pass);
        assert!(rep.brute_force_pass.is_some());
    }

    #[test]
    fn theorem_verdict_never_contradicts_brute_force() {
        for seed in 0..10 {
            let (nk, nf, r, ms, ns) = (6, 4, 4, 5, 2);
            let mut b = random(nf * nk, r, 10 + seed);
            if seed % 3 == 0 {
                // Identical planes: per-wavenumber rows have rank 1.
                let base = b.rows(0, nk).into_owned();
                for f in 1..nf {
                    b.rows_mut(f * nk, nk).copy_from(&base);
                }
            }
            let lib = SpectraMatrix::from_matrix(random(nk, ms, 100 + seed));
            let rep = check_block_sparse(&lib, &b, ns, RANK_TOL, 100_000).unwrap();
            if rep.theorem_pass {
                assert_eq!(rep.brute_force_pass, Some(true));
            }
        }
    }

    #[test]
    fn library_must_exceed_species_count() {
        let lib = SpectraMatrix::from_matrix(random(6, 2, 4));
        assert!(check_block_sparse(&lib, &random(24, 3, 5), 2, RANK_TOL, 100).is_err());
    }
}
