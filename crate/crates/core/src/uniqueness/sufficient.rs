use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{rank_with_reference, singular_values, CMatrix};

use super::wavenumber_rows;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchStrategy {
    Exhaustive,
    Greedy,
}

#[derive(Clone, Debug, Serialize)]
pub struct SufficientReport {
    /// False when the partition hypotheses (`Nk >= r`, `Nf >= Ns`, `Nf | r`) do not hold.
    pub applicable: bool,
    pub pass: bool,
    /// Disjoint wavenumber sets `J_i`, one per focal plane, each of size `r / Nf`.
    pub partition: Option<Vec<Vec<usize>>>,
    pub detail: String,
}

/// Searches for disjoint wavenumber sets `J_1..J_Nf` of size `r / Nf` such that every
/// `C_i = [B_1[J_i, :]; ...; B_Nf[J_i, :]]` is full rank. Success certifies uniqueness within
/// the passband for generic spectra.
pub fn check_sufficient(
    b_stack: &CMatrix,
    nf: usize,
    ns: usize,
    r: usize,
    strategy: SearchStrategy,
    tol: f64,
    budget: usize,
) -> Result<SufficientReport> {
    let nk = if nf == 0 { 0 } else { b_stack.nrows() / nf };
    let inapplicable = |detail: String| SufficientReport { applicable: false, pass: false, partition: None, detail };
    if r == 0 || nf == 0 || r % nf != 0 {
        return Ok(inapplicable(format!("r = {r} is not divisible by Nf = {nf}")));
    }
    if nk < r {
        return Ok(inapplicable(format!("Nk = {nk} < r = {r}")));
    }
    if nf < ns {
        return Ok(inapplicable(format!("Nf = {nf} < Ns = {ns}")));
    }
    let size = r / nf;
    let reference = singular_values(b_stack)?.first().copied().unwrap_or(0.0);
    let full = |js: &[usize]| -> Result<bool> {
        Ok(rank_with_reference(&wavenumber_rows(b_stack, nf, js), reference, tol)? == r)
    };
    let found = match strategy {
        SearchStrategy::Exhaustive => {
            let mut spent = 0usize;
            let mut chosen = Vec::new();
            let mut used = vec![false; nk];
            let res = backtrack(nk, size, nf, &mut used, &mut chosen, &full, &mut spent, budget)?;
            if res.is_none() && spent >= budget {
                return Ok(SufficientReport {
                    applicable: true,
                    pass: false,
                    partition: None,
                    detail: format!("search budget of {budget} rank tests exhausted"),
                });
            }
            res
        }
        SearchStrategy::Greedy => greedy(nk, size, nf, &full)?,
    };
    Ok(match found {
        Some(partition) => SufficientReport {
            applicable: true,
            pass: true,
            detail: format!("partition found: {partition:?}"),
            partition: Some(partition),
        },
        None => SufficientReport {
            applicable: true,
            pass: false,
            partition: None,
            detail: "no admissible partition".into(),
        },
    })
}

#[allow(clippy::too_many_arguments)]
fn backtrack<F: Fn(&[usize]) -> Result<bool>>(
    nk: usize,
    size: usize,
    sets: usize,
    used: &mut Vec<bool>,
    chosen: &mut Vec<Vec<usize>>,
    full: &F,
    spent: &mut usize,
    budget: usize,
) -> Result<Option<Vec<Vec<usize>>>> {
    if chosen.len() == sets {
        return Ok(Some(chosen.clone()));
    }
    let free: Vec<usize> = (0..nk).filter(|&i| !used[i]).collect();
    // Sets are unordered, so enumerate them in increasing order of their smallest element.
    for js in free.iter().copied().combinations(size) {
        if *spent >= budget {
            return Ok(None);
        }
        if let Some(prev) = chosen.last() {
            if js[0] < prev[0] {
                continue;
            }
        }
        *spent += 1;
        if !full(&js)? {
            continue;
        }
        js.iter().for_each(|&i| used[i] = true);
        chosen.push(js.clone());
        if let Some(p) = backtrack(nk, size, sets, used, chosen, full, spent, budget)? {
            return Ok(Some(p));
        }
        chosen.pop();
        js.iter().for_each(|&i| used[i] = false);
    }
    Ok(None)
}

fn greedy<F: Fn(&[usize]) -> Result<bool>>(
    nk: usize,
    size: usize,
    sets: usize,
    full: &F,
) -> Result<Option<Vec<Vec<usize>>>> {
    let mut used = vec![false; nk];
    let mut out = Vec::new();
    for _ in 0..sets {
        let free: Vec<usize> = (0..nk).filter(|&i| !used[i]).collect();
        let mut found = None;
        for js in free.into_iter().combinations(size) {
            if full(&js)? {
                found = Some(js);
                break;
            }
        }
        match found {
            Some(js) => {
                js.iter().for_each(|&i| used[i] = true);
                out.push(js);
            }
            None => return Ok(None),
        }
    }
    Ok(Some(out))
}
