use itertools::Itertools;
use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{rank_with_reference, select_rows, singular_values, CMatrix};
use crate::rng::substream;
use crate::spectra::SpectraMatrix;

use super::wavenumber_rows;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Condition {
    pub pass: bool,
    pub detail: String,
}

impl Condition {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Condition { pass, detail: detail.into() }
    }
}

/// Outcome of the five necessary conditions for uniqueness within the optical passband.
#[derive(Clone, Debug, Serialize)]
pub struct NecessaryReport {
    pub n1: Condition,
    pub n2: Condition,
    pub n3: Condition,
    pub n4: Condition,
    pub n5: Condition,
    /// True when the spectral-diversity subsets were sampled rather than enumerated.
    pub n4_sampled: bool,
    pub n4_subsets_checked: usize,
}

impl NecessaryReport {
    pub fn all_pass(&self) -> bool {
        [&self.n1, &self.n2, &self.n3, &self.n4, &self.n5].iter().all(|c| c.pass)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Checks N1-N5 for spectra `h` and the stacked restricted matrix `b_stack` (`Nf Nk x r`).
/// Spectral-diversity subsets are enumerated exactly while their count is at most
/// `subset_budget`; otherwise `subset_budget` random subsets are drawn from `seed`.
pub fn check_necessary(
    h: &SpectraMatrix,
    b_stack: &CMatrix,
    nf: usize,
    r: usize,
    subset_budget: usize,
    tol: f64,
    seed: u64,
) -> Result<NecessaryReport> {
    let (nk, ns) = (h.nk(), h.ns());
    if nf == 0 || b_stack.nrows() != nf * nk {
        return Err(Error::dim(format!(
            "stacked restricted matrix has {} rows, expected Nf Nk = {}",
            b_stack.nrows(),
            nf * nk
        )));
    }

    let n1 = Condition::new(
        nk * nf >= ns * r,
        format!("Nk Nf = {} vs Ns r = {}", nk * nf, ns * r),
    );

    let h_sigma = singular_values(&h.h)?;
    let h_ref = h_sigma.first().copied().unwrap_or(0.0);
    let h_rank = h_sigma.iter().filter(|&&s| s > tol * h_ref).count();
    let n2 = Condition::new(h_rank == ns, format!("rank(H) = {h_rank}, Ns = {ns}"));

    let n3 = orthogonal_row_check(b_stack, ns, tol);

    let (n4, n4_sampled, n4_subsets_checked) =
        spectral_diversity_check(h, h_ref, nf, r, subset_budget, tol, seed)?;

    let b_ref = singular_values(b_stack)?.first().copied().unwrap_or(0.0);
    let mut total = 0usize;
    for i in 0..nk {
        total += rank_with_reference(&wavenumber_rows(b_stack, nf, &[i]), b_ref, tol)?;
    }
    let n5 = Condition::new(
        total >= ns * r,
        format!("sum of per-wavenumber ranks = {total}, Ns r = {}", ns * r),
    );

    Ok(NecessaryReport { n1, n2, n3, n4, n5, n4_sampled, n4_subsets_checked })
}

fn orthogonal_row_check(b: &CMatrix, ns: usize, tol: f64) -> Condition {
    if ns < 2 {
        return Condition::new(true, "not applicable for a single species");
    }
    let n = b.nrows();
    let norms: Vec<f64> = (0..n).map(|i| b.row(i).norm()).collect();
    let scale = norms.iter().copied().fold(0.0, f64::max);
    for i in 0..n {
        if norms[i] <= tol * scale {
            continue;
        }
        let isolated = (0..n).filter(|&j| j != i).all(|j| {
            let ip = b.row(i).dotc(&b.row(j)).norm();
            ip <= tol * norms[i] * norms[j]
        });
        if isolated {
            return Condition::new(false, format!("row {i} is orthogonal to all remaining rows"));
        }
    }
    Condition::new(true, "no isolated row")
}

fn spectral_diversity_check(
    h: &SpectraMatrix,
    h_ref: f64,
    nf: usize,
    r: usize,
    budget: usize,
    tol: f64,
    seed: u64,
) -> Result<(Condition, bool, usize)> {
    let (nk, ns) = (h.nk(), h.ns());
    // Subset sizes with Ns <= |J| < Ns r / Nf.
    let sizes: Vec<usize> = (ns..=nk).filter(|&j| j * nf < ns * r).collect();
    if sizes.is_empty() {
        return Ok((Condition::new(true, "no subset sizes to check"), false, 0));
    }
    let total: f64 = sizes.iter().map(|&k| binomial(nk, k)).sum();
    let check = |js: &[usize]| -> Result<Option<String>> {
        let hj = select_rows(&h.h, js);
        if rank_with_reference(&hj, h_ref, tol)? != ns {
            return Ok(None);
        }
        let rest: Vec<usize> = (0..nk).filter(|i| !js.contains(i)).collect();
        let rank_c = rank_with_reference(&select_rows(&h.h, &rest), h_ref, tol)?;
        let need = ns as f64 - (nf as f64 / r as f64) * js.len() as f64;
        Ok(if (rank_c as f64) < need - 1e-12 {
            Some(format!("J = {js:?}: rank(H^Jc) = {rank_c} < {need:.3}"))
        } else {
            None
        })
    };
    let mut checked = 0usize;
    if total <= budget as f64 {
        for &k in &sizes {
            for js in (0..nk).combinations(k) {
                checked += 1;
                if let Some(msg) = check(&js)? {
                    return Ok((Condition::new(false, msg), false, checked));
                }
            }
        }
        Ok((Condition::new(true, format!("{checked} subsets enumerated")), false, checked))
    } else {
        let mut rng = substream(seed, "necessary-n4");
        for _ in 0..budget {
            let k = sizes[rng.random_range(0..sizes.len())];
            let mut js = sample(&mut rng, nk, k).into_vec();
            js.sort_unstable();
            checked += 1;
            if let Some(msg) = check(&js)? {
                return Ok((Condition::new(false, msg), true, checked));
            }
        }
        Ok((
            Condition::new(true, format!("{checked} of {total:.0} subsets sampled")),
            true,
            checked,
        ))
    }
}
