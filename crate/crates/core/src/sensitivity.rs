//! Structural audits that certify when misreports are strictly punished.
//!
//! The one-time and multi-day rules are always truthful, but only *sensitive*
//! — strictly punishing every report that shifts the posterior — when the
//! peers' data pins the parameter down well enough. Concretely:
//!
//! - if the matrix of posteriors over all peer dataset profiles has full
//!   column rank, every posterior-changing misreport loses money;
//! - a cheaper sufficient condition counts Kruskal ranks of the per-point
//!   posterior matrices: `sum_peers (krank(G_j) - 1) * N_j + 1 >= m`;
//! - the smallest singular value of the peers' likelihood matrix scales a
//!   quantitative lower bound on the payment gap.
//!
//! For exponential families the analogous audit asks whether the
//! `h`-function separates candidate reports on a scanned grid of peer
//! contexts; its verdict is explicitly grid-relative.

use alloc::vec::Vec;
// resolves float math in no_std builds; shadowed by std's inherent
// methods whenever std is linked into the build graph
#[allow(unused_imports)]
use num_traits::Float;

use crate::bayes::{point_posterior, PeerEnsemble, World};
use crate::error::{Error, Result};
use crate::expfam::{h_value, ConjParams, ExpFamily};
use crate::linalg::Matrix;
use crate::pmi::PmiBounds;

/// Relative tolerance for numerical rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Two `h` values closer than this count as indistinguishable.
pub const H_DISTINCT_TOL: f64 = 1e-10;

const MAX_KRUSKAL_COLS: usize = 12;

/// Per-point posterior matrix of one provider: row per possible point `d`,
/// column per parameter, entry `p(theta | d)`. Points that are impossible
/// under every parameter carry no posterior and are omitted.
pub fn point_posterior_matrix(world: &World, provider: usize) -> Result<Matrix> {
    let alphabet = world.providers()[provider].likelihood.n_points();
    let mut rows = Vec::new();
    for d in 0..alphabet {
        match point_posterior(world, provider, d) {
            Ok(post) => rows.push(post.as_slice().to_vec()),
            Err(Error::ZeroEvidence) => continue,
            Err(e) => return Err(e),
        }
    }
    if rows.is_empty() {
        return Err(Error::ZeroEvidence);
    }
    Ok(Matrix::from_rows(rows))
}

/// Posterior matrix over the peers of `provider`: one row per realizable
/// peer dataset profile, entry `p(theta | D_peers)`. Profiles with zero
/// probability under every parameter have no conditional and are omitted;
/// on worlds without structural zeros the row count is the full product of
/// the peers' dataset-space sizes.
pub fn peer_posterior_matrix(world: &World, provider: usize) -> Result<Matrix> {
    let ensemble = PeerEnsemble::new(world, provider)?;
    let rows: Vec<Vec<f64>> = ensemble
        .profiles
        .iter()
        .filter_map(|profile| profile.posterior.as_ref().map(|p| p.as_slice().to_vec()))
        .collect();
    if rows.is_empty() {
        return Err(Error::ZeroEvidence);
    }
    Ok(Matrix::from_rows(rows))
}

/// Likelihood matrix over the peers of `provider`: one row per peer dataset
/// profile (all of them, realizable or not), entry `p(D_peers | theta)`.
pub fn peer_likelihood_matrix(world: &World, provider: usize) -> Result<Matrix> {
    let ensemble = PeerEnsemble::new(world, provider)?;
    let rows: Vec<Vec<f64>> = ensemble
        .profiles
        .iter()
        .map(|profile| profile.prob_given_theta.clone())
        .collect();
    Ok(Matrix::from_rows(rows))
}

/// Numerical rank: singular values above `tol` times the largest one.
pub fn matrix_rank(matrix: &Matrix, tol: f64) -> usize {
    let values = matrix.singular_values();
    let max = values.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return 0;
    }
    values.iter().filter(|&&v| v > tol * max).count()
}

fn column_norms(matrix: &Matrix) -> Vec<f64> {
    (0..matrix.cols())
        .map(|c| {
            (0..matrix.rows())
                .map(|r| matrix.get(r, c) * matrix.get(r, c))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Gram determinant of the selected columns after normalizing each to unit
/// length; the square root is the volume the columns span.
fn normalized_subset_volume(matrix: &Matrix, columns: &[usize], norms: &[f64]) -> f64 {
    let r = columns.len();
    let mut gram = Matrix::zeros(r, r);
    for (a, &ca) in columns.iter().enumerate() {
        for (b, &cb) in columns.iter().enumerate() {
            let mut dot = 0.0;
            for row in 0..matrix.rows() {
                dot += matrix.get(row, ca) * matrix.get(row, cb);
            }
            gram.set(a, b, dot / (norms[ca] * norms[cb]));
        }
    }
    // determinant by in-place elimination with partial pivoting
    let mut det = 1.0;
    for k in 0..r {
        let mut pivot_row = k;
        for row in k + 1..r {
            if gram.get(row, k).abs() > gram.get(pivot_row, k).abs() {
                pivot_row = row;
            }
        }
        let pivot = gram.get(pivot_row, k);
        if pivot == 0.0 {
            return 0.0;
        }
        if pivot_row != k {
            for col in 0..r {
                let tmp = gram.get(k, col);
                gram.set(k, col, gram.get(pivot_row, col));
                gram.set(pivot_row, col, tmp);
            }
            det = -det;
        }
        det *= pivot;
        for row in k + 1..r {
            let factor = gram.get(row, k) / pivot;
            for col in k..r {
                gram.set(row, col, gram.get(row, col) - factor * gram.get(k, col));
            }
        }
    }
    det.abs().max(0.0).sqrt()
}

fn for_each_subset(n: usize, r: usize, mut visit: impl FnMut(&[usize]) -> bool) -> bool {
    let mut subset: Vec<usize> = (0..r).collect();
    loop {
        if !visit(&subset) {
            return false;
        }
        // next combination in lexicographic order
        let mut k = r;
        loop {
            if k == 0 {
                return true;
            }
            k -= 1;
            if subset[k] < n - (r - k) {
                subset[k] += 1;
                for j in k + 1..r {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Kruskal rank: the largest `r` such that *every* set of `r` columns is
/// linearly independent; zero when some column vanishes. Independence is
/// decided by the normalized Gram volume against [`DEFAULT_RANK_TOL`].
pub fn kruskal_rank(matrix: &Matrix) -> Result<usize> {
    if matrix.cols() > MAX_KRUSKAL_COLS {
        return Err(Error::TooManyColumns {
            found: matrix.cols(),
            max: MAX_KRUSKAL_COLS,
        });
    }
    let norms = column_norms(matrix);
    if norms.iter().any(|&n| n <= DEFAULT_RANK_TOL) {
        return Ok(0);
    }
    let max_r = matrix.cols().min(matrix.rows());
    let mut krank = 0;
    for r in 1..=max_r {
        let all_independent = for_each_subset(matrix.cols(), r, |subset| {
            normalized_subset_volume(matrix, subset, &norms) > DEFAULT_RANK_TOL
        });
        if all_independent {
            krank = r;
        } else {
            break;
        }
    }
    Ok(krank)
}

/// The counting condition on the peers' per-point posterior matrices:
/// `sum_{j != i} (krank(G_j) - 1) * N_j + 1 >= m`. Sufficient for the full
/// peer-posterior matrix to reach rank `m` without ever enumerating it.
pub fn krank_condition(world: &World, provider: usize) -> Result<bool> {
    let m = world.n_params();
    let mut total = 1usize;
    for j in 0..world.n_providers() {
        if j == provider {
            continue;
        }
        let g = point_posterior_matrix(world, j)?;
        let krank = kruskal_rank(&g)?;
        total += krank.saturating_sub(1) * world.providers()[j].n_points;
    }
    Ok(total >= m)
}

/// Quantitative sensitivity strength for `provider`: the smallest singular
/// value of the peers' likelihood matrix, scaled into payment units by
/// `budget / (n * (upper - lower))`. Zero means no quantitative certificate.
pub fn alpha_bound(world: &World, provider: usize, bounds: &PmiBounds) -> Result<f64> {
    let p = peer_likelihood_matrix(world, provider)?;
    let smallest = p.smallest_singular_value();
    let n = world.n_providers() as f64;
    Ok(smallest * world.budget() / (n * bounds.width()))
}

/// Rank facts for a single provider's peers.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProviderAudit {
    pub provider: usize,
    /// Numerical rank of the peers' posterior matrix.
    pub q_rank: usize,
    pub q_full_rank: bool,
    /// Whether the Kruskal-rank counting condition holds for this provider.
    pub krank_condition_met: bool,
    /// Smallest-singular-value payment-gap bound (zero when vacuous).
    pub alpha_lower_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Verdict {
    /// Every provider passed the full-rank audit, or every provider passed
    /// the counting condition: posterior-changing misreports strictly lose.
    CertifiedSensitive,
    /// Neither condition held uniformly; no certificate (misreports may or
    /// may not be punished).
    Inconclusive,
}

/// Result of the structural sensitivity audit.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AuditReport {
    pub providers: Vec<ProviderAudit>,
    pub verdict: Verdict,
}

/// Runs the full structural audit for every provider.
pub fn audit_sensitivity(world: &World, bounds: &PmiBounds) -> Result<AuditReport> {
    let m = world.n_params();
    let mut providers = Vec::with_capacity(world.n_providers());
    for i in 0..world.n_providers() {
        let q = peer_posterior_matrix(world, i)?;
        let q_rank = matrix_rank(&q, DEFAULT_RANK_TOL);
        providers.push(ProviderAudit {
            provider: i,
            q_rank,
            q_full_rank: q_rank == m,
            krank_condition_met: krank_condition(world, i)?,
            alpha_lower_bound: alpha_bound(world, i, bounds)?,
        });
    }
    let all_full = providers.iter().all(|p| p.q_full_rank);
    let all_krank = providers.iter().all(|p| p.krank_condition_met);
    let verdict = if all_full || all_krank {
        Verdict::CertifiedSensitive
    } else {
        Verdict::Inconclusive
    };
    Ok(AuditReport { providers, verdict })
}

/// Outcome of comparing one candidate pair across the scanned contexts.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HPairResult {
    pub first: usize,
    pub second: usize,
    /// Largest `|h(first) - h(second)|` over the scanned contexts.
    pub max_delta: f64,
    pub distinguishable: bool,
}

/// Grid-relative report of the exponential-family audit. The verdict never
/// claims more than the scanned grid supports.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HScanReport {
    pub pairs: Vec<HPairResult>,
    pub all_distinguishable_on_grid: bool,
    pub indistinguishable_pairs: Vec<(usize, usize)>,
}

/// For every pair of distinct candidate reports, asks whether some peer
/// context in the scan separates their `h` values by more than
/// [`H_DISTINCT_TOL`]. A pair no context separates is exactly a pair of
/// reports the multi-day mechanism cannot tell apart.
pub fn h_distinguishability_scan(
    family: &dyn ExpFamily,
    p0: &ConjParams,
    candidates: &[ConjParams],
    contexts: &[ConjParams],
) -> Result<HScanReport> {
    let mut pairs = Vec::new();
    let mut indistinguishable = Vec::new();
    for a in 0..candidates.len() {
        for b in a + 1..candidates.len() {
            let mut max_delta = 0.0f64;
            for ctx in contexts {
                let ha = h_value(family, &candidates[a], ctx, p0)?;
                let hb = h_value(family, &candidates[b], ctx, p0)?;
                max_delta = max_delta.max((ha - hb).abs());
            }
            let distinguishable = max_delta > H_DISTINCT_TOL;
            if !distinguishable {
                indistinguishable.push((a, b));
            }
            pairs.push(HPairResult {
                first: a,
                second: b,
                max_delta,
                distinguishable,
            });
        }
    }
    Ok(HScanReport {
        all_distinguishable_on_grid: indistinguishable.is_empty(),
        indistinguishable_pairs: indistinguishable,
        pairs,
    })
}
