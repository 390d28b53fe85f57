//! Pointwise mutual information between datasets on a finite parameter
//! space, and the payment bracket it lives in.
//!
//! For posteriors `p(theta | D_i)`, `p(theta | D_peers)` and a strictly
//! positive prior, the PMI is `sum_theta p(theta|D_i) p(theta|D_peers) / p(theta)`.
//! When the inputs are true posteriors this equals the likelihood ratio
//! `p(D_peers | D_i) / p(D_peers)`, which is what makes log-PMI a truthful
//! score. The bracket `[L, R]` computed here is what lets the one-time
//! mechanism normalize scores into a budget without ever clipping.

use alloc::vec::Vec;
// resolves float math in no_std builds; shadowed by std's inherent
// methods whenever std is linked into the build graph
#[allow(unused_imports)]
use num_traits::Float;

use crate::bayes::{point_posterior, ProbVector, World, SUPPORT_TOL};
use crate::error::{Error, Result};

/// Bracket for log-PMI scores. `lower < upper` is enforced at construction;
/// equality would mean every pair of datasets is independent.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PmiBounds {
    pub lower: f64,
    pub upper: f64,
}

impl PmiBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) {
            return Err(Error::DegenerateBounds { lower, upper });
        }
        Ok(Self { lower, upper })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, score: f64) -> bool {
        self.lower <= score && score <= self.upper
    }
}

/// `sum_theta post_i(theta) post_peers(theta) / prior(theta)`.
pub fn pmi_finite(post_i: &ProbVector, post_peers: &ProbVector, prior: &ProbVector) -> Result<f64> {
    if post_i.len() != prior.len() {
        return Err(Error::DimensionMismatch {
            expected: prior.len(),
            found: post_i.len(),
        });
    }
    if post_peers.len() != prior.len() {
        return Err(Error::DimensionMismatch {
            expected: prior.len(),
            found: post_peers.len(),
        });
    }
    let mut total = 0.0;
    for theta in 0..prior.len() {
        total += post_i[theta] * post_peers[theta] / prior[theta];
    }
    Ok(total)
}

/// Support-set membership: the report earns a score only when its posterior
/// shares mass with the peers' posterior. Entries below the support
/// tolerance count as exact zeros, so values like `1e-300` cannot sneak a
/// report into the scored set.
pub fn in_support(post_i: &ProbVector, post_peers: &ProbVector, prior: &ProbVector) -> Result<bool> {
    if post_i.len() != prior.len() || post_peers.len() != prior.len() {
        return Err(Error::DimensionMismatch {
            expected: prior.len(),
            found: post_i.len().max(post_peers.len()),
        });
    }
    Ok(post_i.support_overlaps(post_peers))
}

/// Natural log of the PMI; errors with [`Error::OutOfSupport`] when the
/// supports are disjoint.
pub fn log_pmi_score(post_i: &ProbVector, post_peers: &ProbVector, prior: &ProbVector) -> Result<f64> {
    if !in_support(post_i, post_peers, prior)? {
        return Err(Error::OutOfSupport);
    }
    let value = pmi_finite(post_i, post_peers, prior)?;
    if value <= 0.0 {
        return Err(Error::OutOfSupport);
    }
    Ok(value.ln())
}

/// Per-provider pieces of the lower bound, exposed so callers can report
/// how the bracket was assembled.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundsBreakdown {
    /// Ratio of the largest to smallest prior mass.
    pub prior_ratio: f64,
    /// Per-provider point-posterior ratio `U`.
    pub posterior_ratios: Vec<f64>,
    /// Per-provider floor on the provider's own posterior mass.
    pub eta_own: Vec<f64>,
    /// Per-provider floor on the peers' joint posterior mass.
    pub eta_peers: Vec<f64>,
    /// Per-provider lower bound `ln(eta_own * eta_peers)`.
    pub lower_per_provider: Vec<f64>,
}

/// Computes the log-PMI bracket `[L, R]` for a finite world in time
/// polynomial in the alphabet sizes (no profile enumeration).
///
/// `R = ln(1 / min_theta prior)`. `L` comes from floors on posterior mass:
/// a dataset of at most `N` points over alphabet `D` has every nonzero
/// posterior entry at least `eta(D, N) = 1 / (1 + m * U(D)^N * T^(N-1))`,
/// where `T` is the prior ratio and `U(D)` the point-posterior ratio; the
/// peers' side composes the per-provider factors. Sizes are taken at each
/// provider's maximum report length, so the bracket covers every report the
/// mechanism accepts, including withheld (shorter) and padded (longer)
/// ones.
pub fn bounds_finite(world: &World) -> Result<PmiBounds> {
    bounds_finite_with_breakdown(world).map(|(bounds, _)| bounds)
}

/// As [`bounds_finite`], also returning the per-provider components.
pub fn bounds_finite_with_breakdown(world: &World) -> Result<(PmiBounds, BoundsBreakdown)> {
    let m = world.n_params() as f64;
    let min_prior = world.prior().iter().cloned().fold(f64::INFINITY, f64::min);
    let max_prior = world.prior().iter().cloned().fold(0.0, f64::max);
    let upper = (1.0 / min_prior).ln();
    let prior_ratio = max_prior / min_prior;

    let mut posterior_ratios = Vec::with_capacity(world.n_providers());
    for j in 0..world.n_providers() {
        let alphabet = world.providers()[j].likelihood.n_points();
        let mut max_p = 0.0f64;
        let mut min_p = f64::INFINITY;
        for d in 0..alphabet {
            // points that are impossible under every parameter carry no
            // posterior and are skipped
            let Ok(post) = point_posterior(world, j, d) else { continue };
            for theta in 0..world.n_params() {
                let p = post[theta];
                if p > 0.0 {
                    max_p = max_p.max(p);
                    min_p = min_p.min(p);
                }
            }
        }
        if !min_p.is_finite() {
            return Err(Error::Invalid("provider has no possible points"));
        }
        posterior_ratios.push(max_p / min_p);
    }

    // eta(D, N) = 1 / (1 + m * U^N * T^(N-1)); the peers' side multiplies the
    // per-peer U^N factors and uses T^(total N - 1).
    let ratio_power = |u: f64, n: usize| u.powi(n as i32);
    let mut eta_own = Vec::with_capacity(world.n_providers());
    let mut eta_peers = Vec::with_capacity(world.n_providers());
    let mut lower_per_provider = Vec::with_capacity(world.n_providers());
    for i in 0..world.n_providers() {
        let n_own = world.max_report_len(i);
        let own = 1.0
            / (1.0
                + m * ratio_power(posterior_ratios[i], n_own)
                    * prior_ratio.powi(n_own as i32 - 1));

        let mut u_product = 1.0;
        let mut n_total = 0usize;
        for j in 0..world.n_providers() {
            if j == i {
                continue;
            }
            let n_j = world.max_report_len(j);
            u_product *= ratio_power(posterior_ratios[j], n_j);
            n_total += n_j;
        }
        let peers = 1.0 / (1.0 + m * u_product * prior_ratio.powi(n_total as i32 - 1));

        eta_own.push(own);
        eta_peers.push(peers);
        lower_per_provider.push((own * peers).ln());
    }

    let lower = lower_per_provider
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let bounds = PmiBounds::new(lower, upper)?;
    Ok((
        bounds,
        BoundsBreakdown {
            prior_ratio,
            posterior_ratios,
            eta_own,
            eta_peers,
            lower_per_provider,
        },
    ))
}

/// Support decision helper for posterior entries used in tests and the
/// support-set scan: anything below [`SUPPORT_TOL`] counts as zero.
pub fn effectively_zero(p: f64) -> bool {
    p < SUPPORT_TOL
}
