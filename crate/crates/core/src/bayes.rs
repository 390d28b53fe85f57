//! Finite-parameter Bayesian world model.
//!
//! A [`World`] fixes a strictly positive prior over `m` parameter values and,
//! for each provider, a likelihood matrix over that provider's point alphabet
//! together with the number of i.i.d. points the provider holds. Everything
//! downstream (scores, payments, audits) is an exact sum over this model:
//! posteriors are normalized products, and dataset-profile distributions are
//! enumerated outright rather than sampled.
//!
//! Datasets are ordered tuples of point indices, so the enumeration measure
//! is exactly the product measure over draws. Posteriors are invariant under
//! permutation of the points; this is guaranteed bit-for-bit by accumulating
//! likelihoods in canonical (point-index) order.

use alloc::vec;
use alloc::vec::Vec;
// resolves float math in no_std builds; shadowed by std's inherent
// methods whenever std is linked into the build graph
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Tolerance for normalization checks on constructed distributions.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Posterior entries below this threshold are treated as exact zeros when
/// deciding support membership.
pub const SUPPORT_TOL: f64 = 1e-15;

/// A probability distribution over the `m` parameter values.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates nonnegative entries summing to 1 within [`NORMALIZATION_TOL`].
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Invalid("probability vector must be nonempty"));
        }
        if entries.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Invalid(
                "probability entries must be finite and nonnegative",
            ));
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Invalid("probability entries must sum to 1"));
        }
        Ok(Self(entries))
    }

    /// Normalizes a nonnegative weight vector. Errors with
    /// [`Error::ZeroEvidence`] when every weight vanishes.
    pub fn from_unnormalized(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Invalid("probability vector must be nonempty"));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::Invalid("weights must be finite and nonnegative"));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::ZeroEvidence);
        }
        Ok(Self(weights.into_iter().map(|w| w / sum).collect()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> core::slice::Iter<'_, f64> {
        self.0.iter()
    }

    /// L-infinity comparison, the metric used for "same posterior" questions.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.len() == other.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|(a, b)| (a - b).abs() <= tol)
    }

    /// True when some parameter carries mass above [`SUPPORT_TOL`] in both
    /// distributions.
    pub fn support_overlaps(&self, other: &Self) -> bool {
        self.0
            .iter()
            .zip(&other.0)
            .any(|(&a, &b)| a >= SUPPORT_TOL && b >= SUPPORT_TOL)
    }
}

impl core::ops::Index<usize> for ProbVector {
    type Output = f64;
    fn index(&self, idx: usize) -> &f64 {
        &self.0[idx]
    }
}

/// Conditional distribution of a provider's data points given the parameter.
///
/// `entry(d, theta)` is `p(d | theta)`; every parameter column is a
/// distribution over the provider's point alphabet.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LikelihoodMatrix {
    n_points: usize,
    n_params: usize,
    /// Row-major: `data[d * n_params + theta]`.
    data: Vec<f64>,
}

impl LikelihoodMatrix {
    /// Builds from rows indexed by point value. Each column must sum to 1
    /// within [`NORMALIZATION_TOL`].
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_points = rows.len();
        if n_points == 0 {
            return Err(Error::Invalid("likelihood matrix must have at least one point"));
        }
        let n_params = rows[0].len();
        if n_params == 0 {
            return Err(Error::Invalid("likelihood matrix must have at least one parameter"));
        }
        let mut data = Vec::with_capacity(n_points * n_params);
        for row in &rows {
            if row.len() != n_params {
                return Err(Error::DimensionMismatch {
                    expected: n_params,
                    found: row.len(),
                });
            }
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(Error::Invalid(
                    "likelihood entries must be finite and nonnegative",
                ));
            }
            data.extend_from_slice(row);
        }
        for theta in 0..n_params {
            let col_sum: f64 = (0..n_points).map(|d| data[d * n_params + theta]).sum();
            if (col_sum - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::Invalid(
                    "each likelihood column must sum to 1 (a distribution over points)",
                ));
            }
        }
        Ok(Self {
            n_points,
            n_params,
            data,
        })
    }

    /// Number of distinct point values in the provider's alphabet.
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// `p(d | theta)`.
    pub fn entry(&self, d: usize, theta: usize) -> f64 {
        self.data[d * self.n_params + theta]
    }
}

/// One data provider: a point model plus the dataset size it holds.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Provider {
    pub likelihood: LikelihoodMatrix,
    /// Number of i.i.d. points in the provider's true dataset.
    pub n_points: usize,
}

/// A complete finite Bayesian scenario.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct World {
    prior: ProbVector,
    providers: Vec<Provider>,
    budget: f64,
    enumeration_cap: u128,
    report_slack: usize,
}

/// Default cap on the number of enumerated dataset profiles.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// Default number of extra points a report may carry beyond the provider's
/// true dataset size while staying inside the precomputed payment bracket.
pub const DEFAULT_REPORT_SLACK: usize = 1;

impl World {
    /// Validates and builds a world.
    ///
    /// The prior must be strictly positive (the payment upper bound is
    /// `log(1 / min prior)`), and at least two providers are required so
    /// that every provider has peers.
    pub fn new(prior: ProbVector, providers: Vec<Provider>, budget: f64) -> Result<Self> {
        if prior.iter().any(|&p| p <= 0.0) {
            return Err(Error::Invalid("prior must be strictly positive"));
        }
        if providers.len() < 2 {
            return Err(Error::Invalid("at least two providers are required"));
        }
        for provider in &providers {
            if provider.likelihood.n_params() != prior.len() {
                return Err(Error::DimensionMismatch {
                    expected: prior.len(),
                    found: provider.likelihood.n_params(),
                });
            }
            if provider.n_points == 0 {
                return Err(Error::Invalid("each provider must hold at least one point"));
            }
        }
        if !(budget >= 0.0) || !budget.is_finite() {
            return Err(Error::Invalid("budget must be finite and nonnegative"));
        }
        Ok(Self {
            prior,
            providers,
            budget,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            report_slack: DEFAULT_REPORT_SLACK,
        })
    }

    pub fn with_enumeration_cap(mut self, cap: u128) -> Self {
        self.enumeration_cap = cap;
        self
    }

    /// Sets how many extra points a report may carry beyond the model size.
    /// Payment bounds are computed to stay valid for every report within the
    /// slack, so widening it loosens the bracket.
    pub fn with_report_slack(mut self, slack: usize) -> Self {
        self.report_slack = slack;
        self
    }

    /// Copy of the world with a different budget; used when per-day budgets
    /// differ from the headline budget.
    pub fn with_budget(mut self, budget: f64) -> Self {
        self.budget = budget;
        self
    }

    pub fn prior(&self) -> &ProbVector {
        &self.prior
    }

    pub fn providers(&self) -> &[Provider] {
        &self.providers
    }

    pub fn n_providers(&self) -> usize {
        self.providers.len()
    }

    pub fn n_params(&self) -> usize {
        self.prior.len()
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn enumeration_cap(&self) -> u128 {
        self.enumeration_cap
    }

    /// Largest report size provider `i` may submit: `N_i` plus the slack.
    pub fn max_report_len(&self, provider: usize) -> usize {
        self.providers[provider].n_points + self.report_slack
    }
}

/// An ordered tuple of point indices; the unit of reporting.
///
/// The true dataset of provider `i` has exactly `N_i` points, but reports of
/// any length up to [`World::max_report_len`] are legal (withholding and
/// replication change the length). Posteriors depend only on the multiset of
/// points.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dataset(pub Vec<usize>);

impl Dataset {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn points(&self) -> &[usize] {
        &self.0
    }

    /// Occurrence count of each point value in `0..alphabet`.
    pub fn counts(&self, alphabet: usize) -> Result<Vec<usize>> {
        let mut counts = vec![0usize; alphabet];
        for &d in &self.0 {
            if d >= alphabet {
                return Err(Error::Invalid("dataset point outside provider alphabet"));
            }
            counts[d] += 1;
        }
        Ok(counts)
    }
}

impl From<Vec<usize>> for Dataset {
    fn from(points: Vec<usize>) -> Self {
        Self(points)
    }
}

/// `p(D | theta)` for one provider, accumulated in canonical point order so
/// that permutations of the same multiset give bit-identical values.
pub fn dataset_likelihood(world: &World, provider: usize, dataset: &Dataset, theta: usize) -> Result<f64> {
    let lik = &world.providers[provider].likelihood;
    let counts = dataset.counts(lik.n_points())?;
    let mut value = 1.0;
    for (d, &count) in counts.iter().enumerate() {
        if count > 0 {
            value *= lik.entry(d, theta).powi(count as i32);
        }
    }
    Ok(value)
}

/// Posterior over the parameter after observing a single point:
/// `p(theta | d) ∝ p(d | theta) p(theta)`.
pub fn point_posterior(world: &World, provider: usize, d: usize) -> Result<ProbVector> {
    let lik = &world.providers[provider].likelihood;
    if d >= lik.n_points() {
        return Err(Error::Invalid("point index outside provider alphabet"));
    }
    let weights: Vec<f64> = (0..world.n_params())
        .map(|theta| lik.entry(d, theta) * world.prior[theta])
        .collect();
    ProbVector::from_unnormalized(weights)
}

/// Posterior over the parameter after observing a whole dataset. The empty
/// dataset carries no evidence and returns the prior.
pub fn dataset_posterior(world: &World, provider: usize, dataset: &Dataset) -> Result<ProbVector> {
    if dataset.is_empty() {
        return Ok(world.prior.clone());
    }
    let weights: Vec<f64> = (0..world.n_params())
        .map(|theta| -> Result<f64> {
            Ok(world.prior[theta] * dataset_likelihood(world, provider, dataset, theta)?)
        })
        .collect::<Result<_>>()?;
    ProbVector::from_unnormalized(weights)
}

/// Combines per-provider posteriors into the joint posterior:
/// `p(theta | D_1..D_k) ∝ prod_j p(theta | D_j) / prior(theta)^(k-1)`.
///
/// With a single input posterior this returns it unchanged (up to
/// renormalization); with none, the prior.
pub fn joint_posterior(prior: &ProbVector, posts: &[&ProbVector]) -> Result<ProbVector> {
    for post in posts {
        if post.len() != prior.len() {
            return Err(Error::DimensionMismatch {
                expected: prior.len(),
                found: post.len(),
            });
        }
    }
    let weights: Vec<f64> = (0..prior.len())
        .map(|theta| {
            let mut w = prior[theta];
            for post in posts {
                w *= post[theta] / prior[theta];
            }
            w
        })
        .collect();
    ProbVector::from_unnormalized(weights)
}

/// All ordered tuples of length `len` over `0..alphabet`, in lexicographic
/// order. The fixed order keeps every downstream summation deterministic.
pub fn enumerate_datasets(alphabet: usize, len: usize) -> Vec<Dataset> {
    let mut out = Vec::new();
    let mut current = vec![0usize; len];
    loop {
        out.push(Dataset(current.clone()));
        // lexicographic increment
        let mut pos = len;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            current[pos] += 1;
            if current[pos] < alphabet {
                break;
            }
            current[pos] = 0;
        }
    }
}

fn checked_profile_count<'a>(
    sizes: impl Iterator<Item = (&'a Provider, usize)>,
    cap: u128,
) -> Result<u128> {
    let mut total: u128 = 1;
    for (provider, len) in sizes {
        let base = provider.likelihood.n_points() as u128;
        for _ in 0..len {
            total = total
                .checked_mul(base)
                .ok_or(Error::EnumerationTooLarge { required: u128::MAX, cap })?;
            if total > cap {
                return Err(Error::EnumerationTooLarge { required: total, cap });
            }
        }
    }
    Ok(total)
}

/// The peers of provider `i`: every joint realization of the other
/// providers' datasets, with per-parameter likelihoods and (when realizable)
/// the joint posterior each realization induces.
///
/// This is the shared enumeration behind mechanism evaluation, expected
/// payments, and the rank audits. Profiles are ordered lexicographically by
/// peer index and dataset, so summations are reproducible.
#[derive(Debug, Clone)]
pub struct PeerEnsemble {
    /// Provider whose peers are enumerated.
    pub provider: usize,
    /// Indices of the peer providers, ascending.
    pub peer_indices: Vec<usize>,
    pub profiles: Vec<PeerProfile>,
}

/// One joint realization of the peers' datasets.
#[derive(Debug, Clone)]
pub struct PeerProfile {
    /// Datasets aligned with `PeerEnsemble::peer_indices`.
    pub datasets: Vec<Dataset>,
    /// `p(D_peers | theta)` for each parameter value.
    pub prob_given_theta: Vec<f64>,
    /// Joint posterior `p(theta | D_peers)`, or `None` for profiles that are
    /// impossible under every parameter (they carry probability zero and are
    /// skipped by conditional sums).
    pub posterior: Option<ProbVector>,
}

impl PeerProfile {
    /// Marginal probability of this profile: `sum_theta p(theta) p(D_peers | theta)`.
    pub fn marginal_prob(&self, prior: &ProbVector) -> f64 {
        prior
            .iter()
            .zip(&self.prob_given_theta)
            .map(|(&p, &l)| p * l)
            .sum()
    }

    /// `p(D_peers | D_i)` mixed over the posterior of the conditioning dataset.
    pub fn prob_given_posterior(&self, post: &ProbVector) -> f64 {
        post.iter()
            .zip(&self.prob_given_theta)
            .map(|(&p, &l)| p * l)
            .sum()
    }
}

impl PeerEnsemble {
    pub fn new(world: &World, provider: usize) -> Result<Self> {
        if provider >= world.n_providers() {
            return Err(Error::Invalid("provider index out of range"));
        }
        let peer_indices: Vec<usize> = (0..world.n_providers()).filter(|&j| j != provider).collect();
        checked_profile_count(
            peer_indices
                .iter()
                .map(|&j| (&world.providers()[j], world.providers()[j].n_points)),
            world.enumeration_cap(),
        )?;

        let per_peer: Vec<Vec<Dataset>> = peer_indices
            .iter()
            .map(|&j| {
                enumerate_datasets(
                    world.providers()[j].likelihood.n_points(),
                    world.providers()[j].n_points,
                )
            })
            .collect();

        let mut profiles = Vec::new();
        let mut idx = vec![0usize; peer_indices.len()];
        loop {
            let datasets: Vec<Dataset> = idx
                .iter()
                .enumerate()
                .map(|(k, &pos)| per_peer[k][pos].clone())
                .collect();
            let prob_given_theta: Vec<f64> = (0..world.n_params())
                .map(|theta| -> Result<f64> {
                    let mut p = 1.0;
                    for (k, dataset) in datasets.iter().enumerate() {
                        p *= dataset_likelihood(world, peer_indices[k], dataset, theta)?;
                    }
                    Ok(p)
                })
                .collect::<Result<_>>()?;
            let posterior = {
                let weights: Vec<f64> = prob_given_theta
                    .iter()
                    .zip(world.prior().iter())
                    .map(|(&l, &p)| l * p)
                    .collect();
                ProbVector::from_unnormalized(weights).ok()
            };
            profiles.push(PeerProfile {
                datasets,
                prob_given_theta,
                posterior,
            });

            // advance the mixed-radix index
            let mut k = idx.len();
            loop {
                if k == 0 {
                    return Ok(Self {
                        provider,
                        peer_indices,
                        profiles,
                    });
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < per_peer[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    /// Assembles a full report vector with `report` in the audited
    /// provider's slot and this profile's datasets in the peers' slots.
    pub fn full_reports(&self, profile: &PeerProfile, report: &Dataset) -> Vec<Dataset> {
        let n = self.peer_indices.len() + 1;
        let mut reports = vec![Dataset::empty(); n];
        reports[self.provider] = report.clone();
        for (k, &j) in self.peer_indices.iter().enumerate() {
            reports[j] = profile.datasets[k].clone();
        }
        reports
    }
}

/// Exact distribution over full dataset profiles.
///
/// Unconditioned, the probability of a profile `(D_1, ..., D_n)` is
/// `sum_theta p(theta) prod_j p(D_j | theta)`. Conditioned on `(i, D_i)`,
/// profiles keep `D_i` fixed in slot `i` and the probability is
/// `p(D_peers | D_i) = sum_theta p(theta | D_i) prod_{j != i} p(D_j | theta)`,
/// using conditional independence of the datasets given the parameter.
pub fn profile_distribution(
    world: &World,
    condition: Option<(usize, &Dataset)>,
) -> Result<Vec<(Vec<Dataset>, f64)>> {
    match condition {
        None => {
            checked_profile_count(
                world.providers().iter().map(|p| (p, p.n_points)),
                world.enumeration_cap(),
            )?;
            let per_provider: Vec<Vec<Dataset>> = world
                .providers()
                .iter()
                .map(|p| enumerate_datasets(p.likelihood.n_points(), p.n_points))
                .collect();
            let mut out = Vec::new();
            let mut idx = vec![0usize; world.n_providers()];
            loop {
                let datasets: Vec<Dataset> = idx
                    .iter()
                    .enumerate()
                    .map(|(j, &pos)| per_provider[j][pos].clone())
                    .collect();
                let mut prob = 0.0;
                for theta in 0..world.n_params() {
                    let mut p = world.prior()[theta];
                    for (j, dataset) in datasets.iter().enumerate() {
                        p *= dataset_likelihood(world, j, dataset, theta)?;
                    }
                    prob += p;
                }
                out.push((datasets, prob));

                let mut j = idx.len();
                loop {
                    if j == 0 {
                        return Ok(out);
                    }
                    j -= 1;
                    idx[j] += 1;
                    if idx[j] < per_provider[j].len() {
                        break;
                    }
                    idx[j] = 0;
                }
            }
        }
        Some((i, conditioning)) => {
            let post = dataset_posterior(world, i, conditioning)?;
            let ensemble = PeerEnsemble::new(world, i)?;
            Ok(ensemble
                .profiles
                .iter()
                .map(|profile| {
                    (
                        ensemble.full_reports(profile, conditioning),
                        profile.prob_given_posterior(&post),
                    )
                })
                .collect())
        }
    }
}
