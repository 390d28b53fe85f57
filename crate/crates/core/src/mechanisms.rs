//! The payment rules.
//!
//! All three rules reward agreement between a provider's report and the
//! peers' reports, measured through posteriors over the parameter:
//!
//! - [`one_time_payments`]: log-PMI scores normalized into the budget using
//!   a precomputed bracket; out-of-support reports earn nothing.
//! - [`brier_payments`]: quadratic score of the predictive distribution the
//!   report induces over the peers' dataset profiles. Requires enumerating
//!   that profile space, i.e. knowledge of the full data-generating model.
//! - [`run_mechanism_schedule`]: the multi-day rule. Day `t`'s data is paid
//!   on day `t+1` from a convex pair `(f', f*)`: the score rewards agreement
//!   with the peers' *next* ensemble and penalizes agreement with the same
//!   day's, which keeps payments bounded for any data distribution.
//!
//! Scores are never clipped. The one-time rule verifies its bracket and
//! fails loudly on violation; the multi-day rule is bounded by construction
//! of the convex pair.

use alloc::vec;
use alloc::vec::Vec;
// resolves float math in no_std builds; shadowed by std's inherent
// methods whenever std is linked into the build graph
#[allow(unused_imports)]
use num_traits::Float;

use crate::bayes::{dataset_posterior, joint_posterior, Dataset, PeerEnsemble, ProbVector, World};
use crate::error::{Error, Result};
use crate::pmi::{in_support, pmi_finite, PmiBounds};

/// A differentiable convex function together with the pieces of its
/// Fenchel conjugate the multi-day score needs.
///
/// `fprime_range` is the closure of the derivative's range on `x >= 0` and
/// `fstar_range` the conjugate's range on it; the score range used for
/// payment normalization is derived from the two. The registered `f` is
/// convex but not normalized to `f(1) = 0`; the score uses only `f'` and
/// `f*`, and shifting `f` by a constant shifts `f*` identically without
/// moving any argmax, so the normalization constant is immaterial here.
#[derive(Clone)]
pub struct ConvexPair {
    pub name: &'static str,
    pub f: fn(f64) -> f64,
    pub fprime: fn(f64) -> f64,
    pub fstar: fn(f64) -> f64,
    /// Range of `f'` on nonnegative arguments.
    pub fprime_range: (f64, f64),
    /// Range of `f*` on `fprime_range`.
    pub fstar_range: (f64, f64),
}

impl core::fmt::Debug for ConvexPair {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ConvexPair").field("name", &self.name).finish()
    }
}

impl ConvexPair {
    /// Analytic range `[L, R]` of the day score
    /// `f'(1/PMI_next) - f*(f'(1/PMI_same))`.
    pub fn score_range(&self) -> (f64, f64) {
        (
            self.fprime_range.0 - self.fstar_range.1,
            self.fprime_range.1 - self.fstar_range.0,
        )
    }

    /// Day score for one provider. A vanishing PMI on either side falls
    /// back to the range minimum, which normalizes to a zero payment — the
    /// same outcome the one-time rule gives out-of-support reports.
    pub fn day_score(&self, pmi_vs_next: f64, pmi_vs_same: f64) -> f64 {
        if !(pmi_vs_next > 0.0) || !(pmi_vs_same > 0.0) {
            return self.score_range().0;
        }
        (self.fprime)(1.0 / pmi_vs_next) - (self.fstar)((self.fprime)(1.0 / pmi_vs_same))
    }
}

fn ln_1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn xlogx(t: f64) -> f64 {
    if t > 0.0 {
        t * t.ln()
    } else {
        0.0
    }
}

fn logistic_f(x: f64) -> f64 {
    ln_1p_exp(x)
}

fn logistic_fprime(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logistic_fstar(y: f64) -> f64 {
    if !(0.0..=1.0).contains(&y) {
        return f64::INFINITY;
    }
    xlogx(y) + xlogx(1.0 - y)
}

/// The softplus pair: `f(x) = ln(1 + e^x)`, `f'(x) = 1/(1 + e^-x)` with
/// range `[1/2, 1)` on `x >= 0`, and `f*(y) = y ln y + (1-y) ln(1-y)` with
/// range `[-ln 2, 0]` there. Day scores land in `[1/2, 1 + ln 2]`.
pub fn logistic_pair() -> ConvexPair {
    ConvexPair {
        name: "logistic",
        f: logistic_f,
        fprime: logistic_fprime,
        fstar: logistic_fstar,
        fprime_range: (0.5, 1.0),
        fstar_range: (-core::f64::consts::LN_2, 0.0),
    }
}

/// Looks up a registered convex pair by name.
pub fn convex_pair_by_name(name: &str) -> Option<ConvexPair> {
    match name {
        "logistic" => Some(logistic_pair()),
        _ => None,
    }
}

/// Payments for one settlement, with the raw scores and the normalization
/// interval that produced them. Individual rationality (every payment
/// nonnegative) and budget feasibility (total at most the budget) are
/// checked at construction.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PaymentVector {
    pub payments: Vec<f64>,
    /// Raw scores; `None` for reports that were not scored (out of support).
    pub scores: Vec<Option<f64>>,
    pub in_support: Vec<bool>,
    /// Interval used to normalize scores into payments.
    pub bounds_used: PmiBounds,
}

impl PaymentVector {
    fn validated(
        mut payments: Vec<f64>,
        scores: Vec<Option<f64>>,
        in_support: Vec<bool>,
        bounds_used: PmiBounds,
        budget: f64,
    ) -> Result<Self> {
        enforce_budget(&mut payments, budget);
        if payments.iter().any(|&r| !(r >= 0.0)) {
            return Err(Error::Invalid("negative payment"));
        }
        let total: f64 = payments.iter().sum();
        if total > budget {
            return Err(Error::Invalid("payments exceed budget"));
        }
        Ok(Self {
            payments,
            scores,
            in_support,
            bounds_used,
        })
    }

    pub fn total(&self) -> f64 {
        self.payments.iter().sum()
    }
}

/// The per-payment formula keeps each payment at most `budget / n`, but a
/// rounded-up sum of `n` such terms can still land a few ulps above the
/// budget. Scaling every payment by the same factor preserves symmetry and
/// pulls the total back under; the distortion is at the last-bit level.
fn enforce_budget(payments: &mut [f64], budget: f64) {
    for _ in 0..8 {
        let total: f64 = payments.iter().sum();
        if total <= budget {
            return;
        }
        let scale = budget / total;
        for p in payments.iter_mut() {
            *p *= scale;
        }
    }
}

/// Per-provider normalized payment `(budget / n) * (score - L) / (R - L)`.
pub(crate) fn normalize_score(score: f64, bounds: &PmiBounds, share: f64) -> f64 {
    // floor at zero: nonnegativity is part of the payment contract, and a
    // score equal to the lower endpoint may round a hair below it
    (share * ((score - bounds.lower) / bounds.width())).max(0.0)
}

fn validate_reports(world: &World, reports: &[Dataset]) -> Result<()> {
    if reports.len() != world.n_providers() {
        return Err(Error::DimensionMismatch {
            expected: world.n_providers(),
            found: reports.len(),
        });
    }
    for (i, report) in reports.iter().enumerate() {
        if report.len() > world.max_report_len(i) {
            return Err(Error::Invalid(
                "report longer than the provider's priceable cap",
            ));
        }
        report.counts(world.providers()[i].likelihood.n_points())?;
    }
    Ok(())
}

/// Posterior each report induces; `None` when the report is impossible
/// under every parameter (it then scores as out-of-support everywhere).
fn report_posteriors(world: &World, reports: &[Dataset]) -> Result<Vec<Option<ProbVector>>> {
    reports
        .iter()
        .enumerate()
        .map(|(j, report)| match dataset_posterior(world, j, report) {
            Ok(post) => Ok(Some(post)),
            Err(Error::ZeroEvidence) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

fn peers_joint_posterior(
    world: &World,
    posts: &[Option<ProbVector>],
    exclude: usize,
) -> Option<ProbVector> {
    let mut peers: Vec<&ProbVector> = Vec::with_capacity(posts.len() - 1);
    for (j, post) in posts.iter().enumerate() {
        if j == exclude {
            continue;
        }
        peers.push(post.as_ref()?);
    }
    joint_posterior(world.prior(), &peers).ok()
}

/// One-shot settlement: score each in-support report by the log of its PMI
/// against the peers' joint report and map `[L, R]` linearly onto
/// `[0, budget / n]`. Reports out of support — including reports whose own
/// evidence is contradictory, and providers whose peers jointly report
/// impossible evidence — are paid zero.
///
/// `bounds` must come from [`crate::pmi::bounds_finite`] on the same world;
/// an in-support score outside the bracket signals a bounds bug and returns
/// [`Error::InternalBracketViolation`] rather than clipping.
pub fn one_time_payments(
    world: &World,
    reports: &[Dataset],
    bounds: &PmiBounds,
) -> Result<PaymentVector> {
    validate_reports(world, reports)?;
    let posts = report_posteriors(world, reports)?;
    let n = world.n_providers();
    let share = world.budget() / n as f64;

    let mut payments = vec![0.0; n];
    let mut scores = vec![None; n];
    let mut supported = vec![false; n];
    for i in 0..n {
        let Some(post_i) = posts[i].as_ref() else { continue };
        let Some(post_peers) = peers_joint_posterior(world, &posts, i) else { continue };
        if !in_support(post_i, &post_peers, world.prior())? {
            continue;
        }
        let pmi = pmi_finite(post_i, &post_peers, world.prior())?;
        if pmi <= 0.0 {
            continue;
        }
        let score = pmi.ln();
        if !bounds.contains(score) {
            return Err(Error::InternalBracketViolation {
                provider: i,
                score,
                lower: bounds.lower,
                upper: bounds.upper,
            });
        }
        supported[i] = true;
        scores[i] = Some(score);
        payments[i] = normalize_score(score, bounds, share);
    }
    PaymentVector::validated(payments, scores, supported, *bounds, world.budget())
}

/// Quadratic-score settlement. Requires the full generating model: the
/// score of provider `i` is one minus the mean squared error of the
/// predictive distribution `p(D_peers | reported D_i)` against the peers'
/// actual joint report, averaged over the whole peer-profile space:
///
/// ```text
/// s_i = 1 - (1/K) sum_k (q_k - [k = reported profile])^2,   r_i = budget * s_i / n
/// ```
///
/// where `K` counts the possible peer profiles. Scores always land in
/// `[0, 1]`, so the rule is individually rational and budget feasible with
/// no bracket at all.
pub fn brier_payments(world: &World, reports: &[Dataset]) -> Result<PaymentVector> {
    validate_reports(world, reports)?;
    let posts = report_posteriors(world, reports)?;
    let n = world.n_providers();
    let share = world.budget() / n as f64;

    let mut payments = vec![0.0; n];
    let mut scores = vec![None; n];
    for i in 0..n {
        let ensemble = PeerEnsemble::new(world, i)?;
        let k = ensemble.profiles.len() as f64;
        let reported_peers: Vec<&Dataset> = ensemble
            .peer_indices
            .iter()
            .map(|&j| &reports[j])
            .collect();
        let mut sum_sq = 0.0;
        for profile in &ensemble.profiles {
            let q = match posts[i].as_ref() {
                Some(post) => profile.prob_given_posterior(post),
                // contradictory own report: predictive mass collapses to zero
                None => 0.0,
            };
            let indicator = if profile
                .datasets
                .iter()
                .zip(&reported_peers)
                .all(|(a, &b)| a == b)
            {
                1.0
            } else {
                0.0
            };
            let diff = q - indicator;
            sum_sq += diff * diff;
        }
        let s = 1.0 - sum_sq / k;
        scores[i] = Some(s);
        payments[i] = (share * s).max(0.0);
    }
    let supported = vec![true; n];
    let unit = PmiBounds::new(0.0, 1.0)?;
    PaymentVector::validated(payments, scores, supported, unit, world.budget())
}

/// Day scores for the multi-day rule: provider `i`'s day-`t` report is
/// scored against the peers' day-`t+1` reports (reward) and the peers'
/// day-`t` reports (penalty):
///
/// ```text
/// s_i = f'( 1 / PMI(D_i_prev, D_peers_next) ) - f*( f'( 1 / PMI(D_i_prev, D_peers_prev) ) )
/// ```
///
/// Either PMI vanishing triggers the fallback to the score floor.
pub fn multi_time_scores(
    world: &World,
    reports_prev: &[Dataset],
    reports_curr: &[Dataset],
    pair: &ConvexPair,
) -> Result<Vec<f64>> {
    validate_reports(world, reports_prev)?;
    validate_reports(world, reports_curr)?;
    let posts_prev = report_posteriors(world, reports_prev)?;
    let posts_curr = report_posteriors(world, reports_curr)?;
    let n = world.n_providers();

    let mut scores = Vec::with_capacity(n);
    for i in 0..n {
        let pmi_pair = (|| -> Result<Option<(f64, f64)>> {
            let Some(post_i) = posts_prev[i].as_ref() else { return Ok(None) };
            let Some(peers_next) = peers_joint_posterior(world, &posts_curr, i) else {
                return Ok(None);
            };
            let Some(peers_same) = peers_joint_posterior(world, &posts_prev, i) else {
                return Ok(None);
            };
            let vs_next = if in_support(post_i, &peers_next, world.prior())? {
                pmi_finite(post_i, &peers_next, world.prior())?
            } else {
                0.0
            };
            let vs_same = if in_support(post_i, &peers_same, world.prior())? {
                pmi_finite(post_i, &peers_same, world.prior())?
            } else {
                0.0
            };
            Ok(Some((vs_next, vs_same)))
        })()?;
        let score = match pmi_pair {
            Some((vs_next, vs_same)) => pair.day_score(vs_next, vs_same),
            None => pair.score_range().0,
        };
        scores.push(score);
    }
    Ok(scores)
}

/// Maps day scores onto payments through the pair's analytic score range.
/// The range comes from the pair, never from the realized scores: an
/// empirical range would couple one provider's payment to the others'
/// scores and break the equilibrium argument.
pub fn multi_time_payments(
    scores: &[f64],
    budget: f64,
    score_range: (f64, f64),
) -> Result<PaymentVector> {
    let (lower, upper) = score_range;
    if !(lower < upper) {
        return Err(Error::DegenerateRange { lower, upper });
    }
    let bounds = PmiBounds::new(lower, upper)?;
    let n = scores.len();
    let share = budget / n as f64;
    let payments: Vec<f64> = scores
        .iter()
        .map(|&s| normalize_score(s, &bounds, share))
        .collect();
    let wrapped = scores.iter().map(|&s| Some(s)).collect();
    PaymentVector::validated(payments, wrapped, vec![true; n], bounds, budget)
}

/// Rule for paying the final day, which has no following ensemble to score
/// against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LastDayRule {
    /// Settle the last day with the one-time log-PMI rule.
    Mechanism1,
    /// Split the last day's budget equally.
    EqualSplit,
}

impl Default for LastDayRule {
    fn default() -> Self {
        // avoids requiring finite PMI bounds on the final day
        LastDayRule::EqualSplit
    }
}

/// Runs the full multi-day schedule over per-day report lists. Entry `t` of
/// the ledger pays day `t`'s data: days before the last are settled from
/// the next day's reports, the last day by `last_day_rule`.
pub fn run_mechanism_schedule(
    world: &World,
    reports_by_day: &[Vec<Dataset>],
    pair: &ConvexPair,
    last_day_rule: LastDayRule,
    budgets: &[f64],
) -> Result<Vec<PaymentVector>> {
    let days = reports_by_day.len();
    if days == 0 {
        return Err(Error::Invalid("schedule needs at least one day"));
    }
    if budgets.len() != days {
        return Err(Error::DimensionMismatch {
            expected: days,
            found: budgets.len(),
        });
    }
    let mut ledger = Vec::with_capacity(days);
    for t in 0..days - 1 {
        let scores = multi_time_scores(world, &reports_by_day[t], &reports_by_day[t + 1], pair)?;
        ledger.push(multi_time_payments(&scores, budgets[t], pair.score_range())?);
    }
    let last_budget = budgets[days - 1];
    let last = match last_day_rule {
        LastDayRule::Mechanism1 => {
            let scaled = world.clone().with_budget(last_budget);
            let bounds = crate::pmi::bounds_finite(&scaled)?;
            one_time_payments(&scaled, &reports_by_day[days - 1], &bounds)?
        }
        LastDayRule::EqualSplit => {
            validate_reports(world, &reports_by_day[days - 1])?;
            let n = world.n_providers();
            let payments = vec![last_budget / n as f64; n];
            let range = pair.score_range();
            PaymentVector::validated(
                payments,
                vec![None; n],
                vec![true; n],
                PmiBounds::new(range.0, range.1)?,
                last_budget,
            )?
        }
    };
    ledger.push(last);
    Ok(ledger)
}
