//! Payment mechanisms for buying datasets from strategic providers when no
//! test data exists to grade them against.
//!
//! The engine models a finite Bayesian world: an unknown parameter with a
//! commonly accepted prior, and providers whose data points are drawn i.i.d.
//! conditioned on that parameter. Payments reward the pointwise mutual
//! information (PMI) between a provider's reported dataset and the peers'
//! reports, so that truthful reporting is an equilibrium without the analyst
//! ever seeing ground truth.
//!
//! Three payment rules are implemented:
//!
//! - a one-shot log-PMI rule normalized into the budget ([`mechanisms::one_time_payments`]),
//! - a Brier-score rule usable when the full data-generating model is known
//!   ([`mechanisms::brier_payments`]),
//! - a multi-day rule built from a convex pair `(f', f*)` that pays each day's
//!   data one day later ([`mechanisms::run_mechanism_schedule`]).
//!
//! Alongside the mechanisms sit exact audits: [`sim`] enumerates every
//! misreport a provider could make and compares exact expected payments,
//! while [`sensitivity`] certifies structural conditions (matrix rank,
//! Kruskal rank, singular-value bounds) under which misreports that shift
//! the posterior are strictly punished. [`expfam`] carries the closed-form
//! PMI for conjugate exponential families (Gaussian with known variance,
//! Bernoulli/Beta), where the finite enumeration is replaced by normalizer
//! ratios.
//!
//! The crate is `no_std` (with `alloc`); all audit paths are exact
//! fixed-order summations, never Monte Carlo.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bayes;
pub mod expfam;
mod linalg;
pub mod mechanisms;
pub mod pmi;
pub mod sensitivity;
pub mod sim;

mod error;

pub use error::{Error, Result};
pub use linalg::Matrix;

pub use bayes::{Dataset, LikelihoodMatrix, ProbVector, Provider, World};
pub use expfam::{BernoulliBeta, ConjParams, ExpFamily, GaussianKnownVariance};
pub use mechanisms::{ConvexPair, PaymentVector};
pub use pmi::PmiBounds;
pub use sensitivity::AuditReport;
pub use sim::{GapReport, Strategy};
