use thiserror::Error;

/// Errors shared across the world model, the mechanisms, and the audits.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Two vectors or matrices that must agree in dimension do not.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A world, distribution, or dataset failed construction-time validation.
    #[error("invalid input: {0}")]
    Invalid(&'static str),

    /// Evidence with probability zero under every parameter; no posterior exists.
    #[error("evidence has zero probability under every parameter")]
    ZeroEvidence,

    /// The dataset-profile space exceeds the configured enumeration cap.
    #[error("enumeration of {required} profiles exceeds cap {cap}")]
    EnumerationTooLarge { required: u128, cap: u128 },

    /// Computed payment bounds collapsed (lower >= upper).
    #[error("degenerate payment bounds: lower {lower} >= upper {upper}")]
    DegenerateBounds { lower: f64, upper: f64 },

    /// log-PMI requested for a report outside the support set (PMI = 0).
    #[error("report out of support: PMI is zero")]
    OutOfSupport,

    /// Conjugate-family parameters (or their composite) fall outside the legal set.
    #[error("illegal conjugate parameters: {0}")]
    IllegalCompositeParams(&'static str),

    /// An in-support score landed outside the precomputed bracket. This
    /// indicates a bug in the bounds computation and is never silently
    /// clipped.
    #[error("score {score} for provider {provider} outside bracket [{lower}, {upper}]")]
    InternalBracketViolation {
        provider: usize,
        score: f64,
        lower: f64,
        upper: f64,
    },

    /// A score-normalization range collapsed (lower >= upper).
    #[error("degenerate score range: lower {lower} >= upper {upper}")]
    DegenerateRange { lower: f64, upper: f64 },

    /// Kruskal-rank subset scan refused: too many columns to enumerate.
    #[error("kruskal rank limited to {max} columns, found {found}")]
    TooManyColumns { found: usize, max: usize },

    /// A peer profile has positive probability under the true dataset but
    /// zero probability under the reported one; the log-score gap diverges.
    #[error("support violation: reported dataset assigns zero mass to a realizable peer profile")]
    SupportViolation,

    /// A strategy produced a report the provider cannot legally submit.
    #[error("invalid strategy: {0}")]
    InvalidStrategy(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
