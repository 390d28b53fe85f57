//! Conjugate exponential-family machinery.
//!
//! Priors and posteriors are carried in pseudo-count coordinates
//! `(nu, tau_bar)`: updating on `n` points with sufficient-statistic mean
//! `s_bar` moves `(nu, tau_bar)` to `(nu + n, (nu tau_bar + n s_bar) / (nu + n))`.
//! Each family supplies a normalizer `g(nu, tau_bar)`; ratios of normalizers
//! give the pointwise mutual information between two datasets in closed
//! form, replacing the finite-world enumeration:
//!
//! ```text
//! PMI = g(p_i) g(p_peers) / ( g(p_0) g(p_i + p_peers - p_0) )
//! ```
//!
//! where the composite parameter is `nu_i + nu_peers - nu_0` with the
//! matching affine combination of `tau_bar`s. The `h`-function
//! `g(p_i) / g(composite)` isolates the part of the PMI the provider can
//! influence; whether `h` can distinguish two candidate reports is exactly
//! whether the multi-day mechanism can punish swapping them.
//!
//! Two families are provided: [`GaussianKnownVariance`] and
//! [`BernoulliBeta`].

use alloc::vec;
use alloc::vec::Vec;
// resolves float math in no_std builds; shadowed by std's inherent
// methods whenever std is linked into the build graph
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Conjugate-prior coordinates: a positive pseudo-count and the mean
/// parameter (dimension is family-specific; both families here use one
/// component).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConjParams {
    pub nu: f64,
    pub tau: Vec<f64>,
}

impl ConjParams {
    pub fn new(nu: f64, tau: Vec<f64>) -> Self {
        Self { nu, tau }
    }

    pub fn scalar(nu: f64, tau: f64) -> Self {
        Self { nu, tau: vec![tau] }
    }
}

/// Posterior update shared by every conjugate family:
/// `(nu, tau) -> (nu + n, (nu tau + n s_bar) / (nu + n))`. With `n = 0` the
/// parameters are returned unchanged.
pub fn conjugate_update(params0: &ConjParams, suff_mean: &[f64], n: usize) -> Result<ConjParams> {
    if n == 0 {
        return Ok(params0.clone());
    }
    if suff_mean.len() != params0.tau.len() {
        return Err(Error::DimensionMismatch {
            expected: params0.tau.len(),
            found: suff_mean.len(),
        });
    }
    let n = n as f64;
    let nu = params0.nu + n;
    let tau = params0
        .tau
        .iter()
        .zip(suff_mean)
        .map(|(&t0, &s)| (params0.nu * t0 + n * s) / nu)
        .collect();
    Ok(ConjParams { nu, tau })
}

/// Composite parameter `p_i + p_peers - p_0` entering the PMI denominator.
pub fn composite_params(p_i: &ConjParams, p_peers: &ConjParams, p0: &ConjParams) -> Result<ConjParams> {
    let dim = p0.tau.len();
    if p_i.tau.len() != dim || p_peers.tau.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: p_i.tau.len().max(p_peers.tau.len()),
        });
    }
    let nu = p_i.nu + p_peers.nu - p0.nu;
    if !(nu > 0.0) {
        return Err(Error::IllegalCompositeParams(
            "composite pseudo-count must be positive",
        ));
    }
    let tau = (0..dim)
        .map(|k| (p_i.nu * p_i.tau[k] + p_peers.nu * p_peers.tau[k] - p0.nu * p0.tau[k]) / nu)
        .collect();
    Ok(ConjParams { nu, tau })
}

/// A conjugate exponential family over a scalar parameter.
pub trait ExpFamily {
    fn name(&self) -> &'static str;

    /// Validates that the parameters lie in the family's legal set.
    fn check_params(&self, params: &ConjParams) -> Result<()>;

    /// `ln g(nu, tau_bar)`, the log of the conjugate normalizer.
    fn log_normalizer(&self, params: &ConjParams) -> Result<f64>;

    /// Density of the parameter under `params`, used by quadrature oracles.
    fn pdf(&self, theta: f64, params: &ConjParams) -> Result<f64>;

    /// Interval of parameter values with positive density (possibly infinite).
    fn domain(&self) -> (f64, f64);

    fn normalizer(&self, params: &ConjParams) -> Result<f64> {
        Ok(self.log_normalizer(params)?.exp())
    }
}

/// Closed-form PMI between two datasets' posteriors under a shared prior:
/// `g(p_i) g(p_peers) / (g(p_0) g(composite))`.
pub fn pmi_expfam(
    family: &dyn ExpFamily,
    p_i: &ConjParams,
    p_peers: &ConjParams,
    p0: &ConjParams,
) -> Result<f64> {
    family.check_params(p_i)?;
    family.check_params(p_peers)?;
    family.check_params(p0)?;
    let composite = composite_params(p_i, p_peers, p0)?;
    family.check_params(&composite).map_err(|_| {
        Error::IllegalCompositeParams("composite parameters outside the family's legal set")
    })?;
    // grouped so that a no-evidence report (p_i = p_0, composite = p_peers)
    // cancels term by term and yields exactly 1
    let log_pmi = (family.log_normalizer(p_i)? - family.log_normalizer(p0)?)
        + (family.log_normalizer(p_peers)? - family.log_normalizer(&composite)?);
    Ok(log_pmi.exp())
}

/// The provider-facing factor of the PMI: `g(p_i) / g(composite)`.
///
/// Satisfies `pmi_expfam = h_value * g(p_peers) / g(p_0)` identically; the
/// peers' factor does not depend on the provider's report.
pub fn h_value(
    family: &dyn ExpFamily,
    p_i: &ConjParams,
    p_peers: &ConjParams,
    p0: &ConjParams,
) -> Result<f64> {
    family.check_params(p_i)?;
    family.check_params(p_peers)?;
    family.check_params(p0)?;
    let composite = composite_params(p_i, p_peers, p0)?;
    family.check_params(&composite).map_err(|_| {
        Error::IllegalCompositeParams("composite parameters outside the family's legal set")
    })?;
    Ok((family.log_normalizer(p_i)? - family.log_normalizer(&composite)?).exp())
}

/// Estimating the mean of a normal distribution with known variance
/// `sigma2`, under a normal prior `N(mu0, sigma0_2)`.
///
/// In pseudo-count coordinates the prior is `nu_0 = sigma2 / sigma0_2`,
/// `tau_bar_0 = mu0`; a posterior `(nu, tau_bar)` denotes
/// `N(tau_bar, sigma2 / nu)`. The normalizer is the precision factor
/// `sqrt(nu / (2 pi sigma2))` and carries no dependence on `tau_bar`, so
/// every normalizer ratio — PMI and `h` alike — is invariant under reports
/// that change only the posterior mean. Dataset size is the only thing `h`
/// can see.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaussianKnownVariance {
    pub sigma2: f64,
    pub mu0: f64,
    pub sigma0_2: f64,
}

impl GaussianKnownVariance {
    pub fn new(sigma2: f64, mu0: f64, sigma0_2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !(sigma0_2 > 0.0) {
            return Err(Error::Invalid("variances must be positive"));
        }
        Ok(Self { sigma2, mu0, sigma0_2 })
    }

    pub fn prior_params(&self) -> ConjParams {
        ConjParams::scalar(self.sigma2 / self.sigma0_2, self.mu0)
    }

    /// Posterior after `n` points with sample mean `sample_mean`.
    pub fn posterior_params(&self, n: usize, sample_mean: f64) -> ConjParams {
        conjugate_update(&self.prior_params(), &[sample_mean], n)
            .expect("scalar sufficient statistic")
    }

    pub fn mean(&self, params: &ConjParams) -> f64 {
        params.tau[0]
    }

    pub fn variance(&self, params: &ConjParams) -> f64 {
        self.sigma2 / params.nu
    }
}

impl ExpFamily for GaussianKnownVariance {
    fn name(&self) -> &'static str {
        "gaussian_known_var"
    }

    fn check_params(&self, params: &ConjParams) -> Result<()> {
        if params.tau.len() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: params.tau.len(),
            });
        }
        if !(params.nu > 0.0) || !params.nu.is_finite() || !params.tau[0].is_finite() {
            return Err(Error::IllegalCompositeParams(
                "gaussian parameters require a positive finite pseudo-count",
            ));
        }
        Ok(())
    }

    fn log_normalizer(&self, params: &ConjParams) -> Result<f64> {
        self.check_params(params)?;
        Ok(0.5 * (params.nu / (2.0 * core::f64::consts::PI * self.sigma2)).ln())
    }

    fn pdf(&self, theta: f64, params: &ConjParams) -> Result<f64> {
        self.check_params(params)?;
        let var = self.variance(params);
        let z = theta - self.mean(params);
        Ok((-z * z / (2.0 * var)).exp() / (2.0 * core::f64::consts::PI * var).sqrt())
    }

    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

/// PMI bracket for [`GaussianKnownVariance`] when the total number of points
/// across a dataset pair is at most `n_max`:
/// `[(1 + n_max sigma0^2 / sigma^2)^(-1/2), 1 + n_max sigma0^2 / sigma^2]`.
///
/// Takes standard deviations, not variances. Returns `(lower, upper)` with
/// `lower <= 1 <= upper`; the interval widens monotonically with `n_max`.
pub fn gaussian_pmi_bounds(sigma: f64, sigma0: f64, n_max: usize) -> Result<(f64, f64)> {
    if !(sigma > 0.0) || !(sigma0 > 0.0) {
        return Err(Error::Invalid("standard deviations must be positive"));
    }
    if n_max == 0 {
        return Err(Error::Invalid("n_max must be at least 1"));
    }
    let growth = 1.0 + (n_max as f64) * (sigma0 * sigma0) / (sigma * sigma);
    Ok((1.0 / growth.sqrt(), growth))
}

/// Estimating the success probability of a Bernoulli distribution under a
/// `Beta(alpha0, beta0)` prior.
///
/// A posterior `(nu, tau_bar)` denotes `Beta(nu tau_bar, nu (1 - tau_bar))`;
/// observing `a` ones and `b` zeros moves `Beta(alpha, beta)` to
/// `Beta(alpha + a, beta + b)`. The normalizer is the reciprocal Beta
/// function, computed through the log-gamma function so non-integer
/// pseudo-counts work; integer inputs reproduce the factorial form exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BernoulliBeta {
    pub alpha0: f64,
    pub beta0: f64,
}

impl BernoulliBeta {
    pub fn new(alpha0: f64, beta0: f64) -> Result<Self> {
        if !(alpha0 > 0.0) || !(beta0 > 0.0) {
            return Err(Error::Invalid("beta shape parameters must be positive"));
        }
        Ok(Self { alpha0, beta0 })
    }

    pub fn prior_params(&self) -> ConjParams {
        Self::params_from_shapes(self.alpha0, self.beta0)
    }

    /// Parameters of `Beta(alpha, beta)` in pseudo-count coordinates.
    pub fn params_from_shapes(alpha: f64, beta: f64) -> ConjParams {
        ConjParams::scalar(alpha + beta, alpha / (alpha + beta))
    }

    /// Posterior after observing `ones` ones and `zeros` zeros.
    pub fn posterior_params(&self, ones: usize, zeros: usize) -> ConjParams {
        Self::params_from_shapes(self.alpha0 + ones as f64, self.beta0 + zeros as f64)
    }

    pub fn alpha(params: &ConjParams) -> f64 {
        params.nu * params.tau[0]
    }

    pub fn beta(params: &ConjParams) -> f64 {
        params.nu * (1.0 - params.tau[0])
    }
}

/// `ln B(a, b)` via log-gamma.
pub fn ln_beta_fn(a: f64, b: f64) -> f64 {
    libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)
}

impl ExpFamily for BernoulliBeta {
    fn name(&self) -> &'static str {
        "bernoulli_beta"
    }

    fn check_params(&self, params: &ConjParams) -> Result<()> {
        if params.tau.len() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: params.tau.len(),
            });
        }
        let alpha = Self::alpha(params);
        let beta = Self::beta(params);
        if !(alpha > 0.0) || !(beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::IllegalCompositeParams(
                "beta shape parameters must be positive and finite",
            ));
        }
        Ok(())
    }

    fn log_normalizer(&self, params: &ConjParams) -> Result<f64> {
        self.check_params(params)?;
        Ok(-ln_beta_fn(Self::alpha(params), Self::beta(params)))
    }

    fn pdf(&self, theta: f64, params: &ConjParams) -> Result<f64> {
        self.check_params(params)?;
        if !(0.0..=1.0).contains(&theta) {
            return Ok(0.0);
        }
        let alpha = Self::alpha(params);
        let beta = Self::beta(params);
        if theta == 0.0 || theta == 1.0 {
            // density boundary values for shapes > 1; callers integrate on
            // the open interval
            return Ok(if (theta == 0.0 && alpha > 1.0) || (theta == 1.0 && beta > 1.0) {
                0.0
            } else if (theta == 0.0 && alpha == 1.0) || (theta == 1.0 && beta == 1.0) {
                (-ln_beta_fn(alpha, beta)).exp()
            } else {
                f64::INFINITY
            });
        }
        let log_pdf =
            (alpha - 1.0) * theta.ln() + (beta - 1.0) * (1.0 - theta).ln() - ln_beta_fn(alpha, beta);
        Ok(log_pdf.exp())
    }

    fn domain(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
}
