//! The density zoo: exponential power (EP), generalized inverse Gaussian
//! (GIG), their scale mixture, and the named sub-families (generalized t,
//! exponential power-gamma, Jeffreys), with moments, conjugate posteriors,
//! a sampler, and a quadrature oracle certifying every mixture identity.
//!
//! Densities (location 0 unless stated):
//!
//! ```text
//! EP(b|u, eta, q)          = (q/2) (2 eta)^{-1/q} / Gamma(1/q) exp(-|b-u|^q / (2 eta))
//! GIG(eta|gamma, beta, alpha) = (alpha/beta)^{gamma/2} / (2 K_gamma(sqrt(alpha beta)))
//!                              eta^{gamma-1} exp(-(alpha eta + beta/eta)/2)
//! ```
//!
//! The mixture `p(b) = int EP(b|0,eta,q) GIG(eta|gamma,beta,alpha) deta`
//! has the explicit form (with `nu = (gamma q - 1)/q`)
//!
//! ```text
//! p(b) = K_nu(sqrt(alpha (beta+|b|^q))) / (2^{(q+1)/q} Gamma((q+1)/q) K_gamma(sqrt(alpha beta)))
//!        * alpha^{1/(2q)} / beta^{gamma/2} * (beta+|b|^q)^{nu/2}
//! ```
//!
//! and the conditional `eta | b` is again GIG, with order `nu`, which is the
//! conjugacy that drives every E-step downstream.

mod limits;
mod oracle;
mod sampler;

pub use limits::{limit_check, LimitFamily};
pub use oracle::{mixture_density_oracle, mixture_log_density_oracle, normalization_quadrature};
pub use sampler::{gig_sample, GigSampler};

use crate::error::{Error, Result};
use crate::specfun::{log_bessel_k, log_gamma};

const LN_2: f64 = std::f64::consts::LN_2;

/// Parameters of an exponential power distribution.
///
/// `q = 2` is Gaussian, `q = 1` Laplace, `q < 1` a bridge distribution;
/// any `q > 0` is accepted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpParams {
    u: f64,
    eta: f64,
    q: f64,
}

impl EpParams {
    pub fn new(u: f64, eta: f64, q: f64) -> Result<Self> {
        if !u.is_finite() {
            return Err(Error::Domain(format!("EP location must be finite, got {u}")));
        }
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::Domain(format!("EP scale must be positive, got {eta}")));
        }
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::Domain(format!("EP exponent must be positive, got {q}")));
        }
        Ok(Self { u, eta, q })
    }

    pub fn u(&self) -> f64 {
        self.u
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn q(&self) -> f64 {
        self.q
    }
}

/// `ln EP(b | u, eta, q)`.
pub fn ep_log_density(b: f64, p: &EpParams) -> f64 {
    let q = p.q;
    (q / 2.0).ln() - (2.0 * p.eta).ln() / q - log_gamma(1.0 / q).expect("1/q > 0")
        - (b - p.u).abs().powf(q) / (2.0 * p.eta)
}

/// Parameters of a generalized inverse Gaussian distribution, including the
/// two degenerate edges: `beta = 0` is the gamma limit `G(gamma, alpha/2)`
/// (requires `gamma > 0`) and `alpha = 0` the inverse-gamma limit
/// `IG(-gamma, beta/2)` (requires `gamma < 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigParams {
    gamma: f64,
    beta: f64,
    alpha: f64,
}

impl GigParams {
    pub fn new(gamma: f64, beta: f64, alpha: f64) -> Result<Self> {
        if !gamma.is_finite() || !beta.is_finite() || !alpha.is_finite() {
            return Err(Error::Domain("GIG parameters must be finite".into()));
        }
        if beta < 0.0 || alpha < 0.0 {
            return Err(Error::Domain(format!(
                "GIG requires alpha, beta >= 0, got alpha={alpha}, beta={beta}"
            )));
        }
        if alpha == 0.0 && beta == 0.0 {
            return Err(Error::Domain("GIG requires alpha > 0 or beta > 0".into()));
        }
        if beta == 0.0 && gamma <= 0.0 {
            return Err(Error::Domain(format!(
                "GIG with beta = 0 is a gamma limit and needs gamma > 0, got gamma={gamma}"
            )));
        }
        if alpha == 0.0 && gamma >= 0.0 {
            return Err(Error::Domain(format!(
                "GIG with alpha = 0 is an inverse-gamma limit and needs gamma < 0, got gamma={gamma}"
            )));
        }
        Ok(Self { gamma, beta, alpha })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Gamma limit `G(gamma, alpha/2)`?
    pub fn is_gamma_limit(&self) -> bool {
        self.beta == 0.0
    }

    /// Inverse-gamma limit `IG(-gamma, beta/2)`?
    pub fn is_inverse_gamma_limit(&self) -> bool {
        self.alpha == 0.0
    }

    /// `psi = sqrt(alpha beta)`.
    pub fn psi(&self) -> f64 {
        (self.alpha * self.beta).sqrt()
    }

    /// `phi = sqrt(alpha/beta)` (only defined for `beta > 0`).
    pub fn phi(&self) -> Option<f64> {
        (self.beta > 0.0).then(|| (self.alpha / self.beta).sqrt())
    }
}

/// `ln GIG(eta | gamma, beta, alpha)`, with the degenerate edges routed to
/// the gamma / inverse-gamma closed forms and `gamma = +-1/2` to the
/// inverse-Gaussian-style closed forms.
pub fn gig_log_density(eta: f64, g: &GigParams) -> Result<f64> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::Domain(format!("GIG density requires eta > 0, got {eta}")));
    }
    let (gamma, beta, alpha) = (g.gamma, g.beta, g.alpha);
    if g.is_gamma_limit() {
        let theta = alpha / 2.0;
        return Ok(gamma * theta.ln() - log_gamma(gamma)? + (gamma - 1.0) * eta.ln()
            - theta * eta);
    }
    if g.is_inverse_gamma_limit() {
        let tau = -gamma;
        let theta = beta / 2.0;
        return Ok(tau * theta.ln() - log_gamma(tau)? - (1.0 + tau) * eta.ln() - theta / eta);
    }
    let expo = -(alpha * eta + beta / eta) / 2.0;
    if gamma == -0.5 {
        // inverse Gaussian closed form
        return Ok(0.5 * (beta / (2.0 * std::f64::consts::PI)).ln() + g.psi() - 1.5 * eta.ln()
            + expo);
    }
    if gamma == 0.5 {
        return Ok(0.5 * (alpha / (2.0 * std::f64::consts::PI)).ln() + g.psi() - 0.5 * eta.ln()
            + expo);
    }
    Ok(0.5 * gamma * (alpha / beta).ln() - LN_2 - log_bessel_k(gamma, g.psi())?
        + (gamma - 1.0) * eta.ln()
        + expo)
}

/// `E(eta^nu)` for a strict GIG (`alpha > 0` and `beta > 0`):
/// `(beta/alpha)^{nu/2} K_{gamma+nu}(psi) / K_gamma(psi)`.
///
/// `gamma` in `{1/2, -1/2, 3/2, -3/2}` with `nu = +-1` is routed to the
/// half-integer closed forms.
pub fn gig_moment(g: &GigParams, nu: f64) -> Result<f64> {
    if g.is_gamma_limit() || g.is_inverse_gamma_limit() {
        return Err(Error::UnsupportedMoment(
            "gig_moment requires a strict GIG (alpha > 0 and beta > 0)".into(),
        ));
    }
    let (gamma, beta, alpha) = (g.gamma, g.beta, g.alpha);
    let psi = g.psi();
    if nu == 1.0 || nu == -1.0 {
        // +-first moments of the four half-integer orders
        let m = match (gamma, nu) {
            (g_, 1.0) if g_ == 0.5 => Some((1.0 + psi) / alpha),
            (g_, -1.0) if g_ == 0.5 => Some((alpha / beta).sqrt()),
            (g_, 1.0) if g_ == -0.5 => Some((beta / alpha).sqrt()),
            (g_, -1.0) if g_ == -0.5 => Some((1.0 + psi) / beta),
            (g_, 1.0) if g_ == 1.5 => Some(3.0 / alpha + beta / (1.0 + psi)),
            (g_, -1.0) if g_ == 1.5 => Some(alpha / (1.0 + psi)),
            (g_, 1.0) if g_ == -1.5 => Some(beta / (1.0 + psi)),
            (g_, -1.0) if g_ == -1.5 => Some(3.0 / beta + alpha / (1.0 + psi)),
            _ => None,
        };
        if let Some(v) = m {
            return Ok(v);
        }
    }
    Ok((0.5 * nu * (beta / alpha).ln() + log_bessel_k(gamma + nu, psi)?
        - log_bessel_k(gamma, psi)?)
        .exp())
}

/// A member of the EP-GIG prior family, identified by its mixing density.
///
/// The generalized-t variant keeps the `(tau, lambda)` parameterization in
/// which study configurations are written; it corresponds to inverse-gamma
/// mixing `IG(tau/2, tau/(2 lambda))`, i.e. `GIG(-tau/2, tau/lambda, 0)`.
/// The Jeffreys variant mixes over the improper density `1/eta` and yields
/// the improper marginal `p(b) = (q/2)|b|^{-1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorSpec {
    /// Strict GIG mixing: `alpha > 0`, `beta > 0`.
    Generic { alpha: f64, beta: f64, gamma: f64, q: f64 },
    /// Gamma mixing `G(gamma, alpha/2)` (the `beta = 0` edge).
    GammaMixing { alpha: f64, gamma: f64, q: f64 },
    /// Inverse-gamma mixing in `(tau, lambda)` form (the `alpha = 0` edge).
    GeneralizedT { tau: f64, lambda: f64, q: f64 },
    /// Improper `1/eta` mixing.
    Jeffreys { q: f64 },
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::Domain(format!("exponent q must be positive, got {q}")));
    }
    Ok(())
}

impl PriorSpec {
    pub fn generic(alpha: f64, beta: f64, gamma: f64, q: f64) -> Result<Self> {
        check_q(q)?;
        if !(alpha > 0.0) || !(beta > 0.0) || !gamma.is_finite() {
            return Err(Error::Domain(format!(
                "generic prior requires alpha > 0, beta > 0, finite gamma; got \
                 alpha={alpha}, beta={beta}, gamma={gamma}"
            )));
        }
        Ok(Self::Generic { alpha, beta, gamma, q })
    }

    pub fn gamma_mixing(alpha: f64, gamma: f64, q: f64) -> Result<Self> {
        check_q(q)?;
        if !(alpha > 0.0) || !(gamma > 0.0) {
            return Err(Error::Domain(format!(
                "gamma-mixing prior requires alpha > 0 and gamma > 0; got \
                 alpha={alpha}, gamma={gamma}"
            )));
        }
        Ok(Self::GammaMixing { alpha, gamma, q })
    }

    pub fn generalized_t(tau: f64, lambda: f64, q: f64) -> Result<Self> {
        check_q(q)?;
        if !(tau > 0.0) || !(lambda > 0.0) {
            return Err(Error::Domain(format!(
                "generalized-t prior requires tau > 0 and lambda > 0; got \
                 tau={tau}, lambda={lambda}"
            )));
        }
        Ok(Self::GeneralizedT { tau, lambda, q })
    }

    pub fn jeffreys(q: f64) -> Result<Self> {
        check_q(q)?;
        Ok(Self::Jeffreys { q })
    }

    pub fn q(&self) -> f64 {
        match *self {
            Self::Generic { q, .. }
            | Self::GammaMixing { q, .. }
            | Self::GeneralizedT { q, .. }
            | Self::Jeffreys { q } => q,
        }
    }

    /// GIG-space `(gamma, beta, alpha)` of the mixing density; `None` for the
    /// improper Jeffreys variant.
    pub fn mixing_gig(&self) -> Option<GigParams> {
        match *self {
            Self::Generic { alpha, beta, gamma, .. } => Some(GigParams { gamma, beta, alpha }),
            Self::GammaMixing { alpha, gamma, .. } => Some(GigParams { gamma, beta: 0.0, alpha }),
            Self::GeneralizedT { tau, lambda, .. } => {
                Some(GigParams { gamma: -tau / 2.0, beta: tau / lambda, alpha: 0.0 })
            }
            Self::Jeffreys { .. } => None,
        }
    }

    /// Posterior order `(gamma q - 1)/q` of `eta | b`; `-1/q` for Jeffreys.
    pub fn posterior_order(&self) -> f64 {
        let q = self.q();
        match self.mixing_gig() {
            Some(g) => (g.gamma * q - 1.0) / q,
            None => -1.0 / q,
        }
    }

    /// The sigma-scaled prior on a coefficient in the variance-`sigma`
    /// hierarchy: `EGIG(b | alpha/sigma, sigma beta, gamma, q)`. The Jeffreys
    /// variant is scale invariant.
    pub fn scaled(&self, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
        }
        Ok(match *self {
            Self::Generic { alpha, beta, gamma, q } => {
                Self::Generic { alpha: alpha / sigma, beta: beta * sigma, gamma, q }
            }
            Self::GammaMixing { alpha, gamma, q } => {
                Self::GammaMixing { alpha: alpha / sigma, gamma, q }
            }
            Self::GeneralizedT { tau, lambda, q } => {
                Self::GeneralizedT { tau, lambda: lambda / sigma, q }
            }
            Self::Jeffreys { q } => Self::Jeffreys { q },
        })
    }
}

/// A log-density value that may be a flagged divergence instead of a number.
///
/// Gamma-mixing marginals with `gamma q <= 1` genuinely diverge at the
/// origin (`K_{gamma-1/q}(x) ~ x^{-|gamma-1/q|}` as `x -> 0`); callers get an
/// explicit singular value rather than a silent NaN or bare infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogDensity {
    Finite(f64),
    /// The density is +infinity at the evaluation point.
    SingularAtOrigin,
}

impl LogDensity {
    /// The log-density as a float; `+inf` when singular.
    pub fn value(self) -> f64 {
        match self {
            Self::Finite(v) => v,
            Self::SingularAtOrigin => f64::INFINITY,
        }
    }

    pub fn is_singular(self) -> bool {
        matches!(self, Self::SingularAtOrigin)
    }
}

/// `ln p(b)` for an EP-GIG prior. Routes to a closed form when `(q, gamma)`
/// matches one of the special cases in [`epgig_closed_form_log_density`],
/// otherwise evaluates the Bessel-form density directly.
pub fn epgig_log_density(b: f64, prior: &PriorSpec) -> LogDensity {
    if let Some(v) = epgig_closed_form_log_density(b, prior) {
        return v;
    }
    epgig_log_density_general(b, prior)
}

/// The general evaluation route for `ln p(b)`: the Bessel-function form of
/// the mixture density (and its gamma / inverse-gamma / Jeffreys edges),
/// with no closed-form shortcuts. Public so the two routes can be certified
/// against each other.
pub fn epgig_log_density_general(b: f64, prior: &PriorSpec) -> LogDensity {
    let ab = b.abs();
    match *prior {
        PriorSpec::Generic { alpha, beta, gamma, q } => {
            let nu = (gamma * q - 1.0) / q;
            let t = beta + ab.powf(q);
            let u = (alpha * t).sqrt();
            let ln = log_bessel_k(nu, u).expect("u > 0")
                - (q + 1.0) / q * LN_2
                - log_gamma((q + 1.0) / q).expect("positive")
                - log_bessel_k(gamma, (alpha * beta).sqrt()).expect("psi > 0")
                + alpha.ln() / (2.0 * q)
                - 0.5 * gamma * beta.ln()
                + 0.5 * nu * t.ln();
            LogDensity::Finite(ln)
        }
        PriorSpec::GammaMixing { alpha, gamma, q } => {
            let mu = gamma - 1.0 / q;
            if ab == 0.0 {
                if mu <= 0.0 {
                    return LogDensity::SingularAtOrigin;
                }
                // K_mu(u) |b|^{q mu / 2} -> Gamma(mu)/2 (sqrt(alpha)/2)^{-mu}
                let ln = (q * gamma + 1.0) / (2.0 * q) * alpha.ln()
                    - (q * gamma + 1.0) / q * LN_2
                    - log_gamma((q + 1.0) / q).expect("positive")
                    - log_gamma(gamma).expect("gamma > 0")
                    + log_gamma(mu).expect("mu > 0")
                    - LN_2
                    - mu * (0.5 * alpha.ln() - LN_2);
                return LogDensity::Finite(ln);
            }
            let u = (alpha * ab.powf(q)).sqrt();
            let ln = (q * gamma + 1.0) / (2.0 * q) * alpha.ln() + 0.5 * (q * gamma - 1.0) * ab.ln()
                - (q * gamma + 1.0) / q * LN_2
                - log_gamma((q + 1.0) / q).expect("positive")
                - log_gamma(gamma).expect("gamma > 0")
                + log_bessel_k(mu, u).expect("u > 0");
            LogDensity::Finite(ln)
        }
        PriorSpec::GeneralizedT { tau, lambda, q } => {
            let ln = (q / 2.0).ln() + log_gamma(tau / 2.0 + 1.0 / q).expect("positive")
                - log_gamma(tau / 2.0).expect("positive")
                - log_gamma(1.0 / q).expect("positive")
                + (lambda / tau).ln() / q
                - (tau / 2.0 + 1.0 / q) * (lambda / tau * ab.powf(q)).ln_1p();
            LogDensity::Finite(ln)
        }
        PriorSpec::Jeffreys { q } => {
            if ab == 0.0 {
                return LogDensity::SingularAtOrigin;
            }
            // improper marginal (q/2) |b|^{-1}
            LogDensity::Finite((q / 2.0).ln() - ab.ln())
        }
    }
}

/// Closed-form `ln p(b)` for the special `(q, gamma)` pairs with elementary
/// densities (the Laplace-mixture, Gaussian-mixture, and half-order bridge
/// cases). Returns `None` when no closed form applies. Must agree with
/// [`epgig_log_density_general`] to 1e-12; the test suite certifies this.
pub fn epgig_closed_form_log_density(b: f64, prior: &PriorSpec) -> Option<LogDensity> {
    let &PriorSpec::Generic { alpha, beta, gamma, q } = prior else {
        return None;
    };
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12;
    let ab = b.abs();
    let psi = (alpha * beta).sqrt();
    let ln = if close(q, 1.0) {
        let t = beta + ab;
        let u = (alpha * t).sqrt();
        if close(gamma, 0.5) {
            0.5 * alpha.ln() - 2.0 * LN_2 + psi - 0.5 * t.ln() - u
        } else if close(gamma, 1.5) {
            alpha.ln() + psi - (4.0 * (psi + 1.0)).ln() - u
        } else if close(gamma, -0.5) {
            0.5 * beta.ln() + psi - 2.0 * LN_2 - 1.5 * t.ln() + (1.0 + u).ln() - u
        } else {
            return None;
        }
    } else if close(q, 2.0) {
        let t = beta + b * b;
        let u = (alpha * t).sqrt();
        if close(gamma, 0.0) {
            -LN_2 - log_bessel_k(0.0, psi).ok()? - 0.5 * t.ln() - u
        } else if close(gamma, 1.0) {
            -LN_2 - log_bessel_k(1.0, psi).ok()? - 0.5 * beta.ln() - u
        } else if close(gamma, -1.0) {
            0.5 * (beta.ln() - alpha.ln()) - LN_2 - log_bessel_k(1.0, psi).ok()?
                + (1.0 + u).ln()
                - u
                - 1.5 * t.ln()
        } else {
            return None;
        }
    } else if close(q, 0.5) {
        let t = beta + ab.sqrt();
        let u = (alpha * t).sqrt();
        if close(gamma, 1.5) {
            1.5 * alpha.ln() + psi - 4.0 * LN_2 - (1.0 + psi).ln() - u - 0.5 * t.ln()
        } else if close(gamma, 2.5) {
            2.0 * alpha.ln() + psi - 4.0 * LN_2 - (3.0 + 3.0 * psi + psi * psi).ln() - u
        } else {
            return None;
        }
    } else {
        return None;
    };
    Some(LogDensity::Finite(ln))
}

/// The grouped marginal `ln p(b_l | sigma)` of a coefficient block sharing
/// one mixing scale: order `(gamma_l q - p_l)/q`, driven by
/// `s = ||b_l||_q^q`. Only strict-GIG mixing is supported (the grouped
/// studies use it exclusively).
pub fn grouped_epgig_log_density(
    s: f64,
    group_size: usize,
    prior: &PriorSpec,
    sigma: f64,
) -> Result<f64> {
    let PriorSpec::Generic { alpha, beta, gamma, q } = *prior else {
        return Err(Error::Unsupported(
            "grouped marginal density requires a strict-GIG (generic) prior".into(),
        ));
    };
    if !(sigma > 0.0) || s < 0.0 {
        return Err(Error::Domain("grouped density requires sigma > 0 and s >= 0".into()));
    }
    let pl = group_size as f64;
    let nu = (gamma * q - pl) / q;
    let t = beta + s / sigma;
    let u = (alpha * t).sqrt();
    Ok(log_bessel_k(nu, u)?
        - pl * ((q + 1.0) / q * LN_2 + sigma.ln() / q + log_gamma((q + 1.0) / q)?)
        - log_bessel_k(gamma, (alpha * beta).sqrt())?
        + pl / (2.0 * q) * alpha.ln()
        - 0.5 * gamma * beta.ln()
        + 0.5 * nu * t.ln())
}

/// The exact conditional of `eta` given `b` in the variance-`sigma`
/// hierarchy: `GIG((gamma q - 1)/q, beta + |b|^q / sigma, alpha)`; the
/// Jeffreys variant yields the inverse-gamma special case
/// `IG(1/q, |b|^q/(2 sigma))`.
pub fn posterior_gig(b: f64, prior: &PriorSpec, sigma: f64) -> Result<GigParams> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let q = prior.q();
    let s = b.abs().powf(q) / sigma;
    match prior.mixing_gig() {
        Some(g) => GigParams::new(prior.posterior_order(), g.beta + s, g.alpha),
        // IG(1/q, s/2) in GIG form
        None => GigParams::new(-1.0 / q, s, 0.0),
    }
}
