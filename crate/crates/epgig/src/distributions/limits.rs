//! Numerical convergence checks for the limit theorems relating the mixture
//! families to their exponential power limits, and for the point-mass limits
//! of the mixing densities.
//!
//! Density limits are measured as sup-norm gaps on a fixed grid
//! `b in [-5, 5]`; mixing-density limits are reported through moment
//! concentration (`Var(eta)` plus the distance of `E(eta)` from the limit
//! point). In every family the gap must shrink as the size parameter grows.

use super::{ep_log_density, epgig_log_density, gig_moment, EpParams, GigParams, PriorSpec};
use crate::error::{Error, Result};

/// A limit family paired with its fixed parameters; `limit_check` plugs in
/// the diverging size parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitFamily {
    /// `GT(b|0, tau/lambda, tau/2, q) -> EP(b|0, 1/lambda, q)` as `tau -> inf`.
    GeneralizedTToEp { q: f64, lambda: f64 },
    /// `EG(b|lambda gamma, gamma/2, q) -> EP(b|0, 1/lambda, q)` as
    /// `gamma -> inf`.
    EpGammaToEp { q: f64, lambda: f64 },
    /// `EGIG(b|gamma alpha, beta, gamma, q) -> EP(b|0, 2/alpha, q)` as
    /// `gamma -> +inf`.
    EpGigLargeGamma { q: f64, alpha: f64, beta: f64 },
    /// `EGIG(b|alpha, |gamma| beta, -|gamma|, q) -> EP(b|0, beta/2, q)` as
    /// `gamma -> -inf`.
    EpGigNegativeGamma { q: f64, alpha: f64, beta: f64 },
    /// `EGIG(b|alpha, beta, gamma, q) -> EP(b|0, eta0, q)` as
    /// `psi = sqrt(alpha beta) -> inf` at fixed `eta0 = sqrt(beta/alpha)`.
    EpGigConcentratedScale { q: f64, gamma: f64, eta0: f64 },
    /// `GIG(gamma, beta, gamma alpha)` concentrates at `2/alpha` as
    /// `gamma -> +inf`.
    GigLargeGamma { alpha: f64, beta: f64 },
    /// `GIG(-|gamma|, |gamma| beta, alpha)` concentrates at `beta/2`.
    GigNegativeGamma { alpha: f64, beta: f64 },
    /// `G(tau, tau lambda)` concentrates at `1/lambda` as `tau -> inf`.
    GammaConcentration { lambda: f64 },
    /// `IG(tau, tau/lambda)` concentrates at `1/lambda` as `tau -> inf`.
    InverseGammaConcentration { lambda: f64 },
}

const GRID_POINTS: usize = 101;

fn density_gap(finite: &PriorSpec, limit: &EpParams) -> f64 {
    let mut sup: f64 = 0.0;
    for i in 0..GRID_POINTS {
        let b = -5.0 + 10.0 * i as f64 / (GRID_POINTS - 1) as f64;
        let p_fin = epgig_log_density(b, finite).value().exp();
        let p_lim = ep_log_density(b, limit).exp();
        sup = sup.max((p_fin - p_lim).abs());
    }
    sup
}

/// Moment concentration of a mixing density: `Var(eta) + |E(eta) - target|`.
fn concentration(mean: f64, second: f64, target: f64) -> f64 {
    (second - mean * mean).max(0.0) + (mean - target).abs()
}

/// The discrepancy between the finite-parameter member and its limit at the
/// given size parameter (`tau`, `gamma`, or `psi`); monotone decrease in the
/// size parameter is the tested property.
pub fn limit_check(family: LimitFamily, size: f64) -> Result<f64> {
    if !(size > 0.0) || !size.is_finite() {
        return Err(Error::Domain(format!("size parameter must be positive, got {size}")));
    }
    match family {
        LimitFamily::GeneralizedTToEp { q, lambda } => {
            let finite = PriorSpec::generalized_t(size, lambda, q)?;
            let limit = EpParams::new(0.0, 1.0 / lambda, q)?;
            Ok(density_gap(&finite, &limit))
        }
        LimitFamily::EpGammaToEp { q, lambda } => {
            let finite = PriorSpec::gamma_mixing(lambda * size, size / 2.0, q)?;
            let limit = EpParams::new(0.0, 1.0 / lambda, q)?;
            Ok(density_gap(&finite, &limit))
        }
        LimitFamily::EpGigLargeGamma { q, alpha, beta } => {
            let finite = PriorSpec::generic(size * alpha, beta, size, q)?;
            let limit = EpParams::new(0.0, 2.0 / alpha, q)?;
            Ok(density_gap(&finite, &limit))
        }
        LimitFamily::EpGigNegativeGamma { q, alpha, beta } => {
            let finite = PriorSpec::generic(alpha, size * beta, -size, q)?;
            let limit = EpParams::new(0.0, beta / 2.0, q)?;
            Ok(density_gap(&finite, &limit))
        }
        LimitFamily::EpGigConcentratedScale { q, gamma, eta0 } => {
            // psi = size at fixed eta0 = sqrt(beta/alpha):
            // alpha = psi/eta0, beta = psi eta0
            let finite = PriorSpec::generic(size / eta0, size * eta0, gamma, q)?;
            let limit = EpParams::new(0.0, eta0, q)?;
            Ok(density_gap(&finite, &limit))
        }
        LimitFamily::GigLargeGamma { alpha, beta } => {
            let g = GigParams::new(size, beta, size * alpha)?;
            Ok(concentration(gig_moment(&g, 1.0)?, gig_moment(&g, 2.0)?, 2.0 / alpha))
        }
        LimitFamily::GigNegativeGamma { alpha, beta } => {
            let g = GigParams::new(-size, size * beta, alpha)?;
            Ok(concentration(gig_moment(&g, 1.0)?, gig_moment(&g, 2.0)?, beta / 2.0))
        }
        LimitFamily::GammaConcentration { lambda } => {
            // G(tau, tau lambda): E = 1/lambda, Var = 1/(tau lambda^2)
            let mean = 1.0 / lambda;
            Ok(concentration(mean, mean * mean + 1.0 / (size * lambda * lambda), mean))
        }
        LimitFamily::InverseGammaConcentration { lambda } => {
            // IG(tau, tau/lambda): E = tau/(lambda (tau-1)),
            // E(eta^2) = tau^2 / (lambda^2 (tau-1)(tau-2)), needs tau > 2
            if size <= 2.0 {
                return Err(Error::Domain(
                    "inverse-gamma concentration needs size > 2 for finite variance".into(),
                ));
            }
            let mean = size / (lambda * (size - 1.0));
            let second = size * size / (lambda * lambda * (size - 1.0) * (size - 2.0));
            Ok(concentration(mean, second, 1.0 / lambda))
        }
    }
}
