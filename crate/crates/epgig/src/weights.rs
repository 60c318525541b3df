//! E-step expectations and re-weighting coefficients.
//!
//! The conditional of a mixing scale given a coefficient block is
//! `GIG(nu, beta + s/sigma, alpha)` with `nu = (gamma q - p_l)/q` and
//! `s = ||b_l||_q^q` (`p_l = 1` for the independent hierarchy), so the
//! weight each M-step needs is the inverse moment
//!
//! ```text
//! w = E(eta^{-1} | .) = alpha * Q_nu(alpha (beta + s/sigma))
//! ```
//!
//! with `Q_nu(z) = K_{nu-1}(sqrt z)/(sqrt z K_nu(sqrt z))`. Orders
//! `nu in {1/2, -1/2, -3/2}` hit the half-integer closed forms; the
//! inverse-gamma edge (`alpha = 0`) gives `2|nu| / (beta + s/sigma)` and the
//! Jeffreys prior `2 sigma / (q s)`.
//!
//! A divergent expectation is not a float infinity here: it is the tagged
//! [`Weight::Pinned`] signal, which solvers consume as an exact-zero
//! constraint. Arithmetic on infinities breeds NaNs; a pin is a constraint.

use crate::distributions::{epgig_log_density, LogDensity, PriorSpec};
use crate::error::{Error, Result};
use crate::specfun::bessel_ratio_q;

/// A per-coefficient (or per-group) penalty weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    Finite(f64),
    /// The posterior expectation of `eta^{-1}` diverges; the coordinate is
    /// pinned at exactly zero in every subsequent M-step.
    Pinned,
}

impl Weight {
    pub fn is_pinned(self) -> bool {
        matches!(self, Weight::Pinned)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Weight::Finite(v) => Some(v),
            Weight::Pinned => None,
        }
    }
}

/// Everything an E-step weight evaluation needs besides the data value.
#[derive(Debug, Clone, Copy)]
pub struct WeightContext {
    prior: PriorSpec,
    sigma: f64,
    group_size: usize,
}

impl WeightContext {
    pub fn new(prior: PriorSpec, sigma: f64, group_size: usize) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
        }
        if group_size == 0 {
            return Err(Error::Domain("group size must be at least 1".into()));
        }
        if group_size > 1 && matches!(prior, PriorSpec::Jeffreys { .. }) {
            return Err(Error::Unsupported("grouped Jeffreys hierarchy is not defined".into()));
        }
        Ok(Self { prior, sigma, group_size })
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn group_size(&self) -> usize {
        self.group_size
    }

    /// Posterior order `(gamma q - p_l)/q` of the conditional mixing scale.
    pub fn posterior_order(&self) -> f64 {
        let q = self.prior.q();
        match self.prior.mixing_gig() {
            Some(g) => (g.gamma() * q - self.group_size as f64) / q,
            None => -(self.group_size as f64) / q,
        }
    }
}

/// `E(eta^{-1})` for `GIG(nu, beta_p, alpha)` including both degenerate
/// edges. The shared kernel behind every weight formula in this module.
fn gig_inverse_moment(nu: f64, beta_p: f64, alpha: f64) -> Result<Weight> {
    if alpha == 0.0 {
        // inverse-gamma posterior: eta^{-1} ~ G(-nu, beta_p/2)
        if !(nu < 0.0) {
            return Err(Error::Domain(format!(
                "inverse-gamma posterior requires a negative order, got {nu}"
            )));
        }
        if beta_p <= 0.0 {
            return Ok(Weight::Pinned);
        }
        return Ok(Weight::Finite(2.0 * (-nu) / beta_p));
    }
    if beta_p <= 0.0 {
        // gamma posterior G(nu, alpha/2): E(eta^{-1}) finite only for nu > 1
        return if nu > 1.0 {
            Ok(Weight::Finite(alpha / (2.0 * (nu - 1.0))))
        } else {
            Ok(Weight::Pinned)
        };
    }
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12;
    let psi = (alpha * beta_p).sqrt();
    let w = if close(nu, 0.5) {
        (alpha / beta_p).sqrt()
    } else if close(nu, -0.5) {
        (1.0 + psi) / beta_p
    } else if close(nu, -1.5) {
        3.0 / beta_p + alpha / (1.0 + psi)
    } else {
        alpha * bessel_ratio_q(nu, alpha * beta_p)?
    };
    Ok(Weight::Finite(w))
}

/// The E-step weight `E(eta^{-1} | b or b_l, sigma)` driven by the raw value
/// `s = |b_j|^q` (independent) or `s = ||b_l||_q^q` (grouped); `sigma` is
/// applied internally.
pub fn estep_weight(s: f64, ctx: &WeightContext) -> Result<Weight> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("weight input must be nonnegative, got {s}")));
    }
    let nu = ctx.posterior_order();
    match ctx.prior.mixing_gig() {
        Some(g) => gig_inverse_moment(nu, g.beta() + s / ctx.sigma, g.alpha()),
        // Jeffreys: IG(p_l/q, s/(2 sigma)) posterior
        None => gig_inverse_moment(nu, s / ctx.sigma, 0.0),
    }
}

/// Same as [`estep_weight`] but forcing the Bessel-ratio route even where a
/// closed form exists; the two must agree to 1e-10 relative, and the test
/// suite certifies that.
pub fn estep_weight_bessel_route(s: f64, ctx: &WeightContext) -> Result<Weight> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("weight input must be nonnegative, got {s}")));
    }
    let g = ctx
        .prior
        .mixing_gig()
        .ok_or_else(|| Error::Unsupported("no Bessel route for the Jeffreys prior".into()))?;
    let beta_p = g.beta() + s / ctx.sigma;
    if g.alpha() == 0.0 || beta_p <= 0.0 {
        return estep_weight(s, ctx);
    }
    let nu = ctx.posterior_order();
    Ok(Weight::Finite(g.alpha() * bessel_ratio_q(nu, g.alpha() * beta_p)?))
}

/// `w = 2 sigma / (q |b|^q)` for the EP-Jeffreys hierarchy; pinned at 0.
pub fn jeffreys_weight(b: f64, q: f64, sigma: f64) -> Result<Weight> {
    if !(q > 0.0) || !(sigma > 0.0) {
        return Err(Error::Domain("jeffreys_weight requires q > 0 and sigma > 0".into()));
    }
    if b == 0.0 {
        return Ok(Weight::Pinned);
    }
    Ok(Weight::Finite(2.0 * sigma / (q * b.abs().powf(q))))
}

/// `w = sqrt(alpha sigma / |b|)` for the bridge-prior hierarchy (the
/// half-order weights of the adaptive lasso); pinned at 0.
pub fn bridge_prior_weight(b: f64, alpha: f64, sigma: f64) -> Result<Weight> {
    if !(alpha > 0.0) || !(sigma > 0.0) {
        return Err(Error::Domain(
            "bridge_prior_weight requires alpha > 0 and sigma > 0".into(),
        ));
    }
    if b == 0.0 {
        return Ok(Weight::Pinned);
    }
    Ok(Weight::Finite((alpha * sigma / b.abs()).sqrt()))
}

/// A penalty evaluation: `-ln p(b)`, shifted so the penalty vanishes at the
/// origin whenever the density is finite there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyValue {
    /// The penalty; for priors singular at the origin this is the raw
    /// unshifted `-ln p(b)`.
    pub value: f64,
    /// Whether the display shift `penalty(0) = 0` was applied.
    pub shifted: bool,
}

/// `-ln p(b)` as a penalty, with the display-only origin shift. The shift is
/// an additive constant and never enters optimization.
pub fn penalty_value(b: f64, prior: &PriorSpec) -> PenaltyValue {
    let at_zero = epgig_log_density(0.0, prior);
    let raw = -epgig_log_density(b, prior).value();
    match at_zero {
        LogDensity::Finite(l0) => PenaltyValue { value: raw + l0, shifted: true },
        LogDensity::SingularAtOrigin => PenaltyValue { value: raw, shifted: false },
    }
}

/// The re-weighting coefficient of the penalized-regression view:
/// `omega = d(-ln p)/d|b|^q = (alpha0/2) Q_nu(alpha0 (beta0 + |b|^q))`,
/// evaluated at the prior's own `(alpha0, beta0)`.
///
/// Equating `alpha0 = alpha/sigma` and `beta0 = beta sigma` makes
/// `2 sigma omega` equal to the E-step weight (exactly `2 omega` at
/// `sigma = 1`).
pub fn reweight_omega(b: f64, prior: &PriorSpec) -> Result<f64> {
    let PriorSpec::Generic { .. } = prior else {
        return Err(Error::Unsupported(
            "reweight_omega is defined for strict-GIG (generic) priors".into(),
        ));
    };
    let ctx = WeightContext::new(*prior, 1.0, 1)?;
    match estep_weight(b.abs().powf(prior.q()), &ctx)? {
        Weight::Finite(w) => Ok(0.5 * w),
        Weight::Pinned => Err(Error::Domain("omega diverges at this point".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn w(x: Result<Weight>) -> f64 {
        x.unwrap().finite().expect("finite weight")
    }

    #[test]
    fn table_closed_forms() {
        // gamma=3/2, q=1, alpha=4, beta=1, sigma=1, |b|=3: sqrt(4/4) = 1
        let ctx =
            WeightContext::new(PriorSpec::generic(4.0, 1.0, 1.5, 1.0).unwrap(), 1.0, 1).unwrap();
        assert_relative_eq!(w(estep_weight(3.0, &ctx)), 1.0, max_relative = 1e-13);
        // gamma=1/2, q=1, alpha=1, beta=0, |b|=1: (1 + 1)/1 = 2
        let ctx =
            WeightContext::new(PriorSpec::gamma_mixing(1.0, 0.5, 1.0).unwrap(), 1.0, 1).unwrap();
        assert_relative_eq!(w(estep_weight(1.0, &ctx)), 2.0, max_relative = 1e-13);
        // gamma=1, q=2, alpha=9, beta=1, b=0: sqrt(9/1) = 3
        let ctx =
            WeightContext::new(PriorSpec::generic(9.0, 1.0, 1.0, 2.0).unwrap(), 1.0, 1).unwrap();
        assert_relative_eq!(w(estep_weight(0.0, &ctx)), 3.0, max_relative = 1e-13);
    }

    #[test]
    fn sigma_enters_through_beta_prime() {
        // gamma=3/2, q=1: w = sqrt(alpha / (beta + |b|/sigma))
        let ctx =
            WeightContext::new(PriorSpec::generic(4.0, 1.0, 1.5, 1.0).unwrap(), 2.0, 1).unwrap();
        assert_relative_eq!(
            w(estep_weight(3.0, &ctx)),
            (4.0f64 / 2.5).sqrt(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn generalized_t_weight() {
        // GT(tau=1, lambda, q): posterior IG(tau/2 + 1/q, .), so
        // w = (tau + 2/q) / (tau/lambda + s/sigma)
        let ctx = WeightContext::new(PriorSpec::generalized_t(1.0, 2.0, 1.0).unwrap(), 1.0, 1)
            .unwrap();
        assert_relative_eq!(w(estep_weight(1.0, &ctx)), 3.0 / 1.5, max_relative = 1e-13);
    }

    #[test]
    fn pinned_cases() {
        // gamma-mixing with s = 0 and posterior order <= 1 diverges
        let ctx =
            WeightContext::new(PriorSpec::gamma_mixing(1.0, 1.5, 1.0).unwrap(), 1.0, 1).unwrap();
        assert!(estep_weight(0.0, &ctx).unwrap().is_pinned());
        // but a large enough mixing gamma keeps it finite: nu = gamma - 1 > 1
        let ctx =
            WeightContext::new(PriorSpec::gamma_mixing(1.0, 2.5, 1.0).unwrap(), 1.0, 1).unwrap();
        assert_relative_eq!(w(estep_weight(0.0, &ctx)), 1.0, max_relative = 1e-13);
        // Jeffreys and bridge weights pin at zero
        assert!(jeffreys_weight(0.0, 1.0, 1.0).unwrap().is_pinned());
        assert!(bridge_prior_weight(0.0, 1.0, 1.0).unwrap().is_pinned());
        // l2-family weights with beta > 0 are finite at b = 0
        let ctx =
            WeightContext::new(PriorSpec::generic(1.0, 0.5, 0.0, 2.0).unwrap(), 1.0, 1).unwrap();
        assert!(!estep_weight(0.0, &ctx).unwrap().is_pinned());
    }

    #[test]
    fn jeffreys_and_bridge_values() {
        assert_relative_eq!(w(jeffreys_weight(0.5, 1.0, 1.0)), 4.0, max_relative = 1e-13);
        assert_relative_eq!(w(jeffreys_weight(1.0, 2.0, 1.0)), 1.0, max_relative = 1e-13);
        assert_relative_eq!(w(jeffreys_weight(2.0, 1.0, 3.0)), 3.0, max_relative = 1e-13);
        assert_relative_eq!(w(bridge_prior_weight(1.0, 4.0, 1.0)), 2.0, max_relative = 1e-13);
        assert_relative_eq!(w(bridge_prior_weight(4.0, 4.0, 1.0)), 1.0, max_relative = 1e-13);
        assert_relative_eq!(w(bridge_prior_weight(0.25, 1.0, 1.0)), 2.0, max_relative = 1e-13);
    }

    #[test]
    fn closed_forms_match_bessel_route() {
        // the fast paths must agree with the general ratio to 1e-10 relative
        let priors = [
            PriorSpec::generic(4.0, 1.0, 1.5, 1.0).unwrap(), // nu = 1/2
            PriorSpec::generic(1.0, 0.7, 0.5, 1.0).unwrap(), // nu = -1/2
            PriorSpec::generic(2.0, 1.0, -0.5, 1.0).unwrap(), // nu = -3/2
            PriorSpec::generic(3.0, 2.0, 1.0, 2.0).unwrap(), // nu = 1/2
            PriorSpec::generic(1.5, 1.0, 0.0, 2.0).unwrap(), // nu = -1/2
        ];
        let mut s = 0.011;
        for prior in priors {
            for i in 0..20 {
                s = (s * 1.7 + 0.013 * i as f64) % 9.0 + 1e-3;
                for sigma in [0.5, 1.0, 2.0] {
                    let ctx = WeightContext::new(prior, sigma, 1).unwrap();
                    let fast = w(estep_weight(s, &ctx));
                    let gen = w(estep_weight_bessel_route(s, &ctx));
                    assert!(
                        (fast - gen).abs() <= 1e-10 * fast,
                        "{prior:?} s={s} sigma={sigma}: {fast} vs {gen}"
                    );
                }
            }
        }
    }

    #[test]
    fn grouped_orders() {
        // group of 4 with q=1 and gamma = 4.5 gives posterior order 1/2
        let prior = PriorSpec::generic(1.0, 1.0, 4.5, 1.0).unwrap();
        let ctx = WeightContext::new(prior, 1.0, 4).unwrap();
        assert_eq!(ctx.posterior_order(), 0.5);
        assert_relative_eq!(w(estep_weight(3.0, &ctx)), 0.5, max_relative = 1e-13);
        // grouped Jeffreys is rejected
        assert!(WeightContext::new(PriorSpec::jeffreys(1.0).unwrap(), 1.0, 4).is_err());
    }

    #[test]
    fn weight_positive_and_nonincreasing() {
        let priors = [
            PriorSpec::generic(1.0, 1.0, 0.5, 1.0).unwrap(),
            PriorSpec::generic(2.0, 0.3, 1.7, 2.0).unwrap(),
            PriorSpec::generalized_t(1.0, 1.0, 1.0).unwrap(),
            PriorSpec::gamma_mixing(1.0, 1.5, 1.0).unwrap(),
        ];
        for prior in priors {
            let ctx = WeightContext::new(prior, 1.0, 1).unwrap();
            let mut prev = f64::INFINITY;
            for i in 0..60 {
                let s = 1e-3 * 1.25f64.powi(i);
                let cur = w(estep_weight(s, &ctx));
                assert!(cur > 0.0);
                assert!(cur <= prev + 1e-12, "{prior:?} s={s}: {cur} > {prev}");
                prev = cur;
            }
        }
    }

    #[test]
    fn penalty_shift_convention() {
        let prior = PriorSpec::generic(1.0, 1.0, 0.5, 1.0).unwrap();
        let p0 = penalty_value(0.0, &prior);
        assert!(p0.shifted);
        assert!(p0.value.abs() < 1e-12);
        // gamma-mixing q=1, gamma=3/2: the shifted penalty is exactly
        // sqrt(alpha |b|), since p(b) = alpha/4 exp(-sqrt(alpha |b|))
        let eg = PriorSpec::gamma_mixing(1.0, 1.5, 1.0).unwrap();
        let p = penalty_value(4.0, &eg);
        assert!(p.shifted);
        assert_relative_eq!(p.value, 2.0, max_relative = 1e-12);
        // Jeffreys reports unshifted log penalties
        let j = PriorSpec::jeffreys(1.0).unwrap();
        let pj = penalty_value(2.0, &j);
        assert!(!pj.shifted);
        assert_relative_eq!(pj.value, 2.0f64.ln() - 0.5f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn omega_is_half_the_weight_at_unit_sigma() {
        // spec example: gamma=3/2, q=1, alpha0=4, beta0=1, |b|=3
        let prior = PriorSpec::generic(4.0, 1.0, 1.5, 1.0).unwrap();
        assert_relative_eq!(reweight_omega(3.0, &prior).unwrap(), 0.5, max_relative = 1e-13);
    }

    #[test]
    fn omega_matches_weight_under_identification() {
        // 2 sigma omega(alpha0 = alpha/sigma, beta0 = beta sigma) = w
        for (alpha, beta, gamma, q) in
            [(1.0, 1.0, 0.5, 1.0), (2.0, 0.5, 1.3, 2.0), (0.7, 2.0, -0.4, 1.0)]
        {
            for sigma in [0.5, 1.0, 3.0] {
                let em_prior = PriorSpec::generic(alpha, beta, gamma, q).unwrap();
                let pen_prior =
                    PriorSpec::generic(alpha / sigma, beta * sigma, gamma, q).unwrap();
                for b in [0.3f64, 1.0, 2.7] {
                    let ctx = WeightContext::new(em_prior, sigma, 1).unwrap();
                    let weight = w(estep_weight(b.abs().powf(q), &ctx));
                    let omega = reweight_omega(b, &pen_prior).unwrap();
                    assert_relative_eq!(2.0 * sigma * omega, weight, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn omega_matches_finite_differences() {
        // omega = d(-ln p)/dz at z = |b|^q, central differences
        for (alpha, beta, gamma, q) in [
            (1.0, 1.0, 0.5, 1.0),
            (2.0, 0.5, 1.3, 2.0),
            (0.7, 2.0, -0.4, 1.0),
            (1.0, 1.0, 2.0, 0.5),
        ] {
            let prior = PriorSpec::generic(alpha, beta, gamma, q).unwrap();
            for b in [0.4f64, 1.1, 3.0] {
                let z = b.abs().powf(q);
                let h = 1e-5 * z.max(1.0);
                let f = |z: f64| -epgig_log_density(z.powf(1.0 / q), &prior).value();
                let fd = (f(z + h) - f(z - h)) / (2.0 * h);
                let omega = reweight_omega(b, &prior).unwrap();
                assert!(
                    (omega - fd).abs() <= 1e-5 * omega,
                    "prior=({alpha},{beta},{gamma},{q}) b={b}: omega={omega} fd={fd}"
                );
            }
        }
    }

    #[test]
    fn penalty_concave_for_small_q() {
        // for q <= 1 the penalty is concave in |b| on (0, inf): divided
        // difference slopes are nonincreasing on a log-spaced grid
        let priors = [
            PriorSpec::generic(1.0, 1.0, 0.5, 1.0).unwrap(),
            PriorSpec::generic(1.0, 1.0, 1.5, 1.0).unwrap(),
            PriorSpec::generic(1.0, 1.0, -0.5, 1.0).unwrap(),
            PriorSpec::generic(1.0, 1.0, 1.5, 0.5).unwrap(),
            PriorSpec::generic(1.0, 1.0, 2.5, 0.5).unwrap(),
        ];
        for prior in priors {
            let grid: Vec<f64> = (0..80).map(|i| 1e-3 * 1.15f64.powi(i)).collect();
            let vals: Vec<f64> = grid.iter().map(|&b| penalty_value(b, &prior).value).collect();
            for i in 2..grid.len() {
                let s1 = (vals[i - 1] - vals[i - 2]) / (grid[i - 1] - grid[i - 2]);
                let s2 = (vals[i] - vals[i - 1]) / (grid[i] - grid[i - 1]);
                assert!(s2 <= s1 + 1e-12, "{prior:?} at {}: slope {s2} > {s1}", grid[i]);
            }
        }
    }
}
