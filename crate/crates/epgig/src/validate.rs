//! The invariant suites behind `epgig validate`: every mathematical identity
//! the library rests on, checked numerically with explicit tolerances and
//! reported one line per check.
//!
//! `Fast` runs the closed-form and identity checks (seconds); `Full` adds
//! the quadrature oracles, normalizations, limit families, and sampler
//! moments (minutes). All randomness is drawn from fixed named streams, so
//! a validation run is reproducible bit for bit.

use crate::distributions::{
    ep_log_density, epgig_log_density, gig_log_density, gig_moment, limit_check,
    mixture_log_density_oracle, normalization_quadrature, posterior_gig, EpParams, GigParams,
    GigSampler, LimitFamily, PriorSpec,
};
use crate::seed::stream_rng;
use crate::specfun::{bessel_ratio_q, log_bessel_k, log_gamma};
use crate::weights::{estep_weight, estep_weight_bessel_route, penalty_value, reweight_omega, WeightContext};
use rand::Rng;
use serde::Serialize;

/// Outcome of one named invariant check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: &str, max_error: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            max_error,
            tolerance,
            passed: max_error.is_finite() && max_error <= tolerance,
        }
    }
}

/// Validation depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationLevel {
    Fast,
    Full,
}

/// `K_nu = K_{-nu}` across a grid.
pub fn check_bessel_symmetry() -> CheckResult {
    let mut worst: f64 = 0.0;
    for &nu in &[0.1, 0.5, 0.77, 1.0, 1.5, 2.25, 3.9, 7.5, 11.3] {
        for &x in &[0.01, 0.3, 1.0, 2.0, 2.001, 10.0, 100.0, 1e4] {
            let plus = log_bessel_k(nu, x).expect("domain");
            let minus = log_bessel_k(-nu, x).expect("domain");
            worst = worst.max((plus - minus).abs());
        }
    }
    CheckResult::new("bessel order symmetry", worst, 1e-12)
}

/// Recurrence `K_{nu+1} = (2 nu / x) K_nu + K_{nu-1}`, residual scaled by
/// the largest term of the identity.
pub fn check_bessel_recurrence() -> CheckResult {
    let mut worst: f64 = 0.0;
    for i in 0..=20 {
        let nu = -5.0 + i as f64 * 0.5 + 0.13;
        for &x in &[0.01, 0.1, 1.0, 1.9, 2.1, 5.0, 20.0, 100.0] {
            let lk_m = log_bessel_k(nu - 1.0, x).expect("domain");
            let lk = log_bessel_k(nu, x).expect("domain");
            let lk_p = log_bessel_k(nu + 1.0, x).expect("domain");
            let c = 2.0 * nu / x;
            let l_mid = lk + c.abs().max(f64::MIN_POSITIVE).ln();
            let m = lk_p.max(l_mid).max(lk_m);
            worst = worst
                .max(((lk_p - m).exp() - c * (lk - m).exp() - (lk_m - m).exp()).abs());
        }
    }
    CheckResult::new("bessel three-term recurrence", worst, 1e-10)
}

/// Leading large-argument behavior `K_nu(x) ~ sqrt(pi/(2x)) e^{-x}`, with
/// the exact first-correction envelope `0.6 (nu^2 + 1/4)/x`.
pub fn check_bessel_asymptotics() -> CheckResult {
    let mut worst: f64 = 0.0;
    for &nu in &[0.0, 0.5, 1.0, 2.0, 3.0] {
        for &x in &[50.0, 100.0, 1000.0, 1e6] {
            let lead = 0.5 * (std::f64::consts::PI / (2.0 * x)).ln() - x;
            let gap = ((log_bessel_k(nu, x).expect("domain") - lead).exp() - 1.0).abs();
            worst = worst.max(gap / (0.6 * (nu * nu + 0.25) / x));
        }
    }
    // reported as a fraction of the envelope: must stay below 1
    CheckResult::new("bessel large-argument asymptotics", worst, 1.0)
}

/// Complete monotonicity of `Q_nu`: on an increasing grid the first finite
/// differences are <= 0 and the second differences >= 0.
pub fn check_ratio_complete_monotonicity() -> CheckResult {
    let mut rng = stream_rng(17, "validate-q-monotone", 0);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let nu = rng.gen_range(-3.0..3.0);
        let vals: Vec<f64> = (0..60)
            .map(|i| {
                let z = 0.05 + i as f64 * 0.35;
                bessel_ratio_q(nu, z).expect("z > 0")
            })
            .collect();
        for w in vals.windows(2) {
            worst = worst.max(w[1] - w[0]); // must be <= slack
        }
        for w in vals.windows(3) {
            worst = worst.max((w[1] - w[0]) - (w[2] - w[1])); // convexity
        }
    }
    CheckResult::new("Q ratio complete monotonicity signs", worst.max(0.0), 1e-12)
}

/// Spot values and the recurrence `Gamma(x+1) = x Gamma(x)`.
pub fn check_log_gamma() -> CheckResult {
    let mut worst: f64 = (log_gamma(1.0).expect("domain")).abs();
    worst = worst.max((log_gamma(0.5).expect("domain") - 0.572_364_942_924_700_09).abs());
    worst = worst.max((log_gamma(1.5).expect("domain") + 0.120_782_237_635_245_22).abs());
    let mut x = 1e-3;
    while x < 1e3 {
        let lhs = log_gamma(x + 1.0).expect("domain");
        let rhs = log_gamma(x).expect("domain") + x.ln();
        worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
        x *= 1.61;
    }
    CheckResult::new("log-gamma values and recurrence", worst, 1e-12)
}

/// E-step closed forms against the Bessel-ratio route (1e-10 relative on
/// 100 random inputs).
pub fn check_weight_closed_forms() -> CheckResult {
    let mut rng = stream_rng(18, "validate-weight-closed", 0);
    let priors = [
        PriorSpec::generic(4.0, 1.0, 1.5, 1.0).expect("valid"),
        PriorSpec::generic(1.0, 0.7, 0.5, 1.0).expect("valid"),
        PriorSpec::generic(2.0, 1.0, -0.5, 1.0).expect("valid"),
        PriorSpec::generic(3.0, 2.0, 1.0, 2.0).expect("valid"),
        PriorSpec::generic(1.5, 1.0, 0.0, 2.0).expect("valid"),
    ];
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let prior = priors[i % priors.len()];
        let sigma = rng.gen_range(0.2..3.0);
        let s = rng.gen_range(1e-4..9.0);
        let ctx = WeightContext::new(prior, sigma, 1).expect("valid");
        let fast = estep_weight(s, &ctx).expect("valid").finite().expect("finite");
        let gen = estep_weight_bessel_route(s, &ctx)
            .expect("valid")
            .finite()
            .expect("finite");
        worst = worst.max((fast - gen).abs() / fast);
    }
    CheckResult::new("weight closed forms vs Bessel route", worst, 1e-10)
}

fn random_generic_prior<R: Rng>(rng: &mut R) -> PriorSpec {
    let q = [0.5, 1.0, 2.0][rng.gen_range(0..3)];
    let gamma = rng.gen_range(-2.0..2.5);
    let alpha = rng.gen_range(0.2..4.0);
    let beta = rng.gen_range(0.2..4.0);
    PriorSpec::generic(alpha, beta, gamma, q).expect("ranges are valid")
}

/// Conjugacy identity: `ln EP(b|0,eta,q) + ln GIG(eta|prior) - ln p(b)`
/// equals the posterior GIG log density (20 random triples, 20 eta values
/// each).
pub fn check_conjugacy_identity() -> CheckResult {
    let mut rng = stream_rng(19, "validate-conjugacy", 0);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let prior = random_generic_prior(&mut rng);
        let b = rng.gen_range(-4.0..4.0);
        let mix = prior.mixing_gig().expect("generic");
        let post = posterior_gig(b, &prior, 1.0).expect("valid");
        let marginal = epgig_log_density(b, &prior).value();
        for _ in 0..20 {
            let eta = rng.gen_range(0.05..6.0);
            let lhs = ep_log_density(b, &EpParams::new(0.0, eta, prior.q()).expect("valid"))
                + gig_log_density(eta, &mix).expect("eta > 0")
                - marginal;
            let rhs = gig_log_density(eta, &post).expect("eta > 0");
            worst = worst.max((lhs - rhs).abs());
        }
    }
    CheckResult::new("conjugacy identity (Bayes ratio)", worst, 1e-8)
}

/// Derivative identity: `omega = d(-ln p)/d|b|^q` against central finite
/// differences (relative 1e-5, 20 random cases), plus the weight
/// identification `2 omega = w` at `sigma = 1` (and `2 sigma omega = w`
/// for random sigma) to 1e-12.
pub fn check_derivative_identity() -> CheckResult {
    let mut rng = stream_rng(20, "validate-derivative", 0);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let prior = random_generic_prior(&mut rng);
        let q = prior.q();
        let b: f64 = rng.gen_range(0.2..3.5);
        let z = b.abs().powf(q);
        let h = 1e-5 * z.max(1.0);
        let f = |z: f64| -epgig_log_density(z.powf(1.0 / q), &prior).value();
        let fd = (f(z + h) - f(z - h)) / (2.0 * h);
        let omega = reweight_omega(b, &prior).expect("generic prior");
        worst = worst.max((omega - fd).abs() / omega);
    }
    let mut ident_worst: f64 = 0.0;
    for _ in 0..20 {
        let prior = random_generic_prior(&mut rng);
        let q = prior.q();
        let b: f64 = rng.gen_range(0.2..3.5);
        // sigma = 1: 2 omega = w exactly
        let ctx = WeightContext::new(prior, 1.0, 1).expect("valid");
        let w = estep_weight(b.abs().powf(q), &ctx).expect("valid").finite().expect("finite");
        let omega = reweight_omega(b, &prior).expect("generic");
        ident_worst = ident_worst.max((2.0 * omega - w).abs() / w);
        // random sigma through the alpha/sigma, beta*sigma identification
        let sigma = rng.gen_range(0.3..3.0);
        let PriorSpec::Generic { alpha, beta, gamma, q } = prior else { unreachable!() };
        let pen_prior =
            PriorSpec::generic(alpha / sigma, beta * sigma, gamma, q).expect("valid");
        let ctx = WeightContext::new(prior, sigma, 1).expect("valid");
        let w = estep_weight(b.abs().powf(q), &ctx).expect("valid").finite().expect("finite");
        let omega = reweight_omega(b, &pen_prior).expect("generic");
        ident_worst = ident_worst.max((2.0 * sigma * omega - w).abs() / w);
    }
    let r1 = CheckResult::new("omega vs finite differences", worst, 1e-5);
    let r2 = CheckResult::new("2 sigma omega = w identification", ident_worst, 1e-12);
    CheckResult {
        name: "derivative identity (omega = half weight)".into(),
        max_error: if r1.passed && r2.passed {
            worst.max(ident_worst * 1e7) // report on the 1e-5 scale
        } else {
            f64::INFINITY
        },
        tolerance: 1e-5,
        passed: r1.passed && r2.passed,
    }
}

/// The complete-monotonicity sign suite on weights and penalties: weight
/// curves nonincreasing and convex in `s`, and `q <= 1` penalties concave
/// in `|b|`, for the study-roster priors plus 20 random ones.
pub fn check_weight_penalty_shapes() -> CheckResult {
    let mut rng = stream_rng(21, "validate-shape-suite", 0);
    let mut priors: Vec<PriorSpec> = vec![
        PriorSpec::generic(1.0, 1.0, 0.5, 1.0).expect("valid"),
        PriorSpec::generic(1.0, 1.0, 1.5, 1.0).expect("valid"),
        PriorSpec::generic(1.0, 1.0, -0.5, 1.0).expect("valid"),
        PriorSpec::generalized_t(1.0, 1.0, 1.0).expect("valid"),
        PriorSpec::generic(1.0, 1.0, 0.0, 2.0).expect("valid"),
        PriorSpec::generic(1.0, 1.0, 1.0, 2.0).expect("valid"),
        PriorSpec::generalized_t(1.0, 1.0, 2.0).expect("valid"),
        PriorSpec::gamma_mixing(1.0, 1.5, 1.0).expect("valid"),
    ];
    for _ in 0..20 {
        priors.push(random_generic_prior(&mut rng));
    }
    let mut worst: f64 = 0.0;
    for prior in &priors {
        // weight curve in s on a uniform grid
        let ctx = WeightContext::new(*prior, 1.0, 1).expect("valid");
        let ws: Vec<f64> = (0..80)
            .map(|i| {
                let s = 0.01 + i as f64 * 0.25;
                estep_weight(s, &ctx).expect("valid").finite().expect("s > 0")
            })
            .collect();
        let scale = 1.0 + ws[0].abs();
        for w in ws.windows(2) {
            worst = worst.max((w[1] - w[0]) / scale);
        }
        for w in ws.windows(3) {
            worst = worst.max(((w[1] - w[0]) - (w[2] - w[1])) / scale);
        }
        // penalty concavity in |b| for q <= 1
        if prior.q() <= 1.0 {
            let grid: Vec<f64> = (0..70).map(|i| 1e-3 * 1.18f64.powi(i)).collect();
            let vals: Vec<f64> =
                grid.iter().map(|&b| penalty_value(b, prior).value).collect();
            for i in 2..grid.len() {
                let s1 = (vals[i - 1] - vals[i - 2]) / (grid[i - 1] - grid[i - 2]);
                let s2 = (vals[i] - vals[i - 1]) / (grid[i] - grid[i - 1]);
                worst = worst.max((s2 - s1) / (1.0 + s1.abs()));
            }
        }
    }
    CheckResult::new("weight/penalty monotonicity-shape suite", worst.max(0.0), 1e-12)
}

/// The priors of the mixture-identity gate: the eight special cases with
/// elementary densities, the generalized-t pairs, and the gamma-mixing
/// case.
fn mixture_gate_priors() -> Vec<(&'static str, PriorSpec)> {
    vec![
        ("laplace-gig q=1 g=1/2", PriorSpec::generic(1.0, 1.0, 0.5, 1.0).expect("valid")),
        ("laplace-gig q=1 g=3/2", PriorSpec::generic(1.3, 0.8, 1.5, 1.0).expect("valid")),
        ("laplace-gig q=1 g=-1/2", PriorSpec::generic(0.7, 1.2, -0.5, 1.0).expect("valid")),
        ("gauss-gig q=2 g=0", PriorSpec::generic(1.0, 1.0, 0.0, 2.0).expect("valid")),
        ("gauss-gig q=2 g=1", PriorSpec::generic(2.0, 0.6, 1.0, 2.0).expect("valid")),
        ("gauss-gig q=2 g=-1", PriorSpec::generic(1.0, 1.5, -1.0, 2.0).expect("valid")),
        ("bridge-gig q=1/2 g=3/2", PriorSpec::generic(1.0, 1.0, 1.5, 0.5).expect("valid")),
        ("bridge-gig q=1/2 g=5/2", PriorSpec::generic(1.4, 0.9, 2.5, 0.5).expect("valid")),
        ("generalized-t q=1 tau=1", PriorSpec::generalized_t(1.0, 1.0, 1.0).expect("valid")),
        ("generalized-t q=2 tau=1", PriorSpec::generalized_t(1.0, 1.0, 2.0).expect("valid")),
        ("gamma-mixing q=1 g=3/2", PriorSpec::gamma_mixing(1.0, 1.5, 1.0).expect("valid")),
    ]
}

/// Mixture identity for one prior: the direct log density against the
/// quadrature oracle on 50 grid points.
fn mixture_identity_error(prior: &PriorSpec) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let b = -5.0 + 10.0 * i as f64 / 49.0;
        let direct = epgig_log_density(b, prior).value();
        let oracle = mixture_log_density_oracle(b, prior).expect("oracle converges");
        worst = worst.max((direct - oracle).abs());
    }
    worst
}

/// Mixture identity across every gate prior, one report line per prior.
pub fn check_mixture_identities_per_prior() -> Vec<CheckResult> {
    mixture_gate_priors()
        .into_iter()
        .map(|(name, prior)| {
            CheckResult::new(
                &format!("mixture identity: {name}"),
                mixture_identity_error(&prior),
                1e-6,
            )
        })
        .collect()
}

/// Mixture identity, aggregated to the worst error over all gate priors.
pub fn check_mixture_identities() -> CheckResult {
    let worst = mixture_gate_priors()
        .iter()
        .map(|(_, prior)| mixture_identity_error(prior))
        .fold(0.0f64, f64::max);
    CheckResult::new("mixture identity vs quadrature oracle", worst, 1e-6)
}

/// Normalization: densities integrate to 1 over [-60, 60] for priors whose
/// tails vanish there (alpha scaled with q accordingly).
pub fn check_normalizations() -> CheckResult {
    let mut rng = stream_rng(22, "validate-normalization", 0);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let q = [0.5, 1.0, 2.0][i % 3];
        let alpha_min = match i % 3 {
            0 => 64.0,
            1 => 9.0,
            _ => 1.0,
        };
        let prior = PriorSpec::generic(
            alpha_min * rng.gen_range(1.0..4.0),
            rng.gen_range(0.2..2.0),
            rng.gen_range(-1.5..2.0),
            q,
        )
        .expect("valid");
        let z = normalization_quadrature(&prior).expect("finite at origin");
        worst = worst.max((z - 1.0).abs());
    }
    CheckResult::new("density normalization", worst, 1e-6)
}

/// The bridge representation: an exponential power of order q/2 equals the
/// gamma mixture of order-q exponential powers with `gamma = 1/2 + 1/q`,
/// compared through the quadrature oracle.
pub fn check_gamma_mixture_bridge() -> CheckResult {
    let mut worst: f64 = 0.0;
    for &q in &[1.0, 2.0] {
        for &alpha in &[0.5, 1.0, 4.0] {
            let gamma = 0.5 + 1.0 / q;
            let mixture = PriorSpec::gamma_mixing(alpha, gamma, q).expect("valid");
            let ep = EpParams::new(0.0, 0.5 / alpha.sqrt(), q / 2.0).expect("valid");
            for i in 0..50 {
                let b = -5.0 + 10.0 * i as f64 / 49.0;
                let direct = ep_log_density(b, &ep).exp();
                let oracle = mixture_log_density_oracle(b, &mixture)
                    .expect("oracle converges")
                    .exp();
                worst = worst.max((direct - oracle).abs());
            }
        }
    }
    CheckResult::new("half-order bridge representation", worst, 1e-6)
}

/// Limit families: sup-norm gaps strictly decrease along the size grid
/// {10, 1e2, 1e3, 1e4} and the final gaps meet their thresholds.
pub fn check_limit_families() -> CheckResult {
    let sizes = [10.0, 1e2, 1e3, 1e4];
    let families: Vec<(&str, LimitFamily, f64)> = vec![
        ("gt->laplace", LimitFamily::GeneralizedTToEp { q: 1.0, lambda: 1.0 }, 1e-2),
        ("gt->gaussian", LimitFamily::GeneralizedTToEp { q: 2.0, lambda: 1.0 }, 5e-2),
        ("eg->ep q=1", LimitFamily::EpGammaToEp { q: 1.0, lambda: 1.0 }, 5e-2),
        ("eg->ep q=2", LimitFamily::EpGammaToEp { q: 2.0, lambda: 1.0 }, 5e-2),
        ("epgig large gamma q=1", LimitFamily::EpGigLargeGamma { q: 1.0, alpha: 1.0, beta: 1.0 }, 5e-2),
        ("epgig large gamma q=2", LimitFamily::EpGigLargeGamma { q: 2.0, alpha: 1.0, beta: 1.0 }, 5e-2),
        ("epgig negative gamma q=1", LimitFamily::EpGigNegativeGamma { q: 1.0, alpha: 1.0, beta: 1.0 }, 5e-2),
        ("epgig concentrated scale q=2", LimitFamily::EpGigConcentratedScale { q: 2.0, gamma: 1.0, eta0: 1.0 }, 5e-2),
    ];
    let mut worst_ratio: f64 = 0.0; // final gap / threshold, and 1 if not decreasing
    for (name, family, threshold) in families {
        let gaps: Vec<f64> =
            sizes.iter().map(|&s| limit_check(family, s).expect("valid family")).collect();
        for w in gaps.windows(2) {
            if w[1] >= w[0] {
                eprintln!("limit family {name}: gap did not decrease ({} -> {})", w[0], w[1]);
                worst_ratio = f64::INFINITY;
            }
        }
        worst_ratio = worst_ratio.max(gaps[gaps.len() - 1] / threshold);
    }
    // mixing-density point-mass limits: concentration decreasing
    for family in [
        LimitFamily::GigLargeGamma { alpha: 1.0, beta: 1.0 },
        LimitFamily::GigNegativeGamma { alpha: 1.0, beta: 1.0 },
        LimitFamily::GammaConcentration { lambda: 1.0 },
        LimitFamily::InverseGammaConcentration { lambda: 1.0 },
    ] {
        let gaps: Vec<f64> =
            sizes.iter().map(|&s| limit_check(family, s).expect("valid family")).collect();
        for w in gaps.windows(2) {
            if w[1] >= w[0] {
                worst_ratio = f64::INFINITY;
            }
        }
    }
    CheckResult::new("limit theorems (gap decrease + final size)", worst_ratio, 1.0)
}

/// Sampler moments against the Bessel-ratio moments, within 4 standard
/// errors at 1e5 draws.
pub fn check_sampler_moments() -> CheckResult {
    let n = 100_000;
    let mut worst: f64 = 0.0;
    for (k, &(gamma, beta, alpha)) in
        [(0.5, 1.0, 1.0), (-0.5, 1.0, 1.0), (1.7, 0.4, 2.2)].iter().enumerate()
    {
        let g = GigParams::new(gamma, beta, alpha).expect("valid");
        let sampler = GigSampler::new(&g);
        let mut rng = stream_rng(23, "validate-sampler", k as u64);
        for nu in [1.0, -1.0] {
            let expect = gig_moment(&g, nu).expect("strict GIG");
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..n {
                let v = sampler.sample(&mut rng).powf(nu);
                sum += v;
                sumsq += v * v;
            }
            let mean = sum / n as f64;
            let se = ((sumsq / n as f64 - mean * mean).max(0.0) / n as f64).sqrt();
            worst = worst.max((mean - expect).abs() / (4.0 * se));
        }
    }
    // reported as a fraction of the 4-SE band
    CheckResult::new("sampler moment consistency (4 SE)", worst, 1.0)
}

/// Runs the suite at the requested depth.
pub fn run_validation(level: ValidationLevel) -> Vec<CheckResult> {
    let mut results = vec![
        check_bessel_symmetry(),
        check_bessel_recurrence(),
        check_bessel_asymptotics(),
        check_ratio_complete_monotonicity(),
        check_log_gamma(),
        check_weight_closed_forms(),
        check_conjugacy_identity(),
        check_derivative_identity(),
        check_weight_penalty_shapes(),
    ];
    if level == ValidationLevel::Full {
        results.extend(check_mixture_identities_per_prior());
        results.push(check_normalizations());
        results.push(check_gamma_mixture_bridge());
        results.push(check_limit_families());
        results.push(check_sampler_moments());
    }
    results
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_suite_passes() {
        for check in run_validation(ValidationLevel::Fast) {
            assert!(
                check.passed,
                "{}: error {} > tolerance {}",
                check.name, check.max_error, check.tolerance
            );
        }
    }
}
