//! Sparse learning with exponential-power / generalized-inverse-Gaussian
//! scale-mixture priors.
//!
//! The prior family here is the marginal of `b` when `b | eta` follows an
//! exponential power distribution `EP(0, eta, q)` and the scale `eta`
//! follows a generalized inverse Gaussian `GIG(gamma, beta, alpha)`. The
//! family has an explicit density, a GIG conjugate posterior for `eta`, and
//! closed-form posterior expectations `E(eta^{-1} | b)`; those expectations
//! are exactly the coefficient weights of iteratively re-weighted l1/l2
//! methods, which is what makes the EM algorithms in [`em`] practical.
//!
//! Module map:
//! * [`specfun`] - log-scale Bessel `K`, the ratio `Q_nu`, log-gamma;
//! * [`distributions`] - EP, GIG and mixture densities, moments, conjugate
//!   posteriors, a GIG sampler, a quadrature oracle, and limit checks;
//! * [`weights`] - E-step expectations / re-weighting coefficients and
//!   penalty evaluation;
//! * [`solvers`] - weighted l1 coordinate descent, weighted l2 (generalized
//!   ridge), grouped block updates, and the logistic quadratic approximation;
//! * [`em`] - the outer EM loops for linear, grouped and logistic models,
//!   the one-step estimator, and cross-validation;
//! * [`experiments`] - synthetic designs, metrics, and replicated study
//!   runners;
//! * [`validate`] - the invariant suites behind `epgig validate`.

pub mod data;
pub mod distributions;
pub mod em;
pub mod error;
pub mod experiments;
pub mod seed;
pub mod solvers;
pub mod specfun;
pub mod validate;
pub mod weights;

pub use error::{Error, Result};
