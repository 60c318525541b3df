//! Inner M-step optimizers.
//!
//! All of them minimize variants of
//!
//! ```text
//! (y - X b)' W (y - X b) + lambda_scale * sum_j w_j |b_j|^q
//! ```
//!
//! * `q = 1`: cyclic coordinate descent with soft thresholding, covariance
//!   caching for n > p and residual updates otherwise;
//! * `q = 2`: one symmetric positive-definite solve of
//!   `(X'WX + diag(w)) b = X'Wy`;
//! * grouped objectives share one weight per group, which is
//!   coordinate-separable given the weights, so the same kernels apply with
//!   broadcast weights;
//! * logistic loss enters through its quadratic approximation (working
//!   response and observation weights), never directly.
//!
//! Pinned coefficients ([`Weight::Pinned`]) are exact-zero constraints: they
//! are never updated and contribute nothing to any objective.

use crate::data::GroupPartition;
use crate::error::{Error, Result};
use crate::weights::Weight;
use ndarray::{Array1, Array2, Axis};

/// `sign(z) * max(|z| - lambda, 0)`.
pub fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// Penalty exponent of the M-step problem. Other exponents have no efficient
/// exact minimizer and are out of scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyExponent {
    L1,
    L2,
}

impl PenaltyExponent {
    pub fn from_q(q: f64) -> Result<Self> {
        if q == 1.0 {
            Ok(Self::L1)
        } else if q == 2.0 {
            Ok(Self::L2)
        } else {
            Err(Error::Unsupported(format!(
                "M-step penalty exponent must be 1 or 2, got {q}"
            )))
        }
    }

    pub fn q(self) -> f64 {
        match self {
            Self::L1 => 1.0,
            Self::L2 => 2.0,
        }
    }
}

/// A weighted penalized least-squares problem.
#[derive(Debug, Clone)]
pub struct WeightedPenalizedLsProblem {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    /// Observation weights (all ones for plain regression).
    pub obs_weights: Array1<f64>,
    /// Per-coefficient penalty weights; pinned entries are exact zeros.
    pub coef_weights: Vec<Weight>,
    pub q: PenaltyExponent,
    /// Global multiplier folded into every coefficient weight.
    pub lambda_scale: f64,
}

impl WeightedPenalizedLsProblem {
    pub fn new(
        x: Array2<f64>,
        y: Array1<f64>,
        obs_weights: Array1<f64>,
        coef_weights: Vec<Weight>,
        q: PenaltyExponent,
        lambda_scale: f64,
    ) -> Result<Self> {
        let (n, p) = (x.nrows(), x.ncols());
        if y.len() != n || obs_weights.len() != n || coef_weights.len() != p {
            return Err(Error::Data(format!(
                "inconsistent problem dimensions: X is {n}x{p}, y has {}, W has {}, w has {}",
                y.len(),
                obs_weights.len(),
                coef_weights.len()
            )));
        }
        if obs_weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::Data("observation weights must be finite and nonnegative".into()));
        }
        if coef_weights.iter().any(|w| matches!(w, Weight::Finite(v) if *v < 0.0 || !v.is_finite()))
        {
            return Err(Error::Data("coefficient weights must be finite and nonnegative".into()));
        }
        if !(lambda_scale >= 0.0) || !lambda_scale.is_finite() {
            return Err(Error::Data(format!("lambda_scale must be nonnegative, got {lambda_scale}")));
        }
        Ok(Self { x, y, obs_weights, coef_weights, q, lambda_scale })
    }

    /// Plain-regression construction: unit observation weights.
    pub fn unweighted_obs(
        x: Array2<f64>,
        y: Array1<f64>,
        coef_weights: Vec<Weight>,
        q: PenaltyExponent,
        lambda_scale: f64,
    ) -> Result<Self> {
        let n = x.nrows();
        Self::new(x, y, Array1::ones(n), coef_weights, q, lambda_scale)
    }

    fn effective_weight(&self, j: usize) -> Option<f64> {
        self.coef_weights[j].finite().map(|w| w * self.lambda_scale)
    }

    /// The objective value at `b` (finite for b = 0 by construction).
    pub fn objective(&self, b: &Array1<f64>) -> f64 {
        let r = &self.y - &self.x.dot(b);
        let mut obj = r
            .iter()
            .zip(self.obs_weights.iter())
            .map(|(&ri, &wi)| wi * ri * ri)
            .sum::<f64>();
        for j in 0..b.len() {
            match self.effective_weight(j) {
                Some(w) => obj += w * b[j].abs().powf(self.q.q()),
                None => debug_assert_eq!(b[j], 0.0, "pinned coordinate must stay zero"),
            }
        }
        obj
    }

    /// Maximum KKT violation of the l1 subgradient conditions at `b`, scaled
    /// by `2 ||X_j||_W^2` so it is comparable to a coordinate-change
    /// tolerance. Zero-weight-norm columns are skipped.
    pub fn kkt_violation(&self, b: &Array1<f64>) -> f64 {
        assert_eq!(self.q, PenaltyExponent::L1);
        let r = &self.y - &self.x.dot(b);
        let wr = &r * &self.obs_weights;
        let mut worst: f64 = 0.0;
        for j in 0..b.len() {
            let col = self.x.index_axis(Axis(1), j);
            let norm = col
                .iter()
                .zip(self.obs_weights.iter())
                .map(|(&x, &w)| w * x * x)
                .sum::<f64>();
            if norm <= 0.0 {
                continue;
            }
            let grad = 2.0 * col.dot(&wr); // -d loss / d b_j
            let viol = match self.effective_weight(j) {
                None => continue, // pinned: constraint, not stationarity
                Some(w) => {
                    if b[j] != 0.0 {
                        (grad - w * b[j].signum()).abs()
                    } else {
                        (grad.abs() - w).max(0.0)
                    }
                }
            };
            worst = worst.max(viol / (2.0 * norm));
        }
        worst
    }
}

/// Precomputed sufficient statistics `X'WX`, `X'Wy`, `y'Wy` for repeated
/// solves against one `(X, W, y)` with changing coefficient weights - the
/// situation every EM outer loop is in.
#[derive(Debug, Clone)]
pub struct GramCache {
    pub gram: Array2<f64>,
    pub xtwy: Array1<f64>,
    pub ytwy: f64,
}

impl GramCache {
    pub fn new(x: &Array2<f64>, y: &Array1<f64>, obs_weights: &Array1<f64>) -> Self {
        let mut wx = x.clone();
        for (mut row, &w) in wx.rows_mut().into_iter().zip(obs_weights.iter()) {
            row *= w;
        }
        let gram = x.t().dot(&wx);
        let xtwy = wx.t().dot(y);
        let ytwy = y.iter().zip(obs_weights.iter()).map(|(&yi, &wi)| wi * yi * yi).sum();
        Self { gram, xtwy, ytwy }
    }

    pub fn unweighted(x: &Array2<f64>, y: &Array1<f64>) -> Self {
        Self::new(x, y, &Array1::ones(x.nrows()))
    }

    /// `(y - Xb)'W(y - Xb)` from the cached statistics (clamped at zero
    /// against cancellation on interpolating fits).
    pub fn weighted_rss(&self, b: &Array1<f64>) -> f64 {
        (self.ytwy - 2.0 * b.dot(&self.xtwy) + b.dot(&self.gram.dot(b))).max(0.0)
    }
}

/// Coordinate descent on the cached normal equations; the workhorse behind
/// [`solve_weighted_l1`] for n > p and every EM loop.
pub fn solve_weighted_l1_gram(
    cache: &GramCache,
    coef_weights: &[Weight],
    lambda_scale: f64,
    opts: &SolverOptions,
) -> Result<SolverOutput> {
    let p = cache.gram.ncols();
    if coef_weights.len() != p {
        return Err(Error::Data(format!("{} weights for {p} coefficients", coef_weights.len())));
    }
    let mut b = match &opts.warm_start {
        Some(b0) if b0.len() == p => b0.clone(),
        Some(b0) => {
            return Err(Error::Data(format!("warm start has {} entries, need {p}", b0.len())))
        }
        None => Array1::zeros(p),
    };
    for j in 0..p {
        if coef_weights[j].is_pinned() {
            b[j] = 0.0;
        }
    }
    let mut d = cache.gram.dot(&b);
    let mut sweeps = 0;
    let mut converged = false;
    for sweep in 1..=opts.max_sweeps {
        sweeps = sweep;
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let Some(w) = coef_weights[j].finite() else { continue };
            let gjj = cache.gram[[j, j]];
            if gjj <= 0.0 {
                continue;
            }
            let z = cache.xtwy[j] - d[j] + gjj * b[j];
            let new = soft_threshold(z, lambda_scale * w / 2.0) / gjj;
            let delta = new - b[j];
            if delta != 0.0 {
                d.scaled_add(delta, &cache.gram.index_axis(Axis(1), j));
                b[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(SolverOutput { b, converged, sweeps })
}

/// Generalized ridge on the cached normal equations:
/// `(X'WX + lambda diag(w)) b = X'Wy` restricted to non-pinned coordinates.
pub fn solve_weighted_l2_gram(
    cache: &GramCache,
    coef_weights: &[Weight],
    lambda_scale: f64,
) -> Result<Array1<f64>> {
    let p = cache.gram.ncols();
    if coef_weights.len() != p {
        return Err(Error::Data(format!("{} weights for {p} coefficients", coef_weights.len())));
    }
    let active: Vec<usize> = (0..p).filter(|&j| !coef_weights[j].is_pinned()).collect();
    let mut b = Array1::zeros(p);
    if active.is_empty() {
        return Ok(b);
    }
    let mut a = Array2::zeros((active.len(), active.len()));
    let mut rhs = Array1::zeros(active.len());
    for (r, &j) in active.iter().enumerate() {
        for (c, &k) in active.iter().enumerate() {
            a[[r, c]] = cache.gram[[j, k]];
        }
        a[[r, r]] += lambda_scale * coef_weights[j].finite().expect("active");
        rhs[r] = cache.xtwy[j];
    }
    let sol = cholesky_solve(&a, &rhs).map_err(|e| {
        Error::SingularSystem(format!("X'WX + diag(w) is not positive definite ({e})"))
    })?;
    let resid = (&a.dot(&sol) - &rhs).mapv(|v| v * v).sum().sqrt();
    let scale = rhs.mapv(|v| v * v).sum().sqrt();
    if resid > 1e-10 * scale.max(1e-300) {
        return Err(Error::SingularSystem(format!(
            "normal-equation residual {resid:.3e} exceeds 1e-10 * {scale:.3e}"
        )));
    }
    for (r, &j) in active.iter().enumerate() {
        b[j] = sol[r];
    }
    Ok(b)
}

/// Options for the iterative solvers.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_sweeps: usize,
    /// Convergence: maximum absolute coordinate change in a sweep.
    pub tol: f64,
    pub warm_start: Option<Array1<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_sweeps: 10_000, tol: 1e-8, warm_start: None }
    }
}

/// A solver result with its convergence flag.
#[derive(Debug, Clone)]
pub struct SolverOutput {
    pub b: Array1<f64>,
    pub converged: bool,
    pub sweeps: usize,
}

/// Minimizes `(y-Xb)'W(y-Xb) + sum_j w_j |b_j|` by cyclic coordinate
/// descent. Pinned coordinates are exactly zero; the objective is
/// nonincreasing across sweeps; at convergence every coordinate satisfies
/// the subgradient condition within `tol * ||X_j||_W^2` (see
/// [`WeightedPenalizedLsProblem::kkt_violation`]).
pub fn solve_weighted_l1(
    prob: &WeightedPenalizedLsProblem,
    opts: &SolverOptions,
) -> Result<SolverOutput> {
    if prob.q != PenaltyExponent::L1 {
        return Err(Error::Unsupported("solve_weighted_l1 requires q = 1".into()));
    }
    let (n, p) = (prob.x.nrows(), prob.x.ncols());
    let mut b = match &opts.warm_start {
        Some(b0) if b0.len() == p => b0.clone(),
        Some(b0) => {
            return Err(Error::Data(format!("warm start has {} entries, need {p}", b0.len())))
        }
        None => Array1::zeros(p),
    };
    for j in 0..p {
        if prob.coef_weights[j].is_pinned() {
            b[j] = 0.0;
        }
    }

    // column weighted norms ||X_j||_W^2
    let col_norms: Vec<f64> = (0..p)
        .map(|j| {
            prob.x
                .index_axis(Axis(1), j)
                .iter()
                .zip(prob.obs_weights.iter())
                .map(|(&x, &w)| w * x * x)
                .sum()
        })
        .collect();

    if n > p {
        let cache = GramCache::new(&prob.x, &prob.y, &prob.obs_weights);
        let opts = SolverOptions { warm_start: Some(b), ..opts.clone() };
        return solve_weighted_l1_gram(&cache, &prob.coef_weights, prob.lambda_scale, &opts);
    }

    let mut sweeps = 0;
    let mut converged = false;
    {
        // residual updates
        let mut r = &prob.y - &prob.x.dot(&b);
        for sweep in 1..=opts.max_sweeps {
            sweeps = sweep;
            let mut max_change: f64 = 0.0;
            for j in 0..p {
                let Some(w) = prob.effective_weight(j) else { continue };
                if col_norms[j] <= 0.0 {
                    continue;
                }
                let col = prob.x.index_axis(Axis(1), j);
                let grad: f64 = col
                    .iter()
                    .zip(r.iter())
                    .zip(prob.obs_weights.iter())
                    .map(|((&x, &ri), &wi)| wi * x * ri)
                    .sum();
                let z = grad + col_norms[j] * b[j];
                let new = soft_threshold(z, w / 2.0) / col_norms[j];
                let delta = new - b[j];
                if delta != 0.0 {
                    r.scaled_add(-delta, &col);
                    b[j] = new;
                    max_change = max_change.max(delta.abs());
                }
            }
            if max_change < opts.tol {
                converged = true;
                break;
            }
        }
    }
    Ok(SolverOutput { b, converged, sweeps })
}

/// Minimizes `(y-Xb)'W(y-Xb) + sum_j w_j b_j^2` through the normal
/// equations `(X'WX + diag(w)) b = X'Wy`, solved by Cholesky factorization
/// on the non-pinned coordinates. Errors when the system is not positive
/// definite (rank-deficient design with vanishing weights).
pub fn solve_weighted_l2(prob: &WeightedPenalizedLsProblem) -> Result<Array1<f64>> {
    if prob.q != PenaltyExponent::L2 {
        return Err(Error::Unsupported("solve_weighted_l2 requires q = 2".into()));
    }
    let p = prob.x.ncols();
    let active: Vec<usize> = (0..p).filter(|&j| !prob.coef_weights[j].is_pinned()).collect();
    let mut b = Array1::zeros(p);
    if active.is_empty() {
        return Ok(b);
    }
    let wx = {
        let mut wx = prob.x.select(Axis(1), &active);
        for (mut row, &w) in wx.rows_mut().into_iter().zip(prob.obs_weights.iter()) {
            row *= w;
        }
        wx
    };
    let xa = prob.x.select(Axis(1), &active);
    let mut a = xa.t().dot(&wx);
    for (k, &j) in active.iter().enumerate() {
        a[[k, k]] += prob.effective_weight(j).expect("active coordinate") ;
    }
    let rhs = wx.t().dot(&prob.y);
    let sol = cholesky_solve(&a, &rhs).map_err(|e| {
        Error::SingularSystem(format!(
            "X'WX + diag(w) is not positive definite ({e}); a zero weight on a \
             rank-deficient design has no unique minimizer"
        ))
    })?;
    // residual certificate
    let resid = (&a.dot(&sol) - &rhs).mapv(|v| v * v).sum().sqrt();
    let scale = rhs.mapv(|v| v * v).sum().sqrt();
    if resid > 1e-10 * scale.max(1e-300) {
        return Err(Error::SingularSystem(format!(
            "normal-equation residual {resid:.3e} exceeds 1e-10 * {scale:.3e}"
        )));
    }
    for (k, &j) in active.iter().enumerate() {
        b[j] = sol[k];
    }
    Ok(b)
}

/// Solves the grouped problem `(y-Xb)'W(y-Xb) + sum_l w_l ||b_l||_q^q` by
/// broadcasting each group weight to its coordinates (the penalty is
/// coordinate-separable given the weights) and delegating to the ungrouped
/// kernels.
pub fn solve_grouped(
    prob: &WeightedPenalizedLsProblem,
    groups: &GroupPartition,
    group_weights: &[Weight],
    opts: &SolverOptions,
) -> Result<SolverOutput> {
    if groups.p() != prob.x.ncols() {
        return Err(Error::Data("partition does not match problem dimension".into()));
    }
    if group_weights.len() != groups.len() {
        return Err(Error::Data(format!(
            "{} group weights for {} groups",
            group_weights.len(),
            groups.len()
        )));
    }
    let mut coef_weights = vec![Weight::Pinned; prob.x.ncols()];
    for (l, group) in groups.iter().enumerate() {
        for &j in group {
            coef_weights[j] = group_weights[l];
        }
    }
    let broadcast = WeightedPenalizedLsProblem { coef_weights, ..prob.clone() };
    match prob.q {
        PenaltyExponent::L1 => solve_weighted_l1(&broadcast, opts),
        PenaltyExponent::L2 => {
            let b = solve_weighted_l2(&broadcast)?;
            Ok(SolverOutput { b, converged: true, sweeps: 1 })
        }
    }
}

/// One quadratic approximation of the logistic log-likelihood at
/// `b_current`: returns the working response
/// `X b + W^{-1}(y - pi)` and the observation weights `pi (1 - pi)`,
/// floored at 1e-6 so separation cannot produce infinities.
pub fn logistic_quadratic_approx(
    x: &Array2<f64>,
    y: &Array1<f64>,
    b_current: &Array1<f64>,
) -> (Array1<f64>, Array1<f64>) {
    const W_FLOOR: f64 = 1e-6;
    let lin = x.dot(b_current);
    let pi = lin.mapv(|v| 1.0 / (1.0 + (-v).exp()));
    let w = pi.mapv(|p| (p * (1.0 - p)).max(W_FLOOR));
    let working = &lin + &((y - &pi) / &w);
    (working, w)
}

/// Dense Cholesky solve of a symmetric positive-definite system.
fn cholesky_solve(a: &Array2<f64>, rhs: &Array1<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    let mut l = a.clone();
    for j in 0..n {
        for k in 0..j {
            let ljk = l[[j, k]];
            for i in j..n {
                l[[i, j]] -= l[[i, k]] * ljk;
            }
        }
        let d = l[[j, j]];
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::SingularSystem(format!("non-positive pivot {d} at {j}")));
        }
        let s = d.sqrt();
        for i in j..n {
            l[[i, j]] /= s;
        }
    }
    // forward substitution L z = rhs
    let mut z = rhs.clone();
    for i in 0..n {
        for k in 0..i {
            z[i] = z[i] - l[[i, k]] * z[k];
        }
        z[i] /= l[[i, i]];
    }
    // back substitution L' b = z
    let mut b = z;
    for i in (0..n).rev() {
        for k in i + 1..n {
            b[i] = b[i] - l[[k, i]] * b[k];
        }
        b[i] /= l[[i, i]];
    }
    Ok(b)
}

/// Ordinary least squares via the normal equations (ridge-free); errors on
/// rank deficiency.
pub fn ols(x: &Array2<f64>, y: &Array1<f64>) -> Result<Array1<f64>> {
    let a = x.t().dot(x);
    let rhs = x.t().dot(y);
    cholesky_solve(&a, &rhs)
        .map_err(|e| Error::SingularSystem(format!("X'X is singular: {e}")))
}

/// Ridge solve `(X'X + reg I) b = X'y`.
pub fn ridge(x: &Array2<f64>, y: &Array1<f64>, reg: f64) -> Result<Array1<f64>> {
    let mut a = x.t().dot(x);
    for j in 0..a.nrows() {
        a[[j, j]] += reg;
    }
    cholesky_solve(&a, &x.t().dot(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn all_finite(ws: &[f64]) -> Vec<Weight> {
        ws.iter().map(|&w| Weight::Finite(w)).collect()
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(0.0, 5.0), 0.0);
        assert_eq!(soft_threshold(-4.0, 1.5), -2.5);
    }

    #[test]
    fn l1_orthogonal_design_soft_thresholds() {
        // X = I, w = (2, 2): solution is S(y_j, w_j/2)
        let prob = WeightedPenalizedLsProblem::unweighted_obs(
            array![[1.0, 0.0], [0.0, 1.0]],
            array![3.0, 0.5],
            all_finite(&[2.0, 2.0]),
            PenaltyExponent::L1,
            1.0,
        )
        .unwrap();
        let out = solve_weighted_l1(&prob, &SolverOptions::default()).unwrap();
        assert!(out.converged);
        assert_relative_eq!(out.b[0], 2.0, max_relative = 1e-10);
        assert_eq!(out.b[1], 0.0);
    }

    #[test]
    fn l1_all_pinned_gives_zero() {
        let prob = WeightedPenalizedLsProblem::unweighted_obs(
            array![[1.0, 0.5], [0.2, 1.0]],
            array![3.0, 0.5],
            vec![Weight::Pinned, Weight::Pinned],
            PenaltyExponent::L1,
            1.0,
        )
        .unwrap();
        let out = solve_weighted_l1(&prob, &SolverOptions::default()).unwrap();
        assert_eq!(out.b, array![0.0, 0.0]);
    }

    #[test]
    fn l1_zero_weights_recover_least_squares() {
        let x = array![[2.0, 1.0], [1.0, 3.0]];
        let y = array![4.0, 5.0];
        let prob = WeightedPenalizedLsProblem::unweighted_obs(
            x.clone(),
            y.clone(),
            all_finite(&[0.0, 0.0]),
            PenaltyExponent::L1,
            1.0,
        )
        .unwrap();
        let mut opts = SolverOptions::default();
        opts.tol = 1e-12;
        let out = solve_weighted_l1(&prob, &opts).unwrap();
        let exact = ols(&x, &y).unwrap();
        assert_relative_eq!(out.b[0], exact[0], max_relative = 1e-8);
        assert_relative_eq!(out.b[1], exact[1], max_relative = 1e-8);
    }

    #[test]
    fn l2_orthogonal_closed_form() {
        // X = I, W = I, w = (1, 1): b_j = y_j / (1 + w_j)
        let prob = WeightedPenalizedLsProblem::unweighted_obs(
            array![[1.0, 0.0], [0.0, 1.0]],
            array![4.0, 2.0],
            all_finite(&[1.0, 1.0]),
            PenaltyExponent::L2,
            1.0,
        )
        .unwrap();
        let b = solve_weighted_l2(&prob).unwrap();
        assert_relative_eq!(b[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(b[1], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn l2_pinned_coordinate_solves_complement() {
        let x = array![[2.0, 1.0, 0.3], [1.0, 3.0, -0.4], [0.5, -1.0, 2.0]];
        let y = array![4.0, 5.0, 1.0];
        let prob = WeightedPenalizedLsProblem::unweighted_obs(
            x.clone(),
            y.clone(),
            vec![Weight::Finite(0.5), Weight::Pinned, Weight::Finite(0.2)],
            PenaltyExponent::L2,
            1.0,
        )
        .unwrap();
        let b = solve_weighted_l2(&prob).unwrap();
        assert_eq!(b[1], 0.0);
        // complement system solved exactly
        let xa = x.select(Axis(1), &[0, 2]);
        let mut a = xa.t().dot(&xa);
        a[[0, 0]] += 0.5;
        a[[1, 1]] += 0.2;
        let sol = cholesky_solve(&a, &xa.t().dot(&y)).unwrap();
        assert_relative_eq!(b[0], sol[0], max_relative = 1e-12);
        assert_relative_eq!(b[2], sol[1], max_relative = 1e-12);
    }

    #[test]
    fn l2_weights_to_zero_approach_ols() {
        let x = array![[2.0, 1.0], [1.0, 3.0], [0.3, 0.9]];
        let y = array![4.0, 5.0, 1.2];
        let exact = ols(&x, &y).unwrap();
        let prob = WeightedPenalizedLsProblem::unweighted_obs(
            x,
            y,
            all_finite(&[1e-12, 1e-12]),
            PenaltyExponent::L2,
            1.0,
        )
        .unwrap();
        let b = solve_weighted_l2(&prob).unwrap();
        assert_relative_eq!(b[0], exact[0], max_relative = 1e-9);
        assert_relative_eq!(b[1], exact[1], max_relative = 1e-9);
    }

    #[test]
    fn grouped_matches_per_coordinate_when_trivial() {
        let x = array![[1.0, 0.2], [0.1, 1.0], [0.4, -0.5]];
        let y = array![2.0, -1.0, 0.5];
        let weights = all_finite(&[0.7, 1.3]);
        let prob = WeightedPenalizedLsProblem::unweighted_obs(
            x,
            y,
            weights.clone(),
            PenaltyExponent::L1,
            1.0,
        )
        .unwrap();
        let direct = solve_weighted_l1(&prob, &SolverOptions::default()).unwrap();
        let grouped = solve_grouped(
            &prob,
            &GroupPartition::singletons(2),
            &weights,
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(direct.b, grouped.b);
    }

    #[test]
    fn grouped_orthogonal_soft_threshold_and_pinning() {
        let x = Array2::eye(4);
        let y = array![3.0, 3.0, 1.0, 1.0];
        let prob = WeightedPenalizedLsProblem::unweighted_obs(
            x,
            y,
            all_finite(&[0.0; 4]),
            PenaltyExponent::L1,
            1.0,
        )
        .unwrap();
        let groups = GroupPartition::contiguous_blocks(4, 2).unwrap();
        // shared weight 2 per group: per-coordinate threshold 1
        let out = solve_grouped(
            &prob,
            &groups,
            &[Weight::Finite(2.0), Weight::Finite(2.0)],
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(out.b, array![2.0, 2.0, 0.0, 0.0]);
        // pinned second group is exactly zero
        let out = solve_grouped(
            &prob,
            &groups,
            &[Weight::Finite(0.5), Weight::Pinned],
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(out.b[2], 0.0);
        assert_eq!(out.b[3], 0.0);
        assert!(out.b[0] > 0.0);
    }

    #[test]
    fn logistic_approx_at_zero() {
        let x = array![[1.0], [1.0]];
        let y = array![1.0, 0.0];
        let b = array![0.0];
        let (working, w) = logistic_quadratic_approx(&x, &y, &b);
        assert_relative_eq!(w[0], 0.25, max_relative = 1e-14);
        assert_relative_eq!(working[0], 2.0, max_relative = 1e-14);
        assert_relative_eq!(working[1], -2.0, max_relative = 1e-14);
    }

    #[test]
    fn logistic_approx_clamps_separation() {
        let x = array![[1.0]];
        let y = array![1.0];
        let b = array![40.0];
        let (working, w) = logistic_quadratic_approx(&x, &y, &b);
        assert_eq!(w[0], 1e-6);
        assert!(working[0].is_finite());
    }

    #[test]
    fn objective_nonincreasing_over_sweeps() {
        // run sweep-by-sweep via warm starts and watch the objective
        let x = array![
            [0.5, -1.2, 0.3, 2.0],
            [1.0, 0.4, -0.8, 0.1],
            [-0.7, 1.1, 0.9, -0.6],
            [0.2, 0.3, 1.4, 0.8],
            [1.3, -0.5, 0.2, -1.0]
        ];
        let y = array![1.0, -0.4, 2.2, 0.1, -1.5];
        let weights = all_finite(&[0.8, 0.1, 1.5, 0.4]);
        let prob =
            WeightedPenalizedLsProblem::unweighted_obs(x, y, weights, PenaltyExponent::L1, 1.0)
                .unwrap();
        let mut b = Array1::zeros(4);
        let mut prev = prob.objective(&b);
        for _ in 0..40 {
            let opts = SolverOptions { max_sweeps: 1, tol: 0.0, warm_start: Some(b.clone()) };
            b = solve_weighted_l1(&prob, &opts).unwrap().b;
            let cur = prob.objective(&b);
            assert!(cur <= prev + 1e-12 * (1.0 + prev.abs()), "{cur} > {prev}");
            prev = cur;
        }
    }

    #[test]
    fn kkt_certificate_holds_at_convergence() {
        let x = array![
            [0.5, -1.2, 0.3],
            [1.0, 0.4, -0.8],
            [-0.7, 1.1, 0.9],
            [0.2, 0.3, 1.4],
            [1.3, -0.5, 0.2]
        ];
        let y = array![1.0, -0.4, 2.2, 0.1, -1.5];
        let prob = WeightedPenalizedLsProblem::unweighted_obs(
            x,
            y,
            all_finite(&[0.6, 1.0, 0.2]),
            PenaltyExponent::L1,
            1.0,
        )
        .unwrap();
        let opts = SolverOptions { tol: 1e-10, ..Default::default() };
        let out = solve_weighted_l1(&prob, &opts).unwrap();
        assert!(out.converged);
        assert!(prob.kkt_violation(&out.b) <= 1e-8, "kkt = {}", prob.kkt_violation(&out.b));
    }
}
