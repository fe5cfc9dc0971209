//! Weighted logistic regression with offsets and fractional outcomes.
//!
//! This is the single regression primitive behind every nuisance fit and
//! every fluctuation step: a Bernoulli quasi-likelihood fit by iteratively
//! reweighted least squares. Outcomes may be any value in [0, 1], weights
//! any nonnegative value, and a per-row offset is added to the linear
//! predictor with its coefficient fixed at one.

use crate::error::{Error, Result};

/// Probability clamp guarding logs and divisions downstream.
pub const PROB_EPS: f64 = 1e-12;
/// Linear predictors are capped at this magnitude inside the solver so that
/// degenerate strata cannot push coefficients to infinity.
pub const LINPRED_BOUND: f64 = 30.0;
/// Ridge added to the working normal-equation diagonal, relative to its
/// largest entry so that rescaling all weights cannot change the solution.
const RIDGE: f64 = 1e-10;
/// Score convergence tolerance, relative to the total weight.
const SCORE_TOL: f64 = 1e-8;
/// Relative deviance-change stopping tolerance. Effectively a machine-level
/// stall detector: stopping at looser thresholds leaves coefficients short
/// of the accuracy the score equations are asserted to hold at.
const DEVIANCE_TOL: f64 = 1e-15;
const MAX_ITERATIONS: usize = 100;
const MAX_HALVINGS: usize = 10;

/// Dense row-major design matrix. The first column is conventionally an
/// all-ones intercept, but nothing here requires it.
#[derive(Clone, Debug)]
pub struct DesignMatrix {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    /// Build from row-major entries; every entry must be finite.
    pub fn new(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::InvalidInput(format!(
                "design matrix must have n >= 1 and p >= 1 (got {n} x {p})"
            )));
        }
        if data.len() != n * p {
            return Err(Error::DimensionMismatch(format!(
                "design matrix storage has {} entries, expected {}",
                data.len(),
                n * p
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "design matrix contains a non-finite entry".into(),
            ));
        }
        Ok(DesignMatrix { n, p, data })
    }

    /// Build from columns, prepending an all-ones intercept column.
    pub fn with_intercept(n: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let p = columns.len() + 1;
        let mut data = Vec::with_capacity(n * p);
        for col in columns {
            if col.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "column has {} rows, expected {n}",
                    col.len()
                )));
            }
        }
        for i in 0..n {
            data.push(1.0);
            for col in columns {
                data.push(col[i]);
            }
        }
        DesignMatrix::new(n, p, data)
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }
}

/// A fitted weighted logistic regression.
#[derive(Clone, Debug)]
pub struct GlmFit {
    pub coefficients: Vec<f64>,
    /// True when the score equations hold to tolerance at exit and no
    /// linear predictor sat at the cap.
    pub converged: bool,
    pub iterations: usize,
    pub deviance: f64,
    /// Set when the linear-predictor cap was active at exit, the telltale of
    /// (quasi-)separation absorbed by the ridge fallback.
    pub capped: bool,
}

/// Inverse logit with the probability clamp. Errors on non-finite input.
pub fn expit(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::InvalidInput(format!("expit of non-finite value {x}")));
    }
    Ok(sigmoid(x))
}

/// Log odds; the argument is clamped into [PROB_EPS, 1 - PROB_EPS] first.
pub fn logit(p: f64) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    (p / (1.0 - p)).ln()
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    let p = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Quasi-binomial deviance, valid for fractional outcomes (0·ln 0 = 0).
fn quasi_deviance(y: &[f64], mu: &[f64], w: &[f64]) -> f64 {
    let mut dev = 0.0;
    for i in 0..y.len() {
        let (yi, mi, wi) = (y[i], mu[i], w[i]);
        if wi == 0.0 {
            continue;
        }
        let mut d = 0.0;
        if yi > 0.0 {
            d += yi * (yi / mi).ln();
        }
        if yi < 1.0 {
            d += (1.0 - yi) * ((1.0 - yi) / (1.0 - mi)).ln();
        }
        dev += 2.0 * wi * d;
    }
    dev
}

/// Solve A x = b by Gaussian elimination with partial pivoting; when the
/// system is near-singular (degenerate strata, separation), retry with a
/// tiny ridge on the diagonal relative to its largest entry, so rescaling
/// all weights cannot change the solution. A is p x p row-major.
fn solve_working(a: &[f64], b: &[f64], p: usize) -> Result<Vec<f64>> {
    let mut diag_max = 0.0_f64;
    for j in 0..p {
        diag_max = diag_max.max(a[j * p + j].abs());
    }
    if let Some(x) = eliminate(a.to_vec(), b.to_vec(), p, 1e-12 * diag_max) {
        return Ok(x);
    }
    let ridge = if diag_max > 0.0 { RIDGE * diag_max } else { RIDGE };
    let mut ridged = a.to_vec();
    for j in 0..p {
        ridged[j * p + j] += ridge;
    }
    eliminate(ridged, b.to_vec(), p, 0.0).ok_or_else(|| {
        Error::InvalidInput("singular working matrix in weighted least squares".into())
    })
}

/// Partial-pivot elimination; None when a pivot falls at or below the
/// threshold (near-singular).
fn eliminate(mut a: Vec<f64>, mut b: Vec<f64>, p: usize, pivot_floor: f64) -> Option<Vec<f64>> {
    for col in 0..p {
        let mut pivot = col;
        let mut best = a[col * p + col].abs();
        for r in (col + 1)..p {
            let v = a[r * p + col].abs();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if best <= pivot_floor || best == 0.0 {
            return None;
        }
        if pivot != col {
            for k in 0..p {
                a.swap(col * p + k, pivot * p + k);
            }
            b.swap(col, pivot);
        }
        let d = a[col * p + col];
        for r in (col + 1)..p {
            let f = a[r * p + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..p {
                a[r * p + k] -= f * a[col * p + k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; p];
    for col in (0..p).rev() {
        let mut s = b[col];
        for k in (col + 1)..p {
            s -= a[col * p + k] * x[k];
        }
        x[col] = s / a[col * p + col];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(x)
}

fn linear_predictor(x: &DesignMatrix, beta: &[f64], offset: &[f64], eta: &mut [f64]) {
    for i in 0..x.n_rows() {
        let row = x.row(i);
        let mut v = offset[i];
        for j in 0..row.len() {
            v += row[j] * beta[j];
        }
        eta[i] = v;
    }
}

/// Fit a weighted logistic regression of `y` on `x` with a fixed `offset`.
///
/// Outcomes may be fractional in [0, 1]; weights are nonnegative and must
/// not all be zero. Separation is absorbed by a small ridge and the linear
/// predictor cap; such fits come back flagged (`capped` / `!converged`)
/// rather than as hard errors.
pub fn fit_logistic(
    x: &DesignMatrix,
    y: &[f64],
    weights: &[f64],
    offset: &[f64],
) -> Result<GlmFit> {
    let n = x.n_rows();
    let p = x.n_cols();
    if y.len() != n || weights.len() != n || offset.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "design has {n} rows; y/weights/offset have {}/{}/{}",
            y.len(),
            weights.len(),
            offset.len()
        )));
    }
    let mut total_weight = 0.0;
    for i in 0..n {
        if !(y[i].is_finite() && (0.0..=1.0).contains(&y[i])) {
            return Err(Error::InvalidInput(format!(
                "outcome {} at row {} outside [0,1]",
                y[i], i
            )));
        }
        if !(weights[i].is_finite() && weights[i] >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "negative or non-finite weight {} at row {}",
                weights[i], i
            )));
        }
        if !offset[i].is_finite() {
            return Err(Error::InvalidInput(format!(
                "non-finite offset at row {i}"
            )));
        }
        total_weight += weights[i];
    }
    if total_weight <= 0.0 {
        return Err(Error::EmptyTargetingStratum);
    }

    let mut beta = vec![0.0; p];
    let mut eta = vec![0.0; n];
    let mut mu = vec![0.0; n];
    let score_tol = SCORE_TOL * total_weight;

    linear_predictor(x, &beta, offset, &mut eta);
    let mut capped = update_mu(&eta, &mut mu);
    let mut deviance = quasi_deviance(y, &mu, weights);
    let mut converged = false;
    let mut iterations = 0;
    // Iterate well past the reporting tolerance so coefficients and fitted
    // probabilities are accurate to ~1e-12 relative, not just the score.
    let score_floor = (1e-14 * total_weight).max(8.0 * f64::EPSILON * total_weight);

    for iter in 1..=MAX_ITERATIONS {
        iterations = iter;

        let max_score = max_abs_score(x, y, &mu, weights);
        if max_score <= score_floor {
            converged = true;
            break;
        }

        // Working response z = (eta - offset) + (y - mu)/(mu(1-mu)); solve the
        // ridged normal equations X' V X beta = X' V z with V = w mu(1-mu).
        let mut xtvx = vec![0.0; p * p];
        let mut xtvz = vec![0.0; p];
        for i in 0..n {
            let wi = weights[i];
            if wi == 0.0 {
                continue;
            }
            let v = mu[i] * (1.0 - mu[i]);
            let wv = wi * v;
            let zi = (eta[i] - offset[i]) + (y[i] - mu[i]) / v;
            let row = x.row(i);
            for j in 0..p {
                let xj = row[j];
                xtvz[j] += wv * xj * zi;
                for k in j..p {
                    xtvx[j * p + k] += wv * xj * row[k];
                }
            }
        }
        for j in 0..p {
            for k in 0..j {
                xtvx[j * p + k] = xtvx[k * p + j];
            }
        }
        let candidate = solve_working(&xtvx, &xtvz, p)?;

        // Step-halving back toward the previous iterate when the deviance
        // worsens.
        let mut accepted = false;
        let mut step = 1.0;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = beta
                .iter()
                .zip(&candidate)
                .map(|(&old, &new)| old + step * (new - old))
                .collect();
            linear_predictor(x, &trial, offset, &mut eta);
            let trial_capped = update_mu(&eta, &mut mu);
            let trial_dev = quasi_deviance(y, &mu, weights);
            if trial_dev <= deviance + 1e-12 || step <= 1.0 / (1 << MAX_HALVINGS) as f64 {
                let rel_change = (deviance - trial_dev).abs() / (deviance.abs() + 1e-30);
                beta = trial;
                capped = trial_capped;
                let stalled = rel_change < DEVIANCE_TOL;
                deviance = trial_dev;
                accepted = true;
                if stalled {
                    let score_now = max_abs_score(x, y, &mu, weights);
                    return Ok(finish(beta, score_now <= score_tol, iter, deviance, capped));
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    if !converged {
        // Re-evaluate at the final iterate.
        linear_predictor(x, &beta, offset, &mut eta);
        capped = update_mu(&eta, &mut mu);
        converged = max_abs_score(x, y, &mu, weights) <= score_tol;
    }
    Ok(finish(beta, converged, iterations, deviance, capped))
}

fn finish(beta: Vec<f64>, converged: bool, iterations: usize, deviance: f64, capped: bool) -> GlmFit {
    GlmFit {
        coefficients: beta,
        converged: converged && !capped,
        iterations,
        deviance,
        capped,
    }
}

/// Cap linear predictors and fill mu; returns whether any cap was active.
fn update_mu(eta: &[f64], mu: &mut [f64]) -> bool {
    let mut capped = false;
    for i in 0..eta.len() {
        let e = eta[i];
        if e.abs() > LINPRED_BOUND {
            capped = true;
        }
        mu[i] = sigmoid(e.clamp(-LINPRED_BOUND, LINPRED_BOUND));
    }
    capped
}

fn max_abs_score(x: &DesignMatrix, y: &[f64], mu: &[f64], w: &[f64]) -> f64 {
    let p = x.n_cols();
    let mut score = vec![0.0; p];
    for i in 0..x.n_rows() {
        let wi = w[i];
        if wi == 0.0 {
            continue;
        }
        let r = wi * (y[i] - mu[i]);
        let row = x.row(i);
        for j in 0..p {
            score[j] += r * row[j];
        }
    }
    score.iter().fold(0.0_f64, |acc, s| acc.max(s.abs()))
}

/// Predicted probabilities expit(X beta + offset).
pub fn predict_proba(fit: &GlmFit, x: &DesignMatrix, offset: &[f64]) -> Result<Vec<f64>> {
    if x.n_cols() != fit.coefficients.len() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} columns, fit has {} coefficients",
            x.n_cols(),
            fit.coefficients.len()
        )));
    }
    if offset.len() != x.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "offset has {} entries, design has {} rows",
            offset.len(),
            x.n_rows()
        )));
    }
    let mut eta = vec![0.0; x.n_rows()];
    linear_predictor(x, &fit.coefficients, offset, &mut eta);
    Ok(eta.into_iter().map(sigmoid).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn intercept_only(n: usize) -> DesignMatrix {
        DesignMatrix::with_intercept(n, &[]).unwrap()
    }

    fn zeros(n: usize) -> Vec<f64> {
        vec![0.0; n]
    }

    fn ones(n: usize) -> Vec<f64> {
        vec![1.0; n]
    }

    /// Grid + golden-section maximizer of the weighted Bernoulli
    /// log-likelihood for a one-parameter (intercept-only) model. Test-side
    /// oracle, independent of the IRLS path.
    fn grid_search_intercept(y: &[f64], w: &[f64], offset: &[f64]) -> f64 {
        let loglik = |b: f64| -> f64 {
            let mut ll = 0.0;
            for i in 0..y.len() {
                let p = sigmoid(b + offset[i]);
                ll += w[i] * (y[i] * p.ln() + (1.0 - y[i]) * (1.0 - p).ln());
            }
            ll
        };
        let mut best = (-20.0, loglik(-20.0));
        let mut b = -20.0;
        while b <= 20.0 {
            let v = loglik(b);
            if v > best.1 {
                best = (b, v);
            }
            b += 0.01;
        }
        // Golden-section refinement around the best grid point.
        let (mut lo, mut hi) = (best.0 - 0.02, best.0 + 0.02);
        let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = hi - phi * (hi - lo);
            let d = lo + phi * (hi - lo);
            if loglik(c) < loglik(d) {
                lo = c;
            } else {
                hi = d;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn expit_symmetry_and_known_values() {
        assert_eq!(expit(0.0).unwrap(), 0.5);
        assert!((expit(4.0_f64.ln()).unwrap() - 0.8).abs() < 1e-15);
        assert!((expit(logit(0.8)).unwrap() - 0.8).abs() < 1e-12);
        assert!(expit(f64::NAN).is_err());
        assert!(expit(f64::INFINITY).is_err());
    }

    #[test]
    fn intercept_only_balanced_outcome() {
        let x = intercept_only(4);
        let fit = fit_logistic(&x, &[1.0, 0.0, 1.0, 0.0], &ones(4), &zeros(4)).unwrap();
        assert!(fit.converged);
        assert!(fit.coefficients[0].abs() < 1e-9, "{:?}", fit.coefficients);
    }

    #[test]
    fn intercept_only_three_quarters() {
        let x = intercept_only(4);
        let fit = fit_logistic(&x, &[1.0, 1.0, 1.0, 0.0], &ones(4), &zeros(4)).unwrap();
        assert!((fit.coefficients[0] - 3.0_f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn weighted_mean_matches_grid_search() {
        // weights [2,1,1] on y [1,0,0]: weighted mean 1/2, so intercept 0.
        let x = intercept_only(3);
        let y = [1.0, 0.0, 0.0];
        let w = [2.0, 1.0, 1.0];
        let fit = fit_logistic(&x, &y, &w, &zeros(3)).unwrap();
        let oracle = grid_search_intercept(&y, &w, &zeros(3));
        assert!(fit.coefficients[0].abs() < 1e-8, "{:?}", fit.coefficients);
        assert!((fit.coefficients[0] - oracle).abs() < 1e-4);
    }

    #[test]
    fn predict_matches_contract() {
        let x = intercept_only(5);
        let zero_fit = GlmFit {
            coefficients: vec![0.0],
            converged: true,
            iterations: 0,
            deviance: 0.0,
            capped: false,
        };
        for p in predict_proba(&zero_fit, &x, &zeros(5)).unwrap() {
            assert_eq!(p, 0.5);
        }
        let log4 = GlmFit {
            coefficients: vec![4.0_f64.ln()],
            ..zero_fit.clone()
        };
        for p in predict_proba(&log4, &x, &zeros(5)).unwrap() {
            assert!((p - 0.8).abs() < 1e-15);
        }
        let fit = fit_logistic(&x, &[1.0, 1.0, 1.0, 0.0, 1.0], &ones(5), &zeros(5)).unwrap();
        // fitted mean 4/5 reproduced on prediction
        for p in predict_proba(&fit, &x, &zeros(5)).unwrap() {
            assert!((p - 0.8).abs() < 1e-8);
        }
    }

    #[test]
    fn fit_consistency_with_three_quarters_example() {
        let x = intercept_only(4);
        let fit = fit_logistic(&x, &[1.0, 1.0, 1.0, 0.0], &ones(4), &zeros(4)).unwrap();
        for p in predict_proba(&fit, &x, &zeros(4)).unwrap() {
            assert!((p - 0.75).abs() < 1e-8);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let x = intercept_only(3);
        assert!(fit_logistic(&x, &[1.0, 0.0], &ones(3), &zeros(3)).is_err());
        let fit = fit_logistic(&x, &[1.0, 0.0, 1.0], &ones(3), &zeros(3)).unwrap();
        let wider = DesignMatrix::with_intercept(3, &[vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(predict_proba(&fit, &wider, &zeros(3)).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = intercept_only(2);
        assert!(fit_logistic(&x, &[1.5, 0.0], &ones(2), &zeros(2)).is_err());
        assert!(fit_logistic(&x, &[1.0, 0.0], &[-1.0, 1.0], &zeros(2)).is_err());
        assert!(fit_logistic(&x, &[1.0, 0.0], &[0.0, 0.0], &zeros(2)).is_err());
        assert!(DesignMatrix::new(2, 1, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn separation_is_flagged_not_fatal() {
        // Perfectly separated covariate.
        let x = DesignMatrix::with_intercept(4, &[vec![-1.0, -1.0, 1.0, 1.0]]).unwrap();
        let fit = fit_logistic(&x, &[0.0, 0.0, 1.0, 1.0], &ones(4), &zeros(4)).unwrap();
        assert!(!fit.converged || fit.capped || fit.coefficients[1] > 5.0);
        for c in &fit.coefficients {
            assert!(c.is_finite());
        }
    }

    #[test]
    fn offset_shifts_the_fit() {
        // With offset logit(0.75) and y mean 0.75, the intercept is 0.
        let x = intercept_only(4);
        let off = vec![logit(0.75); 4];
        let fit = fit_logistic(&x, &[1.0, 1.0, 1.0, 0.0], &ones(4), &off).unwrap();
        assert!(fit.coefficients[0].abs() < 1e-8);
    }

    #[test]
    fn fractional_outcomes_intercept_is_logit_of_mean() {
        let x = intercept_only(3);
        let y = [0.2, 0.7, 0.45];
        let w = [1.0, 2.0, 0.5];
        let fit = fit_logistic(&x, &y, &w, &zeros(3)).unwrap();
        let wmean = (0.2 + 2.0 * 0.7 + 0.5 * 0.45) / 3.5;
        assert!((fit.coefficients[0] - logit(wmean)).abs() < 1e-8);
        let oracle = grid_search_intercept(&y, &w, &zeros(3));
        assert!((fit.coefficients[0] - oracle).abs() < 1e-4);
    }

    fn score_residual(x: &DesignMatrix, y: &[f64], w: &[f64], off: &[f64], fit: &GlmFit) -> f64 {
        let mu = predict_proba(fit, x, off).unwrap();
        let p = x.n_cols();
        let mut worst = 0.0_f64;
        for j in 0..p {
            let mut s = 0.0;
            for i in 0..x.n_rows() {
                s += w[i] * x.row(i)[j] * (y[i] - mu[i]);
            }
            worst = worst.max(s.abs());
        }
        worst
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn score_equations_hold_at_convergence(
            raw in proptest::collection::vec((0.0f64..1.0, 0.1f64..4.0, -1.5f64..1.5, -1.0f64..1.0), 8..40),
        ) {
            let n = raw.len();
            let y: Vec<f64> = raw.iter().map(|r| r.0).collect();
            let w: Vec<f64> = raw.iter().map(|r| r.1).collect();
            let xcol: Vec<f64> = raw.iter().map(|r| r.2).collect();
            let off: Vec<f64> = raw.iter().map(|r| r.3).collect();
            let x = DesignMatrix::with_intercept(n, &[xcol]).unwrap();
            let fit = fit_logistic(&x, &y, &w, &off).unwrap();
            if fit.converged {
                let sw: f64 = w.iter().sum();
                prop_assert!(score_residual(&x, &y, &w, &off, &fit) <= 1e-8 * sw);
            }
        }

        #[test]
        fn invariant_to_row_permutation(
            raw in proptest::collection::vec((0.0f64..1.0, 0.1f64..4.0, -1.5f64..1.5), 6..30),
            rot in 1usize..5,
        ) {
            let n = raw.len();
            let build = |rows: &[(f64, f64, f64)]| {
                let y: Vec<f64> = rows.iter().map(|r| r.0).collect();
                let w: Vec<f64> = rows.iter().map(|r| r.1).collect();
                let xcol: Vec<f64> = rows.iter().map(|r| r.2).collect();
                let x = DesignMatrix::with_intercept(n, &[xcol]).unwrap();
                fit_logistic(&x, &y, &w, &vec![0.0; n]).unwrap()
            };
            let a = build(&raw);
            let mut rotated = raw.clone();
            rotated.rotate_left(rot % n);
            let b = build(&rotated);
            for (ca, cb) in a.coefficients.iter().zip(&b.coefficients) {
                prop_assert!((ca - cb).abs() < 1e-10, "{ca} vs {cb}");
            }
        }

        #[test]
        fn invariant_to_weight_doubling(
            raw in proptest::collection::vec((0.0f64..1.0, 0.1f64..4.0, -1.5f64..1.5), 6..30),
        ) {
            let n = raw.len();
            let y: Vec<f64> = raw.iter().map(|r| r.0).collect();
            let w: Vec<f64> = raw.iter().map(|r| r.1).collect();
            let w2: Vec<f64> = w.iter().map(|v| 2.0 * v).collect();
            let xcol: Vec<f64> = raw.iter().map(|r| r.2).collect();
            let x = DesignMatrix::with_intercept(n, &[xcol]).unwrap();
            let a = fit_logistic(&x, &y, &w, &vec![0.0; n]).unwrap();
            let b = fit_logistic(&x, &y, &w2, &vec![0.0; n]).unwrap();
            for (ca, cb) in a.coefficients.iter().zip(&b.coefficients) {
                prop_assert!((ca - cb).abs() < 1e-10, "{ca} vs {cb}");
            }
        }

        #[test]
        fn intercept_only_closed_form(
            raw in proptest::collection::vec((0.01f64..0.99, 0.1f64..4.0), 4..30),
        ) {
            let n = raw.len();
            let y: Vec<f64> = raw.iter().map(|r| r.0).collect();
            let w: Vec<f64> = raw.iter().map(|r| r.1).collect();
            let x = intercept_only(n);
            let fit = fit_logistic(&x, &y, &w, &vec![0.0; n]).unwrap();
            let sw: f64 = w.iter().sum();
            let wmean: f64 = y.iter().zip(&w).map(|(yi, wi)| yi * wi).sum::<f64>() / sw;
            prop_assert!((fit.coefficients[0] - logit(wmean)).abs() < 1e-8);
        }
    }
}
