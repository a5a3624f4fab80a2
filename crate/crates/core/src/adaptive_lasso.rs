//! Adaptive LASSO: weighted l1-penalized regression with pilot-estimate
//! weights, cyclic coordinate descent and K-fold selection of the penalty.
//!
//! Objective (intercept unpenalized, `n` rows):
//!
//! * gaussian: `(1/2n) ||y - b0 - X b||^2 + lambda * sum_j w_j |b_j|`
//! * binomial: `-(1/n) loglik(b0, b) + lambda * sum_j w_j |b_j|`
//!
//! The binomial fit minimises successive quadratic majorizers of the
//! negative log-likelihood (curvature bound 1/4), each solved by the same
//! coordinate-descent kernel as the gaussian case, so every outer step is a
//! descent step.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{self, FeatureTable, FoldAssignment};
use crate::error::{ensure_finite, Error, Result};
use crate::par;
use crate::stats;

/// Pilot coefficients below this magnitude are excluded outright.
pub const EXCLUSION_THRESHOLD: f64 = 1e-10;
/// Probability clip used in the held-out binomial deviance.
pub const PROB_CLIP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Binomial,
}

/// Which estimator supplies the pilot coefficients for the weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pilot {
    /// Least squares on the 0/1 outcome, regardless of `family`.
    Ols,
    /// Maximum likelihood in the fitting family.
    FamilyMle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    MinError,
    OneStandardError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoParams {
    pub gamma: f64,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub family: Family,
    pub pilot: Pilot,
    pub rule: LambdaRule,
}

impl Default for LassoParams {
    fn default() -> Self {
        LassoParams {
            gamma: 1.0,
            n_lambda: 100,
            lambda_min_ratio: 1e-3,
            tol: 1e-7,
            max_iter: 10_000,
            family: Family::Binomial,
            pilot: Pilot::Ols,
            rule: LambdaRule::MinError,
        }
    }
}

impl LassoParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidArgument(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if self.n_lambda < 2 {
            return Err(Error::InvalidArgument("n_lambda must be >= 2".into()));
        }
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
            return Err(Error::InvalidArgument("lambda_min_ratio must lie in (0, 1)".into()));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidArgument("tol must be > 0 and max_iter >= 1".into()));
        }
        Ok(())
    }
}

/// Penalty weights; `f64::INFINITY` pins a coefficient at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn uniform(p: usize) -> Self {
        WeightVector(vec![1.0; p])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_excluded(&self, j: usize) -> bool {
        self.0[j].is_infinite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialEstimate {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub objective_value: f64,
    pub n_iter: usize,
    pub converged: bool,
    /// Objective after each sweep (gaussian) or majorization step (binomial).
    pub objective_trace: Vec<f64>,
}

impl LassoFit {
    pub fn support(&self) -> Vec<usize> {
        (0..self.coefficients.len())
            .filter(|&j| self.coefficients[j] != 0.0)
            .collect()
    }

    pub fn linear_predictor(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                self.intercept
                    + (0..x.ncols())
                        .map(|j| x[(i, j)] * self.coefficients[j])
                        .sum::<f64>()
            })
            .collect()
    }
}

fn col(x: &DMatrix<f64>, j: usize) -> &[f64] {
    let n = x.nrows();
    &x.as_slice()[j * n..(j + 1) * n]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_inputs(x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "design has {} rows but response has {}",
            x.nrows(),
            y.len()
        )));
    }
    ensure_finite(x.as_slice(), "design matrix")?;
    ensure_finite(y, "response")
}

/// Solves the symmetric positive (semi)definite system `a z = b`, adding a
/// ridge of `1e-6 * trace / p` when `a` is singular or badly conditioned.
pub(crate) fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let p = a.nrows();
    if p == 0 {
        return Ok(DVector::zeros(0));
    }
    let well_conditioned = |m: &DMatrix<f64>| {
        m.clone().cholesky().filter(|c| {
            let d = c.l_dirty().diagonal();
            let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
                (lo.min(v.abs()), hi.max(v.abs()))
            });
            hi > 0.0 && (lo / hi).powi(2) > 1e-12
        })
    };
    if let Some(c) = well_conditioned(a) {
        return Ok(c.solve(b));
    }
    let ridge = 1e-6 * a.trace() / p as f64;
    let ridge = if ridge > 0.0 { ridge } else { 1e-6 };
    let mut reg = a.clone();
    for i in 0..p {
        reg[(i, i)] += ridge;
    }
    reg.cholesky()
        .map(|c| c.solve(b))
        .ok_or_else(|| Error::Numerical("normal equations not solvable even with ridge".into()))
}

/// Pilot estimate: least squares (gaussian) or logistic maximum likelihood
/// by iteratively reweighted least squares (binomial), with intercept.
pub fn initial_estimate(x: &DMatrix<f64>, y: &[f64], family: Family) -> Result<InitialEstimate> {
    check_inputs(x, y)?;
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidArgument("initial estimate needs n > 1".into()));
    }
    match family {
        Family::Gaussian => ols(x, y),
        Family::Binomial => logistic_irls(x, y),
    }
}

fn ols(x: &DMatrix<f64>, y: &[f64]) -> Result<InitialEstimate> {
    let (n, p) = x.shape();
    let means: Vec<f64> = (0..p).map(|j| stats::mean(col(x, j))).collect();
    let ybar = stats::mean(y);
    let xc = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - means[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - ybar));
    let gram = xc.transpose() * &xc;
    let rhs = xc.transpose() * yc;
    let beta = solve_spd(&gram, &rhs)?;
    let intercept = ybar - beta.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
    Ok(InitialEstimate {
        intercept,
        coefficients: beta.iter().copied().collect(),
    })
}

fn logistic_irls(x: &DMatrix<f64>, y: &[f64]) -> Result<InitialEstimate> {
    let (n, p) = x.shape();
    if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidArgument(format!("binomial response at {i} is not 0/1")));
    }
    let ybar = stats::mean(y);
    if ybar <= 0.0 || ybar >= 1.0 {
        return Err(Error::Numerical(format!(
            "base rate {ybar} has no finite logit; binomial fit undefined"
        )));
    }
    let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
    let mut beta = DVector::zeros(p + 1);
    beta[0] = stats::logit(ybar);
    let loglik = |b: &DVector<f64>| {
        let eta = &design * b;
        eta.iter()
            .zip(y)
            .map(|(e, yi)| yi * e - stats::log1p_exp(*e))
            .sum::<f64>()
    };
    let mut ll = loglik(&beta);
    for _ in 0..100 {
        let eta = &design * &beta;
        let prob: Vec<f64> = eta.iter().map(|e| stats::logistic(*e)).collect();
        let resid = DVector::from_iterator(n, prob.iter().zip(y).map(|(pi, yi)| yi - pi));
        let grad = design.transpose() * resid;
        if grad.norm() < 1e-10 {
            break;
        }
        let mut h = DMatrix::zeros(p + 1, p + 1);
        for i in 0..n {
            let w = prob[i] * (1.0 - prob[i]);
            let row = design.row(i);
            h += w * row.transpose() * row;
        }
        let step = solve_spd(&h, &grad)?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = &beta + t * &step;
            let cand_ll = loglik(&cand);
            if cand_ll.is_finite() && cand_ll >= ll - 1e-12 * ll.abs() {
                let gain = cand_ll - ll;
                beta = cand;
                ll = cand_ll;
                accepted = gain.abs() > 1e-14 * (1.0 + ll.abs());
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Numerical("logistic pilot fit diverged".into()));
    }
    Ok(InitialEstimate {
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
    })
}

/// `w_j = 1 / |beta_j|^gamma`, with near-zero pilots mapped to +inf.
pub fn adaptive_weights(beta_init: &[f64], gamma: f64) -> Result<WeightVector> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be > 0, got {gamma}")));
    }
    ensure_finite(beta_init, "pilot coefficients")?;
    Ok(WeightVector(
        beta_init
            .iter()
            .map(|b| {
                if b.abs() < EXCLUSION_THRESHOLD {
                    f64::INFINITY
                } else {
                    1.0 / b.abs().powf(gamma)
                }
            })
            .collect(),
    ))
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Smallest penalty at which every slope is zero.
pub fn lambda_max(x: &DMatrix<f64>, y: &[f64], weights: &WeightVector) -> f64 {
    let n = x.nrows() as f64;
    let ybar = stats::mean(y);
    let yc: Vec<f64> = y.iter().map(|v| v - ybar).collect();
    (0..x.ncols())
        .filter(|&j| !weights.is_excluded(j))
        .map(|j| (dot(col(x, j), &yc) / n).abs() / weights.0[j])
        .fold(0.0, f64::max)
}

fn penalty(beta: &[f64], lambda: f64, weights: &WeightVector) -> f64 {
    beta.iter()
        .zip(&weights.0)
        .filter(|(b, _)| **b != 0.0)
        .map(|(b, w)| lambda * w * b.abs())
        .sum()
}

/// Gaussian objective `(1/2n)RSS + penalty`.
pub fn gaussian_objective(
    x: &DMatrix<f64>,
    y: &[f64],
    intercept: f64,
    beta: &[f64],
    lambda: f64,
    weights: &WeightVector,
) -> f64 {
    let n = x.nrows();
    let rss: f64 = (0..n)
        .map(|i| {
            let f = intercept + (0..x.ncols()).map(|j| x[(i, j)] * beta[j]).sum::<f64>();
            (y[i] - f).powi(2)
        })
        .sum();
    rss / (2.0 * n as f64) + penalty(beta, lambda, weights)
}

/// Binomial objective `-(1/n) loglik + penalty`.
pub fn binomial_objective(
    x: &DMatrix<f64>,
    y: &[f64],
    intercept: f64,
    beta: &[f64],
    lambda: f64,
    weights: &WeightVector,
) -> f64 {
    let n = x.nrows();
    let nll: f64 = (0..n)
        .map(|i| {
            let eta = intercept + (0..x.ncols()).map(|j| x[(i, j)] * beta[j]).sum::<f64>();
            stats::log1p_exp(eta) - y[i] * eta
        })
        .sum();
    nll / n as f64 + penalty(beta, lambda, weights)
}

/// Coordinate-descent kernel for `(1/2n) sum_i w_i (z_i - b0 - x_i'b)^2 +
/// penalty`. `resid` must hold `z - b0 - X b` on entry and is kept current.
/// Returns `(sweeps, converged)`.
#[allow(clippy::too_many_arguments)]
fn cd_kernel(
    x: &DMatrix<f64>,
    obs_w: &[f64],
    intercept: &mut f64,
    beta: &mut [f64],
    resid: &mut [f64],
    lambda: f64,
    weights: &WeightVector,
    tol: f64,
    max_sweeps: usize,
    mut on_sweep: impl FnMut(&[f64], &[f64]),
) -> (usize, bool) {
    let n = x.nrows() as f64;
    let w_sum: f64 = obs_w.iter().sum();
    let curv: Vec<f64> = (0..beta.len())
        .map(|j| col(x, j).iter().zip(obs_w).map(|(v, w)| w * v * v).sum::<f64>() / n)
        .collect();
    for sweep in 1..=max_sweeps {
        let mut max_change: f64 = 0.0;
        let shift = resid.iter().zip(obs_w).map(|(r, w)| r * w).sum::<f64>() / w_sum;
        if shift != 0.0 {
            *intercept += shift;
            resid.iter_mut().for_each(|r| *r -= shift);
            max_change = max_change.max(shift.abs());
        }
        for j in 0..beta.len() {
            if weights.is_excluded(j) || curv[j] == 0.0 {
                beta[j] = 0.0;
                continue;
            }
            let xj = col(x, j);
            let a = curv[j];
            let g = xj.iter().zip(resid.iter()).zip(obs_w).map(|((v, r), w)| w * v * r).sum::<f64>() / n
                + a * beta[j];
            let new = soft_threshold(g, lambda * weights.0[j]) / a;
            let delta = new - beta[j];
            if delta != 0.0 {
                for (r, xv) in resid.iter_mut().zip(xj) {
                    *r -= delta * xv;
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        on_sweep(beta, resid);
        if max_change < tol {
            return (sweep, true);
        }
    }
    (max_sweeps, false)
}

/// Fits the weighted LASSO at a single `lambda`, warm-started from `start`
/// when given.
pub fn coordinate_descent(
    x: &DMatrix<f64>,
    y: &[f64],
    lambda: f64,
    weights: &WeightVector,
    params: &LassoParams,
) -> Result<LassoFit> {
    coordinate_descent_from(x, y, lambda, weights, params, None)
}

pub fn coordinate_descent_from(
    x: &DMatrix<f64>,
    y: &[f64],
    lambda: f64,
    weights: &WeightVector,
    params: &LassoParams,
    start: Option<(f64, &[f64])>,
) -> Result<LassoFit> {
    check_inputs(x, y)?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if weights.len() != x.ncols() {
        return Err(Error::InvalidArgument(format!(
            "{} weights for {} columns",
            weights.len(),
            x.ncols()
        )));
    }
    if weights.0.iter().any(|w| w.is_nan() || *w < 0.0) {
        return Err(Error::InvalidArgument("weights must be nonnegative".into()));
    }
    let (n, p) = x.shape();
    let (mut intercept, mut beta) = match start {
        Some((b0, b)) => (b0, b.to_vec()),
        None => (stats::mean(y), vec![0.0; p]),
    };
    for j in 0..p {
        if weights.is_excluded(j) {
            beta[j] = 0.0;
        }
    }
    let eta = |b0: f64, b: &[f64]| -> Vec<f64> {
        let mut e = vec![b0; n];
        for j in 0..p {
            if b[j] != 0.0 {
                for (ei, xv) in e.iter_mut().zip(col(x, j)) {
                    *ei += b[j] * xv;
                }
            }
        }
        e
    };
    let mut trace = Vec::new();
    match params.family {
        Family::Gaussian => {
            let e = eta(intercept, &beta);
            let mut resid: Vec<f64> = y.iter().zip(&e).map(|(yi, ei)| yi - ei).collect();
            let ones = vec![1.0; n];
            let (sweeps, converged) = cd_kernel(
                x,
                &ones,
                &mut intercept,
                &mut beta,
                &mut resid,
                lambda,
                weights,
                params.tol,
                params.max_iter,
                |b, r| {
                    let rss: f64 = r.iter().map(|v| v * v).sum();
                    trace.push(rss / (2.0 * n as f64) + penalty(b, lambda, weights));
                },
            );
            let objective_value = gaussian_objective(x, y, intercept, &beta, lambda, weights);
            Ok(LassoFit {
                intercept,
                coefficients: beta,
                lambda,
                objective_value,
                n_iter: sweeps,
                converged,
                objective_trace: trace,
            })
        }
        Family::Binomial => {
            let mut total = 0;
            let mut converged = false;
            let mut current = binomial_objective(x, y, intercept, &beta, lambda, weights);
            for _ in 0..params.max_iter {
                let e = eta(intercept, &beta);
                let prob: Vec<f64> = e.iter().map(|v| stats::logistic(*v)).collect();
                let old_b0 = intercept;
                let old = beta.clone();
                // Newton-type quadratic model first; if it fails to descend,
                // redo the step on the 1/4-curvature majorizer, which always does.
                let mut accepted = None;
                for majorize in [false, true] {
                    let obs_w: Vec<f64> = if majorize {
                        vec![0.25; n]
                    } else {
                        prob.iter().map(|p| (p * (1.0 - p)).max(1e-5)).collect()
                    };
                    let mut b0 = old_b0;
                    let mut b = old.clone();
                    let mut resid: Vec<f64> = prob
                        .iter()
                        .zip(y)
                        .zip(&obs_w)
                        .map(|((p, yi), w)| (yi - p) / w)
                        .collect();
                    let (sweeps, _) = cd_kernel(
                        x,
                        &obs_w,
                        &mut b0,
                        &mut b,
                        &mut resid,
                        lambda,
                        weights,
                        params.tol,
                        params.max_iter,
                        |_, _| {},
                    );
                    total += sweeps;
                    let obj = binomial_objective(x, y, b0, &b, lambda, weights);
                    if obj <= current || majorize {
                        accepted = Some((b0, b, obj));
                        break;
                    }
                }
                let (b0, b, obj) = accepted.expect("majorization step always accepted");
                intercept = b0;
                beta = b;
                current = obj.min(current);
                trace.push(obj);
                let change = old
                    .iter()
                    .zip(&beta)
                    .map(|(a, b)| (a - b).abs())
                    .fold((old_b0 - intercept).abs(), f64::max);
                if change < params.tol {
                    converged = true;
                    break;
                }
            }
            let objective_value = *trace.last().unwrap_or(&f64::NAN);
            Ok(LassoFit {
                intercept,
                coefficients: beta,
                lambda,
                objective_value,
                n_iter: total,
                converged,
                objective_trace: trace,
            })
        }
    }
}

/// Descending geometric grid from `lambda_max` to `lambda_max * ratio`.
pub fn lambda_grid(lambda_max: f64, n_lambda: usize, ratio: f64) -> Vec<f64> {
    let top = if lambda_max > 0.0 { lambda_max } else { 1.0 };
    (0..n_lambda)
        .map(|i| top * ratio.powf(i as f64 / (n_lambda - 1) as f64))
        .collect()
}

/// Fits every grid point in order, warm-starting each from the previous.
pub fn fit_path(
    x: &DMatrix<f64>,
    y: &[f64],
    grid: &[f64],
    weights: &WeightVector,
    params: &LassoParams,
) -> Result<Vec<LassoFit>> {
    let mut fits: Vec<LassoFit> = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let start = fits.last().map(|f| (f.intercept, f.coefficients.as_slice()));
        let fit = coordinate_descent_from(x, y, lambda, weights, params, start)?;
        fits.push(fit);
    }
    Ok(fits)
}

/// Held-out loss summed over rows: squared error or binomial deviance.
fn heldout_loss(family: Family, eta: &[f64], y: &[f64]) -> f64 {
    match family {
        Family::Gaussian => eta.iter().zip(y).map(|(e, yi)| (yi - e).powi(2)).sum(),
        Family::Binomial => eta
            .iter()
            .zip(y)
            .map(|(e, yi)| {
                let p = stats::logistic(*e).clamp(PROB_CLIP, 1.0 - PROB_CLIP);
                -2.0 * (yi * p.ln() + (1.0 - yi) * (1.0 - p).ln())
            })
            .sum(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambda_grid: Vec<f64>,
    pub mean_cv_error: Vec<f64>,
    pub se_cv_error: Vec<f64>,
    pub lambda_opt: f64,
    pub opt_index: usize,
    pub selected_indices: Vec<usize>,
    pub weights: WeightVector,
    /// Refit on all rows at `lambda_opt`, on the standardized scale.
    pub fit: LassoFit,
}

/// K-fold selection of the penalty followed by a full-data refit.
///
/// Continuous columns are standardized first; pilot weights and the grid
/// are computed once on all rows and shared by every fold.
pub fn cv_select(table: &FeatureTable, folds: &FoldAssignment, params: &LassoParams) -> Result<CvResult> {
    params.validate()?;
    if folds.fold_index.len() != table.n_rows() {
        return Err(Error::InvalidArgument(format!(
            "folds cover {} rows, table has {}",
            folds.fold_index.len(),
            table.n_rows()
        )));
    }
    let (std_table, _) = dataset::standardize(table)?;
    let x = std_table.values().clone();
    let y = table.outcome_f64();
    cv_select_matrix(&x, &y, folds, params)
}

/// Matrix form of [`cv_select`]; `x` is used as given.
pub fn cv_select_matrix(
    x: &DMatrix<f64>,
    y: &[f64],
    folds: &FoldAssignment,
    params: &LassoParams,
) -> Result<CvResult> {
    params.validate()?;
    check_inputs(x, y)?;
    let pilot_family = match params.pilot {
        Pilot::Ols => Family::Gaussian,
        Pilot::FamilyMle => params.family,
    };
    let pilot = initial_estimate(x, y, pilot_family)?;
    let weights = adaptive_weights(&pilot.coefficients, params.gamma)?;
    let grid = lambda_grid(lambda_max(x, y, &weights), params.n_lambda, params.lambda_min_ratio);

    let fold_losses: Vec<Result<Vec<f64>>> = par::map_indexed(folds.k, |k| {
        let train = folds.train_rows(k);
        let test = folds.test_rows(k);
        let xt = select_rows(x, &train);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let xv = select_rows(x, &test);
        let yv: Vec<f64> = test.iter().map(|&i| y[i]).collect();
        let path = fit_path(&xt, &yt, &grid, &weights, params)?;
        Ok(path
            .iter()
            .map(|f| heldout_loss(params.family, &f.linear_predictor(&xv), &yv))
            .collect())
    });
    let fold_losses = fold_losses.into_iter().collect::<Result<Vec<_>>>()?;
    let sizes = folds.fold_sizes();
    let n = y.len() as f64;
    let mut mean_cv_error = vec![0.0; grid.len()];
    let mut se_cv_error = vec![0.0; grid.len()];
    for l in 0..grid.len() {
        mean_cv_error[l] = fold_losses.iter().map(|f| f[l]).sum::<f64>() / n;
        let per_fold: Vec<f64> = fold_losses
            .iter()
            .zip(&sizes)
            .map(|(f, &s)| f[l] / s as f64)
            .collect();
        se_cv_error[l] = stats::sd(&per_fold) / (folds.k as f64).sqrt();
    }
    let min_index = (0..grid.len())
        .min_by(|&a, &b| mean_cv_error[a].total_cmp(&mean_cv_error[b]))
        .unwrap_or(0);
    let opt_index = match params.rule {
        LambdaRule::MinError => min_index,
        LambdaRule::OneStandardError => {
            let bound = mean_cv_error[min_index] + se_cv_error[min_index];
            (0..=min_index).find(|&l| mean_cv_error[l] <= bound).unwrap_or(min_index)
        }
    };
    let path = fit_path(x, y, &grid[..=opt_index], &weights, params)?;
    let fit = path.into_iter().last().expect("grid is non-empty");
    Ok(CvResult {
        lambda_opt: grid[opt_index],
        lambda_grid: grid,
        mean_cv_error,
        se_cv_error,
        opt_index,
        selected_indices: fit.support(),
        weights,
        fit,
    })
}

fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)])
}

/// JSON selection report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub family: Family,
    pub gamma: f64,
    pub rule: LambdaRule,
    pub lambda_grid: Vec<f64>,
    pub cv_mean: Vec<f64>,
    pub cv_se: Vec<f64>,
    pub lambda_opt: f64,
    pub selected_features: Vec<String>,
    pub intercept: f64,
    /// Standardized-scale coefficients for every candidate feature.
    pub coefficients: Vec<NamedValue>,
    pub weights: Vec<NamedValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    /// `None` encodes an excluded (+inf weight) feature.
    pub value: Option<f64>,
}

impl SelectionReport {
    pub fn new(cv: &CvResult, names: &[String], params: &LassoParams) -> Self {
        let named = |vals: &[f64]| {
            names
                .iter()
                .zip(vals)
                .map(|(n, v)| NamedValue {
                    name: n.clone(),
                    value: v.is_finite().then_some(*v),
                })
                .collect()
        };
        SelectionReport {
            family: params.family,
            gamma: params.gamma,
            rule: params.rule,
            lambda_grid: cv.lambda_grid.clone(),
            cv_mean: cv.mean_cv_error.clone(),
            cv_se: cv.se_cv_error.clone(),
            lambda_opt: cv.lambda_opt,
            selected_features: cv.selected_indices.iter().map(|&j| names[j].clone()).collect(),
            intercept: cv.fit.intercept,
            coefficients: named(&cv.fit.coefficients),
            weights: named(&cv.weights.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut r = rng::stream(seed, 0);
        DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut r))
    }

    /// Centered columns with x_j'x_k / n = delta_jk (Gram-Schmidt).
    fn scaled_orthonormal(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut q = random_matrix(n, p + 1, seed);
        q.column_mut(0).fill(1.0);
        for j in 0..=p {
            for k in 0..j {
                let proj = q.column(j).dot(&q.column(k));
                let ck = q.column(k).clone_owned();
                q.column_mut(j).axpy(-proj, &ck, 1.0);
            }
            let nrm = q.column(j).norm();
            q.column_mut(j).scale_mut(1.0 / nrm);
        }
        let s = (n as f64).sqrt();
        DMatrix::from_fn(n, p, |i, j| q[(i, j + 1)] * s)
    }

    fn gaussian_params() -> LassoParams {
        LassoParams {
            family: Family::Gaussian,
            tol: 1e-12,
            max_iter: 100_000,
            ..LassoParams::default()
        }
    }

    #[test]
    fn weights_formula_and_exclusion() {
        assert_eq!(adaptive_weights(&[2.0, 0.5], 1.0).unwrap().0, vec![0.5, 2.0]);
        let w = adaptive_weights(&[1.0, 0.0], 1.0).unwrap();
        assert_eq!(w.0[0], 1.0);
        assert!(w.is_excluded(1));
        assert!(adaptive_weights(&[1.0], 0.0).is_err());
        assert!(adaptive_weights(&[1.0], -1.0).is_err());
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }

    #[test]
    fn orthonormal_ols_is_projection() {
        let n = 60;
        let x = scaled_orthonormal(n, 4, 1);
        let y: Vec<f64> = random_matrix(n, 1, 2).iter().copied().collect();
        let est = initial_estimate(&x, &y, Family::Gaussian).unwrap();
        for j in 0..4 {
            let xty = dot(col(&x, j), &y) / n as f64;
            assert!((est.coefficients[j] - xty).abs() < 1e-12);
        }
    }

    #[test]
    fn ols_matches_direct_normal_equations() {
        let (n, p) = (50, 5);
        let x = random_matrix(n, p, 3);
        let y: Vec<f64> = random_matrix(n, 1, 4).iter().copied().collect();
        let est = initial_estimate(&x, &y, Family::Gaussian).unwrap();
        // Oracle: LU solve of the augmented normal equations [1 X]'[1 X] b = [1 X]'y.
        let a = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
        let lhs = a.transpose() * &a;
        let rhs = a.transpose() * DVector::from_column_slice(&y);
        let b = lhs.lu().solve(&rhs).unwrap();
        assert!((est.intercept - b[0]).abs() < 1e-8);
        for j in 0..p {
            assert!((est.coefficients[j] - b[j + 1]).abs() < 1e-8);
        }
    }

    #[test]
    fn binomial_pilot_no_signal_and_degenerate() {
        // Columns centered and orthogonal to y - ybar, so the MLE has zero slopes.
        let y = [1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let x = DMatrix::from_column_slice(8, 1, &[1.0, -1.0, 1.0, -1.0, 0.0, 0.0, 1.0, -1.0]);
        let est = initial_estimate(&x, &y, Family::Binomial).unwrap();
        assert!(est.coefficients[0].abs() < 1e-9);
        assert!((est.intercept - stats::logit(3.0 / 8.0)).abs() < 1e-9);
        let ones = [1.0; 8];
        assert!(initial_estimate(&x, &ones, Family::Binomial).is_err());
    }

    #[test]
    fn non_finite_inputs_rejected() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, f64::NAN, 2.0]);
        assert!(initial_estimate(&x, &[1.0, 2.0, 3.0], Family::Gaussian).is_err());
        let w = WeightVector::uniform(1);
        assert!(coordinate_descent(&x, &[1.0, 2.0, 3.0], 0.1, &w, &gaussian_params()).is_err());
    }

    #[test]
    fn zero_penalty_matches_ols() {
        let (n, p) = (80, 4);
        let x = random_matrix(n, p, 11);
        let y: Vec<f64> = (0..n)
            .map(|i| 1.0 + 2.0 * x[(i, 0)] - x[(i, 2)] + 0.3 * x[(i, 3)])
            .collect();
        let est = initial_estimate(&x, &y, Family::Gaussian).unwrap();
        let fit = coordinate_descent(&x, &y, 0.0, &WeightVector::uniform(p), &gaussian_params()).unwrap();
        assert!(fit.converged);
        for j in 0..p {
            assert!((fit.coefficients[j] - est.coefficients[j]).abs() < 1e-6);
        }
        assert!((fit.intercept - est.intercept).abs() < 1e-6);
    }

    #[test]
    fn lambda_max_zeroes_all_slopes() {
        let (n, p) = (40, 6);
        let x = random_matrix(n, p, 5);
        let y: Vec<f64> = (0..n).map(|i| x[(i, 1)] + 0.1 * i as f64).collect();
        let w = WeightVector(vec![1.0, 0.5, 2.0, 1.0, 3.0, 0.7]);
        let lmax = lambda_max(&x, &y, &w);
        let fit = coordinate_descent(&x, &y, lmax, &w, &gaussian_params()).unwrap();
        assert!(fit.coefficients.iter().all(|b| *b == 0.0));
        let below = coordinate_descent(&x, &y, lmax * 0.95, &w, &gaussian_params()).unwrap();
        assert!(below.coefficients.iter().any(|b| *b != 0.0));
    }

    #[test]
    fn orthonormal_design_soft_threshold_oracle() {
        let n = 50;
        let x = scaled_orthonormal(n, 5, 8);
        let y: Vec<f64> = random_matrix(n, 1, 9).iter().map(|v| 3.0 * v).collect();
        let w = WeightVector(vec![1.0, 0.5, 2.0, 1.5, f64::INFINITY]);
        let lambda = 0.4;
        let fit = coordinate_descent(&x, &y, lambda, &w, &gaussian_params()).unwrap();
        for j in 0..5 {
            let expected = if w.is_excluded(j) {
                0.0
            } else {
                soft_threshold(dot(col(&x, j), &y) / n as f64, lambda * w.0[j])
            };
            assert!((fit.coefficients[j] - expected).abs() <= 1e-10, "j={j}");
        }
    }

    fn kkt_ok(x: &DMatrix<f64>, y: &[f64], fit: &LassoFit, w: &WeightVector, tol: f64) {
        let n = x.nrows() as f64;
        let eta = fit.linear_predictor(x);
        let r: Vec<f64> = y.iter().zip(&eta).map(|(a, b)| a - b).collect();
        for j in 0..x.ncols() {
            if w.is_excluded(j) {
                assert_eq!(fit.coefficients[j], 0.0);
                continue;
            }
            let g = dot(col(x, j), &r) / n;
            let b = fit.coefficients[j];
            if b != 0.0 {
                assert!((g - fit.lambda * w.0[j] * b.signum()).abs() <= 10.0 * tol, "j={j}");
            } else {
                assert!(g.abs() <= fit.lambda * w.0[j] + 10.0 * tol, "j={j}");
            }
        }
    }

    #[test]
    fn kkt_conditions_hold_at_convergence() {
        let (n, p) = (100, 8);
        let x = random_matrix(n, p, 21);
        let y: Vec<f64> = (0..n).map(|i| x[(i, 0)] - 0.5 * x[(i, 3)] + 0.2 * x[(i, 5)]).collect();
        let w = WeightVector(vec![1.0, 2.0, 0.5, 1.0, 1.0, f64::INFINITY, 1.0, 3.0]);
        let params = LassoParams {
            tol: 1e-9,
            ..gaussian_params()
        };
        for lambda in [0.01, 0.05, 0.2] {
            let fit = coordinate_descent(&x, &y, lambda, &w, &params).unwrap();
            assert!(fit.converged);
            kkt_ok(&x, &y, &fit, &w, params.tol);
        }
    }

    #[test]
    fn objective_never_increases() {
        let (n, p) = (60, 10);
        let x = random_matrix(n, p, 31);
        let y: Vec<f64> = (0..n).map(|i| x[(i, 0)] * 2.0 + x[(i, 1)]).collect();
        let fit = coordinate_descent(&x, &y, 0.05, &WeightVector::uniform(p), &gaussian_params()).unwrap();
        for pair in fit.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
        let yb: Vec<f64> = (0..n).map(|i| f64::from(u8::from(x[(i, 0)] + x[(i, 1)] > 0.3))).collect();
        let params = LassoParams {
            family: Family::Binomial,
            ..LassoParams::default()
        };
        let fit = coordinate_descent(&x, &yb, 0.02, &WeightVector::uniform(p), &params).unwrap();
        assert!(fit.converged);
        for pair in fit.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
    }

    #[test]
    fn uniform_weights_reduce_to_plain_lasso_rescaled() {
        // All pilots equal c => weights 1/c: adaptive fit at lambda equals the
        // plain fit at lambda / c.
        let (n, p) = (70, 6);
        let x = random_matrix(n, p, 41);
        let y: Vec<f64> = (0..n).map(|i| x[(i, 0)] - x[(i, 2)] + 0.5 * x[(i, 4)]).collect();
        let c = 2.5;
        let adaptive = adaptive_weights(&vec![c; p], 1.0).unwrap();
        let plain = WeightVector::uniform(p);
        for lambda in [0.05, 0.2, 0.5] {
            let a = coordinate_descent(&x, &y, lambda, &adaptive, &gaussian_params()).unwrap();
            let b = coordinate_descent(&x, &y, lambda / c, &plain, &gaussian_params()).unwrap();
            assert_eq!(a.support(), b.support());
        }
    }

    #[test]
    fn infinite_weight_pins_coefficient() {
        let (n, p) = (40, 3);
        let x = random_matrix(n, p, 51);
        let y: Vec<f64> = (0..n).map(|i| 5.0 * x[(i, 1)]).collect();
        let w = WeightVector(vec![1.0, f64::INFINITY, 1.0]);
        let fit = coordinate_descent(&x, &y, 0.0, &w, &gaussian_params()).unwrap();
        assert_eq!(fit.coefficients[1], 0.0);
    }

    #[test]
    fn grid_is_descending_geometric() {
        let g = lambda_grid(2.0, 5, 1e-3);
        assert_eq!(g[0], 2.0);
        assert!((g[4] - 2e-3).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn cv_lambda_opt_is_on_grid_and_selection_matches_refit() {
        let (n, p) = (120, 8);
        let x = random_matrix(n, p, 61);
        let y: Vec<f64> = (0..n)
            .map(|i| f64::from(u8::from(1.5 * x[(i, 0)] - x[(i, 3)] > 0.0)))
            .collect();
        let yb: Vec<u8> = y.iter().map(|v| *v as u8).collect();
        let folds = dataset::make_folds(n, 5, 3, Some(&yb)).unwrap();
        let cv = cv_select_matrix(&x, &y, &folds, &LassoParams::default()).unwrap();
        assert!(cv.lambda_grid.contains(&cv.lambda_opt));
        assert_eq!(cv.selected_indices, cv.fit.support());
        assert!(cv.selected_indices.contains(&0));
        assert!(cv.selected_indices.contains(&3));
        let one_se = LassoParams {
            rule: LambdaRule::OneStandardError,
            ..LassoParams::default()
        };
        let cv1 = cv_select_matrix(&x, &y, &folds, &one_se).unwrap();
        assert!(cv1.lambda_opt >= cv.lambda_opt);
    }

    #[test]
    fn compensated_rescaling_keeps_selection() {
        let (n, p) = (100, 6);
        let x = random_matrix(n, p, 71);
        let y: Vec<f64> = (0..n).map(|i| 2.0 * x[(i, 0)] + x[(i, 1)] + 0.5 * x[(i, 5)]).collect();
        let pilot = initial_estimate(&x, &y, Family::Gaussian).unwrap().coefficients;
        let w = adaptive_weights(&pilot, 1.0).unwrap();
        let c = 7.0;
        let mut xs = x.clone();
        xs.column_mut(2).scale_mut(c);
        let mut pilot_s = pilot.clone();
        pilot_s[2] /= c;
        let ws = adaptive_weights(&pilot_s, 1.0).unwrap();
        for lambda in [0.01, 0.1, 0.3] {
            let a = coordinate_descent(&x, &y, lambda, &w, &gaussian_params()).unwrap();
            let b = coordinate_descent(&xs, &y, lambda, &ws, &gaussian_params()).unwrap();
            assert_eq!(a.support(), b.support());
        }
    }
}
