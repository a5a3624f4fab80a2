//! Maximum-likelihood logistic regression by Newton-Raphson (IRLS).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::adaptive_lasso::solve_spd;
use crate::error::{ensure_finite, Error, Result};
use crate::linalg::check_full_rank;
use crate::stats::{log1p_exp, logistic};

const GRAD_TOL: f64 = 1e-8;
const SEPARATION_NORM: f64 = 1e6;
const MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub log_likelihood: f64,
    pub gradient_norm: f64,
    pub n_iter: usize,
}

fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols() + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] })
}

fn log_likelihood(design: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>) -> f64 {
    let eta = design * beta;
    eta.iter().zip(y).map(|(e, yi)| yi * e - log1p_exp(*e)).sum()
}

/// Fits `P(y = 1) = logistic(b0 + x b)`. Errors on rank deficiency and on
/// (quasi-)complete separation, where the likelihood has no finite maximum.
pub fn fit_logistic_mle(x: &DMatrix<f64>, y: &[u8], names: &[String]) -> Result<LogisticModel> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::InvalidArgument(format!("{} labels for {n} rows", y.len())));
    }
    if names.len() != p {
        return Err(Error::InvalidArgument(format!("{} names for {p} columns", names.len())));
    }
    ensure_finite(x.as_slice(), "logistic design")?;
    if y.iter().any(|&v| v > 1) {
        return Err(Error::InvalidArgument("logistic outcome must be 0/1".into()));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == n {
        return Err(Error::Numerical("outcome has a single class; MLE diverges".into()));
    }
    check_full_rank(x, names, false)?;

    // Newton runs on centered and scaled columns; coefficients are mapped
    // back to input units before the convergence check.
    let centers: Vec<f64> = (0..p).map(|j| x.column(j).mean()).collect();
    let scales: Vec<f64> = (0..p)
        .map(|j| {
            let s = x.column(j).map(|v| v - centers[j]).norm() / (n as f64).sqrt();
            if s > 0.0 { s } else { 1.0 }
        })
        .collect();
    let scaled = DMatrix::from_fn(n, p + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            (x[(i, j - 1)] - centers[j - 1]) / scales[j - 1]
        }
    });
    let to_raw = |gamma: &DVector<f64>| {
        let mut beta = DVector::zeros(p + 1);
        beta[0] = gamma[0];
        for j in 0..p {
            beta[j + 1] = gamma[j + 1] / scales[j];
            beta[0] -= beta[j + 1] * centers[j];
        }
        beta
    };
    let design = with_intercept(x);
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let mut gamma = DVector::zeros(p + 1);
    let mut beta = to_raw(&gamma);
    let mut ll = log_likelihood(&scaled, &yf, &gamma);
    let mut grad_norm = f64::INFINITY;
    let mut iters = 0;
    for it in 0..MAX_ITER {
        iters = it + 1;
        beta = to_raw(&gamma);
        let prob: Vec<f64> = (&design * &beta).iter().map(|e| logistic(*e)).collect();
        let resid = DVector::from_iterator(n, prob.iter().zip(&yf).map(|(pi, yi)| yi - pi));
        grad_norm = (design.transpose() * &resid).norm();
        if grad_norm < GRAD_TOL {
            break;
        }
        let grad = scaled.transpose() * &resid;
        let mut h = DMatrix::zeros(p + 1, p + 1);
        for i in 0..n {
            let w = prob[i] * (1.0 - prob[i]);
            let row = scaled.row(i);
            h += w * row.transpose() * row;
        }
        let step = solve_spd(&h, &grad)?;
        // Near the optimum the likelihood cannot rise by more than its own
        // rounding error, so such steps are accepted.
        let slack = 1e-12 * ll.abs().max(1.0);
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let cand = &gamma + t * &step;
            let cand_ll = log_likelihood(&scaled, &yf, &cand);
            if cand_ll.is_finite() && cand_ll >= ll - slack {
                gamma = cand;
                ll = cand_ll;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if to_raw(&gamma).norm() > SEPARATION_NORM {
            return Err(separation(to_raw(&gamma).norm()));
        }
        if !moved {
            beta = to_raw(&gamma);
            break;
        }
    }
    let ll = log_likelihood(&design, &yf, &beta);
    // A likelihood driven to zero means the classes are separable and the
    // coefficients only stopped because the curvature vanished.
    let max_eta = (&design * &beta).amax();
    if ll > -1e-6 * n as f64 || max_eta > 35.0 && ll > -1e-3 {
        return Err(separation(beta.norm()));
    }
    if grad_norm >= GRAD_TOL {
        return Err(Error::Numerical(format!(
            "logistic MLE did not converge: gradient norm {grad_norm:.3e} after {iters} iterations"
        )));
    }
    Ok(LogisticModel {
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        log_likelihood: ll,
        gradient_norm: grad_norm,
        n_iter: iters,
    })
}

fn separation(norm: f64) -> Error {
    Error::Numerical(format!(
        "perfect separation: logistic coefficients diverge (norm {norm:.3e})"
    ))
}

impl LogisticModel {
    pub fn predict_proba(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.coefficients.len() {
            return Err(Error::InvalidArgument(format!(
                "prediction matrix has {} columns, model has {}",
                x.ncols(),
                self.coefficients.len()
            )));
        }
        Ok((0..x.nrows())
            .map(|i| {
                let eta = self.intercept
                    + self.coefficients.iter().enumerate().map(|(j, b)| b * x[(i, j)]).sum::<f64>();
                logistic(eta)
            })
            .collect())
    }

    /// Gradient of the log-likelihood at the fitted coefficients.
    pub fn score_vector(&self, x: &DMatrix<f64>, y: &[u8]) -> Result<Vec<f64>> {
        let prob = self.predict_proba(x)?;
        let design = with_intercept(x);
        let resid = DVector::from_iterator(y.len(), prob.iter().zip(y).map(|(p, &t)| f64::from(t) - p));
        Ok((design.transpose() * resid).iter().copied().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::logit;
    use crate::synthetic;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("x{j}")).collect()
    }

    #[test]
    fn separation_is_reported() {
        let x = DMatrix::from_column_slice(8, 1, &[-2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0]);
        let y = [0, 0, 0, 0, 1, 1, 1, 1];
        let err = fit_logistic_mle(&x, &y, &names(1)).unwrap_err();
        assert!(err.to_string().contains("separation"), "{err}");
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn intercept_only_recovers_logit_of_base_rate() {
        let x = DMatrix::<f64>::zeros(10, 0);
        let y = [1, 1, 1, 0, 0, 0, 0, 0, 0, 0];
        let m = fit_logistic_mle(&x, &y, &[]).unwrap();
        assert!((m.intercept - logit(0.3)).abs() < 1e-10);
    }

    #[test]
    fn gradient_vanishes_at_solution() {
        let prob = synthetic::well_scaled_logistic(400, 5, 11);
        let m = fit_logistic_mle(&prob.x, &prob.y, &names(5)).unwrap();
        let g = m.score_vector(&prob.x, &prob.y).unwrap();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-8, "{norm}");
    }

    #[test]
    fn mixed_unit_columns_still_converge() {
        let prob = synthetic::well_scaled_logistic(300, 4, 12);
        let units = [1000.0, 0.01, 40.0, 1.0];
        let x = DMatrix::from_fn(300, 4, |i, j| 50.0 + units[j] * prob.x[(i, j)]);
        let m = fit_logistic_mle(&x, &prob.y, &names(4)).unwrap();
        let reference = fit_logistic_mle(&prob.x, &prob.y, &names(4)).unwrap();
        assert!(m.gradient_norm < 1e-8);
        for j in 0..4 {
            let b = m.coefficients[j] * units[j];
            assert!((b - reference.coefficients[j]).abs() < 1e-6, "{j}: {b}");
        }
    }

    #[test]
    fn zero_coefficients_predict_one_half() {
        let m = LogisticModel {
            intercept: 0.0,
            coefficients: vec![0.0; 3],
            log_likelihood: 0.0,
            gradient_norm: 0.0,
            n_iter: 0,
        };
        let p = m.predict_proba(&DMatrix::from_element(4, 3, 7.0)).unwrap();
        assert!(p.iter().all(|&v| v == 0.5));
        assert!(m.predict_proba(&DMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn collinear_design_is_rejected() {
        let x = DMatrix::from_fn(20, 2, |i, j| if j == 0 { i as f64 } else { 3.0 * i as f64 });
        let y: Vec<u8> = (0..20).map(|i| u8::from(i % 3 == 0)).collect();
        let err = fit_logistic_mle(&x, &y, &names(2)).unwrap_err().to_string();
        assert!(err.contains("x1") && err.contains("x0"), "{err}");
    }
}
