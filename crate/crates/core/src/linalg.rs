use nalgebra::{DMatrix, DVector};

use crate::adaptive_lasso::solve_spd;
use crate::error::{Error, Result};

/// Relative residual norm below which a column counts as linearly dependent.
const DEPENDENCE_TOL: f64 = 1e-8;

/// Checks that an intercept plus the columns of `x` have full column rank.
/// All-zero columns are skipped when `allow_zero` is set. The error names the
/// offending column and the earlier columns it is a combination of.
pub(crate) fn check_full_rank(x: &DMatrix<f64>, names: &[String], allow_zero: bool) -> Result<()> {
    let (n, p) = x.shape();
    let mut basis: Vec<DVector<f64>> = vec![DVector::from_element(n, 1.0 / (n as f64).sqrt())];
    let mut accepted: Vec<usize> = Vec::new();
    for j in 0..p {
        let c = x.column(j).into_owned();
        let norm = c.norm();
        if norm == 0.0 {
            if allow_zero {
                continue;
            }
            return Err(Error::Numerical(format!("column `{}` is identically zero", names[j])));
        }
        let mut r = c.clone();
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&r);
                r -= proj * q;
            }
        }
        if r.norm() <= DEPENDENCE_TOL * norm {
            return Err(Error::Numerical(format!(
                "design is rank deficient: `{}` is collinear with {}",
                names[j],
                partners(x, names, &accepted, &c)
            )));
        }
        let rn = r.norm();
        basis.push(r / rn);
        accepted.push(j);
    }
    Ok(())
}

fn partners(x: &DMatrix<f64>, names: &[String], accepted: &[usize], target: &DVector<f64>) -> String {
    let n = x.nrows();
    let k = accepted.len() + 1;
    let a = DMatrix::from_fn(n, k, |i, c| if c == 0 { 1.0 } else { x[(i, accepted[c - 1])] });
    let coef = solve_spd(&(a.transpose() * &a), &(a.transpose() * target)).ok();
    let mut out: Vec<String> = Vec::new();
    if let Some(coef) = coef {
        let scale = coef.amax().max(1e-300);
        if coef[0].abs() > 1e-6 * scale {
            out.push("the intercept".into());
        }
        for (c, &j) in accepted.iter().enumerate() {
            if coef[c + 1].abs() > 1e-6 * scale {
                out.push(format!("`{}`", names[j]));
            }
        }
    }
    if out.is_empty() {
        "earlier columns".into()
    } else {
        out.join(", ")
    }
}
