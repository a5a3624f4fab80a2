//! Posterior summaries and predicted-probability surfaces.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::diagnostics::{ess_bulk, ess_tail, rhat};
use super::{FinalDesign, PosteriorDraws};
use crate::dataset::ColumnKind;
use crate::error::{Error, Result};
use crate::gallstone::{Roles, MAIN_EFFECT_LABELS};
use crate::ode::interaction_features;
use crate::stats::{logistic, mean, quantile, sd};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub parameter: String,
    pub estimate: f64,
    /// Posterior standard deviation.
    pub est_error: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub rhat: f64,
    pub ess_bulk: f64,
    pub ess_tail: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSummary {
    pub rows: Vec<ParameterSummary>,
}

/// Mean, sd, central 95% interval and convergence diagnostics per
/// parameter, in design order.
pub fn summarize(draws: &PosteriorDraws) -> Result<CoefficientSummary> {
    if draws.chains.is_empty() || draws.chains[0].is_empty() {
        return Err(Error::InvalidArgument("no posterior draws to summarize".into()));
    }
    let rows = (0..draws.n_params())
        .map(|j| {
            let per_chain = draws.parameter(j);
            let pooled: Vec<f64> = per_chain.iter().flatten().copied().collect();
            let (r, bulk, tail) = if per_chain.len() >= 2 && per_chain[0].len() >= 10 {
                (rhat(&per_chain)?, ess_bulk(&per_chain)?, ess_tail(&per_chain)?)
            } else {
                log::warn!("too few chains or draws for diagnostics on `{}`", draws.names[j]);
                (f64::NAN, f64::NAN, f64::NAN)
            };
            Ok(ParameterSummary {
                parameter: draws.names[j].clone(),
                estimate: mean(&pooled),
                est_error: if pooled.len() > 1 { sd(&pooled) } else { 0.0 },
                ci_lower: quantile(&pooled, 0.025),
                ci_upper: quantile(&pooled, 0.975),
                rhat: r,
                ess_bulk: bulk,
                ess_tail: tail,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoefficientSummary { rows })
}

impl CoefficientSummary {
    pub fn get(&self, parameter: &str) -> Option<&ParameterSummary> {
        self.rows.iter().find(|r| r.parameter == parameter)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
        w.write_record([
            "Parameter",
            "Estimate",
            "Est.Error",
            "CI lower",
            "CI upper",
            "Rhat",
            "ESS bulk",
            "ESS tail",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.parameter.clone(),
                format!("{:.4}", r.estimate),
                format!("{:.4}", r.est_error),
                format!("{:.4}", r.ci_lower),
                format!("{:.4}", r.ci_upper),
                format!("{:.2}", r.rhat),
                format!("{:.0}", r.ess_bulk),
                format!("{:.0}", r.ess_tail),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), &self.rows)?;
        Ok(())
    }
}

/// Raw draws, one row per chain and iteration.
pub fn write_draws_csv(draws: &PosteriorDraws, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let mut header = vec!["chain".to_string(), "iteration".to_string()];
    header.extend(draws.names.iter().cloned());
    w.write_record(&header)?;
    for (c, chain) in draws.chains.iter().enumerate() {
        for (i, d) in chain.iter().enumerate() {
            let mut rec = vec![c.to_string(), i.to_string()];
            rec.extend(d.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfacePair {
    CrpHgb,
    VitdHyper,
}

impl SurfacePair {
    /// Positions of the two varied covariates among the main effects.
    pub fn axes(self) -> (usize, usize) {
        match self {
            SurfacePair::CrpHgb => (0, 6),
            SurfacePair::VitdHyper => (1, 4),
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            SurfacePair::CrpHgb => "crp_hgb",
            SurfacePair::VitdHyper => "vitd_hyper",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub pair: SurfacePair,
    pub x_name: String,
    pub y_name: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `probability[a][b]` at `(xs[a], ys[b])`.
    pub probability: Vec<Vec<f64>>,
}

impl Surface {
    pub fn at(&self, a: usize, b: usize) -> f64 {
        self.probability[a][b]
    }

    /// Long format: one `x, y, probability` row per grid point.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
        w.write_record(["x", "y", "probability"])?;
        for (a, x) in self.xs.iter().enumerate() {
            for (b, y) in self.ys.iter().enumerate() {
                w.write_record([x.to_string(), y.to_string(), self.probability[a][b].to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Covariate profile for the surfaces: continuous main effects at their
/// sample means and binary ones at 0.
pub fn default_profile(design: &FinalDesign) -> Result<Vec<f64>> {
    if design.n_params() != 14 {
        return Err(Error::InvalidArgument("profile needs the 9 + 4 column layout".into()));
    }
    Ok((0..9)
        .map(|j| match design.kinds()[j] {
            ColumnKind::Binary => 0.0,
            ColumnKind::Continuous => mean(&design.x().column(j).iter().copied().collect::<Vec<_>>()),
        })
        .collect())
}

/// Posterior-mean predicted probability over a grid of two covariates, the
/// other main effects held at `profile` and every interaction recomputed at
/// each grid point.
pub fn interaction_surface(
    draws: &PosteriorDraws,
    pair: SurfacePair,
    xs: &[f64],
    ys: &[f64],
    profile: &[f64],
) -> Result<Surface> {
    if draws.n_params() != 14 {
        return Err(Error::InvalidArgument(format!(
            "surfaces need the 14-parameter layout, draws have {}",
            draws.n_params()
        )));
    }
    if profile.len() != 9 {
        return Err(Error::InvalidArgument("profile must list the 9 main effects".into()));
    }
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::InvalidArgument("empty surface grid".into()));
    }
    let (ax, ay) = pair.axes();
    let pooled: Vec<&Vec<f64>> = draws.pooled().collect();
    let k = pooled.len() as f64;
    let mut probability = vec![vec![0.0; ys.len()]; xs.len()];
    for (a, &xv) in xs.iter().enumerate() {
        for (b, &yv) in ys.iter().enumerate() {
            let mut main = profile.to_vec();
            main[ax] = xv;
            main[ay] = yv;
            let f = interaction_features(&Roles::inputs_from_main(&main))?;
            let mut covariates = main;
            covariates.extend([f.f1, f.f2, f.f3, f.f4]);
            probability[a][b] = pooled
                .iter()
                .map(|beta| logistic(beta[0] + covariates.iter().zip(&beta[1..]).map(|(c, b)| c * b).sum::<f64>()))
                .sum::<f64>()
                / k;
        }
    }
    Ok(Surface {
        pair,
        x_name: MAIN_EFFECT_LABELS[ax].to_string(),
        y_name: MAIN_EFFECT_LABELS[ay].to_string(),
        xs: xs.to_vec(),
        ys: ys.to_vec(),
        probability,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn draws_from(chains: Vec<Vec<Vec<f64>>>, names: Vec<String>) -> PosteriorDraws {
        let iters = chains[0].len();
        PosteriorDraws {
            names,
            chains,
            iters_per_chain: iters,
            warmup: 0,
            seed: 0,
            chain_stats: Vec::new(),
        }
    }

    #[test]
    fn point_mass_summary() {
        let d = draws_from(vec![vec![vec![2.5]; 100]; 4], vec!["c".into()]);
        let s = summarize(&d).unwrap();
        let r = &s.rows[0];
        assert_eq!((r.estimate, r.est_error, r.ci_lower, r.ci_upper), (2.5, 0.0, 2.5, 2.5));
        assert!(r.rhat >= 1.0 - 1e-3);
    }

    #[test]
    fn standard_normal_summary() {
        let chains: Vec<Vec<Vec<f64>>> = (0..4)
            .map(|c| {
                let mut r = rng::stream(12, c);
                (0..1000).map(|_| vec![r.sample::<f64, _>(StandardNormal)]).collect()
            })
            .collect();
        let s = summarize(&draws_from(chains, vec!["z".into()])).unwrap();
        let r = &s.rows[0];
        assert!(r.estimate.abs() < 0.1);
        assert!((0.9..=1.1).contains(&r.est_error));
        assert!((r.ci_lower + 1.96).abs() < 0.15 && (r.ci_upper - 1.96).abs() < 0.15);
        assert!(r.ci_lower <= r.ci_upper);
    }

    fn names14() -> Vec<String> {
        (0..14).map(|j| format!("b{j}")).collect()
    }

    #[test]
    fn surface_probabilities_and_order_invariance() {
        let mut r = rng::stream(5, 0);
        let chain: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..14).map(|_| 0.1 * r.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let mut reversed = chain.clone();
        reversed.reverse();
        let a = draws_from(vec![chain], names14());
        let b = draws_from(vec![reversed], names14());
        let profile = [2.0, 20.0, 42.0, 2.8, 0.0, 12.0, 14.0, 0.0, 0.0];
        let xs = [0.5, 5.0, 20.0];
        let ys = [10.0, 16.0];
        let sa = interaction_surface(&a, SurfacePair::CrpHgb, &xs, &ys, &profile).unwrap();
        let sb = interaction_surface(&b, SurfacePair::CrpHgb, &xs, &ys, &profile).unwrap();
        for (ra, rb) in sa.probability.iter().zip(&sb.probability) {
            for (pa, pb) in ra.iter().zip(rb) {
                assert!(*pa > 0.0 && *pa < 1.0);
                assert!((pa - pb).abs() < 1e-12);
            }
        }
        assert!(interaction_surface(&a, SurfacePair::CrpHgb, &xs, &[-2.0], &profile).is_err());
    }

    #[test]
    fn negative_crp_hgb_coefficient_lowers_risk_at_low_hgb() {
        // CRP / (1 + HGB) shrinks as HGB grows, so with nothing else varying
        // a negative coefficient puts the lower risk at low HGB.
        let mut beta = vec![0.0; 14];
        beta[1] = 0.5;
        beta[11] = -18.0;
        let d = draws_from(vec![vec![beta]], names14());
        let profile = [2.0, 20.0, 42.0, 2.8, 0.0, 12.0, 14.0, 0.0, 0.0];
        let s = interaction_surface(&d, SurfacePair::CrpHgb, &[20.0], &[9.0, 17.0], &profile).unwrap();
        assert!(s.at(0, 0) < s.at(0, 1));
    }

    #[test]
    fn negative_vitd_hyper_coefficient_direction() {
        // f3 = -2 VitD Hyper, so with Hyper = 1 the risk moves with the sign
        // of -coefficient as VitD grows.
        let mut beta = vec![0.0; 14];
        beta[12] = 0.2;
        let d = draws_from(vec![vec![beta]], names14());
        let profile = [2.0, 20.0, 42.0, 2.8, 0.0, 12.0, 14.0, 0.0, 0.0];
        let s = interaction_surface(&d, SurfacePair::VitdHyper, &[5.0, 15.0, 30.0], &[0.0, 1.0], &profile).unwrap();
        assert!(s.at(0, 1) > s.at(1, 1) && s.at(1, 1) > s.at(2, 1));
        assert!((s.at(0, 0) - s.at(2, 0)).abs() < 1e-15);
    }
}
