//! Bayesian logistic regression over main effects and ODE-derived
//! interaction covariates.

pub mod diagnostics;
pub mod mcmc;
mod summary;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnKind, FeatureTable};
use crate::error::{ensure_finite, Error, Result};
use crate::gallstone::{Roles, INTERACTION_LABELS, MAIN_EFFECT_LABELS};
use crate::linalg::check_full_rank;
use crate::ode::{interaction_features, OdeSpec};
use crate::par;
use crate::rng;
use crate::stats::{log1p_exp, logistic, mean, sd};

pub use mcmc::{ChainStats, SamplerKind};
pub use summary::{
    default_profile, interaction_surface, summarize, write_draws_csv, CoefficientSummary, ParameterSummary, Surface, SurfacePair,
};

pub const INTERCEPT: &str = "Intercept";

/// Independent normal priors: one for the intercept, one shared by every
/// other coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSpec {
    pub intercept_mean: f64,
    pub intercept_sd: f64,
    pub coef_mean: f64,
    pub coef_sd: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            intercept_mean: 0.0,
            intercept_sd: 10.0,
            coef_mean: 0.0,
            coef_sd: 5.0,
        }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.intercept_sd) || !ok(self.coef_sd) {
            return Err(Error::InvalidArgument("prior standard deviations must be finite and > 0".into()));
        }
        if !self.intercept_mean.is_finite() || !self.coef_mean.is_finite() {
            return Err(Error::InvalidArgument("prior means must be finite".into()));
        }
        Ok(())
    }

    fn moments(&self, j: usize) -> (f64, f64) {
        if j == 0 {
            (self.intercept_mean, self.intercept_sd)
        } else {
            (self.coef_mean, self.coef_sd)
        }
    }

    /// Sum of normal log densities of `beta` (intercept first).
    pub fn log_density(&self, beta: &[f64]) -> f64 {
        beta.iter()
            .enumerate()
            .map(|(j, b)| {
                let (m, s) = self.moments(j);
                let z = (b - m) / s;
                -0.5 * z * z - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            })
            .sum()
    }
}

/// Covariates of the logistic model. The intercept is implicit; `names`
/// lists it first, followed by one name per column of `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalDesign {
    names: Vec<String>,
    x: DMatrix<f64>,
    kinds: Vec<ColumnKind>,
}

impl FinalDesign {
    pub fn new(column_names: Vec<String>, x: DMatrix<f64>, kinds: Vec<ColumnKind>) -> Result<Self> {
        if column_names.len() != x.ncols() || kinds.len() != x.ncols() {
            return Err(Error::InvalidArgument(format!(
                "{} names and {} kinds for {} design columns",
                column_names.len(),
                kinds.len(),
                x.ncols()
            )));
        }
        ensure_finite(x.as_slice(), "design")?;
        let mut names = vec![INTERCEPT.to_string()];
        names.extend(column_names);
        Ok(FinalDesign { names, x, kinds })
    }

    /// Parameter names, intercept first.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column_names(&self) -> &[String] {
        &self.names[1..]
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.x.ncols() + 1
    }

    pub fn linear_predictor(&self, beta: &[f64], row: usize) -> f64 {
        beta[0] + (0..self.x.ncols()).map(|j| beta[j + 1] * self.x[(row, j)]).sum::<f64>()
    }
}

/// Main-effect columns in reporting order followed by the four interaction
/// covariates computed row by row from the raw values.
pub fn build_design(table: &FeatureTable, roles: &Roles) -> Result<FinalDesign> {
    let main: Vec<String> = roles.main_effects().iter().map(|s| s.to_string()).collect();
    build_design_for(table, roles, &main, &OdeSpec::ALL)
}

/// Design with the given main-effect columns and interaction covariates.
/// Columns that play a clinical role are named by their short label.
pub fn build_design_for(
    table: &FeatureTable,
    roles: &Roles,
    main_effects: &[String],
    interactions: &[OdeSpec],
) -> Result<FinalDesign> {
    let cols: Vec<usize> = main_effects
        .iter()
        .map(|c| table.require_column(c))
        .collect::<Result<_>>()?;
    let role_cols: Vec<usize> = if interactions.is_empty() {
        Vec::new()
    } else {
        roles
            .main_effects()
            .iter()
            .map(|c| table.require_column(c))
            .collect::<Result<_>>()?
    };
    let n = table.n_rows();
    let v = table.values();
    let p = cols.len() + interactions.len();
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        for (k, &j) in cols.iter().enumerate() {
            x[(i, k)] = v[(i, j)];
        }
        if interactions.is_empty() {
            continue;
        }
        let raw: Vec<f64> = role_cols.iter().map(|&j| v[(i, j)]).collect();
        let f = interaction_features(&Roles::inputs_from_main(&raw))
            .map_err(|e| Error::Domain(format!("row {i}: {e}")))?;
        for (k, spec) in interactions.iter().enumerate() {
            x[(i, cols.len() + k)] = f.get(*spec);
        }
    }
    let role_names = roles.main_effects();
    let mut names: Vec<String> = main_effects
        .iter()
        .map(|c| match role_names.iter().position(|r| r == c) {
            Some(k) => MAIN_EFFECT_LABELS[k].to_string(),
            None => c.clone(),
        })
        .collect();
    names.extend(interactions.iter().map(|s| s.label().to_string()));
    let mut kinds: Vec<ColumnKind> = cols.iter().map(|&j| table.column_kinds()[j]).collect();
    kinds.extend(vec![ColumnKind::Continuous; interactions.len()]);
    FinalDesign::new(names, x, kinds)
}

/// True when `design` has the nine main effects and four interactions in
/// reporting order, the layout the probability surfaces rely on.
pub fn is_standard_layout(design: &FinalDesign) -> bool {
    design
        .column_names()
        .iter()
        .map(String::as_str)
        .eq(MAIN_EFFECT_LABELS.iter().chain(INTERACTION_LABELS.iter()).copied())
}

fn check_dims(beta: &[f64], design: &FinalDesign, y: &[u8]) -> Result<()> {
    if beta.len() != design.n_params() {
        return Err(Error::InvalidArgument(format!(
            "coefficient vector has {} entries, design needs {}",
            beta.len(),
            design.n_params()
        )));
    }
    if y.len() != design.n_rows() {
        return Err(Error::InvalidArgument(format!("{} outcomes for {} rows", y.len(), design.n_rows())));
    }
    Ok(())
}

/// Bernoulli-logit log likelihood plus normal log priors, with its gradient.
pub fn log_posterior(beta: &[f64], design: &FinalDesign, y: &[u8], prior: &PriorSpec) -> Result<(f64, Vec<f64>)> {
    check_dims(beta, design, y)?;
    ensure_finite(beta, "coefficient vector")?;
    let mut grad = vec![0.0; beta.len()];
    let mut ll = 0.0;
    for i in 0..design.n_rows() {
        let eta = design.linear_predictor(beta, i);
        let yi = f64::from(y[i]);
        ll += yi * eta - log1p_exp(eta);
        let r = yi - logistic(eta);
        grad[0] += r;
        for j in 0..design.x.ncols() {
            grad[j + 1] += r * design.x[(i, j)];
        }
    }
    for (j, g) in grad.iter_mut().enumerate() {
        let (m, s) = prior.moments(j);
        *g -= (beta[j] - m) / (s * s);
    }
    Ok((ll + prior.log_density(beta), grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcSettings {
    pub chains: usize,
    pub iter: usize,
    pub warmup: usize,
    pub seed: u64,
    pub max_tree_depth: usize,
    pub target_accept: f64,
    /// Chains start uniformly in `[-r, r]` on the internal standardized scale.
    pub init_radius: f64,
    pub sampler: SamplerKind,
}

impl Default for McmcSettings {
    fn default() -> Self {
        McmcSettings {
            chains: 4,
            iter: 4000,
            warmup: 1000,
            seed: 0,
            max_tree_depth: 10,
            target_accept: 0.8,
            init_radius: 2.0,
            sampler: SamplerKind::Nuts,
        }
    }
}

impl McmcSettings {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::InvalidArgument("need at least one chain".into()));
        }
        if self.warmup >= self.iter {
            return Err(Error::InvalidArgument(format!(
                "warmup {} must be below iterations {}",
                self.warmup, self.iter
            )));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidArgument("target_accept must lie in (0, 1)".into()));
        }
        if self.max_tree_depth == 0 || !(self.init_radius >= 0.0) {
            return Err(Error::InvalidArgument("max_tree_depth >= 1 and init_radius >= 0 required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub names: Vec<String>,
    /// `chains[c][i][j]`: chain `c`, post-warmup iteration `i`, parameter `j`.
    pub chains: Vec<Vec<Vec<f64>>>,
    pub iters_per_chain: usize,
    pub warmup: usize,
    pub seed: u64,
    pub chain_stats: Vec<ChainStats>,
}

impl PosteriorDraws {
    pub fn n_params(&self) -> usize {
        self.names.len()
    }

    /// Draws of parameter `j` split by chain.
    pub fn parameter(&self, j: usize) -> Vec<Vec<f64>> {
        self.chains.iter().map(|c| c.iter().map(|d| d[j]).collect()).collect()
    }

    /// All draws pooled in chain order.
    pub fn pooled(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.chains.iter().flatten()
    }
}

/// Linear map between the sampler's standardized coordinates `theta` and the
/// reported coefficients `beta`: each non-constant column is centred, and
/// scaled by its standard deviation unless it is binary.
struct Scaling {
    center: Vec<f64>,
    scale: Vec<f64>,
}

impl Scaling {
    fn new(design: &FinalDesign) -> Self {
        let p = design.x.ncols();
        let mut center = vec![0.0; p];
        let mut scale = vec![1.0; p];
        for j in 0..p {
            let col: Vec<f64> = design.x.column(j).iter().copied().collect();
            let s = if col.len() > 1 { sd(&col) } else { 0.0 };
            if s > 0.0 {
                center[j] = mean(&col);
                if design.kinds[j] == ColumnKind::Continuous {
                    scale[j] = s;
                }
            }
        }
        Scaling { center, scale }
    }

    fn to_beta(&self, theta: &[f64]) -> Vec<f64> {
        let mut beta = vec![0.0; theta.len()];
        beta[0] = theta[0];
        for j in 0..self.center.len() {
            beta[j + 1] = theta[j + 1] / self.scale[j];
            beta[0] -= self.center[j] * beta[j + 1];
        }
        beta
    }

    fn to_theta(&self, beta: &[f64]) -> Vec<f64> {
        let mut theta = vec![0.0; beta.len()];
        theta[0] = beta[0] + (0..self.center.len()).map(|j| self.center[j] * beta[j + 1]).sum::<f64>();
        for j in 0..self.center.len() {
            theta[j + 1] = beta[j + 1] * self.scale[j];
        }
        theta
    }

    /// Pulls a gradient with respect to `beta` back to `theta`.
    fn pull_back(&self, grad_beta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; grad_beta.len()];
        g[0] = grad_beta[0];
        for j in 0..self.center.len() {
            g[j + 1] = (grad_beta[j + 1] - self.center[j] * grad_beta[0]) / self.scale[j];
        }
        g
    }
}

struct StandardizedPosterior<'a> {
    z: Vec<f64>,
    n: usize,
    p: usize,
    y: &'a [u8],
    prior: PriorSpec,
    scaling: Scaling,
}

impl<'a> StandardizedPosterior<'a> {
    fn new(design: &FinalDesign, y: &'a [u8], prior: PriorSpec) -> Self {
        let scaling = Scaling::new(design);
        let (n, p) = design.x.shape();
        let mut z = Vec::with_capacity(n * p);
        for i in 0..n {
            for j in 0..p {
                z.push((design.x[(i, j)] - scaling.center[j]) / scaling.scale[j]);
            }
        }
        StandardizedPosterior {
            z,
            n,
            p,
            y,
            prior,
            scaling,
        }
    }
}

impl mcmc::Target for StandardizedPosterior<'_> {
    fn dim(&self) -> usize {
        self.p + 1
    }

    fn log_density_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        if theta.iter().any(|t| !t.is_finite()) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            return f64::NEG_INFINITY;
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut ll = 0.0;
        for i in 0..self.n {
            let row = &self.z[i * self.p..(i + 1) * self.p];
            let eta = theta[0] + row.iter().zip(&theta[1..]).map(|(a, b)| a * b).sum::<f64>();
            let yi = f64::from(self.y[i]);
            ll += yi * eta - log1p_exp(eta);
            let r = yi - logistic(eta);
            grad[0] += r;
            for (g, a) in grad[1..].iter_mut().zip(row) {
                *g += r * a;
            }
        }
        let beta = self.scaling.to_beta(theta);
        let prior_grad: Vec<f64> = beta
            .iter()
            .enumerate()
            .map(|(j, b)| {
                let (m, s) = self.prior.moments(j);
                -(b - m) / (s * s)
            })
            .collect();
        for (g, pg) in grad.iter_mut().zip(self.scaling.pull_back(&prior_grad)) {
            *g += pg;
        }
        ll + self.prior.log_density(&beta)
    }
}

/// Mean acceptance statistic below which a run is reported as failed.
const MIN_ACCEPT: f64 = 0.1;

/// Runs the chains in parallel, each on its own random stream. Explicit
/// starting points (on the coefficient scale) override the random ones.
pub fn run_chains(
    design: &FinalDesign,
    y: &[u8],
    prior: &PriorSpec,
    settings: &McmcSettings,
    inits: Option<&[Vec<f64>]>,
) -> Result<PosteriorDraws> {
    settings.validate()?;
    prior.validate()?;
    if y.len() != design.n_rows() {
        return Err(Error::InvalidArgument(format!("{} outcomes for {} rows", y.len(), design.n_rows())));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::InvalidArgument("outcome must be 0/1".into()));
    }
    check_full_rank(&design.x, design.column_names(), true)?;
    if let Some(inits) = inits {
        if inits.len() != settings.chains || inits.iter().any(|v| v.len() != design.n_params()) {
            return Err(Error::InvalidArgument(format!(
                "need {} starting points of length {}",
                settings.chains,
                design.n_params()
            )));
        }
    }
    let target = StandardizedPosterior::new(design, y, *prior);
    let chain_settings = mcmc::ChainSettings {
        kind: settings.sampler,
        n_iter: settings.iter,
        n_warmup: settings.warmup,
        max_depth: settings.max_tree_depth,
        target_accept: settings.target_accept,
    };
    let d = design.n_params();
    let results = par::map_indexed(settings.chains, |c| {
        let mut r = rng::stream(settings.seed, c as u64);
        let init: Vec<f64> = match inits {
            Some(v) => target.scaling.to_theta(&v[c]),
            None => (0..d)
                .map(|_| {
                    if settings.init_radius > 0.0 {
                        r.random_range(-settings.init_radius..=settings.init_radius)
                    } else {
                        0.0
                    }
                })
                .collect(),
        };
        let (draws, stats) = mcmc::run_chain(&target, &chain_settings, &init, &mut r);
        let beta_draws: Vec<Vec<f64>> = draws.iter().map(|t| target.scaling.to_beta(t)).collect();
        (beta_draws, stats)
    });
    let mut chains = Vec::with_capacity(settings.chains);
    let mut chain_stats = Vec::with_capacity(settings.chains);
    for (c, (draws, stats)) in results.into_iter().enumerate() {
        if stats.n_divergent > 0 {
            log::warn!("chain {c}: {} divergent transitions after warmup", stats.n_divergent);
        }
        if stats.mean_accept_stat < MIN_ACCEPT {
            return Err(Error::Numerical(format!(
                "chain {c}: mean acceptance {:.3} collapsed below {MIN_ACCEPT}",
                stats.mean_accept_stat
            )));
        }
        chains.push(draws);
        chain_stats.push(stats);
    }
    Ok(PosteriorDraws {
        names: design.names().to_vec(),
        chains,
        iters_per_chain: settings.iter - settings.warmup,
        warmup: settings.warmup,
        seed: settings.seed,
        chain_stats,
    })
}
