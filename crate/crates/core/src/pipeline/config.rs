use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adaptive_lasso::{Family, LambdaRule, LassoParams, Pilot};
use crate::bart::BartHyper;
use crate::baselines::RfParams;
use crate::bayes::{McmcSettings, PriorSpec, SamplerKind};
use crate::dataset::{MissingPolicy, Schema};
use crate::error::{Error, Result};
use crate::gallstone::{self, Roles};
use crate::ode::{OdeSpec, SimulationConfig};
use crate::rng::derive_seed;

/// Everything a pipeline run needs. Every field has a default, so an empty
/// file is a valid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed; each stage draws from `derive_seed(seed, <stage>)`.
    pub seed: u64,
    pub out: PathBuf,
    pub data: DataConfig,
    pub roles: Roles,
    pub stages: StageToggles,
    pub lasso: LassoConfig,
    pub bart: BartConfig,
    pub odes: SimulationConfig,
    pub bayes: BayesConfig,
    pub evaluate: EvaluateConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 2025,
            out: PathBuf::from("out"),
            data: DataConfig::default(),
            roles: Roles::default(),
            stages: StageToggles::default(),
            lasso: LassoConfig::default(),
            bart: BartConfig::default(),
            odes: SimulationConfig::default(),
            bayes: BayesConfig::default(),
            evaluate: EvaluateConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaSource {
    /// The 38-column layout of the public gallstone cohort.
    Gallstone,
    /// Column kinds inferred from the file (0/1 columns become binary).
    Infer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    pub outcome: String,
    /// Outcome value that codes the positive class.
    pub positive_value: u8,
    pub missing: MissingPolicy,
    pub schema: SchemaSource,
    /// Columns forced to binary when the schema is inferred.
    pub binary: Vec<String>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            path: PathBuf::from("data/gallstone.csv"),
            outcome: gallstone::OUTCOME.to_string(),
            positive_value: 1,
            missing: MissingPolicy::Drop,
            schema: SchemaSource::Gallstone,
            binary: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageToggles {
    pub select: bool,
    pub bart_scores: bool,
    pub simulate_odes: bool,
    pub fit_bayes: bool,
    pub evaluate: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        StageToggles {
            select: true,
            bart_scores: true,
            simulate_odes: true,
            fit_bayes: true,
            evaluate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoConfig {
    pub folds: usize,
    pub stratified: bool,
    pub gamma: f64,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub family: Family,
    pub pilot: Pilot,
    pub rule: LambdaRule,
}

impl Default for LassoConfig {
    fn default() -> Self {
        let p = LassoParams::default();
        LassoConfig {
            folds: 10,
            stratified: true,
            gamma: p.gamma,
            n_lambda: p.n_lambda,
            lambda_min_ratio: p.lambda_min_ratio,
            tol: p.tol,
            max_iter: p.max_iter,
            family: p.family,
            pilot: p.pilot,
            rule: p.rule,
        }
    }
}

impl LassoConfig {
    pub fn params(&self) -> LassoParams {
        LassoParams {
            gamma: self.gamma,
            n_lambda: self.n_lambda,
            lambda_min_ratio: self.lambda_min_ratio,
            tol: self.tol,
            max_iter: self.max_iter,
            family: self.family,
            pilot: self.pilot,
            rule: self.rule,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BartConfig {
    pub m: usize,
    pub n_iter: usize,
    pub n_burn: usize,
    pub tree_prior_alpha: f64,
    pub tree_prior_beta: f64,
    pub k_scale: f64,
    pub n_chains: usize,
    pub p_grow: f64,
    pub p_prune: f64,
    /// Features with posterior mean Vimp above this are reported as
    /// important; unset means `1 / p`.
    pub importance_cutoff: Option<f64>,
    /// How many of the highest Vint pairs to report.
    pub top_pairs: usize,
    /// Pairs whose Vint CV exceeds this are reported as unstable.
    pub stable_cv_max: f64,
}

impl Default for BartConfig {
    fn default() -> Self {
        let h = BartHyper::default();
        BartConfig {
            m: h.m,
            n_iter: h.n_iter,
            n_burn: h.n_burn,
            tree_prior_alpha: h.tree_prior_alpha,
            tree_prior_beta: h.tree_prior_beta,
            k_scale: h.k_scale,
            n_chains: h.n_chains,
            p_grow: h.p_grow,
            p_prune: h.p_prune,
            importance_cutoff: None,
            top_pairs: 4,
            stable_cv_max: 0.5,
        }
    }
}

impl BartConfig {
    pub fn hyper(&self, seed: u64) -> BartHyper {
        BartHyper {
            m: self.m,
            n_iter: self.n_iter,
            n_burn: self.n_burn,
            tree_prior_alpha: self.tree_prior_alpha,
            tree_prior_beta: self.tree_prior_beta,
            k_scale: self.k_scale,
            seed,
            n_chains: self.n_chains,
            p_grow: self.p_grow,
            p_prune: self.p_prune,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BayesConfig {
    pub chains: usize,
    pub iter: usize,
    pub warmup: usize,
    pub max_tree_depth: usize,
    pub target_accept: f64,
    pub init_radius: f64,
    pub sampler: SamplerKind,
    pub prior: PriorSpec,
    pub write_draws: bool,
    /// Grid points per continuous axis of the probability surfaces.
    pub surface_points: usize,
}

impl Default for BayesConfig {
    fn default() -> Self {
        let s = McmcSettings::default();
        BayesConfig {
            chains: s.chains,
            iter: s.iter,
            warmup: s.warmup,
            max_tree_depth: s.max_tree_depth,
            target_accept: s.target_accept,
            init_radius: s.init_radius,
            sampler: s.sampler,
            prior: PriorSpec::default(),
            write_draws: true,
            surface_points: 25,
        }
    }
}

impl BayesConfig {
    pub fn settings(&self, seed: u64) -> McmcSettings {
        McmcSettings {
            chains: self.chains,
            iter: self.iter,
            warmup: self.warmup,
            seed,
            max_tree_depth: self.max_tree_depth,
            target_accept: self.target_accept,
            init_radius: self.init_radius,
            sampler: self.sampler,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub test_fraction: f64,
    pub stratified: bool,
    pub threshold: f64,
    pub rf_trees: usize,
    /// Unset means `floor(sqrt(p))`.
    pub rf_mtry: Option<usize>,
    pub rf_min_node_size: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        let rf = RfParams::default();
        EvaluateConfig {
            test_fraction: 0.2,
            stratified: true,
            threshold: 0.5,
            rf_trees: rf.n_trees,
            rf_mtry: rf.mtry,
            rf_min_node_size: rf.min_node_size,
        }
    }
}

impl EvaluateConfig {
    pub fn rf_params(&self, seed: u64) -> RfParams {
        RfParams {
            n_trees: self.rf_trees,
            mtry: self.rf_mtry,
            min_node_size: self.rf_min_node_size,
            bootstrap: true,
            seed,
        }
    }
}

/// Labels mixed into the master seed, one per random consumer.
pub const SEED_LABELS: [&str; 6] = [
    "select",
    "bart_scores",
    "fit_bayes",
    "evaluate_split",
    "evaluate_rf",
    "evaluate_bart",
];

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn stage_seed(&self, label: &str) -> u64 {
        derive_seed(self.seed, label)
    }

    /// Schema used to read the input file.
    pub fn schema(&self) -> Result<Schema> {
        let mut schema = match self.data.schema {
            SchemaSource::Gallstone => gallstone::schema(),
            SchemaSource::Infer => Schema::infer(&self.data.path, &self.data.outcome, &self.data.binary, &[])?,
        };
        schema.outcome = self.data.outcome.clone();
        schema.positive_value = self.data.positive_value;
        schema.missing = self.data.missing;
        Ok(schema)
    }

    /// Checks hyperparameters and that every referenced column exists,
    /// without touching the data rows.
    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| match e {
            Error::InvalidArgument(m) => Error::Config(m),
            other => other,
        };
        self.lasso.params().validate().map_err(cfg)?;
        if self.lasso.folds < 2 {
            return Err(Error::Config(format!("lasso.folds must be >= 2, got {}", self.lasso.folds)));
        }
        self.bart.hyper(0).validate().map_err(cfg)?;
        if let Some(c) = self.bart.importance_cutoff {
            if !(0.0..1.0).contains(&c) {
                return Err(Error::Config(format!("bart.importance_cutoff {c} outside [0, 1)")));
            }
        }
        if !(self.bart.stable_cv_max > 0.0) {
            return Err(Error::Config("bart.stable_cv_max must be > 0".into()));
        }
        self.bayes.settings(0).validate().map_err(cfg)?;
        self.bayes.prior.validate().map_err(cfg)?;
        if self.bayes.surface_points < 2 {
            return Err(Error::Config("bayes.surface_points must be >= 2".into()));
        }
        for spec in OdeSpec::ALL {
            let r = self.odes.range(spec);
            let finite = [r.y0, r.x0, r.x1, r.step].iter().all(|v| v.is_finite());
            if !finite || !(r.step > 0.0) || !(r.x1 > r.x0) {
                return Err(Error::Config(format!(
                    "odes.{}: need finite values, step > 0 and x1 > x0",
                    spec.slug()
                )));
            }
        }
        let e = &self.evaluate;
        if !(e.test_fraction > 0.0 && e.test_fraction < 1.0) {
            return Err(Error::Config(format!("evaluate.test_fraction {} outside (0, 1)", e.test_fraction)));
        }
        if !(0.0..=1.0).contains(&e.threshold) {
            return Err(Error::Config(format!("evaluate.threshold {} outside [0, 1]", e.threshold)));
        }
        if e.rf_trees == 0 || e.rf_min_node_size == 0 || e.rf_mtry == Some(0) {
            return Err(Error::Config("evaluate: rf_trees, rf_min_node_size and rf_mtry must be >= 1".into()));
        }
        self.check_columns()
    }

    fn check_columns(&self) -> Result<()> {
        let path = &self.data.path;
        if !path.is_file() {
            return Err(Error::Data(format!("input file {} not found", path.display())));
        }
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let missing = |name: &str| !header.iter().any(|h| h == name);
        if missing(&self.data.outcome) {
            return Err(Error::Config(format!(
                "outcome column `{}` not found in {}",
                self.data.outcome,
                path.display()
            )));
        }
        let needs_roles = self.stages.simulate_odes || self.stages.fit_bayes || self.stages.evaluate;
        if needs_roles {
            if let Some(c) = self.roles.main_effects().into_iter().find(|c| missing(c)) {
                return Err(Error::Config(format!("role column `{c}` not found in {}", path.display())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_through_toml() {
        let c = PipelineConfig::default();
        let text = c.to_toml().unwrap();
        assert_eq!(PipelineConfig::from_toml_str(&text).unwrap(), c);
        assert_eq!(PipelineConfig::from_toml_str("").unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = PipelineConfig::from_toml_str("[bart]\ntrees = 3\n").unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let c = PipelineConfig::from_toml_str("seed = 9\n[bart]\nm = 50\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.bart.m, 50);
        assert_eq!(c.bart.n_iter, BartConfig::default().n_iter);
    }

    #[test]
    fn stage_seeds_are_distinct() {
        let c = PipelineConfig::default();
        let mut seeds: Vec<u64> = SEED_LABELS.iter().map(|l| c.stage_seed(l)).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), SEED_LABELS.len());
    }

    #[test]
    fn bad_hyperparameters_are_config_errors() {
        let mut c = PipelineConfig::default();
        c.bayes.warmup = c.bayes.iter;
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
    }
}
