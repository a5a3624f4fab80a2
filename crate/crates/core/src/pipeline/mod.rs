//! End-to-end orchestration: ingest, LASSO screening, BART scores, ODE
//! features, Bayesian logistic fit and baseline evaluation.
//!
//! Stages talk to each other only through the JSON artifacts they leave in
//! the output directory, so running them one at a time gives the same files
//! as a full run.

mod config;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adaptive_lasso::{cv_select, SelectionReport};
use crate::bart::{self, heatmap_export, summarize_scores, write_split_counts};
use crate::baselines::{compare_models, compute_metrics, fit_logistic_mle, fit_random_forest};
use crate::bayes::{
    build_design_for, default_profile, interaction_surface, is_standard_layout, run_chains, summarize,
    write_draws_csv, FinalDesign, SurfacePair,
};
use crate::dataset::{self, load_csv, make_folds, split_indices, FeatureTable, IngestReport};
use crate::error::{Error, Result};
use crate::gallstone::Roles;
use crate::ode::{interaction_features, simulate_all, write_trajectories, OdeSpec};

pub use config::{
    BartConfig, BayesConfig, DataConfig, EvaluateConfig, LassoConfig, PipelineConfig, SchemaSource, StageToggles,
    SEED_LABELS,
};

pub const MANIFEST: &str = "manifest.json";
pub const INGEST_REPORT: &str = "ingest_report.json";
pub const SELECTION_REPORT: &str = "selection_report.json";
pub const FINAL_FEATURES: &str = "final_features.json";
pub const HEATMAP: &str = "heatmap.json";
pub const TABLE2_CSV: &str = "table2.csv";
pub const TABLE1_CSV: &str = "table1.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Select,
    BartScores,
    SimulateOdes,
    FitBayes,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Select,
        Stage::BartScores,
        Stage::SimulateOdes,
        Stage::FitBayes,
        Stage::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Select => "select",
            Stage::BartScores => "bart_scores",
            Stage::SimulateOdes => "simulate_odes",
            Stage::FitBayes => "fit_bayes",
            Stage::Evaluate => "evaluate",
        }
    }

    /// Command-line spelling.
    pub fn command(self) -> &'static str {
        match self {
            Stage::Select => "select",
            Stage::BartScores => "bart-scores",
            Stage::SimulateOdes => "simulate-odes",
            Stage::FitBayes => "fit-bayes",
            Stage::Evaluate => "evaluate",
        }
    }

    fn enabled(self, t: &StageToggles) -> bool {
        match self {
            Stage::Select => t.select,
            Stage::BartScores => t.bart_scores,
            Stage::SimulateOdes => t.simulate_odes,
            Stage::FitBayes => t.fit_bayes,
            Stage::Evaluate => t.evaluate,
        }
    }

    fn has_upstream(self) -> bool {
        matches!(self, Stage::BartScores | Stage::FitBayes | Stage::Evaluate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub artifacts: Vec<String>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
    pub n_rows: usize,
    pub n_cols: usize,
}

/// Run record. The only file whose content is allowed to differ between two
/// runs with the same configuration (through `seconds`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub stage_seeds: BTreeMap<String, u64>,
    pub input: InputDigest,
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn artifacts(&self) -> impl Iterator<Item = &str> {
        self.stages.iter().flat_map(|s| s.artifacts.iter().map(String::as_str))
    }

    pub fn read(path: &Path) -> Result<Manifest> {
        read_json(path)
    }
}

/// Features handed from the BART stage to the model-fitting stages. Editing
/// `main_effects` or `interactions` by hand changes what gets fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalFeatures {
    pub ranked_features: Vec<RankedFeature>,
    pub importance_cutoff: f64,
    pub important_features: Vec<String>,
    pub top_pairs: Vec<RankedPair>,
    /// Table columns entering the final model as main effects.
    pub main_effects: Vec<String>,
    /// Interaction covariates by slug (`ecf_vitd`, `crp_hgb`, ...).
    pub interactions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub name: String,
    pub vimp: f64,
    pub cv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPair {
    pub a: String,
    pub b: String,
    pub vint: f64,
    pub cv: Option<f64>,
    pub stable: bool,
}

impl FinalFeatures {
    fn interaction_specs(&self) -> Result<Vec<OdeSpec>> {
        self.interactions
            .iter()
            .map(|s| {
                OdeSpec::from_slug(s).ok_or_else(|| {
                    Error::Config(format!(
                        "{FINAL_FEATURES}: unknown interaction `{s}` (expected ecf_vitd, crp_hgb, hyper_vitd or dm_bm)"
                    ))
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSplit {
    pub seed: u64,
    pub test_fraction: f64,
    pub stratified: bool,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Runs `f` on a pool of `threads` workers, or on the global pool when
/// `threads` is `None`.
#[cfg(feature = "parallel")]
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::Config("--threads must be >= 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == Some(0) {
        return Err(Error::Config("--threads must be >= 1".into()));
    }
    Ok(f())
}

/// Validated configuration together with the loaded input table.
pub struct Pipeline {
    config: PipelineConfig,
    table: FeatureTable,
    ingest: IngestReport,
    input: InputDigest,
}

impl Pipeline {
    /// Validates the configuration, then reads and checks the input file.
    pub fn open(config: PipelineConfig) -> Result<Pipeline> {
        config.validate()?;
        let schema = config.schema()?;
        let bytes = std::fs::read(&config.data.path).map_err(|e| Error::io(&config.data.path, e))?;
        let sha256 = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        let (table, ingest) = load_csv(&config.data.path, &schema).map_err(|e| e.in_stage("ingest"))?;
        let input = InputDigest {
            path: config.data.path.display().to_string(),
            sha256,
            n_rows: table.n_rows(),
            n_cols: table.n_cols(),
        };
        std::fs::create_dir_all(&config.out)
            .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", config.out.display())))?;
        Ok(Pipeline {
            config,
            table,
            ingest,
            input,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn table(&self) -> &FeatureTable {
        &self.table
    }

    pub fn input(&self) -> &InputDigest {
        &self.input
    }

    fn out(&self, name: &str) -> PathBuf {
        self.config.out.join(name)
    }

    /// Every enabled stage in order; the manifest is rewritten from scratch.
    pub fn run_all(&self) -> Result<Manifest> {
        let mut manifest = self.fresh_manifest();
        manifest.stages.push(self.ingest_stage()?);
        self.write_manifest(&manifest)?;
        for stage in Stage::ALL {
            if !stage.enabled(&self.config.stages) {
                continue;
            }
            let record = self.execute(stage)?;
            manifest.stages.push(record);
            self.write_manifest(&manifest)?;
        }
        Ok(manifest)
    }

    /// One stage, reading upstream artifacts from the output directory and
    /// merging its record into the existing manifest.
    pub fn run_one(&self, stage: Stage) -> Result<Manifest> {
        let path = self.out(MANIFEST);
        let mut manifest = match path.exists() {
            true => Manifest::read(&path)?,
            false => self.fresh_manifest(),
        };
        if manifest.input.sha256 != self.input.sha256 {
            if stage.has_upstream() {
                return Err(Error::Data(format!(
                    "{} changed since the upstream stages ran (digest {} in {}, now {}); rerun `select` first",
                    self.input.path,
                    manifest.input.sha256,
                    path.display(),
                    self.input.sha256
                )));
            }
            manifest = self.fresh_manifest();
        }
        manifest.seed = self.config.seed;
        manifest.stage_seeds = self.fresh_manifest().stage_seeds;
        let ingest = self.ingest_stage()?;
        upsert(&mut manifest.stages, ingest);
        let record = self.execute(stage)?;
        upsert(&mut manifest.stages, record);
        self.write_manifest(&manifest)?;
        Ok(manifest)
    }

    fn execute(&self, stage: Stage) -> Result<StageRecord> {
        let start = Instant::now();
        log::info!("stage {}", stage.name());
        let artifacts = match stage {
            Stage::Select => self.select(),
            Stage::BartScores => self.bart_scores(),
            Stage::SimulateOdes => self.simulate_odes(),
            Stage::FitBayes => self.fit_bayes(),
            Stage::Evaluate => self.evaluate(),
        }
        .map_err(|e| e.in_stage(stage.name()))?;
        Ok(StageRecord {
            name: stage.name().to_string(),
            artifacts,
            seconds: start.elapsed().as_secs_f64(),
        })
    }

    fn fresh_manifest(&self) -> Manifest {
        Manifest {
            tool: "gallrisk".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.config.seed,
            stage_seeds: SEED_LABELS
                .iter()
                .map(|l| (l.to_string(), self.config.stage_seed(l)))
                .collect(),
            input: self.input.clone(),
            stages: Vec::new(),
        }
    }

    fn write_manifest(&self, manifest: &Manifest) -> Result<()> {
        write_json(&self.out(MANIFEST), manifest)
    }

    fn ingest_stage(&self) -> Result<StageRecord> {
        let start = Instant::now();
        write_json(&self.out(INGEST_REPORT), &self.ingest)?;
        let text = self.config.to_toml()?;
        write_text(&self.out("config.toml"), &text)?;
        Ok(StageRecord {
            name: "ingest".to_string(),
            artifacts: vec![INGEST_REPORT.to_string(), "config.toml".to_string()],
            seconds: start.elapsed().as_secs_f64(),
        })
    }

    fn select(&self) -> Result<Vec<String>> {
        let c = &self.config.lasso;
        let params = c.params();
        let y = self.table.outcome();
        let folds = make_folds(
            self.table.n_rows(),
            c.folds,
            self.config.stage_seed("select"),
            c.stratified.then_some(y),
        )?;
        let cv = cv_select(&self.table, &folds, &params)?;
        let report = SelectionReport::new(&cv, self.table.column_names(), &params);
        log::info!("LASSO kept {} of {} features", report.selected_features.len(), self.table.n_cols());
        write_json(&self.out(SELECTION_REPORT), &report)?;
        Ok(vec![SELECTION_REPORT.to_string()])
    }

    fn bart_scores(&self) -> Result<Vec<String>> {
        let report: SelectionReport = read_upstream(&self.out(SELECTION_REPORT), Stage::Select)?;
        if report.selected_features.is_empty() {
            return Err(Error::Data("the LASSO stage selected no features; nothing to score".into()));
        }
        let sub = self.table.select_columns(&report.selected_features)?;
        let c = &self.config.bart;
        let post = bart::run_sampler(sub.values(), sub.outcome(), &c.hyper(self.config.stage_seed("bart_scores")))?;
        let summary = summarize_scores(&post, &report.selected_features)?;
        summary.write_json(&self.out("bart_scores.json"))?;
        summary.write_vimp_csv(&self.out("vimp.csv"))?;
        heatmap_export(&summary, &self.out(HEATMAP))?;
        write_split_counts(&post, &report.selected_features, &self.out("split_counts.csv"))?;

        let p = report.selected_features.len();
        let cutoff = c.importance_cutoff.unwrap_or(1.0 / p as f64);
        let ranked_features: Vec<RankedFeature> = summary
            .ranked_features()
            .into_iter()
            .map(|j| RankedFeature {
                name: summary.feature_names[j].clone(),
                vimp: summary.vimp[j].mean,
                cv: summary.vimp[j].cv,
            })
            .collect();
        let important_features = ranked_features
            .iter()
            .filter(|f| f.vimp > cutoff)
            .map(|f| f.name.clone())
            .collect();
        let top_pairs = summary
            .ranked_pairs()
            .into_iter()
            .take(c.top_pairs)
            .map(|(r, q, vint)| {
                let cv = summary.vint[r][q].cv;
                RankedPair {
                    a: summary.feature_names[r].clone(),
                    b: summary.feature_names[q].clone(),
                    vint,
                    cv,
                    stable: cv.is_some_and(|v| v <= c.stable_cv_max),
                }
            })
            .collect();
        let features = FinalFeatures {
            ranked_features,
            importance_cutoff: cutoff,
            important_features,
            top_pairs,
            main_effects: self.config.roles.main_effects().iter().map(|s| s.to_string()).collect(),
            interactions: OdeSpec::ALL.iter().map(|s| s.slug().to_string()).collect(),
        };
        write_json(&self.out(FINAL_FEATURES), &features)?;
        Ok(["bart_scores.json", "vimp.csv", HEATMAP, "split_counts.csv", FINAL_FEATURES]
            .map(String::from)
            .to_vec())
    }

    fn simulate_odes(&self) -> Result<Vec<String>> {
        let trajectories = simulate_all(&self.config.odes)?;
        let mut artifacts = write_trajectories(&trajectories, &self.config.out, "trajectories.json")?;
        let roles = &self.config.roles;
        let cols: Vec<usize> = roles
            .main_effects()
            .iter()
            .map(|c| self.table.require_column(c))
            .collect::<Result<_>>()?;
        let path = self.out("ode_features.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::io(&path, e.into()))?;
        let mut header = vec!["row".to_string()];
        header.extend(OdeSpec::ALL.iter().map(|s| s.label().to_string()));
        w.write_record(&header)?;
        let v = self.table.values();
        for i in 0..self.table.n_rows() {
            let main: Vec<f64> = cols.iter().map(|&j| v[(i, j)]).collect();
            let f = interaction_features(&Roles::inputs_from_main(&main))
                .map_err(|e| Error::Domain(format!("row {i}: {e}")))?;
            let mut rec = vec![i.to_string()];
            rec.extend(OdeSpec::ALL.iter().map(|s| f.get(*s).to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        artifacts.push("ode_features.csv".to_string());
        Ok(artifacts)
    }

    fn final_design(&self) -> Result<FinalDesign> {
        let features: FinalFeatures = read_upstream(&self.out(FINAL_FEATURES), Stage::BartScores)?;
        let specs = features.interaction_specs()?;
        if features.main_effects.is_empty() && specs.is_empty() {
            return Err(Error::Config(format!("{FINAL_FEATURES} lists no covariates")));
        }
        for name in &features.main_effects {
            if self.table.column_index(name).is_none() {
                return Err(Error::Config(format!("{FINAL_FEATURES}: column `{name}` is not in the input")));
            }
        }
        build_design_for(&self.table, &self.config.roles, &features.main_effects, &specs)
    }

    fn fit_bayes(&self) -> Result<Vec<String>> {
        let design = self.final_design()?;
        let c = &self.config.bayes;
        let y = self.table.outcome();
        let draws = run_chains(&design, y, &c.prior, &c.settings(self.config.stage_seed("fit_bayes")), None)?;
        let summary = summarize(&draws)?;
        summary.write_csv(&self.out(TABLE2_CSV))?;
        summary.write_json(&self.out("table2.json"))?;
        write_json(&self.out("chain_stats.json"), &draws.chain_stats)?;
        let mut artifacts: Vec<String> = [TABLE2_CSV, "table2.json", "chain_stats.json"].map(String::from).to_vec();
        if c.write_draws {
            write_draws_csv(&draws, &self.out("draws.csv"))?;
            artifacts.push("draws.csv".to_string());
        }
        if is_standard_layout(&design) {
            let profile = default_profile(&design)?;
            for pair in [SurfacePair::CrpHgb, SurfacePair::VitdHyper] {
                let (ax, ay) = pair.axes();
                let xs = axis_grid(&design, ax, c.surface_points);
                let ys = axis_grid(&design, ay, c.surface_points);
                let surface = interaction_surface(&draws, pair, &xs, &ys, &profile)?;
                let name = format!("surface_{}.csv", pair.slug());
                surface.write_csv(&self.out(&name))?;
                artifacts.push(name);
            }
        } else {
            log::info!("custom covariate list; probability surfaces skipped");
        }
        Ok(artifacts)
    }

    fn evaluate(&self) -> Result<Vec<String>> {
        let design = self.final_design()?;
        let c = &self.config.evaluate;
        let y = self.table.outcome();
        let split_seed = self.config.stage_seed("evaluate_split");
        let (train, test) = split_indices(y, c.test_fraction, split_seed, c.stratified)?;
        let x_train = rows_of(design.x(), &train);
        let x_test = rows_of(design.x(), &test);
        let y_train: Vec<u8> = train.iter().map(|&i| y[i]).collect();
        let y_test: Vec<u8> = test.iter().map(|&i| y[i]).collect();

        let logit = fit_logistic_mle(&x_train, &y_train, design.column_names())?;
        let p_logit = logit.predict_proba(&x_test)?;
        let rf = fit_random_forest(&x_train, &y_train, &c.rf_params(self.config.stage_seed("evaluate_rf")))?;
        let p_rf = rf.predict_proba(&x_test)?;
        let hyper = self.config.bart.hyper(self.config.stage_seed("evaluate_bart"));
        let post = bart::run_sampler(&x_train, &y_train, &hyper)?;
        let p_bart = bart::predict_prob(&post, &x_test)?;

        let rows = vec![
            compute_metrics("Logistic Regression", &p_logit, &y_test, c.threshold)?,
            compute_metrics("Random Forest", &p_rf, &y_test, c.threshold)?,
            compute_metrics("BART", &p_bart, &y_test, c.threshold)?,
        ];
        let protocol = format!(
            "{} {:.0}/{:.0} train/test split (seed {split_seed}), {} covariates, threshold {}",
            if c.stratified { "stratified" } else { "random" },
            100.0 * (1.0 - c.test_fraction),
            100.0 * c.test_fraction,
            design.column_names().len(),
            c.threshold
        );
        let table = compare_models(rows)?.with_protocol(protocol);
        table.write_csv(&self.out(TABLE1_CSV))?;
        table.write_json(&self.out("table1.json"))?;
        table.write_accuracy_json(&self.out("accuracy.json"))?;
        let split = EvaluationSplit {
            seed: split_seed,
            test_fraction: c.test_fraction,
            stratified: c.stratified,
            train,
            test,
        };
        write_json(&self.out("evaluation_split.json"), &split)?;
        Ok([TABLE1_CSV, "table1.json", "accuracy.json", "evaluation_split.json"]
            .map(String::from)
            .to_vec())
    }
}

/// Full run from a configuration.
pub fn run_pipeline(config: PipelineConfig) -> Result<Manifest> {
    Pipeline::open(config)?.run_all()
}

/// Single stage from a configuration.
pub fn run_stage(config: PipelineConfig, stage: Stage) -> Result<Manifest> {
    Pipeline::open(config)?.run_one(stage)
}

fn upsert(stages: &mut Vec<StageRecord>, record: StageRecord) {
    match stages.iter_mut().find(|s| s.name == record.name) {
        Some(slot) => *slot = record,
        None => stages.push(record),
    }
}

fn rows_of(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)])
}

/// `{0, 1}` for binary columns, otherwise `points` evenly spaced values
/// from the column minimum to its maximum.
fn axis_grid(design: &FinalDesign, col: usize, points: usize) -> Vec<f64> {
    if design.kinds()[col] == dataset::ColumnKind::Binary {
        return vec![0.0, 1.0];
    }
    let c = design.x().column(col);
    let lo = c.min();
    let hi = c.max();
    (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn read_upstream<T: DeserializeOwned>(path: &Path, producer: Stage) -> Result<T> {
    if !path.exists() {
        return Err(Error::Data(format!(
            "missing upstream artifact {}; run `{}` first",
            path.display(),
            producer.command()
        )));
    }
    read_json(path)
}
