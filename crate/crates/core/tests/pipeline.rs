use std::collections::BTreeMap;
use std::path::Path;

use gallrisk::dataset;
use gallrisk::gallstone::OUTCOME;
use gallrisk::pipeline::{run_pipeline, run_stage, FinalFeatures, Manifest, PipelineConfig, Stage, FINAL_FEATURES, MANIFEST};
use gallrisk::synthetic;

fn small_config(dir: &Path, out: &str) -> PipelineConfig {
    let data = dir.join("cohort.csv");
    if !data.exists() {
        let table = synthetic::gallstone_like(240, 3);
        dataset::write_csv(&table, OUTCOME, &data).unwrap();
    }
    let mut c = PipelineConfig {
        seed: 11,
        out: dir.join(out),
        ..Default::default()
    };
    c.data.path = data;
    c.lasso.n_lambda = 30;
    c.bart.n_iter = 200;
    c.bart.n_burn = 50;
    c.bayes.iter = 500;
    c.bayes.warmup = 200;
    c.bayes.surface_points = 5;
    c.evaluate.rf_trees = 60;
    c
}

/// File name to contents for every file except the manifest.
fn numeric_artifacts(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != MANIFEST)
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn full_run_lists_every_stage_and_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_config(dir.path(), "run");
    let manifest = run_pipeline(c.clone()).unwrap();
    let names: Vec<&str> = manifest.stages.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["ingest", "select", "bart_scores", "simulate_odes", "fit_bayes", "evaluate"]);
    for a in ["selection_report.json", "heatmap.json", "table2.csv", "table1.csv", "final_features.json"] {
        assert!(manifest.artifacts().any(|x| x == a), "{a}");
    }
    for a in manifest.artifacts() {
        assert!(c.out.join(a).is_file(), "{a}");
    }
    assert_eq!(manifest.input.sha256.len(), 64);
    assert_eq!(Manifest::read(&c.out.join(MANIFEST)).unwrap(), manifest);

    let table2 = std::fs::read_to_string(c.out.join("table2.csv")).unwrap();
    assert_eq!(table2.lines().count(), 1 + 14);
    let table1 = std::fs::read_to_string(c.out.join("table1.csv")).unwrap();
    assert_eq!(table1.lines().count(), 1 + 3);
    assert!(c.out.join("surface_crp_hgb.csv").is_file());
}

#[test]
fn stage_by_stage_matches_a_full_run() {
    let dir = tempfile::tempdir().unwrap();
    let whole = small_config(dir.path(), "whole");
    run_pipeline(whole.clone()).unwrap();
    let staged = small_config(dir.path(), "staged");
    for stage in Stage::ALL {
        run_stage(staged.clone(), stage).unwrap();
    }
    let a = numeric_artifacts(&whole.out);
    let b = numeric_artifacts(&staged.out);
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (name, bytes) in &a {
        if name == "config.toml" {
            continue;
        }
        assert!(bytes == &b[name], "{name} differs");
    }
    let m = Manifest::read(&staged.out.join(MANIFEST)).unwrap();
    assert_eq!(m.stages.len(), 6);
}

#[test]
fn missing_outcome_column_fails_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(dir.path(), "out");
    c.data.outcome = "No Such Column".into();
    let e = run_pipeline(c.clone()).unwrap_err();
    assert_eq!(e.exit_code(), 2, "{e}");
    assert!(!c.out.exists());
}

#[test]
fn downstream_stage_without_upstream_artifacts_says_what_to_run() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_config(dir.path(), "out");
    let e = run_stage(c, Stage::FitBayes).unwrap_err();
    assert_eq!(e.exit_code(), 3);
    let msg = e.to_string();
    assert!(msg.contains("bart-scores"), "{msg}");
}

#[test]
fn fit_bayes_uses_an_edited_feature_list() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(dir.path(), "out");
    c.stages.fit_bayes = false;
    c.stages.evaluate = false;
    run_pipeline(c.clone()).unwrap();
    let path = c.out.join(FINAL_FEATURES);
    let mut f: FinalFeatures = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    f.main_effects = vec!["C-Reactive Protein (CRP)".into(), "Age".into()];
    f.interactions = vec!["crp_hgb".into()];
    std::fs::write(&path, serde_json::to_string_pretty(&f).unwrap()).unwrap();
    run_stage(c.clone(), Stage::FitBayes).unwrap();
    let table2 = std::fs::read_to_string(c.out.join("table2.csv")).unwrap();
    let params: Vec<&str> = table2.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(params, ["Intercept", "CRP", "Age", "CRP x HGB"]);
    assert!(!c.out.join("surface_crp_hgb.csv").exists());
}

#[test]
fn changed_input_is_detected_between_stages() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_config(dir.path(), "out");
    run_stage(c.clone(), Stage::Select).unwrap();
    let table = synthetic::gallstone_like(240, 4);
    dataset::write_csv(&table, OUTCOME, &c.data.path).unwrap();
    let e = run_stage(c, Stage::BartScores).unwrap_err();
    assert_eq!(e.exit_code(), 3);
    assert!(e.to_string().contains("changed"), "{e}");
}
