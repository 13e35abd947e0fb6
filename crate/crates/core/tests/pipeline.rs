use std::fs;

use cdeob::data::ObservedDataset;
use cdeob::estimators::regression_cdes;
use cdeob::harness::{
    gen_synthetic_empirical, recipe_path, run_pipeline, write_synthetic, HarnessError, PipelineOptions,
};
use cdeob::linmodel::LinModelError;
use cdeob::scm::{sample_population, ScmParams};

fn quick() -> PipelineOptions {
    PipelineOptions {
        lasso_path_len: 8,
        lasso_folds: 3,
        grid_steps: 11,
        ..Default::default()
    }
}

#[test]
fn artifacts_written_and_overlap_holds() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("synth.csv");
    let synth = gen_synthetic_empirical(8, 8000, 0.05).unwrap();
    write_synthetic(&csv, &synth).unwrap();
    let recipe: serde_json::Value = serde_json::from_str(&fs::read_to_string(recipe_path(&csv)).unwrap()).unwrap();
    assert_eq!(recipe["true_effect"], 0.05);

    let out = dir.path().join("out");
    let report = run_pipeline(&csv, &out, &quick()).unwrap();
    for f in ["propensity.csv", "overlap_histogram.csv", "estimates.csv", "sensitivity.csv", "benchmarks.csv", "report.json", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(report.propensity_min > 0.05 && report.propensity_max < 0.95);
    assert!(report.outcome_auc.unwrap() > 0.5);
    assert_eq!(report.benchmarks.len(), 6);
    let lines = fs::read_to_string(out.join("sensitivity.csv")).unwrap().lines().count();
    assert_eq!(lines, 1 + 11 * 11);
}

#[test]
fn constructed_benchmarks_straddle_the_critical_curve() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("synth.csv");
    write_synthetic(&csv, &gen_synthetic_empirical(9, 30_000, 0.05).unwrap()).unwrap();
    let report = run_pipeline(&csv, &dir.path().join("out"), &quick()).unwrap();
    let point = |l: &str| report.benchmarks.iter().find(|b| b.label == l).unwrap().clone();
    // `unit` moves both race and charging strongly; `body_cam` is pure noise.
    assert!(point("unit").exceeds_critical);
    let cam = point("body_cam");
    assert!(!cam.exceeds_critical);
    assert!(cam.r2y < 0.01 && cam.r2z < 0.01);
}

#[test]
fn constant_outcome_gives_zero_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let synth = gen_synthetic_empirical(2, 2000, 0.05).unwrap();
    let d = &synth.data;
    let zeros = ObservedDataset::new(d.z().to_vec(), vec![0; d.len()], d.covariates().to_vec()).unwrap();
    let csv = dir.path().join("zeros.csv");
    zeros.write_csv_path(&csv).unwrap();
    let r = run_pipeline(&csv, &dir.path().join("out"), &quick()).unwrap();
    assert!(r.estimate.point.abs() < 1e-12);
    assert!(r.estimate.se.abs() < 1e-12);
    assert_eq!(r.outcome_auc, None);
}

#[test]
fn scm_data_matches_library_estimator() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample_population(&ScmParams::paper(0.3, 0.3), 5000, 4).unwrap().observe();
    let csv = dir.path().join("scm.csv");
    data.write_csv_path(&csv).unwrap();
    let options = PipelineOptions {
        covariates: Some(vec!["x".into(), "r".into()]),
        ..quick()
    };
    let r = run_pipeline(&csv, &dir.path().join("out"), &options).unwrap();
    let direct = regression_cdes(&ObservedDataset::read_csv_path(&csv).unwrap(), &["x", "r"]).unwrap();
    assert_eq!(r.estimate, direct);
}

#[test]
fn named_errors() {
    let dir = tempfile::tempdir().unwrap();
    let one_class = dir.path().join("one.csv");
    fs::write(&one_class, "z,x,y\nb,1,0\nb,0,1\nb,1,1\n").unwrap();
    let err = run_pipeline(&one_class, &dir.path().join("o1"), &quick()).unwrap_err();
    assert!(matches!(err, HarnessError::Model(LinModelError::SingleClass)), "{err}");

    let missing = dir.path().join("missing.csv");
    fs::write(&missing, "z,x\nb,1\nw,0\n").unwrap();
    let err = run_pipeline(&missing, &dir.path().join("o2"), &quick()).unwrap_err();
    assert_eq!(err.kind(), "data");
    assert!(err.to_string().contains('y'));

    let dup = dir.path().join("dup.csv");
    fs::write(&dup, "z,x,x2,y\nb,1,1,0\nw,0,0,1\nb,0,0,1\nw,1,1,0\nb,1,1,1\nw,0,0,0\n").unwrap();
    let err = run_pipeline(&dup, &dir.path().join("o3"), &quick()).unwrap_err();
    assert!(matches!(err, HarnessError::Estimate(_)), "{err}");
    assert!(err.to_string().contains("x2"), "{err}");
}
