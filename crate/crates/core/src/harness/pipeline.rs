use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{create_file, ensure_dir, versions, write_json, HarnessError};
use crate::data::ObservedDataset;
use crate::estimators::{regression_fit, write_estimates_csv, Estimate};
use crate::exec::{execution_for, with_workers};
use crate::linmodel::{auc, lasso_logistic_cv, LinModelError};
use crate::sensitivity::{
    benchmark_covariates, contour_grid_with, write_benchmarks_csv, BenchmarkPoint, CovariateSubset, DEFAULT_R_MAX,
    DEFAULT_STEPS,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineOptions {
    /// Model covariates; `None` uses every column besides `z` and `y`.
    pub covariates: Option<Vec<String>>,
    /// Benchmark subsets; `None` benchmarks each covariate on its own.
    pub benchmarks: Option<Vec<CovariateSubset>>,
    pub lasso_folds: usize,
    pub lasso_path_len: usize,
    pub seed: u64,
    pub r_max: f64,
    pub grid_steps: usize,
    pub histogram_bins: usize,
    pub workers: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            covariates: None,
            benchmarks: None,
            lasso_folds: 5,
            lasso_path_len: 30,
            seed: 0,
            r_max: DEFAULT_R_MAX,
            grid_steps: DEFAULT_STEPS,
            histogram_bins: 20,
            workers: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub low: f64,
    pub high: f64,
    pub count_w: usize,
    pub count_b: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineReport {
    pub n: usize,
    pub covariates: Vec<String>,
    pub estimate: Estimate,
    pub df: usize,
    pub outcome_r_squared: f64,
    /// `None` when the outcome has a single class.
    pub outcome_auc: Option<f64>,
    pub lasso_lambda: f64,
    pub propensity_min: f64,
    pub propensity_max: f64,
    pub critical_level: f64,
    pub benchmarks: Vec<BenchmarkPoint>,
    #[serde(skip)]
    pub propensity: Vec<f64>,
}

/// Writes `low,high,count_w,count_b`.
pub fn write_histogram_csv<W: Write>(w: W, bins: &[HistogramBin]) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["low", "high", "count_w", "count_b"])?;
    for b in bins {
        wtr.write_record([b.low.to_string(), b.high.to_string(), b.count_w.to_string(), b.count_b.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

fn histogram(data: &ObservedDataset, scores: &[f64], bins: usize) -> Vec<HistogramBin> {
    let bins = bins.max(1);
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            low: i as f64 / bins as f64,
            high: (i + 1) as f64 / bins as f64,
            count_w: 0,
            count_b: 0,
        })
        .collect();
    for (s, z) in scores.iter().zip(data.z()) {
        let i = ((s * bins as f64) as usize).min(bins - 1);
        if z.is_black() {
            out[i].count_b += 1;
        } else {
            out[i].count_w += 1;
        }
    }
    out
}

fn feature_matrix(data: &ObservedDataset, covariates: &[&str]) -> Result<DMatrix<f64>, HarnessError> {
    let cols = data.encode(covariates)?;
    Ok(DMatrix::from_fn(data.len(), cols.len(), |i, j| cols[j].1[i]))
}

/// Propensity model, outcome regression, AUC and sensitivity analysis on
/// the CSV at `data_file`; artifacts go to `out_dir`.
pub fn run_pipeline(data_file: &Path, out_dir: &Path, options: &PipelineOptions) -> Result<PipelineReport, HarnessError> {
    let data = ObservedDataset::read_csv_path(data_file)?;
    let covariates: Vec<String> = match &options.covariates {
        Some(c) => c.clone(),
        None => data.covariate_names().iter().map(|s| s.to_string()).collect(),
    };
    let covs: Vec<&str> = covariates.iter().map(String::as_str).collect();
    let labels: Vec<bool> = data.z().iter().map(|z| z.is_black()).collect();
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(LinModelError::SingleClass.into());
    }
    let exec = execution_for(options.workers);

    let (estimate, fit) = regression_fit(&data, &covs)?;
    let features = feature_matrix(&data, &covs)?;
    let cv = with_workers(options.workers, || {
        lasso_logistic_cv(&features, &labels, options.lasso_folds, options.lasso_path_len, options.seed, exec)
    })?;
    let propensity = cv.fit.predict_proba(&features);

    let outcome_labels: Vec<bool> = data.y().iter().map(|&y| y == 1).collect();
    let outcome_auc = match auc(&fit.fitted, &outcome_labels) {
        Ok(a) => Some(a),
        Err(LinModelError::SingleClass) => None,
        Err(e) => return Err(e.into()),
    };

    let grid = contour_grid_with(&estimate, fit.df, options.r_max, options.grid_steps, exec)?;
    let subsets: Vec<CovariateSubset> = match &options.benchmarks {
        Some(b) => b.clone(),
        None if covs.len() > 1 => covs.iter().map(|c| CovariateSubset::new(*c, &[c])).collect(),
        None => Vec::new(),
    };
    let benchmarks = benchmark_covariates(&data, &covs, &subsets)?;

    ensure_dir(out_dir)?;
    let mut w = csv::Writer::from_writer(create_file(&out_dir.join("propensity.csv"))?);
    w.write_record(["z", "score"])?;
    for (z, s) in data.z().iter().zip(&propensity) {
        w.write_record([z.label(), &s.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    write_histogram_csv(
        create_file(&out_dir.join("overlap_histogram.csv"))?,
        &histogram(&data, &propensity, options.histogram_bins),
    )?;
    write_estimates_csv(create_file(&out_dir.join("estimates.csv"))?, [("pipeline", &estimate)])?;
    grid.write_csv(create_file(&out_dir.join("sensitivity.csv"))?)?;
    write_benchmarks_csv(create_file(&out_dir.join("benchmarks.csv"))?, &benchmarks)?;

    let report = PipelineReport {
        n: data.len(),
        covariates: covariates.clone(),
        df: fit.df,
        outcome_r_squared: fit.r_squared,
        outcome_auc,
        lasso_lambda: cv.best_lambda,
        propensity_min: propensity.iter().copied().fold(f64::INFINITY, f64::min),
        propensity_max: propensity.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        critical_level: grid.critical_level,
        benchmarks,
        estimate,
        propensity,
    };
    write_json(&out_dir.join("report.json"), &report)?;
    let manifest = serde_json::json!({
        "command": "pipeline",
        "data": data_file.file_name().map(|f| f.to_string_lossy().to_string()),
        "options": options,
        "versions": versions(),
        "outputs": ["propensity.csv", "overlap_histogram.csv", "estimates.csv", "sensitivity.csv", "benchmarks.csv", "report.json"],
    });
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(report)
}
