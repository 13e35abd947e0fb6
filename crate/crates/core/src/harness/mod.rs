//! Drivers: the Monte Carlo study, the empirical pipeline, and the synthetic
//! data generator, plus their file layouts.

mod pipeline;
mod simulation;
mod synth;

use std::fs;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::data::DataError;
use crate::estimators::EstimateError;
use crate::linmodel::LinModelError;
use crate::scm::ScmError;
use crate::sensitivity::SensitivityError;

pub use pipeline::{run_pipeline, write_histogram_csv, HistogramBin, PipelineOptions, PipelineReport};
pub use simulation::{
    percentile, run_simulation, write_simulation, Scenario, SimConfig, SimResult, SimSummaryRow, SimulatedEstimate,
};
pub use synth::{gen_synthetic_empirical, recipe_path, write_synthetic, SyntheticData, SyntheticRecipe};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Model(#[from] LinModelError),
    #[error(transparent)]
    Sensitivity(#[from] SensitivityError),
    #[error("io at {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Stable machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config",
            HarnessError::Scm(_) => "scm",
            HarnessError::Data(_) => "data",
            HarnessError::Estimate(_) => "estimate",
            HarnessError::Model(_) => "model",
            HarnessError::Sensitivity(_) => "sensitivity",
            HarnessError::Io { .. } => "io",
            HarnessError::Csv(_) => "csv",
            HarnessError::Json(_) => "json",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub(crate) fn create_file(path: &Path) -> Result<fs::File, HarnessError> {
    fs::File::create(path).map_err(io_err(path))
}

pub(crate) fn ensure_dir(path: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(path).map_err(io_err(path))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).map_err(io_err(path))
}

/// Version stamp written into manifests.
pub fn versions() -> serde_json::Value {
    serde_json::json!({
        "cdeob": env!("CARGO_PKG_VERSION"),
        "parallel_feature": cfg!(feature = "parallel"),
    })
}
