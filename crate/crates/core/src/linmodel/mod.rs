//! Regression primitives shared by the estimators, the overlap diagnostics
//! and the sensitivity analysis.

mod lasso;
mod metrics;
mod ols;

use thiserror::Error;

pub use lasso::{lambda_max, lasso_logistic_cv, lasso_logistic_fit, lasso_logistic_fit_with, CvFit, LassoOptions, LogisticFit};
pub use metrics::{auc, partial_r2};
pub use ols::{ols_fit, ols_fit_named, LinearFit, RANK_TOLERANCE};

#[derive(Debug, Error, PartialEq)]
pub enum LinModelError {
    #[error("design is rank deficient; collinear columns: {}", .columns.join(", "))]
    Singular { columns: Vec<String> },
    #[error("design has {rows} rows but {cols} columns")]
    TooFewRows { rows: usize, cols: usize },
    #[error("length mismatch: {0}")]
    Length(String),
    #[error("labels contain a single class")]
    SingleClass,
    #[error("domain error: {0}")]
    Domain(String),
}
