//! Estimating discrimination in the second stage of a two-stage decision
//! process (for example, prosecutorial charging among arrested individuals).
//!
//! The crate is organised around the pieces of that workflow:
//!
//! * [`scm`] simulates the stylised arrest/report/charge structural causal
//!   model, including every potential outcome, and computes the exact
//!   second-stage effect (CDE-Ob) and total effect of a sample.
//! * [`estimators`] implements the stratified difference-in-means estimator,
//!   the linear-probability-model estimator, and interval coverage.
//! * [`linmodel`] holds the numeric building blocks: QR-based OLS, lasso
//!   logistic regression by coordinate descent, AUC and partial R².
//! * [`sensitivity`] bounds how far an omitted confounder could move the
//!   regression estimate, in terms of two partial R² values.
//! * [`ignorability`] is an exact-arithmetic laboratory for finite joint
//!   distributions of potential outcomes: it checks the competing
//!   ignorability conditions and builds the classic counterexamples.
//! * [`harness`] drives Monte Carlo studies, the empirical pipeline, the
//!   synthetic data generator, and file I/O.

pub mod data;
pub mod estimators;
pub mod exec;
pub mod harness;
pub mod ignorability;
pub mod linmodel;
pub mod rng;
pub mod scm;
pub mod sensitivity;

pub use data::{Column, Covariate, DataError, ObservedDataset, Race};
pub use estimators::{Estimate, EstimateError, Method, OverlapPolicy};
pub use exec::Execution;
pub use scm::{PotentialOutcomeRow, PotentialOutcomeTable, ScmError, ScmParams};
