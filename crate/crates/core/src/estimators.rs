//! Second-stage effect estimators: the stratified difference in means with
//! its plug-in standard error, and the linear probability model.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, ObservedDataset, Race};
use crate::linmodel::{ols_fit_named, LinModelError, LinearFit};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

/// Name of the treatment-indicator column in regression designs.
pub const TREATMENT_COLUMN: &str = "z=b";

#[derive(Debug, Error, PartialEq)]
pub enum EstimateError {
    #[error("empty dataset")]
    Empty,
    #[error("overlap violated in stratum {stratum}: no {missing} observations")]
    Overlap { stratum: String, missing: Race },
    #[error("every stratum lacks one treatment level")]
    AllStrataDropped,
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Model(#[from] LinModelError),
}

impl From<DataError> for EstimateError {
    fn from(e: DataError) -> Self {
        EstimateError::Data(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapPolicy {
    /// Any stratum missing a treatment level is an error.
    #[default]
    Strict,
    /// Such strata are excluded and the weights renormalised.
    Drop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Stratified,
    Regression,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Stratified => "stratified",
            Method::Regression => "regression",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub point: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub method: Method,
    pub n_used: usize,
    pub dropped_mass: f64,
}

impl Estimate {
    pub fn new(point: f64, se: f64, method: Method, n_used: usize, dropped_mass: f64) -> Self {
        Self {
            point,
            se,
            ci_low: point - Z_95 * se,
            ci_high: point + Z_95 * se,
            method,
            n_used,
            dropped_mass,
        }
    }

    pub fn covers(&self, truth: f64) -> bool {
        self.ci_low <= truth && truth <= self.ci_high
    }
}

/// Header of the estimate CSV rows.
pub const ESTIMATE_HEADER: [&str; 8] = ["method", "scenario", "point", "se", "ci_low", "ci_high", "n_used", "dropped_mass"];

/// Writes `method,scenario,point,se,ci_low,ci_high,n_used,dropped_mass`.
pub fn write_estimates_csv<'a, W, I>(w: W, rows: I) -> Result<(), csv::Error>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, &'a Estimate)>,
{
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(ESTIMATE_HEADER)?;
    for (scenario, e) in rows {
        wtr.write_record([
            e.method.label().to_string(),
            scenario.to_string(),
            e.point.to_string(),
            e.se.to_string(),
            e.ci_low.to_string(),
            e.ci_high.to_string(),
            e.n_used.to_string(),
            e.dropped_mass.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct StratumSummary {
    pub label: String,
    pub n_x: usize,
    pub n_b: usize,
    pub n_w: usize,
    /// Mean outcome among `z = b` rows; `None` when the cell is empty.
    pub c_b: Option<f64>,
    pub c_w: Option<f64>,
}

impl StratumSummary {
    pub fn has_overlap(&self) -> bool {
        self.n_b > 0 && self.n_w > 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrataSummary {
    pub strata: Vec<StratumSummary>,
    pub n: usize,
}

pub fn summarize_strata(data: &ObservedDataset, strata: &[&str]) -> Result<StrataSummary, EstimateError> {
    let (keys, labels) = data.strata(strata)?;
    // (n_b, n_w, sum_b, sum_w)
    let mut cells: BTreeMap<&Vec<i64>, (usize, usize, u64, u64)> = BTreeMap::new();
    for ((k, &z), &y) in keys.iter().zip(data.z()).zip(data.y()) {
        let c = cells.entry(k).or_default();
        if z.is_black() {
            c.0 += 1;
            c.2 += y as u64;
        } else {
            c.1 += 1;
            c.3 += y as u64;
        }
    }
    let mean = |s: u64, n: usize| (n > 0).then(|| s as f64 / n as f64);
    let strata = cells
        .into_iter()
        .map(|(k, (nb, nw, sb, sw))| StratumSummary {
            label: labels[k].clone(),
            n_x: nb + nw,
            n_b: nb,
            n_w: nw,
            c_b: mean(sb, nb),
            c_w: mean(sw, nw),
        })
        .collect();
    Ok(StrataSummary { strata, n: data.len() })
}

/// Stratified difference in means, `Σ_x (n_x/n)(c_bx − c_wx)`, with standard
/// error `sqrt(Σ_x (n_x/n)² [c_bx(1−c_bx)/n_bx + c_wx(1−c_wx)/n_wx])`.
pub fn stratified_dim(data: &ObservedDataset, strata: &[&str], policy: OverlapPolicy) -> Result<Estimate, EstimateError> {
    if data.is_empty() {
        return Err(EstimateError::Empty);
    }
    let summary = summarize_strata(data, strata)?;
    stratified_from_summary(&summary, policy)
}

pub fn stratified_from_summary(summary: &StrataSummary, policy: OverlapPolicy) -> Result<Estimate, EstimateError> {
    if summary.n == 0 {
        return Err(EstimateError::Empty);
    }
    if policy == OverlapPolicy::Strict {
        if let Some(s) = summary.strata.iter().find(|s| !s.has_overlap()) {
            return Err(EstimateError::Overlap {
                stratum: s.label.clone(),
                missing: if s.n_b == 0 { Race::Black } else { Race::White },
            });
        }
    }
    let kept: Vec<&StratumSummary> = summary.strata.iter().filter(|s| s.has_overlap()).collect();
    let n_used: usize = kept.iter().map(|s| s.n_x).sum();
    if n_used == 0 {
        return Err(EstimateError::AllStrataDropped);
    }
    let (mut point, mut var) = (0.0, 0.0);
    for s in &kept {
        let w = s.n_x as f64 / n_used as f64;
        let (cb, cw) = (s.c_b.unwrap(), s.c_w.unwrap());
        point += w * (cb - cw);
        var += w * w * (cb * (1.0 - cb) / s.n_b as f64 + cw * (1.0 - cw) / s.n_w as f64);
    }
    let dropped_mass = (summary.n - n_used) as f64 / summary.n as f64;
    Ok(Estimate::new(point, var.sqrt(), Method::Stratified, n_used, dropped_mass))
}

/// Builds `[1, 1(z=b), covariates...]` with column names.
pub fn regression_design(data: &ObservedDataset, covariates: &[&str]) -> Result<(DMatrix<f64>, Vec<String>), EstimateError> {
    let mut cols: Vec<(String, Vec<f64>)> = vec![
        ("(intercept)".into(), vec![1.0; data.len()]),
        (TREATMENT_COLUMN.into(), data.z_indicator()),
    ];
    cols.extend(data.encode(covariates)?);
    let n = data.len();
    let m = DMatrix::from_fn(n, cols.len(), |i, j| cols[j].1[i]);
    Ok((m, cols.into_iter().map(|(n, _)| n).collect()))
}

/// OLS of `y` on intercept, treatment indicator and covariates; returns the
/// estimate (treatment coefficient with its homoskedastic SE) and the fit.
pub fn regression_fit(data: &ObservedDataset, covariates: &[&str]) -> Result<(Estimate, LinearFit), EstimateError> {
    if data.is_empty() {
        return Err(EstimateError::Empty);
    }
    let (design, names) = regression_design(data, covariates)?;
    let fit = ols_fit_named(&design, &data.y_f64(), &names)?;
    let (point, se) = (fit.coefficients[1], fit.se[1]);
    Ok((Estimate::new(point, se, Method::Regression, data.len(), 0.0), fit))
}

pub fn regression_cdes(data: &ObservedDataset, covariates: &[&str]) -> Result<Estimate, EstimateError> {
    regression_fit(data, covariates).map(|(e, _)| e)
}

/// Fraction of intervals containing `truth`; `None` for an empty collection.
pub fn coverage(estimates: &[Estimate], truth: f64) -> Option<f64> {
    if estimates.is_empty() {
        return None;
    }
    Some(estimates.iter().filter(|e| e.covers(truth)).count() as f64 / estimates.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Covariate;

    fn dataset(rows: &[(Race, f64, u8)]) -> ObservedDataset {
        ObservedDataset::new(
            rows.iter().map(|r| r.0).collect(),
            rows.iter().map(|r| r.2).collect(),
            vec![Covariate::numeric("x", rows.iter().map(|r| r.1).collect())],
        )
        .unwrap()
    }

    #[test]
    fn degenerate_cells() {
        use Race::*;
        let d = dataset(&[(Black, 0.0, 1), (Black, 0.0, 1), (White, 0.0, 0), (White, 0.0, 0)]);
        let e = stratified_dim(&d, &[], OverlapPolicy::Strict).unwrap();
        assert_eq!(e.point, 1.0);
        assert_eq!(e.se, 0.0);
        assert_eq!((e.ci_low, e.ci_high), (1.0, 1.0));
    }

    #[test]
    fn two_strata_hand_value() {
        use Race::*;
        let d = dataset(&[
            (Black, 0.0, 1),
            (Black, 0.0, 0),
            (White, 0.0, 0),
            (White, 0.0, 0),
            (Black, 1.0, 1),
            (Black, 1.0, 1),
            (White, 1.0, 1),
            (White, 1.0, 0),
        ]);
        let e = stratified_dim(&d, &["x"], OverlapPolicy::Strict).unwrap();
        assert!((e.point - 0.5).abs() < 1e-15);
        // 0.25 * (0.25/2 + 0) + 0.25 * (0 + 0.25/2)
        assert!((e.se - (0.0625f64).sqrt()).abs() < 1e-15);
        assert_eq!(e.n_used, 8);
        assert_eq!(e.dropped_mass, 0.0);
    }

    #[test]
    fn overlap_policies() {
        use Race::*;
        let d = dataset(&[(Black, 0.0, 1), (White, 0.0, 0), (Black, 1.0, 1), (Black, 1.0, 0)]);
        match stratified_dim(&d, &["x"], OverlapPolicy::Strict) {
            Err(EstimateError::Overlap { stratum, missing }) => {
                assert_eq!(stratum, "x=1");
                assert_eq!(missing, White);
            }
            other => panic!("{other:?}"),
        }
        let e = stratified_dim(&d, &["x"], OverlapPolicy::Drop).unwrap();
        assert_eq!(e.point, 1.0);
        assert_eq!(e.n_used, 2);
        assert_eq!(e.dropped_mass, 0.5);
        let lonely = dataset(&[(Black, 0.0, 1), (Black, 1.0, 0)]);
        assert_eq!(
            stratified_dim(&lonely, &["x"], OverlapPolicy::Drop),
            Err(EstimateError::AllStrataDropped)
        );
    }

    #[test]
    fn constant_outcome_gives_zero_coefficient() {
        use Race::*;
        let d = dataset(&[(Black, 0.0, 1), (White, 1.0, 1), (Black, 1.0, 1), (White, 0.0, 1), (White, 1.0, 1)]);
        let e = regression_cdes(&d, &["x"]).unwrap();
        assert!(e.point.abs() < 1e-12);
        assert!(e.se.abs() < 1e-12);
    }

    #[test]
    fn rank_deficiency_reported() {
        use Race::*;
        // x duplicates the treatment indicator
        let d = dataset(&[(Black, 1.0, 1), (White, 0.0, 1), (Black, 1.0, 0), (White, 0.0, 1)]);
        match regression_cdes(&d, &["x"]) {
            Err(EstimateError::Model(LinModelError::Singular { columns })) => {
                assert_eq!(columns, vec!["z=b".to_string(), "x".to_string()]);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(regression_cdes(&d, &["nope"]).unwrap_err(), EstimateError::Data("missing column `nope`".into()));
    }

    #[test]
    fn coverage_counts_intervals() {
        let e = |p| Estimate::new(p, 0.01, Method::Regression, 10, 0.0);
        assert_eq!(coverage(&[e(0.3), e(0.3)], 0.3), Some(1.0));
        assert_eq!(coverage(&[e(0.3), e(0.5)], 0.3), Some(0.5));
        assert_eq!(coverage(&[], 0.3), None);
    }

    #[test]
    fn estimate_csv_header() {
        let mut buf = Vec::new();
        let e = Estimate::new(0.1, 0.01, Method::Stratified, 100, 0.0);
        write_estimates_csv(&mut buf, [("unconfounded", &e)]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("method,scenario,point,se,ci_low,ci_high,n_used,dropped_mass\nstratified,unconfounded,0.1,0.01,"));
    }
}
