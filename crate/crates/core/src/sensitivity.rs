//! Omitted-variable sensitivity analysis for the regression estimate.
//!
//! An unobserved confounder with partial R² `r2y` against the outcome (given
//! treatment and covariates) and `r2z` against the treatment indicator
//! (given covariates) can move the treatment coefficient by at most
//! `se · sqrt(df) · sqrt(r2y · r2z / (1 − r2z))`.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::ObservedDataset;
use crate::estimators::{regression_design, regression_fit, Estimate, EstimateError};
use crate::exec::Execution;
use crate::linmodel::{ols_fit_named, partial_r2, LinModelError};

pub const DEFAULT_R_MAX: f64 = 0.5;
pub const DEFAULT_STEPS: usize = 101;

#[derive(Debug, Error, PartialEq)]
pub enum SensitivityError {
    #[error("r2z = 1 makes the bound unbounded")]
    Unbounded,
    #[error("{name} = {value} outside its domain")]
    Domain { name: &'static str, value: f64 },
    #[error("grid needs steps >= 2 and 0 < r_max < 1 (got steps={steps}, r_max={r_max})")]
    Grid { steps: usize, r_max: f64 },
    #[error("subset `{label}` is not a proper subset of the model covariates")]
    NotProperSubset { label: String },
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Model(#[from] LinModelError),
}

/// Largest absolute change to the treatment coefficient.
pub fn bias_bound(r2y: f64, r2z: f64, se: f64, df: usize) -> Result<f64, SensitivityError> {
    if !(0.0..=1.0).contains(&r2y) {
        return Err(SensitivityError::Domain { name: "r2y", value: r2y });
    }
    if r2z == 1.0 {
        return Err(SensitivityError::Unbounded);
    }
    if !(0.0..1.0).contains(&r2z) {
        return Err(SensitivityError::Domain { name: "r2z", value: r2z });
    }
    if !(se >= 0.0) || !se.is_finite() {
        return Err(SensitivityError::Domain { name: "se", value: se });
    }
    if df == 0 {
        return Err(SensitivityError::Domain { name: "df", value: 0.0 });
    }
    Ok(se * (df as f64).sqrt() * (r2y * r2z / (1.0 - r2z)).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPoint {
    pub label: String,
    pub r2y: f64,
    pub r2z: f64,
    pub exceeds_critical: bool,
}

/// Named covariate subset for benchmarking.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovariateSubset {
    pub label: String,
    pub columns: Vec<String>,
}

impl CovariateSubset {
    pub fn new(label: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            label: label.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
        }
    }
}

/// Partial R² pair of `subset` given the remaining `model` covariates:
/// `r2y` from the outcome regression (with treatment), `r2z` from the
/// regression of the treatment indicator on covariates.
pub fn partial_r2_pair(data: &ObservedDataset, model: &[&str], subset: &[&str]) -> Result<(f64, f64), SensitivityError> {
    if subset.is_empty() {
        return Ok((0.0, 0.0));
    }
    let reduced: Vec<&str> = model.iter().copied().filter(|c| !subset.contains(c)).collect();
    let (_, full_y) = regression_fit(data, model)?;
    let (_, red_y) = regression_fit(data, &reduced)?;
    let r2y = partial_r2(full_y.r_squared, red_y.r_squared)?;
    let full_z = treatment_fit_r2(data, model)?;
    let red_z = treatment_fit_r2(data, &reduced)?;
    let r2z = partial_r2(full_z, red_z)?;
    Ok((r2y.clamp(0.0, 1.0), r2z.clamp(0.0, 1.0)))
}

fn treatment_fit_r2(data: &ObservedDataset, covariates: &[&str]) -> Result<f64, SensitivityError> {
    let (design, names) = regression_design(data, covariates)?;
    // Drop the treatment column: regress it on intercept plus covariates.
    let keep: Vec<usize> = (0..design.ncols()).filter(|&j| j != 1).collect();
    let x: DMatrix<f64> = design.select_columns(&keep);
    let names: Vec<String> = keep.iter().map(|&j| names[j].clone()).collect();
    Ok(ols_fit_named(&x, &data.z_indicator(), &names)?.r_squared)
}

/// Benchmark points for covariate subsets of `model`, judged against the
/// regression estimate fitted with all of `model`.
pub fn benchmark_covariates(
    data: &ObservedDataset,
    model: &[&str],
    subsets: &[CovariateSubset],
) -> Result<Vec<BenchmarkPoint>, SensitivityError> {
    let (estimate, fit) = regression_fit(data, model)?;
    let critical = estimate.point.abs();
    subsets
        .iter()
        .map(|s| {
            let cols: Vec<&str> = s.columns.iter().map(String::as_str).collect();
            let proper = cols.iter().all(|c| model.contains(c)) && cols.len() < model.len();
            if !proper {
                return Err(SensitivityError::NotProperSubset { label: s.label.clone() });
            }
            let (r2y, r2z) = partial_r2_pair(data, model, &cols)?;
            let bound = if r2z >= 1.0 {
                f64::INFINITY
            } else {
                bias_bound(r2y, r2z, estimate.se, fit.df)?
            };
            Ok(BenchmarkPoint {
                label: s.label.clone(),
                r2y,
                r2z,
                exceeds_critical: bound >= critical,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityGrid {
    pub r2y_axis: Vec<f64>,
    pub r2z_axis: Vec<f64>,
    /// `bound[i][j]` is the bound at `(r2y_axis[i], r2z_axis[j])`.
    pub bound: Vec<Vec<f64>>,
    pub estimate: f64,
    pub se: f64,
    pub df: usize,
    pub critical_level: f64,
}

pub fn contour_grid(estimate: &Estimate, df: usize, r_max: f64, steps: usize) -> Result<SensitivityGrid, SensitivityError> {
    contour_grid_with(estimate, df, r_max, steps, Execution::default())
}

pub fn contour_grid_with(
    estimate: &Estimate,
    df: usize,
    r_max: f64,
    steps: usize,
    exec: Execution,
) -> Result<SensitivityGrid, SensitivityError> {
    if steps < 2 || !(r_max > 0.0 && r_max < 1.0) {
        return Err(SensitivityError::Grid { steps, r_max });
    }
    let axis: Vec<f64> = (0..steps).map(|i| r_max * i as f64 / (steps - 1) as f64).collect();
    let rows = exec.map(steps, |i| {
        axis.iter()
            .map(|&r2z| bias_bound(axis[i], r2z, estimate.se, df))
            .collect::<Result<Vec<_>, _>>()
    });
    Ok(SensitivityGrid {
        r2y_axis: axis.clone(),
        r2z_axis: axis,
        bound: rows.into_iter().collect::<Result<_, _>>()?,
        estimate: estimate.point,
        se: estimate.se,
        df,
        critical_level: estimate.point.abs(),
    })
}

impl SensitivityGrid {
    /// The `r2y` at which the bound reaches the critical level for a given
    /// `r2z`, or `None` when that exceeds 1.
    pub fn critical_r2y(&self, r2z: f64) -> Option<f64> {
        if r2z <= 0.0 {
            return None;
        }
        let scale = self.se * self.se * self.df as f64;
        if scale == 0.0 {
            return None;
        }
        let r2y = self.critical_level * self.critical_level * (1.0 - r2z) / (scale * r2z);
        (r2y <= 1.0).then_some(r2y)
    }

    /// Points `(r2z, r2y)` of the critical curve along the `r2z` axis.
    pub fn critical_curve(&self) -> Vec<(f64, f64)> {
        self.r2z_axis
            .iter()
            .filter_map(|&z| self.critical_r2y(z).map(|y| (z, y)))
            .collect()
    }

    /// Writes `r2y,r2z,bound`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["r2y", "r2z", "bound"])?;
        for (i, y) in self.r2y_axis.iter().enumerate() {
            for (j, z) in self.r2z_axis.iter().enumerate() {
                wtr.write_record([y.to_string(), z.to_string(), self.bound[i][j].to_string()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Writes `label,r2y,r2z,exceeds_critical`.
pub fn write_benchmarks_csv<W: Write>(w: W, points: &[BenchmarkPoint]) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["label", "r2y", "r2z", "exceeds_critical"])?;
    for p in points {
        wtr.write_record([p.label.clone(), p.r2y.to_string(), p.r2z.to_string(), p.exceeds_critical.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::Method;

    #[test]
    fn bound_domain() {
        assert_eq!(bias_bound(0.0, 0.3, 0.1, 10).unwrap(), 0.0);
        assert_eq!(bias_bound(0.3, 0.0, 0.1, 10).unwrap(), 0.0);
        assert_eq!(bias_bound(0.3, 1.0, 0.1, 10), Err(SensitivityError::Unbounded));
        assert!(bias_bound(1.2, 0.1, 0.1, 10).is_err());
        assert!(bias_bound(0.2, 0.1, 0.1, 0).is_err());
        let b = bias_bound(0.25, 0.5, 0.02, 100).unwrap();
        assert!((b - 0.02 * 10.0 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn grid_edges_and_pre() {
        let e = Estimate::new(0.1, 0.01, Method::Regression, 1000, 0.0);
        let g = contour_grid(&e, 998, 0.5, 11).unwrap();
        assert!(g.bound[0].iter().all(|&b| b == 0.0));
        assert!(g.bound.iter().all(|row| row[0] == 0.0));
        assert_eq!(g.critical_level, 0.1);
        assert!(contour_grid(&e, 998, 1.0, 11).is_err());
        assert!(contour_grid(&e, 998, 0.5, 1).is_err());
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 121);
    }

    #[test]
    fn critical_curve_solves_level() {
        let e = Estimate::new(-0.05, 0.01, Method::Regression, 500, 0.0);
        let g = contour_grid(&e, 497, 0.5, 51).unwrap();
        for (z, y) in g.critical_curve() {
            let b = bias_bound(y, z, g.se, g.df).unwrap();
            assert!((b - 0.05).abs() < 1e-12);
        }
    }
}
