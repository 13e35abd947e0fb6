use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{create_file, ensure_dir, versions, write_json, HarnessError};
use crate::estimators::{regression_cdes, stratified_dim, write_estimates_csv, Estimate, Method, OverlapPolicy};
use crate::exec::{execution_for, with_workers, Execution};
use crate::rng::derive_seed;
use crate::scm::{sample_population_with, ScmParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Adjusts for `X` only; the officer report `R` is omitted.
    Confounded,
    /// Adjusts for `X` and `R`.
    Unconfounded,
}

impl Scenario {
    pub fn label(self) -> &'static str {
        match self {
            Scenario::Confounded => "confounded",
            Scenario::Unconfounded => "unconfounded",
        }
    }

    pub fn covariates(self) -> &'static [&'static str] {
        match self {
            Scenario::Confounded => &["x"],
            Scenario::Unconfounded => &["x", "r"],
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

fn default_scenarios() -> Vec<Scenario> {
    vec![Scenario::Confounded, Scenario::Unconfounded]
}

fn default_grid() -> Vec<f64> {
    vec![0.2, 0.3, 0.4]
}

fn default_base() -> ScmParams {
    ScmParams::paper(0.2, 0.2)
}

fn default_policy() -> OverlapPolicy {
    OverlapPolicy::Drop
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Parameters shared by every cell; the two discrimination parameters are
    /// overwritten from the grids.
    #[serde(default = "default_base")]
    pub base: ScmParams,
    #[serde(default = "default_grid")]
    pub alpha_black_grid: Vec<f64>,
    #[serde(default = "default_grid")]
    pub beta_black_grid: Vec<f64>,
    pub n_per_dataset: usize,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_scenarios")]
    pub scenarios: Vec<Scenario>,
    /// Worker threads; 0 lets the pool decide, 1 runs sequentially.
    #[serde(default)]
    pub parallelism: usize,
    #[serde(default = "default_policy")]
    pub overlap_policy: OverlapPolicy,
}

impl SimConfig {
    /// 3×3 grid, 500 replications of 20,000 individuals.
    pub fn desk(seed: u64) -> Self {
        Self {
            base: default_base(),
            alpha_black_grid: default_grid(),
            beta_black_grid: default_grid(),
            n_per_dataset: 20_000,
            replications: 500,
            seed,
            scenarios: default_scenarios(),
            parallelism: 0,
            overlap_policy: default_policy(),
        }
    }

    /// 5×5 grid, 10,000 replications of 100,000 individuals.
    pub fn full_scale(seed: u64) -> Self {
        let grid = vec![0.2, 0.25, 0.3, 0.35, 0.4];
        Self {
            alpha_black_grid: grid.clone(),
            beta_black_grid: grid,
            n_per_dataset: 100_000,
            replications: 10_000,
            ..Self::desk(seed)
        }
    }

    /// Grid cells in row-major order (alpha outer).
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.alpha_black_grid
            .iter()
            .flat_map(|&a| self.beta_black_grid.iter().map(move |&b| (a, b)))
            .collect()
    }

    pub fn cell_params(&self, alpha_black: f64, beta_black: f64) -> ScmParams {
        ScmParams {
            alpha_black,
            beta_black,
            ..self.base
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.alpha_black_grid.is_empty() || self.beta_black_grid.is_empty() {
            return Err(HarnessError::Config("grids must be nonempty".into()));
        }
        if self.n_per_dataset < 100 {
            return Err(HarnessError::Config(format!("n_per_dataset = {} < 100", self.n_per_dataset)));
        }
        if self.replications == 0 {
            return Err(HarnessError::Config("replications must be >= 1".into()));
        }
        if self.scenarios.is_empty() {
            return Err(HarnessError::Config("no scenarios selected".into()));
        }
        for (a, b) in self.cells() {
            self.cell_params(a, b).validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulatedEstimate {
    pub cell: usize,
    pub replication: usize,
    pub scenario: Scenario,
    pub estimate: Estimate,
}

/// Aggregate over replications for one (cell, scenario, method).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSummaryRow {
    pub alpha_black: f64,
    pub beta_black: f64,
    pub scenario: Scenario,
    pub method: Method,
    pub replications: usize,
    pub mean: f64,
    pub p2_5: f64,
    pub p97_5: f64,
    pub sd: f64,
    pub mean_se: f64,
    /// Interval coverage of the population CDE-Ob.
    pub coverage: f64,
    /// Interval coverage of each dataset's own CDE-Ob.
    pub coverage_sample: f64,
    pub true_cdes_population: f64,
    pub mean_sample_cdes: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimResult {
    pub config: SimConfig,
    pub summary: Vec<SimSummaryRow>,
    pub estimates: Vec<SimulatedEstimate>,
    /// Per cell and replication, the sample CDE-Ob.
    pub sample_cdes: Vec<Vec<f64>>,
}

impl SimResult {
    pub fn row(&self, alpha: f64, beta: f64, scenario: Scenario, method: Method) -> Option<&SimSummaryRow> {
        self.summary
            .iter()
            .find(|r| r.alpha_black == alpha && r.beta_black == beta && r.scenario == scenario && r.method == method)
    }
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

struct Replicate {
    sample_cdes: f64,
    estimates: Vec<(Scenario, Estimate)>,
}

fn replicate(config: &SimConfig, params: &ScmParams, cell: usize, rep: usize) -> Result<Replicate, HarnessError> {
    let seed = derive_seed(config.seed, &[cell as u64, rep as u64]);
    let table = sample_population_with(params, config.n_per_dataset, seed, Execution::Sequential)?;
    let sample_cdes = table.true_cdes()?;
    let data = table.observe();
    let mut estimates = Vec::with_capacity(2 * config.scenarios.len());
    for &s in &config.scenarios {
        estimates.push((s, stratified_dim(&data, s.covariates(), config.overlap_policy)?));
        estimates.push((s, regression_cdes(&data, s.covariates())?));
    }
    Ok(Replicate { sample_cdes, estimates })
}

/// Runs every (cell, replication) pair. Each replication's stream is keyed by
/// `(seed, cell, replication)` and results are merged by index, so the output
/// does not depend on `parallelism`.
pub fn run_simulation(config: &SimConfig) -> Result<SimResult, HarnessError> {
    config.validate()?;
    let cells = config.cells();
    let params: Vec<ScmParams> = cells.iter().map(|&(a, b)| config.cell_params(a, b)).collect();
    let reps = config.replications;
    let exec = execution_for(config.parallelism);
    let results = with_workers(config.parallelism, || {
        exec.map(cells.len() * reps, |i| replicate(config, &params[i / reps], i / reps, i % reps))
    });
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut sample_cdes = vec![Vec::with_capacity(reps); cells.len()];
    let mut estimates = Vec::with_capacity(results.len() * 4);
    for (i, r) in results.into_iter().enumerate() {
        sample_cdes[i / reps].push(r.sample_cdes);
        for (scenario, estimate) in r.estimates {
            estimates.push(SimulatedEstimate {
                cell: i / reps,
                replication: i % reps,
                scenario,
                estimate,
            });
        }
    }

    let mut groups: BTreeMap<(usize, Scenario, Method), Vec<&SimulatedEstimate>> = BTreeMap::new();
    for e in &estimates {
        groups.entry((e.cell, e.scenario, e.estimate.method)).or_default().push(e);
    }
    let summary = groups
        .into_iter()
        .map(|((cell, scenario, method), es)| {
            let (alpha, beta) = cells[cell];
            let truth = params[cell].population_cdes();
            let k = es.len() as f64;
            let mut points: Vec<f64> = es.iter().map(|e| e.estimate.point).collect();
            let mean = points.iter().sum::<f64>() / k;
            let sd = if es.len() > 1 {
                (points.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
            } else {
                0.0
            };
            points.sort_by(f64::total_cmp);
            let covered_pop = es.iter().filter(|e| e.estimate.covers(truth)).count();
            let covered_sample = es
                .iter()
                .filter(|e| e.estimate.covers(sample_cdes[cell][e.replication]))
                .count();
            SimSummaryRow {
                alpha_black: alpha,
                beta_black: beta,
                scenario,
                method,
                replications: es.len(),
                mean,
                p2_5: percentile(&points, 0.025),
                p97_5: percentile(&points, 0.975),
                sd,
                mean_se: es.iter().map(|e| e.estimate.se).sum::<f64>() / k,
                coverage: covered_pop as f64 / k,
                coverage_sample: covered_sample as f64 / k,
                true_cdes_population: truth,
                mean_sample_cdes: sample_cdes[cell].iter().sum::<f64>() / sample_cdes[cell].len() as f64,
            }
        })
        .collect();
    Ok(SimResult {
        config: config.clone(),
        summary,
        estimates,
        sample_cdes,
    })
}

pub const SUMMARY_HEADER: [&str; 14] = [
    "alpha_black",
    "beta_black",
    "scenario",
    "method",
    "replications",
    "mean",
    "p2_5",
    "p97_5",
    "sd",
    "mean_se",
    "coverage",
    "coverage_sample",
    "true_cdes_population",
    "mean_sample_cdes",
];

/// Writes `summary.csv`, `estimates.csv` and `manifest.json` into `out_dir`.
pub fn write_simulation(out_dir: &Path, result: &SimResult) -> Result<(), HarnessError> {
    ensure_dir(out_dir)?;
    let mut w = csv::Writer::from_writer(create_file(&out_dir.join("summary.csv"))?);
    w.write_record(SUMMARY_HEADER)?;
    for r in &result.summary {
        w.write_record([
            r.alpha_black.to_string(),
            r.beta_black.to_string(),
            r.scenario.label().to_string(),
            r.method.label().to_string(),
            r.replications.to_string(),
            r.mean.to_string(),
            r.p2_5.to_string(),
            r.p97_5.to_string(),
            r.sd.to_string(),
            r.mean_se.to_string(),
            r.coverage.to_string(),
            r.coverage_sample.to_string(),
            r.true_cdes_population.to_string(),
            r.mean_sample_cdes.to_string(),
        ])?;
    }
    w.flush().map_err(|source| HarnessError::Io {
        path: "summary.csv".into(),
        source,
    })?;

    let cells = result.config.cells();
    let labels: Vec<String> = result
        .estimates
        .iter()
        .map(|e| {
            let (a, b) = cells[e.cell];
            format!("{}/alpha={a}/beta={b}/rep={}", e.scenario, e.replication)
        })
        .collect();
    write_estimates_csv(
        create_file(&out_dir.join("estimates.csv"))?,
        labels.iter().map(String::as_str).zip(result.estimates.iter().map(|e| &e.estimate)),
    )?;

    let manifest = serde_json::json!({
        "command": "simulate",
        "config": result.config,
        "versions": versions(),
        "outputs": ["summary.csv", "estimates.csv"],
        "rows": { "summary": result.summary.len(), "estimates": result.estimates.len() },
    });
    write_json(&out_dir.join("manifest.json"), &manifest)
}
