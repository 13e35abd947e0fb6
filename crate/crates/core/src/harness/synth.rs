//! Synthetic stand-in for an administrative charging dataset.
//!
//! Recipe, per row (all draws independent unless stated):
//!
//! * `offense` ∈ {drug, property, violent, public_order} with probabilities
//!   0.35, 0.25, 0.20, 0.20.
//! * `district` uniform over {north, south, east, west}.
//! * `priors` ~ Binomial(4, 0.3).
//! * `weapon` ~ Bernoulli(0.1 + 0.15·[violent]).
//! * `unit` ~ Bernoulli(0.4): assignment to a specialised unit, strongly tied
//!   to both race and charging.
//! * `body_cam` ~ Bernoulli(0.5), unrelated to everything else.
//! * `z = b` with probability 0.2 + 0.1·[drug] + 0.1·[east] + 0.05·[south]
//!   + 0.025·min(priors, 2) + 0.2·unit.
//! * `y = 1` with probability 0.1 + effect·[z = b] + 0.1·[violent]
//!   + 0.05·[property] + 0.04·priors + 0.12·weapon + 0.05·[north] + 0.3·unit.
//!
//! The outcome is linear in the encoded covariates, so the regression on all
//! of them is unbiased for `effect`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{write_json, HarnessError};
use crate::data::{Covariate, ObservedDataset, Race};
use crate::exec::Execution;
use crate::rng::{unit_f64, CounterRng};

const OFFENSES: [(&str, f64); 4] = [("drug", 0.35), ("property", 0.25), ("violent", 0.20), ("public_order", 0.20)];
const DISTRICTS: [&str; 4] = ["north", "south", "east", "west"];
const CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRecipe {
    pub seed: u64,
    pub n: usize,
    pub true_effect: f64,
    pub covariates: Vec<String>,
    pub treatment_model: String,
    pub outcome_model: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData {
    pub data: ObservedDataset,
    pub recipe: SyntheticRecipe,
}

struct Row {
    offense: usize,
    district: usize,
    priors: u8,
    weapon: bool,
    unit: bool,
    body_cam: bool,
    z: Race,
    y: u8,
}

fn binomial4(u: f64, p: f64) -> u8 {
    let mut cdf = 0.0;
    for k in 0..4u8 {
        let c = [1.0, 4.0, 6.0, 4.0][k as usize];
        cdf += c * p.powi(k as i32) * (1.0 - p).powi(4 - k as i32);
        if u < cdf {
            return k;
        }
    }
    4
}

fn draw_row(s: [u64; 8], effect: f64) -> Row {
    let u = |i: usize| unit_f64(s[i]);
    let mut acc = 0.0;
    let mut offense = OFFENSES.len() - 1;
    for (i, (_, p)) in OFFENSES.iter().enumerate() {
        acc += p;
        if u(0) < acc {
            offense = i;
            break;
        }
    }
    let district = ((u(1) * 4.0) as usize).min(3);
    let priors = binomial4(u(2), 0.3);
    let violent = offense == 2;
    let weapon = u(3) < 0.1 + 0.15 * violent as u8 as f64;
    let unit = u(4) < 0.4;
    let body_cam = u(5) < 0.5;
    let ind = |b: bool| b as u8 as f64;
    let p_z = 0.2
        + 0.1 * ind(offense == 0)
        + 0.1 * ind(district == 2)
        + 0.05 * ind(district == 1)
        + 0.025 * (priors.min(2) as f64)
        + 0.2 * ind(unit);
    let z = if u(6) < p_z { Race::Black } else { Race::White };
    let p_y = 0.1
        + effect * z.indicator()
        + 0.1 * ind(violent)
        + 0.05 * ind(offense == 1)
        + 0.04 * priors as f64
        + 0.12 * ind(weapon)
        + 0.05 * ind(district == 0)
        + 0.3 * ind(unit);
    Row {
        offense,
        district,
        priors,
        weapon,
        unit,
        body_cam,
        z,
        y: (u(7) < p_y) as u8,
    }
}

/// Largest charge probability the recipe can produce, before the effect.
const MAX_BASE_PY: f64 = 0.1 + 0.1 + 0.16 + 0.12 + 0.05 + 0.3;
const MIN_BASE_PY: f64 = 0.1;

pub fn gen_synthetic_empirical(seed: u64, n: usize, effect: f64) -> Result<SyntheticData, HarnessError> {
    gen_synthetic_with(seed, n, effect, Execution::default())
}

pub fn gen_synthetic_with(seed: u64, n: usize, effect: f64, exec: Execution) -> Result<SyntheticData, HarnessError> {
    if n < 1000 {
        return Err(HarnessError::Config(format!("n = {n} < 1000")));
    }
    if !(MIN_BASE_PY + effect >= 0.0 && MAX_BASE_PY + effect <= 1.0) {
        return Err(HarnessError::Config(format!(
            "effect {effect} pushes charge probabilities outside [0, 1]"
        )));
    }
    let rng = CounterRng::new(seed, 1);
    let rows = exec.map_chunks(n, CHUNK, |start, end| {
        let mut it = rng.rows_from(start as u64);
        (start..end).map(|_| draw_row(it.next_row(), effect)).collect()
    });
    let cat = |name: &str, labels: Vec<&str>| Covariate::categorical(name, &labels);
    let num = |name: &str, f: &dyn Fn(&Row) -> f64| Covariate::numeric(name, rows.iter().map(f).collect());
    let covariates = vec![
        cat("offense", rows.iter().map(|r| OFFENSES[r.offense].0).collect()),
        cat("district", rows.iter().map(|r| DISTRICTS[r.district]).collect()),
        num("priors", &|r| r.priors as f64),
        num("weapon", &|r| r.weapon as u8 as f64),
        num("unit", &|r| r.unit as u8 as f64),
        num("body_cam", &|r| r.body_cam as u8 as f64),
    ];
    let data = ObservedDataset::new(
        rows.iter().map(|r| r.z).collect(),
        rows.iter().map(|r| r.y).collect(),
        covariates,
    )?;
    let recipe = SyntheticRecipe {
        seed,
        n,
        true_effect: effect,
        covariates: data.covariate_names().iter().map(|s| s.to_string()).collect(),
        treatment_model: "P(z=b) = 0.2 + 0.1[drug] + 0.1[east] + 0.05[south] + 0.025 min(priors,2) + 0.2 unit".into(),
        outcome_model: format!(
            "P(y=1) = 0.1 + {effect}[z=b] + 0.1[violent] + 0.05[property] + 0.04 priors + 0.12 weapon + 0.05[north] + 0.3 unit"
        ),
    };
    Ok(SyntheticData { data, recipe })
}

/// Sidecar path for the recipe: `data.csv` → `data.recipe.json`.
pub fn recipe_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("recipe.json")
}

pub fn write_synthetic(csv_path: &Path, synth: &SyntheticData) -> Result<(), HarnessError> {
    if let Some(parent) = csv_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        super::ensure_dir(parent)?;
    }
    synth.data.write_csv_path(csv_path)?;
    write_json(&recipe_path(csv_path), &synth.recipe)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_inverse_cdf() {
        assert_eq!(binomial4(0.0, 0.3), 0);
        assert_eq!(binomial4(0.2400, 0.3), 0);
        assert_eq!(binomial4(0.2402, 0.3), 1);
        assert_eq!(binomial4(0.99999, 0.3), 4);
    }

    #[test]
    fn deterministic_across_modes() {
        let a = gen_synthetic_with(3, 5000, 0.05, Execution::Sequential).unwrap();
        let b = gen_synthetic_with(3, 5000, 0.05, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        let mut ba = Vec::new();
        let mut bb = Vec::new();
        a.data.write_csv(&mut ba).unwrap();
        b.data.write_csv(&mut bb).unwrap();
        assert_eq!(ba, bb);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(gen_synthetic_empirical(1, 10, 0.05).is_err());
        assert!(gen_synthetic_empirical(1, 2000, 0.5).is_err());
    }
}
