//! The stylised arrest → report → charge structural causal model.
//!
//! Exogenous noise per individual: `U_T` (race), `U_A` (behaviour), `U_X`
//! (criminal history), `U_M` (arrest), `U_R` (officer report) and `U_Y`
//! (charge). Officer and prosecutor perceptions of race both equal true race
//! (`D = Z = T`); the equations keep them as separate fields so a divergent
//! perception mechanism can be slotted in later without touching callers.
//!
//! ```text
//! A    = 1(U_A <= mu_A + gamma·1(T=b))
//! X    = 1(U_X <= mu_X + delta·1(T=b))
//! M(d) = 1(U_M <= alpha_0 + alpha_A·A + alpha_black·1(d=b))
//! R    = 1(U_R <= lambda_0 + lambda_A·A + lambda_black·1(D=b))
//! Y(z,1) = 1(U_Y <= beta_0 + beta_X·X + beta_R·R + beta_black·1(z=b)),  Y(z,0) = 0
//! ```

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Covariate, ObservedDataset, Race};
use crate::exec::Execution;
use crate::rng::{unit_f64, CounterRng};

#[derive(Debug, Error, PartialEq)]
pub enum ScmError {
    #[error("parameter `{name}` = {value} is not finite")]
    NonFinite { name: &'static str, value: f64 },
    #[error("mu_t = {0} is not a probability")]
    BadRaceShare(f64),
    #[error("threshold {name} = {value} lies outside [0, 1]; set threshold_policy = \"saturate\" to allow indicator saturation")]
    ThresholdOutOfRange { name: String, value: f64 },
    #[error("population size must be at least 1")]
    EmptyPopulation,
    #[error("no row satisfies {0}")]
    EmptySubset(&'static str),
    #[error("row {row} violates consistency: {message}")]
    Inconsistent { row: usize, message: String },
}

/// How thresholds outside `[0, 1]` are treated.
///
/// `Strict` rejects them. `Saturate` accepts them: `1(u <= t)` is then
/// identically 0 or 1, exactly as the indicator is written. The exact
/// second-stage effect is then no longer `beta_black` for the saturated
/// strata, which [`ScmParams::population_cdes`] accounts for.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdPolicy {
    #[default]
    Strict,
    Saturate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScmParams {
    pub mu_t: f64,
    pub mu_a: f64,
    pub gamma: f64,
    pub mu_x: f64,
    pub delta: f64,
    pub alpha_0: f64,
    pub alpha_a: f64,
    pub alpha_black: f64,
    pub lambda_0: f64,
    pub lambda_a: f64,
    pub lambda_black: f64,
    pub beta_0: f64,
    pub beta_x: f64,
    pub beta_r: f64,
    pub beta_black: f64,
    #[serde(default)]
    pub threshold_policy: ThresholdPolicy,
}

fn b(race: Race) -> f64 {
    race.indicator()
}

fn bit(v: bool) -> f64 {
    if v {
        1.0
    } else {
        0.0
    }
}

impl ScmParams {
    /// The published simulation settings with the two discrimination knobs
    /// left free. The charge threshold reaches `0.8 + beta_black`, so the
    /// preset uses [`ThresholdPolicy::Saturate`].
    pub fn paper(alpha_black: f64, beta_black: f64) -> Self {
        Self {
            mu_t: 0.3,
            mu_a: 0.3,
            gamma: -0.1,
            mu_x: 0.3,
            delta: 0.1,
            alpha_0: 0.1,
            alpha_a: 0.3,
            alpha_black,
            lambda_0: 0.2,
            lambda_a: 0.6,
            lambda_black: 0.1,
            beta_0: 0.2,
            beta_x: 0.4,
            beta_r: 0.2,
            beta_black,
            threshold_policy: ThresholdPolicy::Saturate,
        }
    }

    pub fn with_policy(mut self, policy: ThresholdPolicy) -> Self {
        self.threshold_policy = policy;
        self
    }

    fn named(&self) -> [(&'static str, f64); 15] {
        [
            ("mu_t", self.mu_t),
            ("mu_a", self.mu_a),
            ("gamma", self.gamma),
            ("mu_x", self.mu_x),
            ("delta", self.delta),
            ("alpha_0", self.alpha_0),
            ("alpha_a", self.alpha_a),
            ("alpha_black", self.alpha_black),
            ("lambda_0", self.lambda_0),
            ("lambda_a", self.lambda_a),
            ("lambda_black", self.lambda_black),
            ("beta_0", self.beta_0),
            ("beta_x", self.beta_x),
            ("beta_r", self.beta_r),
            ("beta_black", self.beta_black),
        ]
    }

    pub fn behavior_threshold(&self, t: Race) -> f64 {
        self.mu_a + self.gamma * b(t)
    }

    pub fn history_threshold(&self, t: Race) -> f64 {
        self.mu_x + self.delta * b(t)
    }

    pub fn arrest_threshold(&self, d: Race, a: bool) -> f64 {
        self.alpha_0 + self.alpha_a * bit(a) + self.alpha_black * b(d)
    }

    pub fn report_threshold(&self, d: Race, a: bool) -> f64 {
        self.lambda_0 + self.lambda_a * bit(a) + self.lambda_black * b(d)
    }

    pub fn charge_threshold(&self, z: Race, x: bool, r: bool) -> f64 {
        self.beta_0 + self.beta_x * bit(x) + self.beta_r * bit(r) + self.beta_black * b(z)
    }

    /// Every Bernoulli threshold the equations can reach, labelled.
    pub fn thresholds(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for t in Race::BOTH {
            out.push((format!("behavior[t={t}]"), self.behavior_threshold(t)));
            out.push((format!("history[t={t}]"), self.history_threshold(t)));
            for a in [false, true] {
                out.push((format!("arrest[d={t},a={}]", a as u8), self.arrest_threshold(t, a)));
                out.push((format!("report[d={t},a={}]", a as u8), self.report_threshold(t, a)));
            }
            for x in [false, true] {
                for r in [false, true] {
                    out.push((
                        format!("charge[z={t},x={},r={}]", x as u8, r as u8),
                        self.charge_threshold(t, x, r),
                    ));
                }
            }
        }
        out
    }

    /// Thresholds outside `[0, 1]` (where the indicator saturates).
    pub fn saturated_thresholds(&self) -> Vec<(String, f64)> {
        self.thresholds()
            .into_iter()
            .filter(|(_, v)| !(0.0..=1.0).contains(v))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ScmError> {
        for (name, value) in self.named() {
            if !value.is_finite() {
                return Err(ScmError::NonFinite { name, value });
            }
        }
        if !(0.0..=1.0).contains(&self.mu_t) {
            return Err(ScmError::BadRaceShare(self.mu_t));
        }
        if self.threshold_policy == ThresholdPolicy::Strict {
            if let Some((name, value)) = self.saturated_thresholds().into_iter().next() {
                return Err(ScmError::ThresholdOutOfRange { name, value });
            }
        }
        Ok(())
    }

    /// Applies the structural equations to one individual's exogenous draws
    /// `[U_T, U_A, U_X, U_M, U_R, U_Y]`.
    pub fn evaluate(&self, u: [f64; 6]) -> PotentialOutcomeRow {
        let [u_t, u_a, u_x, u_m, u_r, u_y] = u;
        let t = if u_t < self.mu_t { Race::Black } else { Race::White };
        let d = t;
        let z = d;
        let a = u_a <= self.behavior_threshold(t);
        let x = u_x <= self.history_threshold(t);
        let m_w = u_m <= self.arrest_threshold(Race::White, a);
        let m_b = u_m <= self.arrest_threshold(Race::Black, a);
        let r = u_r <= self.report_threshold(d, a);
        let y_w1 = u_y <= self.charge_threshold(Race::White, x, r);
        let y_b1 = u_y <= self.charge_threshold(Race::Black, x, r);
        let m = if d.is_black() { m_b } else { m_w };
        let y = m && if z.is_black() { y_b1 } else { y_w1 };
        PotentialOutcomeRow {
            t,
            d,
            z,
            a,
            x,
            r,
            m_w,
            m_b,
            y_b1,
            y_w1,
            m,
            y,
        }
    }
}

/// One individual: race perceptions, covariates, all potential outcomes and
/// the realised ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PotentialOutcomeRow {
    pub t: Race,
    pub d: Race,
    pub z: Race,
    pub a: bool,
    pub x: bool,
    pub r: bool,
    pub m_w: bool,
    pub m_b: bool,
    pub y_b1: bool,
    pub y_w1: bool,
    pub m: bool,
    pub y: bool,
}

impl PotentialOutcomeRow {
    pub fn m_of(&self, d: Race) -> bool {
        if d.is_black() {
            self.m_b
        } else {
            self.m_w
        }
    }

    /// `Y(z, m)`, with `Y(z, 0) = 0`.
    pub fn y_of(&self, z: Race, m: bool) -> bool {
        m && if z.is_black() { self.y_b1 } else { self.y_w1 }
    }

    pub fn check_consistency(&self) -> Result<(), String> {
        if self.m != self.m_of(self.d) {
            return Err("M != M(D)".into());
        }
        if self.y != self.y_of(self.z, self.m) {
            return Err("Y != Y(Z, M)".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PotentialOutcomeTable {
    pub rows: Vec<PotentialOutcomeRow>,
    pub seed: u64,
    pub params: ScmParams,
}

const ROW_CHUNK: usize = 4096;

/// Samples `n` individuals. Row `i` always uses ChaCha block `i` of the
/// stream keyed by `seed`, so the table is identical for any execution mode.
pub fn sample_population(params: &ScmParams, n: usize, seed: u64) -> Result<PotentialOutcomeTable, ScmError> {
    sample_population_with(params, n, seed, Execution::default())
}

pub fn sample_population_with(
    params: &ScmParams,
    n: usize,
    seed: u64,
    exec: Execution,
) -> Result<PotentialOutcomeTable, ScmError> {
    params.validate()?;
    if n == 0 {
        return Err(ScmError::EmptyPopulation);
    }
    let rng = CounterRng::new(seed, 0);
    let rows = exec.map_chunks(n, ROW_CHUNK, |start, end| {
        let mut it = rng.rows_from(start as u64);
        (start..end)
            .map(|_| {
                let s = it.next_row();
                params.evaluate([
                    unit_f64(s[0]),
                    unit_f64(s[1]),
                    unit_f64(s[2]),
                    unit_f64(s[3]),
                    unit_f64(s[4]),
                    unit_f64(s[5]),
                ])
            })
            .collect()
    });
    Ok(PotentialOutcomeTable {
        rows,
        seed,
        params: *params,
    })
}

impl PotentialOutcomeTable {
    /// Wraps hand-built rows, checking row-wise consistency.
    pub fn from_rows(params: ScmParams, seed: u64, rows: Vec<PotentialOutcomeRow>) -> Result<Self, ScmError> {
        for (i, r) in rows.iter().enumerate() {
            r.check_consistency()
                .map_err(|message| ScmError::Inconsistent { row: i, message })?;
        }
        Ok(Self { rows, seed, params })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Sample second-stage effect: mean of `Y(b,1) − Y(w,1)` over arrested rows.
    pub fn true_cdes(&self) -> Result<f64, ScmError> {
        let (mut n, mut sum) = (0usize, 0i64);
        for r in self.rows.iter().filter(|r| r.m) {
            n += 1;
            sum += r.y_b1 as i64 - r.y_w1 as i64;
        }
        if n == 0 {
            return Err(ScmError::EmptySubset("M = 1"));
        }
        Ok(sum as f64 / n as f64)
    }

    /// Sample total effect: mean of `Y(b, M(b)) − Y(w, M(w))` over all rows.
    pub fn true_te(&self) -> Result<f64, ScmError> {
        if self.rows.is_empty() {
            return Err(ScmError::EmptyPopulation);
        }
        let sum: i64 = self
            .rows
            .iter()
            .map(|r| r.y_of(Race::Black, r.m_b) as i64 - r.y_of(Race::White, r.m_w) as i64)
            .sum();
        Ok(sum as f64 / self.rows.len() as f64)
    }

    /// The prosecutor's view: arrested rows projected to `(z, x, r, y)`.
    pub fn observe(&self) -> ObservedDataset {
        let kept: Vec<&PotentialOutcomeRow> = self.rows.iter().filter(|r| r.m).collect();
        let z = kept.iter().map(|r| r.z).collect();
        let y = kept.iter().map(|r| r.y as u8).collect();
        let x = kept.iter().map(|r| bit(r.x)).collect();
        let rr = kept.iter().map(|r| bit(r.r)).collect();
        ObservedDataset::new(z, y, vec![Covariate::numeric("x", x), Covariate::numeric("r", rr)])
            .expect("projected columns share one length")
    }

    /// Debug dump with the full potential-outcome columns.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t", "d", "z", "a", "r", "x", "m_b", "m_w", "y_b1", "y_w1", "m", "y"])?;
        for r in &self.rows {
            let f = |v: bool| if v { "1" } else { "0" };
            wtr.write_record([
                r.t.label(),
                r.d.label(),
                r.z.label(),
                f(r.a),
                f(r.r),
                f(r.x),
                f(r.m_b),
                f(r.m_w),
                f(r.y_b1),
                f(r.y_w1),
                f(r.m),
                f(r.y),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Exact population moments of the model, obtained by summing over the
/// discrete parents `(T, A, X, R)` with each uniform threshold contributing
/// its clipped probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PopulationMoments {
    pub p_arrest: f64,
    pub p_arrest_black: f64,
    pub p_arrest_white: f64,
    pub cdes: f64,
    pub te: f64,
}

fn prob(threshold: f64) -> f64 {
    threshold.clamp(0.0, 1.0)
}

fn bern(p: f64, v: bool) -> f64 {
    if v {
        p
    } else {
        1.0 - p
    }
}

impl ScmParams {
    pub fn population(&self) -> PopulationMoments {
        let mut p_m = [0.0; 2];
        let mut p_t = [0.0; 2];
        let (mut cde_num, mut te) = (0.0, 0.0);
        for t in Race::BOTH {
            let pt = bern(self.mu_t, t.is_black());
            p_t[t.is_black() as usize] += pt;
            for a in [false, true] {
                let pa = bern(prob(self.behavior_threshold(t)), a);
                let pm = prob(self.arrest_threshold(t, a));
                let pm_w = prob(self.arrest_threshold(Race::White, a));
                let pm_b = prob(self.arrest_threshold(Race::Black, a));
                for x in [false, true] {
                    let px = bern(prob(self.history_threshold(t)), x);
                    for r in [false, true] {
                        let pr = bern(prob(self.report_threshold(t, a)), r);
                        let w = pt * pa * px * pr;
                        let yb = prob(self.charge_threshold(Race::Black, x, r));
                        let yw = prob(self.charge_threshold(Race::White, x, r));
                        p_m[t.is_black() as usize] += w * pm;
                        // U_M and U_Y are independent, so arrested rows keep the charge law.
                        cde_num += w * pm * (yb - yw);
                        te += w * (pm_b * yb - pm_w * yw);
                    }
                }
            }
        }
        let p_arrest = p_m[0] + p_m[1];
        PopulationMoments {
            p_arrest,
            p_arrest_black: p_m[1] / p_t[1],
            p_arrest_white: p_m[0] / p_t[0],
            cdes: cde_num / p_arrest,
            te,
        }
    }

    /// Population second-stage effect. Equals `beta_black` whenever no charge
    /// threshold saturates.
    pub fn population_cdes(&self) -> f64 {
        self.population().cdes
    }
}
