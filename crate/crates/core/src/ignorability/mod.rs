//! Exact finite-distribution checks of the ignorability conditions.
//!
//! A distribution is a finite list of atoms over
//! `(X, Q, Z, M(w), M(b), Y(w,1), Y(b,1))` with rational masses. Realised
//! values follow `M = M(Z)` and `Y = M · Y(Z,1)`; `Y(z,0) = 0` throughout.

mod cases;
mod conditions;

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Race;

pub use cases::{build_case, random_distribution, Case, Template};
pub use conditions::{
    check_condition, check_condition_with, check_corpus, condition_report, Condition, ConditionReport, CorpusReport,
    Tolerance, Verdict,
};

#[derive(Debug, Error, PartialEq)]
pub enum IgnorabilityError {
    #[error("masses sum to {0}, not 1")]
    NotNormalized(String),
    #[error("negative mass on an atom")]
    NegativeMass,
    #[error("P(M = 1) = 0, the estimand is undefined")]
    UndefinedEstimand,
    #[error("overlap fails in stratum x={x}: no Z={missing} among arrested")]
    Overlap { x: i64, missing: Race },
    #[error("alpha must be given for case6 and lie in [0, 1]")]
    BadAlpha,
    #[error("alpha is only meaningful for case6")]
    UnexpectedAlpha,
    #[error("unknown case `{0}`")]
    UnknownCase(String),
    #[error("bad rational `{0}`")]
    BadRational(String),
    #[error("json: {0}")]
    Json(String),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomKey {
    pub x: i64,
    pub q: Option<u8>,
    pub z: Race,
    pub m_w: bool,
    pub m_b: bool,
    pub y_w1: bool,
    pub y_b1: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub x: i64,
    pub q: Option<u8>,
    pub z: Race,
    pub m_w: bool,
    pub m_b: bool,
    pub y_w1: bool,
    pub y_b1: bool,
    pub prob: BigRational,
}

impl Atom {
    pub fn key(&self) -> AtomKey {
        AtomKey {
            x: self.x,
            q: self.q,
            z: self.z,
            m_w: self.m_w,
            m_b: self.m_b,
            y_w1: self.y_w1,
            y_b1: self.y_b1,
        }
    }

    pub fn m_of(&self, d: Race) -> bool {
        match d {
            Race::White => self.m_w,
            Race::Black => self.m_b,
        }
    }

    pub fn y1_of(&self, z: Race) -> bool {
        match z {
            Race::White => self.y_w1,
            Race::Black => self.y_b1,
        }
    }

    /// Realised arrest.
    pub fn m(&self) -> bool {
        self.m_of(self.z)
    }

    /// Realised charge.
    pub fn y(&self) -> bool {
        self.m() && self.y1_of(self.z)
    }
}

impl From<(AtomKey, BigRational)> for Atom {
    fn from((k, prob): (AtomKey, BigRational)) -> Self {
        Atom {
            x: k.x,
            q: k.q,
            z: k.z,
            m_w: k.m_w,
            m_b: k.m_b,
            y_w1: k.y_w1,
            y_b1: k.y_b1,
            prob,
        }
    }
}

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses `p`, `p/q` or a decimal such as `0.25` into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational, IgnorabilityError> {
    let bad = || IgnorabilityError::BadRational(s.to_string());
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let digits = format!("{int}{frac}");
        let n: BigInt = digits.parse().map_err(|_| bad())?;
        let d = num_traits::pow(BigInt::from(10), frac.len());
        return Ok(BigRational::new(n, d));
    }
    s.parse::<BigInt>().map(BigRational::from_integer).map_err(|_| bad())
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteDistribution {
    atoms: Vec<Atom>,
    pub description: String,
}

impl FiniteDistribution {
    /// Validates masses, merges atoms with identical coordinates and drops
    /// zero-mass atoms. Atoms are kept in coordinate order.
    pub fn new(atoms: Vec<Atom>, description: impl Into<String>) -> Result<Self, IgnorabilityError> {
        let mut merged: BTreeMap<AtomKey, BigRational> = BTreeMap::new();
        let mut total = BigRational::zero();
        for a in atoms {
            if a.prob.is_negative() {
                return Err(IgnorabilityError::NegativeMass);
            }
            total += &a.prob;
            *merged.entry(a.key()).or_insert_with(BigRational::zero) += a.prob;
        }
        if !total.is_one() {
            return Err(IgnorabilityError::NotNormalized(total.to_string()));
        }
        let atoms = merged.into_iter().filter(|(_, p)| !p.is_zero()).map(Atom::from).collect();
        Ok(Self {
            atoms,
            description: description.into(),
        })
    }

    /// Normalises non-negative integer weights into a distribution.
    pub fn from_weights(atoms: Vec<(AtomKey, BigInt)>, description: impl Into<String>) -> Result<Self, IgnorabilityError> {
        let total: BigInt = atoms.iter().map(|(_, w)| w.clone()).sum();
        if total.is_zero() {
            return Err(IgnorabilityError::NotNormalized("0".into()));
        }
        let atoms = atoms
            .into_iter()
            .map(|(k, w)| Atom::from((k, BigRational::new(w, total.clone()))))
            .collect();
        Self::new(atoms, description)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Integer weights over a common denominator, in atom order.
    pub fn integer_weights(&self) -> (Vec<BigInt>, BigInt) {
        let den = self
            .atoms
            .iter()
            .fold(BigInt::one(), |acc, a| num_integer::Integer::lcm(&acc, a.prob.denom()));
        let w = self.atoms.iter().map(|a| a.prob.numer() * (&den / a.prob.denom())).collect();
        (w, den)
    }

    pub fn prob<F: Fn(&Atom) -> bool>(&self, event: F) -> BigRational {
        self.atoms
            .iter()
            .filter(|a| event(a))
            .fold(BigRational::zero(), |acc, a| acc + &a.prob)
    }

    /// `P(event | given)`, or `None` when `given` has zero mass.
    pub fn conditional<F, G>(&self, event: F, given: G) -> Option<BigRational>
    where
        F: Fn(&Atom) -> bool,
        G: Fn(&Atom) -> bool,
    {
        let g = self.prob(&given);
        if g.is_zero() {
            return None;
        }
        Some(self.prob(|a| given(a) && event(a)) / g)
    }

    pub fn x_values(&self) -> Vec<i64> {
        let mut xs: Vec<i64> = self.atoms.iter().map(|a| a.x).collect();
        xs.sort_unstable();
        xs.dedup();
        xs
    }

    /// `E[Y(b,1) − Y(w,1) | M = 1]`.
    pub fn cdes_exact(&self) -> Result<BigRational, IgnorabilityError> {
        let pm = self.prob(Atom::m);
        if pm.is_zero() {
            return Err(IgnorabilityError::UndefinedEstimand);
        }
        let num = self
            .atoms
            .iter()
            .filter(|a| a.m())
            .fold(BigRational::zero(), |acc, a| acc + &a.prob * BigRational::from_integer(BigInt::from(a.y_b1 as i64 - a.y_w1 as i64)));
        Ok(num / pm)
    }

    /// Population value of the difference in means among the arrested,
    /// stratified by `X` when `use_x` is set.
    pub fn dim_limit(&self, use_x: bool) -> Result<BigRational, IgnorabilityError> {
        let pm = self.prob(Atom::m);
        if pm.is_zero() {
            return Err(IgnorabilityError::UndefinedEstimand);
        }
        let strata: Vec<Option<i64>> = if use_x {
            self.x_values().into_iter().map(Some).collect()
        } else {
            vec![None]
        };
        let mut total = BigRational::zero();
        for s in strata {
            let in_s = |a: &Atom| a.m() && s.is_none_or(|x| a.x == x);
            let p_s = self.prob(in_s);
            if p_s.is_zero() {
                continue;
            }
            let mut means = [BigRational::zero(), BigRational::zero()];
            for z in Race::BOTH {
                let mean = self
                    .conditional(Atom::y, |a| in_s(a) && a.z == z)
                    .ok_or(IgnorabilityError::Overlap { x: s.unwrap_or(0), missing: z })?;
                means[z.is_black() as usize] = mean;
            }
            total += (&p_s / &pm) * (&means[1] - &means[0]);
        }
        Ok(total)
    }

    /// `P(X = x, Y = y, Z = z | M = 1)` over cells with positive mass.
    pub fn observational_law(&self) -> Result<BTreeMap<(i64, bool, Race), BigRational>, IgnorabilityError> {
        let pm = self.prob(Atom::m);
        if pm.is_zero() {
            return Err(IgnorabilityError::UndefinedEstimand);
        }
        let mut law: BTreeMap<(i64, bool, Race), BigRational> = BTreeMap::new();
        for a in self.atoms.iter().filter(|a| a.m()) {
            *law.entry((a.x, a.y(), a.z)).or_insert_with(BigRational::zero) += &a.prob / &pm;
        }
        Ok(law)
    }

    /// Whether every arrested stratum of `X` contains both treatment levels.
    pub fn has_overlap(&self) -> bool {
        self.dim_limit(true).is_ok()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let doc = DistributionJson {
            description: self.description.clone(),
            atoms: self.atoms.iter().map(AtomJson::from).collect(),
        };
        serde_json::to_value(doc).expect("distribution serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, IgnorabilityError> {
        let doc: DistributionJson =
            serde_json::from_value(value.clone()).map_err(|e| IgnorabilityError::Json(e.to_string()))?;
        let atoms = doc
            .atoms
            .into_iter()
            .map(|a| {
                let prob = a.prob.to_rational()?;
                Ok(Atom {
                    x: a.x,
                    q: a.q,
                    z: a.z,
                    m_w: a.m_w,
                    m_b: a.m_b,
                    y_w1: a.y_w1,
                    y_b1: a.y_b1,
                    prob,
                })
            })
            .collect::<Result<Vec<_>, IgnorabilityError>>()?;
        Self::new(atoms, doc.description)
    }
}

impl fmt::Display for FiniteDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.description)?;
        writeln!(f, "{:>4} {:>2} {:>2} {:>4} {:>4} {:>5} {:>5}  prob", "x", "q", "z", "m_w", "m_b", "y_w1", "y_b1")?;
        for a in &self.atoms {
            let q = a.q.map_or("-".to_string(), |q| q.to_string());
            writeln!(
                f,
                "{:>4} {:>2} {:>2} {:>4} {:>4} {:>5} {:>5}  {}",
                a.x, q, a.z, a.m_w as u8, a.m_b as u8, a.y_w1 as u8, a.y_b1 as u8, a.prob
            )?;
        }
        Ok(())
    }
}

/// Rational serialized as decimal numerator and denominator strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalJson {
    pub num: String,
    pub den: String,
}

impl From<&BigRational> for RationalJson {
    fn from(r: &BigRational) -> Self {
        Self {
            num: r.numer().to_string(),
            den: r.denom().to_string(),
        }
    }
}

impl RationalJson {
    pub fn to_rational(&self) -> Result<BigRational, IgnorabilityError> {
        parse_rational(&format!("{}/{}", self.num, self.den))
    }
}

#[derive(Serialize, Deserialize)]
struct AtomJson {
    x: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<u8>,
    z: Race,
    m_w: bool,
    m_b: bool,
    y_w1: bool,
    y_b1: bool,
    prob: RationalJson,
}

impl From<&Atom> for AtomJson {
    fn from(a: &Atom) -> Self {
        Self {
            x: a.x,
            q: a.q,
            z: a.z,
            m_w: a.m_w,
            m_b: a.m_b,
            y_w1: a.y_w1,
            y_b1: a.y_b1,
            prob: (&a.prob).into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DistributionJson {
    description: String,
    atoms: Vec<AtomJson>,
}
