use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{ratio, Atom, AtomKey, FiniteDistribution, IgnorabilityError};
use crate::data::Race;
use crate::rng::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    Case2,
    Case3,
    Case6,
    #[serde(rename = "appendixB")]
    AppendixB,
}

impl FromStr for Case {
    type Err = IgnorabilityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "case2" => Ok(Case::Case2),
            "case3" => Ok(Case::Case3),
            "case6" => Ok(Case::Case6),
            "appendixb" => Ok(Case::AppendixB),
            _ => Err(IgnorabilityError::UnknownCase(s.to_string())),
        }
    }
}

fn key(x: i64, q: Option<u8>, z: Race, m: (bool, bool), y: (bool, bool)) -> AtomKey {
    AtomKey {
        x,
        q,
        z,
        m_w: m.0,
        m_b: m.1,
        y_w1: y.0,
        y_b1: y.1,
    }
}

const BOOLS: [bool; 2] = [false, true];

pub fn build_case(which: Case, alpha: Option<BigRational>) -> Result<FiniteDistribution, IgnorabilityError> {
    match (which, &alpha) {
        (Case::Case6, None) => return Err(IgnorabilityError::BadAlpha),
        (Case::Case6, Some(a)) if *a < BigRational::zero() || *a > BigRational::one() => {
            return Err(IgnorabilityError::BadAlpha)
        }
        (Case::Case6, _) => {}
        (_, Some(_)) => return Err(IgnorabilityError::UnexpectedAlpha),
        _ => {}
    }
    let half = ratio(1, 2);
    let mut atoms = Vec::new();
    let mut push = |k: AtomKey, p: BigRational| atoms.push(Atom::from((k, p)));
    let description = match which {
        Case::Case2 => {
            // Everyone arrested is charged; arrests among Z = w are fair coins.
            push(key(1, None, Race::Black, (true, true), (true, true)), half.clone());
            for mw in BOOLS {
                for mb in BOOLS {
                    push(key(1, None, Race::White, (mw, mb), (true, true)), ratio(1, 8));
                }
            }
            "case2: subset ignorability without sequential ignorability".to_string()
        }
        Case::Case3 => {
            push(key(0, None, Race::Black, (true, true), (false, true)), half.clone());
            for yw in BOOLS {
                for yb in BOOLS {
                    push(key(0, None, Race::White, (true, true), (yw, yb)), ratio(1, 8));
                }
            }
            "case3: consistent difference in means without subset ignorability".to_string()
        }
        Case::Case6 => {
            let alpha = alpha.unwrap();
            for z in Race::BOTH {
                for mw in BOOLS {
                    // P(Z = z, M(w) = mw) = 1/4; M(b) = 1, Y(b,1) = 1
                    let p = ratio(1, 4);
                    if mw {
                        push(key(0, None, z, (true, true), (true, true)), p);
                    } else {
                        push(key(0, None, z, (false, true), (true, true)), &p * &alpha);
                        push(key(0, None, z, (false, true), (false, true)), &p * (BigRational::one() - &alpha));
                    }
                }
            }
            format!("case6: alpha = {alpha}")
        }
        Case::AppendixB => {
            for (k, p) in appendix_b_atoms() {
                push(k, p);
            }
            "appendixB: confounded by Q, mediator ignorability fails".to_string()
        }
    };
    FiniteDistribution::new(atoms, description)
}

/// Integrates the Appendix B structural equations over
/// `U_Z × U_Q × U_M × U_Y`. Every threshold lies in `{0, 1/2, 1}`, so the
/// unit interval splits into `(0, 1/2]` and `(1/2, 1)` and each piece is
/// evaluated at an interior point.
fn appendix_b_atoms() -> Vec<(AtomKey, BigRational)> {
    let ind = |b: bool| if b { 1 } else { 0 };
    let cells = [(ratio(1, 4), ratio(1, 2)), (ratio(3, 4), ratio(1, 2))];
    let f_m = |z: Race, q: u8, u: &BigRational| {
        let zb = z.is_black();
        let num = ind(q == 1) + ind(zb && q == 3) + ind(!zb && q == 2);
        *u <= ratio((1 + ind(zb)) * num, 2)
    };
    let f_y = |z: Race, m: bool, q: u8, u: &BigRational| m && *u <= ratio((1 + ind(z.is_black())) * ind(q == 1), 2);
    let mut out = Vec::new();
    for z in Race::BOTH {
        for q in 1..=4u8 {
            for (um, pm) in &cells {
                for (uy, py) in &cells {
                    let k = key(
                        0,
                        Some(q),
                        z,
                        (f_m(Race::White, q, um), f_m(Race::Black, q, um)),
                        (f_y(Race::White, true, q, uy), f_y(Race::Black, true, q, uy)),
                    );
                    out.push((k, ratio(1, 2) * ratio(1, 4) * pm * py));
                }
            }
        }
    }
    out
}

/// Structural family of a random distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    /// Independent masses on every atom, some forced to zero.
    Unstructured,
    /// Potential outcomes independent of `Z` given `X`, with charges
    /// independent of arrests.
    Sequential,
    /// The law of `(Y(w,1), Y(b,1))` among the arrested depends on `X` only;
    /// everything else is unrestricted.
    Subset,
    /// `Z` independent of potential outcomes given `X`, monotone arrests,
    /// charges depending on `M(b)` but not `M(w)`.
    Mediator,
    /// Random masses multiplied through a common factorisation with `Z`
    /// dependence, typically violating every condition.
    Confounded,
}

const TEMPLATES: [Template; 5] = [
    Template::Unstructured,
    Template::Sequential,
    Template::Subset,
    Template::Mediator,
    Template::Confounded,
];

const MAX_WEIGHT: u32 = 12;

struct Draw(ChaCha8Rng);

impl Draw {
    /// Integer weight in `0..=MAX_WEIGHT`; zero when `allow_zero` and the
    /// draw lands there, otherwise at least 1.
    fn weight(&mut self, allow_zero: bool) -> BigInt {
        let lo = if allow_zero { 0 } else { 1 };
        BigInt::from(lo + self.0.next_u32() % (MAX_WEIGHT + 1 - lo))
    }

    fn law(&mut self, k: usize) -> Vec<BigInt> {
        (0..k).map(|_| self.weight(false)).collect()
    }
}

fn bits4(i: usize) -> ((bool, bool), (bool, bool)) {
    let f = |b: usize| i & (1 << b) != 0;
    ((f(0), f(1)), (f(2), f(3)))
}

/// Random distribution with rational masses over every atom configuration
/// with `x_levels` covariate values. The seed picks the structural template.
pub fn random_distribution(seed: u64, x_levels: usize) -> FiniteDistribution {
    let x_levels = x_levels.max(1);
    let template = TEMPLATES[(seed % TEMPLATES.len() as u64) as usize];
    random_distribution_from(seed, x_levels, template)
}

pub fn random_distribution_from(seed: u64, x_levels: usize, template: Template) -> FiniteDistribution {
    let mut r = Draw(ChaCha8Rng::seed_from_u64(derive_seed(seed, &[x_levels as u64])));
    let mut atoms: Vec<(AtomKey, BigInt)> = Vec::new();
    for x in 0..x_levels as i64 {
        let px = r.weight(false);
        match template {
            Template::Unstructured => {
                for z in Race::BOTH {
                    for i in 0..16 {
                        let (m, y) = bits4(i);
                        atoms.push((key(x, None, z, m, y), &px * r.weight(true)));
                    }
                }
            }
            Template::Sequential => {
                let pz = r.law(2);
                let pm = r.law(4);
                let py = r.law(4);
                for z in Race::BOTH {
                    for i in 0..16 {
                        let (m, y) = bits4(i);
                        let w = &px * &pz[z.is_black() as usize] * &pm[i & 3] * &py[i >> 2];
                        atoms.push((key(x, None, z, m, y), w));
                    }
                }
            }
            Template::Subset => {
                let pz = r.law(2);
                let arrested_y = r.law(4);
                let arrested_y_total: BigInt = arrested_y.iter().sum();
                for z in Race::BOTH {
                    let pm = r.law(4);
                    let other_y = r.law(4);
                    let other_total: BigInt = other_y.iter().sum();
                    for i in 0..16 {
                        let (m, y) = bits4(i);
                        let arrested = if z.is_black() { m.1 } else { m.0 };
                        let j = i >> 2;
                        // Both arms share the denominator product so laws stay exact.
                        let py = if arrested {
                            &arrested_y[j] * &other_total
                        } else {
                            &other_y[j] * &arrested_y_total
                        };
                        let w = &px * &pz[z.is_black() as usize] * &pm[i & 3] * py;
                        atoms.push((key(x, None, z, m, y), w));
                    }
                }
            }
            Template::Mediator => {
                let pz = r.law(2);
                // monotone pairs (m_w, m_b): (0,0), (0,1), (1,1)
                let pm = r.law(3);
                let py_given_mb = [r.law(4), r.law(4)];
                let totals: Vec<BigInt> = py_given_mb.iter().map(|l| l.iter().sum()).collect();
                for z in Race::BOTH {
                    for (slot, m) in [(false, false), (false, true), (true, true)].into_iter().enumerate() {
                        let mb = m.1 as usize;
                        for j in 0..4 {
                            let y = (j & 1 != 0, j & 2 != 0);
                            let py = &py_given_mb[mb][j] * &totals[1 - mb];
                            let w = &px * &pz[z.is_black() as usize] * &pm[slot] * py;
                            atoms.push((key(x, None, z, m, y), w));
                        }
                    }
                }
            }
            Template::Confounded => {
                for z in Race::BOTH {
                    let pz = r.weight(false);
                    let pm = r.law(4);
                    let py = r.law(4);
                    for i in 0..16 {
                        let (m, y) = bits4(i);
                        let w = &px * &pz * &pm[i & 3] * &py[i >> 2] * r.weight(false);
                        atoms.push((key(x, None, z, m, y), w));
                    }
                }
            }
        }
    }
    if atoms.iter().all(|(_, w)| w.is_zero()) {
        atoms[0].1 = BigInt::one();
    }
    let description = format!("random seed={seed} x_levels={x_levels} template={template:?}");
    FiniteDistribution::from_weights(atoms, description).expect("positive total weight")
}

#[cfg(test)]
mod tests {
    use super::super::{condition_report, Condition, Verdict};
    use super::*;

    #[test]
    fn appendix_b_has_uniform_cells() {
        let raw = appendix_b_atoms();
        assert_eq!(raw.len(), 32);
        assert!(raw.iter().all(|(_, p)| *p == ratio(1, 32)));
    }

    #[test]
    fn alpha_rules() {
        assert_eq!(build_case(Case::Case6, None), Err(IgnorabilityError::BadAlpha));
        assert_eq!(build_case(Case::Case6, Some(ratio(3, 2))), Err(IgnorabilityError::BadAlpha));
        assert_eq!(build_case(Case::Case2, Some(ratio(1, 2))), Err(IgnorabilityError::UnexpectedAlpha));
        assert_eq!("appendixB".parse::<Case>().unwrap(), Case::AppendixB);
        assert!("case9".parse::<Case>().is_err());
    }

    #[test]
    fn random_is_reproducible_and_normalized() {
        for seed in 0..20 {
            let a = random_distribution(seed, 2);
            assert_eq!(a, random_distribution(seed, 2));
            let total = a.atoms().iter().fold(BigRational::zero(), |acc, at| acc + &at.prob);
            assert!(total.is_one());
        }
        assert_ne!(random_distribution(0, 2), random_distribution(5, 2));
    }

    #[test]
    fn templates_satisfy_their_conditions() {
        for seed in 0..10 {
            let s = condition_report(&random_distribution_from(seed, 2, Template::Sequential));
            assert_eq!(s.sequential(), Verdict::Holds);
            let sub = condition_report(&random_distribution_from(seed, 2, Template::Subset));
            assert_eq!(sub.verdict(Condition::SubsetIgnorability), Verdict::Holds);
            let m = condition_report(&random_distribution_from(seed, 2, Template::Mediator));
            assert_eq!(m.treatment(), Verdict::Holds);
            assert_eq!(m.verdict(Condition::MediatorIgnorability), Verdict::Holds);
            assert_eq!(m.verdict(Condition::MediatorMonotonicity), Verdict::Holds);
        }
    }
}
