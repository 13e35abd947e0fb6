use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::{random_distribution, Atom, FiniteDistribution, RationalJson};
use crate::data::Race;
use crate::exec::Execution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `Y(z',1) ⫫ Z | X, M = 1`
    SubsetIgnorability,
    /// `{Y(z',1), M(z)} ⫫ Z | X`
    SequentialIg1,
    /// `Y(z',1) ⫫ M | Z, X`
    SequentialIg2,
    /// `M(z) ⫫ Z | X`
    TreatmentIg1,
    /// `Y(z',1) ⫫ Z | M(w), M(b), X`
    TreatmentIg2,
    /// `Y(z',1) ⫫ M(w) | Z = z, M(b) = 1, X`, for every `z'` and `z`
    MediatorIgnorability,
    /// `M(b) ≥ M(w)` on every atom with positive mass
    MediatorMonotonicity,
}

impl Condition {
    pub const ALL: [Condition; 7] = [
        Condition::SubsetIgnorability,
        Condition::SequentialIg1,
        Condition::SequentialIg2,
        Condition::TreatmentIg1,
        Condition::TreatmentIg2,
        Condition::MediatorIgnorability,
        Condition::MediatorMonotonicity,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Condition::SubsetIgnorability => "subset_ignorability",
            Condition::SequentialIg1 => "sequential_ig_1",
            Condition::SequentialIg2 => "sequential_ig_2",
            Condition::TreatmentIg1 => "treatment_ig_1",
            Condition::TreatmentIg2 => "treatment_ig_2",
            Condition::MediatorIgnorability => "mediator_ignorability",
            Condition::MediatorMonotonicity => "mediator_monotonicity",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Fails,
    /// Every conditioning stratum the statement needs has zero mass.
    Vacuous,
}

impl Verdict {
    /// Conjunction of component statements: any failure fails; otherwise any
    /// non-vacuous component makes the whole hold.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fails, _) | (_, Fails) => Fails,
            (Holds, _) | (_, Holds) => Holds,
            (Vacuous, Vacuous) => Vacuous,
        }
    }

    pub fn holds(self) -> bool {
        self == Verdict::Holds
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::Vacuous => "vacuous",
        })
    }
}

/// Exact rational comparison, or conditional probabilities compared within
/// an absolute tolerance (for distributions built from frequencies).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Tolerance {
    #[default]
    Exact,
    Float(f64),
}

impl Tolerance {
    pub const EMPIRICAL: Tolerance = Tolerance::Float(1e-9);
}

trait Mass: Clone + Zero + for<'a> std::ops::AddAssign<&'a Self> {
    /// Whether `P(a, b | c) = P(a | c) P(b | c)` from joint and marginal masses.
    fn factorizes(n_ab: &Self, n_a: &Self, n_b: &Self, n: &Self, tol: f64) -> bool;
}

impl Mass for BigInt {
    fn factorizes(n_ab: &Self, n_a: &Self, n_b: &Self, n: &Self, _tol: f64) -> bool {
        n_ab * n == n_a * n_b
    }
}

impl Mass for f64 {
    fn factorizes(n_ab: &Self, n_a: &Self, n_b: &Self, n: &Self, tol: f64) -> bool {
        (n_ab / n - (n_a / n) * (n_b / n)).abs() <= tol
    }
}

type Key = Vec<i64>;
type Coord<'a> = &'a dyn Fn(&Atom) -> i64;

/// `A ⫫ B | C` restricted to atoms passing `filter`.
struct Independence<'a> {
    filter: &'a dyn Fn(&Atom) -> bool,
    given: &'a [Coord<'a>],
    a: Coord<'a>,
    b: Coord<'a>,
}

impl Independence<'_> {
    fn check<M: Mass>(&self, atoms: &[Atom], weights: &[M], tol: f64) -> Verdict {
        // stratum -> (a, b) -> mass
        let mut cells: BTreeMap<Key, BTreeMap<(i64, i64), M>> = BTreeMap::new();
        for (atom, w) in atoms.iter().zip(weights) {
            if !(self.filter)(atom) || w.is_zero() {
                continue;
            }
            let key: Key = self.given.iter().map(|f| f(atom)).collect();
            *cells
                .entry(key)
                .or_default()
                .entry(((self.a)(atom), (self.b)(atom)))
                .or_insert_with(M::zero) += w;
        }
        if cells.is_empty() {
            return Verdict::Vacuous;
        }
        for joint in cells.values() {
            let mut n = M::zero();
            let mut n_a: BTreeMap<i64, M> = BTreeMap::new();
            let mut n_b: BTreeMap<i64, M> = BTreeMap::new();
            for (&(a, b), w) in joint {
                n += w;
                *n_a.entry(a).or_insert_with(M::zero) += w;
                *n_b.entry(b).or_insert_with(M::zero) += w;
            }
            let zero = M::zero();
            for (a, wa) in &n_a {
                for (b, wb) in &n_b {
                    let wab = joint.get(&(*a, *b)).unwrap_or(&zero);
                    if !M::factorizes(wab, wa, wb, &n, tol) {
                        return Verdict::Fails;
                    }
                }
            }
        }
        Verdict::Holds
    }
}

fn b(v: bool) -> i64 {
    v as i64
}

fn check_all<M: Mass>(dist: &FiniteDistribution, weights: &[M], condition: Condition, tol: f64) -> Verdict {
    let atoms = dist.atoms();
    let x = |a: &Atom| a.x;
    let z = |a: &Atom| b(a.z.is_black());
    let all = |_: &Atom| true;
    let mut verdict = Verdict::Vacuous;
    match condition {
        Condition::SubsetIgnorability => {
            let arrested = |a: &Atom| a.m();
            for zp in Race::BOTH {
                let y = move |a: &Atom| b(a.y1_of(zp));
                let s = Independence { filter: &arrested, given: &[&x], a: &y, b: &z };
                verdict = verdict.and(s.check(atoms, weights, tol));
            }
        }
        Condition::SequentialIg1 => {
            for zp in Race::BOTH {
                for zz in Race::BOTH {
                    let pair = move |a: &Atom| 2 * b(a.y1_of(zp)) + b(a.m_of(zz));
                    let s = Independence { filter: &all, given: &[&x], a: &pair, b: &z };
                    verdict = verdict.and(s.check(atoms, weights, tol));
                }
            }
        }
        Condition::SequentialIg2 => {
            let m = |a: &Atom| b(a.m());
            for zp in Race::BOTH {
                let y = move |a: &Atom| b(a.y1_of(zp));
                let s = Independence { filter: &all, given: &[&z, &x], a: &y, b: &m };
                verdict = verdict.and(s.check(atoms, weights, tol));
            }
        }
        Condition::TreatmentIg1 => {
            for zz in Race::BOTH {
                let m = move |a: &Atom| b(a.m_of(zz));
                let s = Independence { filter: &all, given: &[&x], a: &m, b: &z };
                verdict = verdict.and(s.check(atoms, weights, tol));
            }
        }
        Condition::TreatmentIg2 => {
            let mw = |a: &Atom| b(a.m_w);
            let mb = |a: &Atom| b(a.m_b);
            for zp in Race::BOTH {
                let y = move |a: &Atom| b(a.y1_of(zp));
                let s = Independence { filter: &all, given: &[&mw, &mb, &x], a: &y, b: &z };
                verdict = verdict.and(s.check(atoms, weights, tol));
            }
        }
        Condition::MediatorIgnorability => {
            let mw = |a: &Atom| b(a.m_w);
            for zz in Race::BOTH {
                let filter = move |a: &Atom| a.z == zz && a.m_b;
                for zp in Race::BOTH {
                    let y = move |a: &Atom| b(a.y1_of(zp));
                    let s = Independence { filter: &filter, given: &[&x], a: &y, b: &mw };
                    verdict = verdict.and(s.check(atoms, weights, tol));
                }
            }
        }
        Condition::MediatorMonotonicity => {
            verdict = if atoms.iter().all(|a| a.m_b >= a.m_w) {
                Verdict::Holds
            } else {
                Verdict::Fails
            };
        }
    }
    verdict
}

pub fn check_condition(dist: &FiniteDistribution, condition: Condition) -> Verdict {
    check_condition_with(dist, condition, Tolerance::Exact)
}

pub fn check_condition_with(dist: &FiniteDistribution, condition: Condition, tolerance: Tolerance) -> Verdict {
    match tolerance {
        Tolerance::Exact => {
            let (w, _) = dist.integer_weights();
            check_all(dist, &w, condition, 0.0)
        }
        Tolerance::Float(tol) => {
            let w: Vec<f64> = dist.atoms().iter().map(|a| a.prob.to_f64().unwrap_or(f64::NAN)).collect();
            check_all(dist, &w, condition, tol)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionReport {
    pub description: String,
    pub verdicts: BTreeMap<Condition, Verdict>,
    pub cdes_exact: Option<BigRational>,
    pub dim_limit: Option<BigRational>,
    pub overlap: bool,
}

impl ConditionReport {
    pub fn verdict(&self, c: Condition) -> Verdict {
        self.verdicts[&c]
    }

    pub fn sequential(&self) -> Verdict {
        self.verdict(Condition::SequentialIg1).and(self.verdict(Condition::SequentialIg2))
    }

    pub fn treatment(&self) -> Verdict {
        self.verdict(Condition::TreatmentIg1).and(self.verdict(Condition::TreatmentIg2))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut obj = serde_json::Map::new();
        obj.insert("description".into(), self.description.clone().into());
        for (c, v) in &self.verdicts {
            obj.insert(c.label().into(), v.to_string().into());
        }
        let rat = |r: &Option<BigRational>| match r {
            Some(r) => serde_json::to_value(RationalJson::from(r)).unwrap(),
            None => serde_json::Value::Null,
        };
        obj.insert("cdes_exact".into(), rat(&self.cdes_exact));
        obj.insert("dim_limit".into(), rat(&self.dim_limit));
        obj.insert("overlap".into(), self.overlap.into());
        serde_json::Value::Object(obj)
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.description)?;
        for (c, v) in &self.verdicts {
            writeln!(f, "  {:<24} {}", c.label(), v)?;
        }
        let show = |r: &Option<BigRational>| r.as_ref().map_or("undefined".to_string(), |r| r.to_string());
        writeln!(f, "  {:<24} {}", "cdes_exact", show(&self.cdes_exact))?;
        writeln!(f, "  {:<24} {}", "dim_limit", show(&self.dim_limit))?;
        write!(f, "  {:<24} {}", "overlap", self.overlap)
    }
}

pub fn condition_report(dist: &FiniteDistribution) -> ConditionReport {
    let (w, _) = dist.integer_weights();
    let verdicts = Condition::ALL.iter().map(|&c| (c, check_all(dist, &w, c, 0.0))).collect();
    let dim = dist.dim_limit(true).ok();
    ConditionReport {
        description: dist.description.clone(),
        verdicts,
        cdes_exact: dist.cdes_exact().ok(),
        overlap: dim.is_some(),
        dim_limit: dim,
    }
}

/// Tallies of the implication checks over a corpus of random distributions.
/// An implication is tested only where its antecedent holds non-vacuously
/// and (for identification claims) overlap holds.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub distributions: usize,
    pub sequential_holds: usize,
    pub sequential_vacuous: usize,
    pub sequential_not_subset: usize,
    pub subset_holds_with_overlap: usize,
    pub subset_vacuous_or_no_overlap: usize,
    pub subset_dim_mismatch: usize,
    pub knox_holds_with_overlap: usize,
    pub knox_dim_mismatch: usize,
}

impl CorpusReport {
    fn merge(mut self, o: CorpusReport) -> CorpusReport {
        self.distributions += o.distributions;
        self.sequential_holds += o.sequential_holds;
        self.sequential_vacuous += o.sequential_vacuous;
        self.sequential_not_subset += o.sequential_not_subset;
        self.subset_holds_with_overlap += o.subset_holds_with_overlap;
        self.subset_vacuous_or_no_overlap += o.subset_vacuous_or_no_overlap;
        self.subset_dim_mismatch += o.subset_dim_mismatch;
        self.knox_holds_with_overlap += o.knox_holds_with_overlap;
        self.knox_dim_mismatch += o.knox_dim_mismatch;
        self
    }

    pub fn violations(&self) -> usize {
        self.sequential_not_subset + self.subset_dim_mismatch + self.knox_dim_mismatch
    }

    fn single(dist: &FiniteDistribution) -> CorpusReport {
        let r = condition_report(dist);
        let mut out = CorpusReport {
            distributions: 1,
            ..Default::default()
        };
        let subset = r.verdict(Condition::SubsetIgnorability);
        match r.sequential() {
            Verdict::Holds => {
                out.sequential_holds = 1;
                if subset == Verdict::Fails {
                    out.sequential_not_subset = 1;
                }
            }
            Verdict::Vacuous => out.sequential_vacuous = 1,
            Verdict::Fails => {}
        }
        let identified = r.overlap && r.cdes_exact.is_some();
        if subset.holds() && identified {
            out.subset_holds_with_overlap = 1;
            if r.dim_limit != r.cdes_exact {
                out.subset_dim_mismatch = 1;
            }
        } else if subset != Verdict::Fails {
            out.subset_vacuous_or_no_overlap = 1;
        }
        let knox = r.treatment().holds()
            && r.verdict(Condition::MediatorIgnorability).holds()
            && r.verdict(Condition::MediatorMonotonicity).holds();
        if knox && identified {
            out.knox_holds_with_overlap = 1;
            if r.dim_limit != r.cdes_exact {
                out.knox_dim_mismatch = 1;
            }
        }
        out
    }
}

/// Checks the implication arrows over `random_distribution(seed, x_levels)`
/// for every seed in `seeds`, with `x_levels` cycling through 1..=3.
pub fn check_corpus(seeds: Range<u64>, exec: Execution) -> CorpusReport {
    let start = seeds.start;
    let n = (seeds.end.saturating_sub(seeds.start)) as usize;
    exec.map(n, |i| {
        let seed = start + i as u64;
        let dist = random_distribution(seed, 1 + (seed % 3) as usize);
        CorpusReport::single(&dist)
    })
    .into_iter()
    .fold(CorpusReport::default(), CorpusReport::merge)
}

#[cfg(test)]
mod tests {
    use super::super::{ratio, AtomKey};
    use super::*;
    use num_bigint::BigInt;

    #[test]
    fn product_distribution_satisfies_independences() {
        // (m_w, m_b, y_w1, y_b1) ⫫ Z, one X level
        let p_z = [ratio(1, 3), ratio(2, 3)];
        let p_m = |v: bool| if v { ratio(1, 4) } else { ratio(3, 4) };
        let p_y = |v: bool| if v { ratio(2, 5) } else { ratio(3, 5) };
        let mut atoms = Vec::new();
        for z in Race::BOTH {
            for bits in 0..16u8 {
                let f = |i: u8| bits & (1 << i) != 0;
                let k = AtomKey {
                    x: 0,
                    q: None,
                    z,
                    m_w: f(0),
                    m_b: f(1),
                    y_w1: f(2),
                    y_b1: f(3),
                };
                let p = &p_z[z.is_black() as usize] * p_m(f(0)) * p_m(f(1)) * p_y(f(2)) * p_y(f(3));
                atoms.push(Atom::from((k, p)));
            }
        }
        let d = FiniteDistribution::new(atoms, "product").unwrap();
        for c in [
            Condition::SubsetIgnorability,
            Condition::SequentialIg1,
            Condition::SequentialIg2,
            Condition::TreatmentIg1,
            Condition::TreatmentIg2,
            Condition::MediatorIgnorability,
        ] {
            assert_eq!(check_condition(&d, c), Verdict::Holds, "{c:?}");
        }
        assert_eq!(check_condition(&d, Condition::MediatorMonotonicity), Verdict::Fails);
        assert_eq!(check_condition_with(&d, Condition::SubsetIgnorability, Tolerance::EMPIRICAL), Verdict::Holds);
    }

    #[test]
    fn vacuous_when_nobody_arrested() {
        let k = AtomKey {
            x: 0,
            q: None,
            z: Race::White,
            m_w: false,
            m_b: false,
            y_w1: true,
            y_b1: false,
        };
        let d = FiniteDistribution::from_weights(vec![(k, BigInt::from(1))], "nobody").unwrap();
        assert_eq!(check_condition(&d, Condition::SubsetIgnorability), Verdict::Vacuous);
        assert_eq!(check_condition(&d, Condition::MediatorIgnorability), Verdict::Vacuous);
        let r = condition_report(&d);
        assert_eq!(r.cdes_exact, None);
        assert!(!r.overlap);
        assert_eq!(r.to_json()["cdes_exact"], serde_json::Value::Null);
    }

    #[test]
    fn verdict_conjunction() {
        use Verdict::*;
        assert_eq!(Holds.and(Vacuous), Holds);
        assert_eq!(Vacuous.and(Vacuous), Vacuous);
        assert_eq!(Holds.and(Fails), Fails);
        assert_eq!(Vacuous.and(Fails), Fails);
    }

    #[test]
    fn tolerance_mode_absorbs_rounding() {
        let k = |z, y| AtomKey {
            x: 0,
            q: None,
            z,
            m_w: true,
            m_b: true,
            y_w1: y,
            y_b1: y,
        };
        // y ⫫ Z exactly would need 1/2 vs 1/2; perturb by 1e-12
        let eps = BigRational::new(BigInt::from(1), BigInt::from(10).pow(12));
        let atoms = vec![
            Atom::from((k(Race::White, true), ratio(1, 4) + &eps)),
            Atom::from((k(Race::White, false), ratio(1, 4) - &eps)),
            Atom::from((k(Race::Black, true), ratio(1, 4))),
            Atom::from((k(Race::Black, false), ratio(1, 4))),
        ];
        let d = FiniteDistribution::new(atoms, "near").unwrap();
        assert_eq!(check_condition(&d, Condition::SubsetIgnorability), Verdict::Fails);
        assert_eq!(check_condition_with(&d, Condition::SubsetIgnorability, Tolerance::EMPIRICAL), Verdict::Holds);
    }
}
