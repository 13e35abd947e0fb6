use cdeob::data::Race;
use cdeob::ignorability::{
    build_case, check_condition, condition_report, ratio, Atom, Case, Condition, FiniteDistribution, Verdict,
};
use num_rational::BigRational;

fn case6(num: i64, den: i64) -> FiniteDistribution {
    build_case(Case::Case6, Some(ratio(num, den))).unwrap()
}

#[test]
fn case2_construction() {
    let d = build_case(Case::Case2, None).unwrap();
    let is_b = |a: &Atom| a.z == Race::Black;
    let is_w = |a: &Atom| a.z == Race::White;
    assert_eq!(d.conditional(Atom::m, is_b), Some(ratio(1, 1)));
    assert_eq!(d.conditional(Atom::m, is_w), Some(ratio(1, 2)));
    assert_eq!(d.cdes_exact().unwrap(), ratio(0, 1));
    assert_eq!(check_condition(&d, Condition::SubsetIgnorability), Verdict::Holds);
    assert_eq!(check_condition(&d, Condition::SequentialIg1), Verdict::Fails);
    assert_eq!(check_condition(&d, Condition::TreatmentIg1), Verdict::Fails);
}

/// Observational law of case 3 by enumerating `(Z, Y(w,1), Y(b,1))`: Z = b
/// always charges, Z = w charges half the time, everyone is arrested.
#[test]
fn case3_law_and_estimands() {
    let d = build_case(Case::Case3, None).unwrap();
    let law = d.observational_law().unwrap();
    assert_eq!(law[&(0, true, Race::Black)], ratio(1, 2));
    assert_eq!(law[&(0, true, Race::White)], ratio(1, 4));
    assert_eq!(law[&(0, false, Race::White)], ratio(1, 4));
    assert_eq!(law.len(), 3);
    assert_eq!(d.cdes_exact().unwrap(), ratio(1, 2));
    assert_eq!(d.dim_limit(true).unwrap(), ratio(1, 2));
    assert_eq!(d.dim_limit(false).unwrap(), ratio(1, 2));
    assert_eq!(check_condition(&d, Condition::SubsetIgnorability), Verdict::Fails);
}

#[test]
fn case6_checkpoints() {
    for (n, den) in [(0, 1), (1, 3), (1, 2), (1, 1)] {
        let d = case6(n, den);
        let alpha = ratio(n, den);
        assert_eq!(d.prob(Atom::m), ratio(3, 4));
        let given = |a: &Atom| a.m();
        assert_eq!(d.conditional(|a| a.y() && a.z == Race::Black, given), Some(ratio(2, 3)));
        assert_eq!(d.conditional(|a| a.y() && a.z == Race::White, given), Some(ratio(1, 3)));
        assert_eq!(d.conditional(|a| a.m_w, given), Some(ratio(2, 3)));
        assert_eq!(d.cdes_exact().unwrap(), (BigRational::from_integer(1.into()) - alpha) / ratio(3, 1));
        assert_eq!(d.dim_limit(true).unwrap(), ratio(0, 1));
        assert_eq!(d.observational_law().unwrap(), case6(0, 1).observational_law().unwrap());
        let r = condition_report(&d);
        assert_eq!(r.treatment(), Verdict::Holds);
    }
}

#[test]
fn appendix_b_checkpoints() {
    let d = build_case(Case::AppendixB, None).unwrap();
    for z in Race::BOTH {
        let given = move |a: &Atom| a.m() && a.z == z;
        assert_eq!(d.conditional(|a| a.q == Some(1), given), Some(ratio(1, 2)));
        assert_eq!(d.conditional(|a| a.y_b1, given), Some(ratio(1, 2)));
        assert_eq!(d.conditional(|a| a.y_w1, given), Some(ratio(1, 4)));
    }
    assert_eq!(check_condition(&d, Condition::MediatorIgnorability), Verdict::Fails);
    assert_eq!(check_condition(&d, Condition::SubsetIgnorability), Verdict::Holds);
    assert_eq!(d.dim_limit(true).unwrap(), d.cdes_exact().unwrap());
}

#[test]
fn identical_potential_outcomes_give_zero_effect() {
    for seed in 0..50 {
        let d = cdeob::ignorability::random_distribution(seed, 2);
        let atoms: Vec<Atom> = d
            .atoms()
            .iter()
            .map(|a| Atom {
                y_w1: a.y_b1,
                ..a.clone()
            })
            .collect();
        let same = FiniteDistribution::new(atoms, "tied").unwrap();
        if let Ok(c) = same.cdes_exact() {
            assert_eq!(c, ratio(0, 1));
        }
    }
}

#[test]
fn report_serializes() {
    let r = condition_report(&build_case(Case::Case3, None).unwrap());
    let v = r.to_json();
    assert_eq!(v["subset_ignorability"], "fails");
    assert_eq!(v["cdes_exact"]["num"], "1");
    assert_eq!(v["cdes_exact"]["den"], "2");
    let text = r.to_string();
    assert!(text.contains("subset_ignorability      fails"));
}
