use cdeob::data::{Covariate, ObservedDataset, Race};
use cdeob::estimators::{stratified_dim, Estimate, Method, OverlapPolicy};
use cdeob::exec::Execution;
use cdeob::harness::percentile;
use cdeob::ignorability::{condition_report, random_distribution, Condition, Verdict};
use cdeob::linmodel::{auc, partial_r2};
use cdeob::scm::{sample_population_with, ScmParams};
use cdeob::sensitivity::{bias_bound, contour_grid};
use proptest::prelude::*;

fn dataset_strategy() -> impl Strategy<Value = ObservedDataset> {
    prop::collection::vec((any::<bool>(), 0u8..3, any::<bool>()), 4..80).prop_map(|rows| {
        ObservedDataset::new(
            rows.iter().map(|r| if r.0 { Race::Black } else { Race::White }).collect(),
            rows.iter().map(|r| r.2 as u8).collect(),
            vec![Covariate::numeric("x", rows.iter().map(|r| r.1 as f64).collect())],
        )
        .unwrap()
    })
}

proptest! {
    #[test]
    fn bound_monotone(r2y in 0.0..1.0f64, r2z in 0.0..0.99f64, dy in 0.0..0.5f64, dz in 0.0..0.5f64,
                      se in 0.0..1.0f64, df in 1usize..100_000) {
        let b = bias_bound(r2y, r2z, se, df).unwrap();
        let by = bias_bound((r2y + dy).min(1.0), r2z, se, df).unwrap();
        let bz = bias_bound(r2y, (r2z + dz).min(0.99), se, df).unwrap();
        prop_assert!(b >= 0.0);
        prop_assert!(by >= b && bz >= b);
    }

    #[test]
    fn grid_monotone_and_zero_on_axes(point in -1.0..1.0f64, se in 0.0..0.1f64, steps in 2usize..30, r_max in 0.01..0.99f64) {
        let e = Estimate::new(point, se, Method::Regression, 100, 0.0);
        let g = contour_grid(&e, 97, r_max, steps).unwrap();
        for i in 0..steps {
            prop_assert_eq!(g.bound[0][i], 0.0);
            prop_assert_eq!(g.bound[i][0], 0.0);
            for j in 1..steps {
                prop_assert!(g.bound[i][j] >= g.bound[i][j - 1]);
                prop_assert!(g.bound[j][i] >= g.bound[j - 1][i]);
            }
        }
        prop_assert_eq!(g.critical_level, point.abs());
    }

    #[test]
    fn stratified_estimate_is_bounded(data in dataset_strategy()) {
        if let Ok(e) = stratified_dim(&data, &["x"], OverlapPolicy::Drop) {
            prop_assert!((-1.0..=1.0).contains(&e.point));
            prop_assert!(e.se >= 0.0);
            prop_assert!((e.ci_high - e.point - (e.point - e.ci_low)).abs() < 1e-12);
            prop_assert!((0.0..1.0).contains(&e.dropped_mass));
            prop_assert!(e.n_used <= data.len());
        }
    }

    #[test]
    fn auc_symmetry_and_rank_invariance(rows in prop::collection::vec((-50i32..50, any::<bool>()), 2..60)) {
        let s: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
        let y: Vec<bool> = rows.iter().map(|r| r.1).collect();
        prop_assume!(y.iter().any(|&b| b) && y.iter().any(|&b| !b));
        let a = auc(&s, &y).unwrap();
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let cubed: Vec<f64> = s.iter().map(|v| v * v * v + 3.0).collect();
        prop_assert!((a + auc(&neg, &y).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((a - auc(&cubed, &y).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn partial_r2_in_unit_interval(red in 0.0..0.999f64, extra in 0.0..1.0f64) {
        let full = red + (1.0 - red) * extra;
        let p = partial_r2(full, red).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&p));
    }

    #[test]
    fn percentiles_bracket_median(mut v in prop::collection::vec(-10.0..10.0f64, 1..50)) {
        v.sort_by(f64::total_cmp);
        let lo = percentile(&v, 0.025);
        let hi = percentile(&v, 0.975);
        prop_assert!(v[0] <= lo && lo <= percentile(&v, 0.5) && percentile(&v, 0.5) <= hi && hi <= v[v.len() - 1]);
    }

    #[test]
    fn csv_roundtrip(data in dataset_strategy()) {
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let back = ObservedDataset::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, data);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sampling_independent_of_execution(seed in any::<u64>(), n in 1usize..10_000, a in 0.2..0.4f64, b in 0.2..0.4f64) {
        let p = ScmParams::paper(a, b);
        let s = sample_population_with(&p, n, seed, Execution::Sequential).unwrap();
        let q = sample_population_with(&p, n, seed, Execution::Parallel).unwrap();
        prop_assert_eq!(&s.rows, &q.rows);
        for r in &s.rows {
            prop_assert!(r.check_consistency().is_ok());
        }
    }

    #[test]
    fn random_distributions_respect_implications(seed in any::<u64>(), x_levels in 1usize..4) {
        let d = random_distribution(seed, x_levels);
        let r = condition_report(&d);
        if r.sequential() == Verdict::Holds {
            prop_assert_ne!(r.verdict(Condition::SubsetIgnorability), Verdict::Fails);
        }
        if r.verdict(Condition::SubsetIgnorability) == Verdict::Holds && r.overlap && r.cdes_exact.is_some() {
            prop_assert_eq!(&r.dim_limit, &r.cdes_exact);
        }
        let total = d.atoms().iter().fold(num_rational::BigRational::from_integer(0.into()), |acc, a| acc + &a.prob);
        prop_assert_eq!(total, num_rational::BigRational::from_integer(1.into()));
    }
}
