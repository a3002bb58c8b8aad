mod common;

use proptest::collection::vec;
use proptest::prelude::*;

use common::*;
use corrgap::correlation_gap::correlation_gap;
use corrgap::cost_sharing::{incremental_scheme, orderings, CostShareScheme};
use corrgap::distributions::{expectation_under, independent_expectation_exact, marginals_of, IndependentBernoulli};
use corrgap::instances::{random_coverage_submodular, random_monotone, random_supermodular};
use corrgap::model::{is_monotone, is_submodular, is_supermodular};
use corrgap::robust::{approximation_ratio, evaluate_g, evaluate_independent, Decision, DecisionSpace};
use corrgap::split::{verify_split_properties, SplitMap};
use corrgap::welfare::{rounding_value, welfare_ip_bruteforce, welfare_upper_bound};
use corrgap::worst_case::worst_case_lp;
use corrgap::{GroundSet, Instance, SetFunction, SubsetMask};

fn table_and_marginals(max_n: usize) -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>)> {
    (1..=max_n).prop_flat_map(|n| (Just(n), vec(0.0..10.0f64, 1 << n), vec(0.0..=1.0f64, n)))
}

fn seeded(max_n: usize) -> impl Strategy<Value = (u64, usize, Vec<f64>)> {
    (1..=max_n).prop_flat_map(|n| (any::<u64>(), Just(n), vec(0.02..0.98f64, n)))
}

fn explicit(n: usize, values: Vec<f64>) -> SetFunction {
    SetFunction::explicit(n, values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn worst_case_certificate_and_domination((n, values, p) in table_and_marginals(6)) {
        let inst = Instance::new(explicit(n, values.clone()), p.clone()).unwrap();
        let lp = worst_case_lp(&inst).unwrap();
        prop_assert!(certificate_violation(&values, &p, &lp) <= 1e-7);
        prop_assert!(lp.value >= product_expectation(&values, &p) - 1e-9);
        prop_assert!(lp.distribution.support.len() <= n + 1);
        for (a, b) in marginals_of(&lp.distribution, n).iter().zip(&p) {
            prop_assert!((a - b).abs() <= 1e-7);
        }
    }

    #[test]
    fn independent_expectation_matches_enumeration((n, values, p) in table_and_marginals(8)) {
        let f = explicit(n, values.clone());
        let exact = independent_expectation_exact(&f, &p).unwrap();
        prop_assert!((exact - product_expectation(&values, &p)).abs() <= 1e-10);
        let product = IndependentBernoulli::new(p.clone()).unwrap().materialize().unwrap();
        prop_assert!((expectation_under(&product, &f) - exact).abs() <= 1e-10);
    }

    #[test]
    fn evaluation_is_pure((n, values, _p) in table_and_marginals(5), bits in any::<u32>()) {
        let f = explicit(n, values);
        let s = SubsetMask(bits & ((1 << n) - 1));
        prop_assert_eq!(f.evaluate(s).unwrap().to_bits(), f.evaluate(s).unwrap().to_bits());
    }

    #[test]
    fn gap_is_at_least_one_and_scale_free((n, values, p) in table_and_marginals(5), c in 0.1..50.0f64) {
        let values: Vec<f64> = values.into_iter().map(|v| v + 0.01).collect();
        let a = correlation_gap(&Instance::new(explicit(n, values.clone()), p.clone()).unwrap()).unwrap();
        let scaled = values.iter().map(|v| c * v).collect();
        let b = correlation_gap(&Instance::new(explicit(n, scaled), p).unwrap()).unwrap();
        let (ka, kb) = (a.kappa.unwrap(), b.kappa.unwrap());
        prop_assert!(ka >= 1.0 - 1e-9);
        prop_assert!((ka - kb).abs() <= 1e-9 * ka);
    }

    #[test]
    fn modular_functions_have_no_gap(
        (n, w, p) in (1..=6usize).prop_flat_map(|n| (Just(n), vec(-3.0..5.0f64, n), vec(0.0..=1.0f64, n))),
        base in -2.0..2.0f64,
    ) {
        let f = SetFunction::from_fn(n, |s| base + s.elements().map(|i| w[i]).sum::<f64>()).unwrap();
        prop_assert!(is_submodular(&f).unwrap() && is_supermodular(&f).unwrap());
        let inst = Instance::new(f.clone(), p.clone()).unwrap();
        let l = worst_case_lp(&inst).unwrap().value;
        prop_assert!((l - independent_expectation_exact(&f, &p).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn modular_check_reconstructs_from_singletons((n, values, _p) in table_and_marginals(4)) {
        let f = explicit(n, values.clone());
        if is_submodular(&f).unwrap() && is_supermodular(&f).unwrap() {
            for (mask, &v) in values.iter().enumerate() {
                let rebuilt: f64 = values[0] + (0..n).filter(|i| mask >> i & 1 == 1).map(|i| values[1 << i] - values[0]).sum::<f64>();
                prop_assert!((v - rebuilt).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn supermodular_lp_matches_chain((seed, n, p) in seeded(9)) {
        let f = random_supermodular(seed, n).unwrap();
        prop_assert!(is_supermodular(&f).unwrap());
        let table = table_of(&f);
        let l = worst_case_lp(&Instance::new(f, p.clone()).unwrap()).unwrap().value;
        prop_assert!((l - nested_chain_value(&table, &p)).abs() <= 1e-6);
    }

    #[test]
    fn raising_a_marginal_helps_monotone_functions((seed, n, p) in seeded(8), pick in any::<usize>(), bump in 0.0..0.5f64) {
        let f = random_monotone(seed, n).unwrap();
        let before = independent_expectation_exact(&f, &p).unwrap();
        let mut q = p.clone();
        let i = pick % n;
        q[i] = (q[i] + bump).min(1.0);
        prop_assert!(independent_expectation_exact(&f, &q).unwrap() >= before - 1e-12);
    }

    #[test]
    fn coverage_functions_are_monotone_submodular((seed, n, _p) in seeded(8)) {
        let f = random_coverage_submodular(seed, n).unwrap();
        prop_assert!(is_monotone(&f).unwrap() && is_submodular(&f).unwrap());
    }

    #[test]
    fn incremental_shares_nonnegative_iff_monotone(
        (n, values, _p) in table_and_marginals(4),
        monotone_seed in proptest::option::of(any::<u64>()),
    ) {
        let f = match monotone_seed {
            Some(seed) => random_monotone(seed, n).unwrap(),
            None => explicit(n, values),
        };
        let scheme = incremental_scheme(f.clone());
        let ground = GroundSet::new(n).unwrap();
        let nonnegative = ground
            .subsets()
            .flat_map(orderings)
            .all(|sigma| sigma.order().iter().all(|&i| scheme.share(i, &sigma) >= -1e-12));
        prop_assert_eq!(nonnegative, is_monotone(&f).unwrap());
    }

    #[test]
    fn projection_preserves_unions(
        (counts, a, b) in vec(1..=3usize, 1..=4).prop_flat_map(|c| (Just(c), any::<u32>(), any::<u32>())),
    ) {
        let map = SplitMap::new(counts).unwrap();
        let full = (1u32 << map.split_size()) - 1;
        let (s, t) = (SubsetMask(a & full), SubsetMask(b & full));
        prop_assert_eq!(map.project(s.union(t)), map.project(s).union(map.project(t)));
    }

    #[test]
    fn splits_preserve_worst_case((seed, n, p) in seeded(4), counts in vec(1..=3usize, 4)) {
        let inst = Instance::new(random_monotone(seed, n).unwrap(), p).unwrap();
        let r = verify_split_properties(&inst, counts[..n].to_vec()).unwrap();
        prop_assert!(r.all_hold(), "{:?}", r);
    }

    #[test]
    fn welfare_sandwich((n, values, _p) in table_and_marginals(5), k in 2..=3usize) {
        let f = explicit(n, values.clone());
        let opt = welfare_ip_bruteforce(&f, k).unwrap().welfare;
        prop_assert!((opt - welfare_by_search(&values, n, k)).abs() <= 1e-9);
        prop_assert!(opt <= welfare_upper_bound(&f, k).unwrap() + 1e-9);
    }

    #[test]
    fn rounding_against_upper_bound((seed, n, _p) in seeded(6), k in 2..=4usize) {
        let f = random_coverage_submodular(seed, n).unwrap();
        let upper = welfare_upper_bound(&f, k).unwrap();
        prop_assert!(rounding_value(&f, k).unwrap() >= (1.0 - (-1.0f64).exp()) * upper - 1e-6);
    }

    #[test]
    fn robust_chain(
        (n, tables, p) in (1..=4usize).prop_flat_map(|n| (Just(n), vec(vec(0.0..10.0f64, 1 << n), 1..=4), vec(0.05..0.95f64, n))),
    ) {
        let decisions = tables
            .into_iter()
            .enumerate()
            .map(|(x, values)| Decision { label: format!("d{x}"), function: explicit(n, values), supermodular: false })
            .collect();
        let space = DecisionSpace::new(decisions, p).unwrap();
        for x in 0..space.decisions.len() {
            prop_assert!(evaluate_g(&space, x).unwrap() >= evaluate_independent(&space, x).unwrap() - 1e-9);
        }
        prop_assert!(approximation_ratio(&space).unwrap().chain_holds);
    }
}

#[test]
fn projection_unions_exhaustive() {
    for counts in [vec![2, 3, 1, 4], vec![5, 5], vec![1; 10]] {
        let map = SplitMap::new(counts).unwrap();
        let full = 1u32 << map.split_size();
        for a in 0..full {
            let b = a.rotate_left(3) & (full - 1);
            let (s, t) = (SubsetMask(a), SubsetMask(b));
            assert_eq!(map.project(s.union(t)), map.project(s).union(map.project(t)));
        }
    }
}

#[test]
fn min_flow_functions_are_supermodular() {
    for n in 1..=8 {
        for x in 0..=n {
            assert!(is_supermodular(&SetFunction::TwoStageFlow { n, x }).unwrap(), "n={n} x={x}");
        }
    }
}
