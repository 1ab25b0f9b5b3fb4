use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dpsubmod::audit::eps_hat_from_counts;
use dpsubmod::bandit::{run_bandit_with, BanditConfig, BanditVariant};
use dpsubmod::continuous::{generate_dr_stream, run_dr, BoxDomain, DrConfig, DrFamilyKind, OptimizerKind};
use dpsubmod::full_info::{run_full_info_with, LearningRate};
use dpsubmod::hedge::{regret_certificate, ExpertState, HedgeHistory};
use dpsubmod::oracles::{brute_force_opt, greedy_opt, one_minus_inv_e, regret_report, OracleKind};
use dpsubmod::submodular::{
    check_bounds, check_monotone, check_submodular, generate_stream, FamilyKind, FunctionStream, GroundSet, ItemSet,
    SetFunction, StreamSpec, SubmodularOracle,
};

fn family() -> impl Strategy<Value = FamilyKind> {
    prop_oneof![Just(FamilyKind::Coverage), Just(FamilyKind::CappedModular)]
}

fn oracle(n: usize) -> impl Strategy<Value = SubmodularOracle> {
    prop_oneof![
        prop::collection::vec(0.0..=1.0f64, n).prop_map(|p| SubmodularOracle::coverage(p).unwrap()),
        (prop::collection::vec(0.0..=1.0f64, n), 0.05..=1.0f64)
            .prop_map(|(w, cap)| SubmodularOracle::capped_modular(w, cap).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_update_is_identity(n in 1usize..16, eta in 0.001..2.0f64, seed: u64, steps in 0usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut e = ExpertState::new(n, eta).unwrap();
        for _ in 0..steps {
            let g: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            e.update(&g).unwrap();
        }
        let before = e.distribution().to_vec();
        e.update(&vec![0.0; n]).unwrap();
        prop_assert_eq!(before, e.distribution().to_vec());
    }

    #[test]
    fn distribution_stays_normalized(n in 1usize..32, eta in 0.001..1.0f64, seed: u64, steps in 1usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut e = ExpertState::new(n, eta).unwrap();
        for _ in 0..steps {
            let g: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            e.update(&g).unwrap();
            let total: f64 = e.distribution().iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            prop_assert!(e.log_weights().iter().all(|w| w.is_finite() && *w <= eta * steps as f64));
        }
    }

    #[test]
    fn certificate_holds(n in 1usize..16, eta in 0.001..2.0f64, seed: u64, horizon in 1usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut e = ExpertState::new(n, eta).unwrap();
        let mut h = HedgeHistory::new(eta);
        for _ in 0..horizon {
            let g: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let x = e.distribution().to_vec();
            let choice = e.sample(&mut rng);
            h.push(x, g.clone(), choice);
            e.update(&g).unwrap();
        }
        prop_assert!(regret_certificate(&h).unwrap().passes());
    }

    #[test]
    fn generated_oracles_are_monotone_submodular(f in (1usize..=7).prop_flat_map(oracle)) {
        let ground = GroundSet::with_size(f.len()).unwrap();
        prop_assert!(check_submodular(&f, &ground).unwrap().holds);
        prop_assert!(check_monotone(&f, &ground).unwrap().holds);
        prop_assert!(check_bounds(&f, &ground).unwrap().holds);
        prop_assert_eq!(f.value(&[]), 0.0);
    }

    #[test]
    fn marginals_match_differences(f in (1usize..=8).prop_flat_map(oracle), mask in 0u64..256) {
        let n = f.len();
        let prefix = ItemSet::from_mask(mask & ((1 << n) - 1));
        let base = f.value(prefix.as_slice());
        let m = f.marginal_vector(&prefix).unwrap();
        for (a, gain) in m.iter().enumerate() {
            let expected = if prefix.contains(a) { 0.0 } else { f.value(prefix.with(a).as_slice()) - base };
            prop_assert!((gain - expected).abs() <= 1e-12);
        }
    }

    #[test]
    fn generation_is_pure(kind in family(), n in 1usize..10, horizon in 1usize..20, seed: u64) {
        let spec = StreamSpec::iid_uniform(kind, n, horizon, seed);
        let a = generate_stream(&spec).unwrap();
        prop_assert_eq!(&a, &generate_stream(&spec).unwrap());
        let json = a.to_json().unwrap();
        let back = FunctionStream::from_json(&json).unwrap();
        prop_assert_eq!(back.to_json().unwrap(), json);
    }

    #[test]
    fn oracle_sandwich(kind in family(), n in 1usize..=7, k in 1usize..=4, horizon in 1usize..6, seed: u64) {
        let stream = generate_stream(&StreamSpec::iid_uniform(kind, n, horizon, seed)).unwrap();
        let bf = brute_force_opt(&stream, k).unwrap().value;
        let gr = greedy_opt(&stream, k).unwrap().value;
        prop_assert!(bf + 1e-9 >= gr);
        prop_assert!(gr + 1e-9 >= one_minus_inv_e() * bf);
    }

    #[test]
    fn regret_report_is_pure(n in 2usize..6, k in 1usize..3, horizon in 1usize..30, seed: u64) {
        let stream = generate_stream(&StreamSpec::iid_uniform(FamilyKind::Coverage, n, horizon, seed)).unwrap();
        let trace = run_full_info_with(&stream, k, LearningRate::NonPrivate { eta: 0.3 }, seed, false).unwrap();
        let a = regret_report(&trace, &stream, k, OracleKind::Exact).unwrap();
        let b = regret_report(&trace, &stream, k, OracleKind::Exact).unwrap();
        prop_assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        prop_assert!((a.payoff - trace.total_payoff()).abs() < 1e-9);
    }

    #[test]
    fn eps_hat_nonincreasing_in_alpha(
        f in prop::collection::vec(0u64..50, 1..8),
        g in prop::collection::vec(0u64..50, 1..8),
        alpha in 0.01..5.0f64,
        bump in 0.0..5.0f64,
    ) {
        let to_counts = |v: &[u64]| -> BTreeMap<(u64, Vec<u64>), u64> {
            v.iter().enumerate().map(|(i, c)| ((0, vec![i as u64]), *c)).collect()
        };
        let (a, b) = (to_counts(&f), to_counts(&g));
        let low = eps_hat_from_counts(&a, &b, alpha);
        prop_assert!(eps_hat_from_counts(&a, &b, alpha + bump) <= low + 1e-12);
        prop_assert!((eps_hat_from_counts(&b, &a, alpha) - low).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn full_info_certificates(n in 2usize..8, k in 1usize..4, horizon in 1usize..200, seed: u64) {
        let stream = generate_stream(&StreamSpec::iid_uniform(FamilyKind::Coverage, n, horizon, seed)).unwrap();
        let trace = run_full_info_with(&stream, k, LearningRate::Private { eps: 1.0, delta: 1e-3 }, seed, true).unwrap();
        for h in trace.feedback.as_ref().unwrap() {
            prop_assert!(regret_certificate(h).unwrap().passes());
        }
        for r in &trace.rounds {
            prop_assert!(r.set.len() <= k);
            prop_assert!((0.0..=1.0).contains(&r.payoff));
        }
    }

    #[test]
    fn bandit_feedback(
        variant in prop_oneof![Just(BanditVariant::Interval), Just(BanditVariant::Presampled), Just(BanditVariant::Naive)],
        n in 2usize..6,
        k in 1usize..3,
        horizon in 1usize..300,
        gamma in 0.05..=1.0f64,
        seed: u64,
    ) {
        let stream = generate_stream(&StreamSpec::iid_uniform(FamilyKind::Coverage, n, horizon, seed)).unwrap();
        let cfg = BanditConfig::new(variant, k, 1.0, 1e-3, seed).with_gamma(gamma);
        let trace = run_bandit_with(&stream, &cfg, true).unwrap();
        let histories = trace.feedback.as_ref().unwrap();
        for h in histories {
            prop_assert!(regret_certificate(h).unwrap().passes());
        }
        let updated: Vec<usize> = if variant == BanditVariant::Naive {
            (0..horizon).collect()
        } else {
            (0..horizon).filter(|&t| trace.rounds[t].explore).collect()
        };
        for h in histories {
            prop_assert_eq!(h.steps.len(), updated.len());
        }
        for step in 0..updated.len() {
            let nonzero: usize = histories.iter().map(|h| h.steps[step].g.iter().filter(|v| **v != 0.0).count()).sum();
            prop_assert!(nonzero <= 1);
        }
        for r in &trace.rounds {
            prop_assert_eq!(r.probe.is_some(), r.explore);
        }
    }

    #[test]
    fn continuous_iterates_stay_in_box(
        lo in prop::collection::vec(-1.0..=0.0f64, 1..4),
        width in 0.1..2.0f64,
        horizon in 1usize..200,
        k in 1usize..6,
        noisy: bool,
        seed: u64,
    ) {
        let n = lo.len();
        let hi: Vec<f64> = lo.iter().map(|l| (l + width).max(0.0)).collect();
        let domain = BoxDomain::new(lo, hi).unwrap();
        let opt = if noisy { OptimizerKind::NoisyFollowTheLeader } else { OptimizerKind::FollowTheLeader };
        let stream = generate_dr_stream(DrFamilyKind::ConcaveQuadratic, n, horizon, seed).unwrap();
        let trace = run_dr(&stream, &domain, &DrConfig::new(1.0, opt, seed).with_k(k)).unwrap();
        for r in &trace.rounds {
            prop_assert!(domain.check(&r.x).is_ok());
        }
    }
}
