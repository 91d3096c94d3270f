mod common;

use std::sync::Arc;

use common::*;
use dswater::belief::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

fn mass_strategy(n: usize) -> impl Strategy<Value = MassFunction> {
    let size = 1usize << n;
    prop::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64], size - 1)
        .prop_filter("needs some mass", |w| w.iter().sum::<f64>() > 1e-6)
        .prop_map(move |w| {
            let total: f64 = w.iter().sum();
            let mut masses = vec![0.0];
            masses.extend(w.iter().map(|v| v / total));
            MassFunction::new(frame(n), masses).unwrap()
        })
}

fn frame_and_pair() -> impl Strategy<Value = (MassFunction, MassFunction)> {
    (2usize..=3).prop_flat_map(|n| (mass_strategy(n), mass_strategy(n)))
}

/// Two mass functions over the same `Arc` frame.
fn rebind(a: MassFunction, b: &MassFunction) -> MassFunction {
    MassFunction::new(Arc::clone(b.frame()), a.masses().to_vec()).unwrap()
}

proptest! {
    #[test]
    fn belief_bounded_by_plausibility(m in (2usize..=4).prop_flat_map(mass_strategy)) {
        for a in m.frame().subsets() {
            let bel = belief(&m, a).unwrap();
            let pl = plausibility(&m, a).unwrap();
            prop_assert!(-TOL <= bel && bel <= pl + TOL && pl <= 1.0 + TOL);
        }
    }

    #[test]
    fn pignistic_sums_to_one((m1, m2) in frame_and_pair()) {
        let m2 = rebind(m2, &m1);
        let conj = combine_conjunctive(&m1, &m2).unwrap();
        for m in [&m1, &conj] {
            if m.conflict() < 1.0 - 1e-12 {
                let total: f64 = m.frame().singletons().map(|s| pignistic(m, s).unwrap()).sum();
                prop_assert!((total - 1.0).abs() < TOL);
            }
        }
    }

    #[test]
    fn combinations_stay_normalized((m1, m2) in frame_and_pair()) {
        let m2 = rebind(m2, &m1);
        let conj = combine_conjunctive(&m1, &m2).unwrap();
        prop_assert!((conj.total() - 1.0).abs() < TOL);
        let avg = combine_average(&[m1, m2]).unwrap();
        prop_assert!((avg.total() - 1.0).abs() < TOL);
        prop_assert_eq!(avg.conflict(), 0.0);
    }

    #[test]
    fn conjunctive_matches_exhaustive_oracle((m1, m2) in frame_and_pair()) {
        let m2 = rebind(m2, &m1);
        let got = combine_conjunctive(&m1, &m2).unwrap();
        let want = oracle_conjunctive(&as_map(&m1), &as_map(&m2));
        for (s, v) in want {
            prop_assert!((got.mass(to_subset(&s)) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn r_one_picks_dominant_singleton(m in mass_strategy(3)) {
        let p = DecisionParams::new(1.0, 1.0).unwrap();
        let scores: Vec<(Subset, f64)> = m
            .frame()
            .subsets()
            .skip(1)
            .map(|s| (s, decision_score(&m, s, &p).unwrap()))
            .collect();
        let (best_single, best_score) = m
            .frame()
            .singletons()
            .map(|s| (s, pignistic(&m, s).unwrap()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if scores.iter().all(|&(s, v)| s == best_single || best_score > v + 1e-9) {
            prop_assert_eq!(appriou_decide(&m, &p).unwrap(), best_single);
        }
    }

    #[test]
    fn r_zero_picks_omega(m in (2usize..=3).prop_flat_map(mass_strategy)) {
        let p = DecisionParams::new(0.0, 1.0).unwrap();
        if m.mass(m.frame().omega()) > 0.0 {
            prop_assert_eq!(appriou_decide(&m, &p).unwrap(), m.frame().omega());
        }
    }

    #[test]
    fn omega_decisions_shrink_with_r(m in mass_strategy(2)) {
        let omega = m.frame().omega();
        let mut left_omega = false;
        for k in 0..=10 {
            let p = DecisionParams::new(k as f64 / 10.0, 1.0).unwrap();
            let is_omega = appriou_decide(&m, &p).unwrap() == omega;
            prop_assert!(!(left_omega && is_omega), "decision returned to Ω at r = {}", k as f64 / 10.0);
            left_omega |= !is_omega;
        }
    }
}

#[test]
fn belief_functions_match_oracle_on_seeded_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [2, 3, 4] {
        let f = frame(n);
        for _ in 0..50 {
            let m = random_mass(&mut rng, &f);
            let map = as_map(&m);
            for a in power_set(n) {
                let s = to_subset(&a);
                assert!((belief(&m, s).unwrap() - oracle_belief(&map, &a)).abs() < TOL);
                assert!((plausibility(&m, s).unwrap() - oracle_plausibility(&map, &a)).abs() < TOL);
                assert!((pignistic(&m, s).unwrap() - oracle_pignistic(&map, &a)).abs() < TOL);
            }
        }
    }
}

#[test]
fn average_matches_oracle_for_many_sources() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = frame(3);
    let ms: Vec<MassFunction> = (0..5).map(|_| random_mass(&mut rng, &f)).collect();
    let got = combine_average(&ms).unwrap();
    let want = oracle_average(&ms.iter().map(as_map).collect::<Vec<_>>());
    for (s, v) in want {
        assert!((got.mass(to_subset(&s)) - v).abs() < TOL);
    }
}
