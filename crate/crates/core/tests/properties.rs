mod common;

use common::{covered, joint_from_weights, mechanism_from_weights};
use proptest::prelude::*;
use putlab::bounds::{c_f, certify_lipschitz, m_bar, Over};
use putlab::leakage::{
    arimoto_mi, evaluate, f_information, leakage, max_alpha_leakage, measure_joint, pc_posterior, pc_prior, sibson_mi,
    FGenerator, MeasureSpec, Order, Side,
};
use putlab::mechanisms::{
    brute_force_h, constant_channel, epsilon_min, uniform_leakage_constant, LatticeFrontier, VERIFICATION_TOLERANCE,
};
use putlab::preprocess::pi_gamma;
use putlab::prob::{
    empirical, l1_distance, push_forward, sample, sample_ball, Alphabet, BallConstraint, JointDistribution, Mechanism,
    SampleSet, TOL_MASS,
};

fn weights(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.0f64..1.0], k)
}

/// Joint law on `2..=3 x 2..=3` symbols with every marginal at least `floor`.
fn joint(floor: f64) -> impl Strategy<Value = JointDistribution> {
    (2usize..=3, 2usize..=3).prop_flat_map(move |(s, x)| {
        (weights(s * x), 0.0f64..0.5).prop_map(move |(w, extra)| {
            let extra = if floor == 0.0 { 0.0 } else { extra };
            joint_from_weights(s, x, &w, floor, extra)
        })
    })
}

fn joint_and_mechanism(floor: f64) -> impl Strategy<Value = (JointDistribution, Mechanism)> {
    joint(floor).prop_flat_map(|q| {
        let x = q.x_alphabet().clone();
        (1usize..=3).prop_flat_map(move |n| {
            let q = q.clone();
            let x = x.clone();
            weights(x.len() * n).prop_map(move |w| (q.clone(), mechanism_from_weights(&x, n, &w)))
        })
    })
}

fn product(ps: &[f64], px: &[f64]) -> JointDistribution {
    let norm = |v: &[f64]| {
        let t: f64 = v.iter().sum::<f64>() + 1e-3 * v.len() as f64;
        v.iter().map(|a| (a + 1e-3) / t).collect::<Vec<_>>()
    };
    JointDistribution::product(&norm(ps), &norm(px)).unwrap()
}

proptest! {
    #[test]
    fn push_forward_is_a_law_with_the_same_s_marginal((q, w) in joint_and_mechanism(0.0)) {
        let pf = push_forward(&q, &w).unwrap();
        prop_assert!((pf.sy_joint.mass().sum() - 1.0).abs() <= TOL_MASS);
        prop_assert!((pf.xy_joint.mass().sum() - 1.0).abs() <= TOL_MASS);
        for (a, b) in pf.sy_joint.marginal_s().iter().zip(q.marginal_s()) {
            prop_assert!((a - b).abs() <= TOL_MASS);
        }
    }

    #[test]
    fn l1_is_a_metric(w in prop::collection::vec(0.0f64..1.0, 12), extra in 0.0f64..1.0) {
        let a = joint_from_weights(2, 2, &w[0..4], 0.0, 0.0);
        let b = joint_from_weights(2, 2, &w[4..8], 0.0, extra);
        let c = joint_from_weights(2, 2, &w[8..12], 0.0, 0.0);
        let (ab, ba) = (l1_distance(&a, &b).unwrap(), l1_distance(&b, &a).unwrap());
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(l1_distance(&a, &a).unwrap(), 0.0);
        prop_assert!(ab <= l1_distance(&a, &c).unwrap() + l1_distance(&c, &b).unwrap() + 1e-15);
    }

    #[test]
    fn empirical_ignores_sample_order(q in joint(0.0), seed in any::<u64>(), rot in 0usize..100) {
        let samples = sample(&q, 100, seed);
        let mut pairs = samples.pairs().to_vec();
        pairs.rotate_left(rot);
        pairs.reverse();
        let shuffled = SampleSet::new(samples.s_alphabet().clone(), samples.x_alphabet().clone(), pairs).unwrap();
        prop_assert_eq!(empirical(&samples).unwrap(), empirical(&shuffled).unwrap());
    }

    #[test]
    fn infinite_arimoto_is_log_guessing_gain(q in joint(0.0)) {
        let expected = (pc_posterior(&q).value / pc_prior(&q.marginal_s()).value).ln();
        prop_assert!((arimoto_mi(&q, Order::Infinite).value - expected).abs() <= 1e-12);
    }

    #[test]
    fn large_orders_approach_the_infinite_order(q in joint(0.0)) {
        let big = Order::new(1e4).unwrap();
        prop_assert!((arimoto_mi(&q, big).value - arimoto_mi(&q, Order::Infinite).value).abs() <= 1e-3);
        prop_assert!((sibson_mi(&q, big).value - sibson_mi(&q, Order::Infinite).value).abs() <= 1e-3);
    }

    #[test]
    fn infinite_max_leakage_is_infinite_sibson((q, w) in joint_and_mechanism(0.0)) {
        let sy = push_forward(&q, &w).unwrap().sy_joint;
        let direct = sibson_mi(&sy, Order::Infinite).value;
        prop_assert!((max_alpha_leakage(&q, &w, Order::Infinite).unwrap().value - direct).abs() <= 1e-9);
    }

    #[test]
    fn measures_are_nonnegative(q in joint(0.0)) {
        for spec in ["f:tv", "f:chi2", "f:hellinger(1.5)", "arimoto(2)", "arimoto(inf)", "sibson(1.5)", "sibson(3)", "sibson(inf)", "shannon"] {
            let spec: MeasureSpec = spec.parse().unwrap();
            prop_assert!(measure_joint(&spec, &q).unwrap().value >= -1e-12, "{}", spec);
        }
    }

    #[test]
    fn independent_laws_have_no_leakage(ps in prop::collection::vec(0.0f64..1.0, 3), px in prop::collection::vec(0.0f64..1.0, 2)) {
        let q = product(&ps, &px);
        for spec in ["f:tv", "f:chi2", "f:hellinger(2)", "arimoto(2)", "arimoto(inf)", "sibson(2)", "sibson(inf)", "shannon"] {
            let spec: MeasureSpec = spec.parse().unwrap();
            prop_assert!(measure_joint(&spec, &q).unwrap().value.abs() <= 1e-12, "{}", spec);
        }
        prop_assert!((pc_posterior(&q).value - pc_prior(&q.marginal_s()).value).abs() <= 1e-12);
        let w = Mechanism::identity(q.x_alphabet());
        for spec in ["maxal(2)", "maxal(inf)"] {
            let spec: MeasureSpec = spec.parse().unwrap();
            prop_assert!(leakage(&spec, &q, &w).unwrap().value.abs() <= 1e-9, "{}", spec);
        }
    }

    #[test]
    fn merged_chain_keeps_f_information(q in joint(0.0), gamma in 0.0f64..0.6, w in weights(8)) {
        let (merged, map) = pi_gamma(&q, gamma).unwrap();
        let w0 = mechanism_from_weights(merged.x_alphabet(), 2, &w[..merged.x_size() * 2]);
        let lifted = map.lift(q.x_alphabet(), &w0).unwrap();
        let xy = push_forward(&q, &lifted).unwrap().xy_joint;
        let x0y = push_forward(&merged, &w0).unwrap().xy_joint;
        for g in [FGenerator::TotalVariation, FGenerator::ChiSquare, FGenerator::hellinger(2.0).unwrap()] {
            prop_assert!((f_information(&xy, &g).value - f_information(&x0y, &g).value).abs() <= 1e-12);
        }
    }

    #[test]
    fn merging_conserves_mass(q in joint(0.0), gamma in 0.0f64..=1.0) {
        let (merged, map) = pi_gamma(&q, gamma).unwrap();
        prop_assert!((merged.mass().sum() - 1.0).abs() <= TOL_MASS);
        for (a, b) in merged.marginal_s().iter().zip(q.marginal_s()) {
            prop_assert!((a - b).abs() <= TOL_MASS);
        }
        let mx = merged.marginal_x();
        prop_assert!(mx[..map.kept.len()].iter().all(|&m| m >= gamma));
    }

    #[test]
    fn merging_raises_the_x_margin(q in joint(0.0), gamma in 0.0f64..0.6, n in 100usize..100_000) {
        let raw_min = q.marginal_x().into_iter().fold(f64::INFINITY, f64::min);
        prop_assume!(gamma > raw_min);
        let (merged, _) = pi_gamma(&q, gamma).unwrap();
        prop_assert!(m_bar(&merged, n, 0.1, Over::X).unwrap() >= m_bar(&q, n, 0.1, Over::X).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lipschitz_bounds_hold(q1 in joint(0.05), w2 in weights(9), t in 0.0f64..1.0, wm in weights(9), n in 1usize..=3) {
        let q2 = joint_from_weights(q1.s_size(), q1.x_size(), &w2[..q1.s_size() * q1.x_size()], 0.05, 0.0);
        let mix = q1.mass() * (1.0 - t) + q2.mass() * t;
        let q2 = JointDistribution::normalized(q1.s_alphabet().clone(), q1.x_alphabet().clone(), mix).unwrap();
        let w = mechanism_from_weights(q1.x_alphabet(), n, &wm[..q1.x_size() * n]);
        for (spec, side) in covered() {
            let check = certify_lipschitz(&spec, side, &q1, &q2, &w).unwrap();
            prop_assert!(check.ok, "{} {}: {:?}", spec, side, check);
        }
    }

    #[test]
    fn constant_channel_realizes_minimum_leakage(q in joint(0.0)) {
        let w = constant_channel(q.x_alphabet());
        for (spec, _) in covered().into_iter().step_by(2) {
            let l = leakage(&spec, &q, &w).unwrap().value;
            prop_assert!((l - epsilon_min(&spec, &q)).abs() <= 1e-12, "{}", spec);
        }
    }

    #[test]
    fn shrunk_budget_holds_on_the_ball(q in joint(0.05), wm in weights(9), r in 0.001f64..0.05, seed in any::<u64>()) {
        let w = mechanism_from_weights(q.x_alphabet(), 3, &wm[..q.x_size() * 3]);
        for spec in ["pc", "f:chi2", "arimoto(2)", "sibson(2)", "sibson(inf)"] {
            let spec: MeasureSpec = spec.parse().unwrap();
            let c_l = uniform_leakage_constant(&spec, &q, r).unwrap();
            let eps = leakage(&spec, &q, &w).unwrap().value + c_l * r;
            for member in sample_ball(&q, r, BallConstraint::Simplex, 100, seed).unwrap() {
                prop_assert!(evaluate(&spec, Side::Privacy, &member, &w).unwrap().value <= eps + VERIFICATION_TOLERANCE, "{}", spec);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn lattice_h_is_monotone(w in weights(4)) {
        let q = joint_from_weights(2, 2, &w, 0.05, 0.0);
        let chi: MeasureSpec = "f:chi2".parse().unwrap();
        let frontier = LatticeFrontier::build(&chi, &chi, &q, 2, 0.05).unwrap();
        let mut last = f64::NEG_INFINITY;
        for k in 0..=20 {
            let h = frontier.h(0.01 * k as f64).unwrap();
            prop_assert!(h >= last);
            last = h;
        }
        let pc = brute_force_h(&MeasureSpec::Pc, &MeasureSpec::Pc, &q, 0.99, 2, 0.1).unwrap().value;
        let pc_lo = brute_force_h(&MeasureSpec::Pc, &MeasureSpec::Pc, &q, epsilon_min(&MeasureSpec::Pc, &q), 2, 0.1).unwrap().value;
        prop_assert!(pc >= pc_lo);
    }
}

#[test]
fn c_f_is_nonincreasing() {
    for g in [FGenerator::TotalVariation, FGenerator::ChiSquare, FGenerator::hellinger(1.5).unwrap(), FGenerator::hellinger(3.0).unwrap()] {
        let mut last = f64::INFINITY;
        for k in 1..=200 {
            let c = c_f(&g, k as f64 / 200.0).unwrap();
            assert!(c <= last + 1e-12 * last.abs().min(1e12), "{g:?} at {k}");
            last = c;
        }
    }
}

#[test]
fn single_symbol_alphabets_are_handled() {
    let q = JointDistribution::new(Alphabet::indexed(1).unwrap(), Alphabet::indexed(2).unwrap(), ndarray::array![[0.3, 0.7]]).unwrap();
    let w = Mechanism::identity(q.x_alphabet());
    assert_eq!(leakage(&MeasureSpec::Pc, &q, &w).unwrap().value, 1.0);
    assert!(leakage(&"maxal(2)".parse().unwrap(), &q, &w).unwrap().value.abs() < 1e-12);
}
