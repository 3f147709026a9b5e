use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use weakgibbs::measures::{additivity_defect, build_rpf, invariance_defect};
use weakgibbs::multifractal::legendre_bernoulli;
use weakgibbs::numeric::log_sum_exp;
use weakgibbs::{LocallyConstantPotential, MarkovMeasure, TransitionSystem};

fn systems() -> Vec<TransitionSystem> {
    vec![TransitionSystem::full_shift(2), TransitionSystem::full_shift(3), TransitionSystem::golden_mean()]
}

fn table_potential(ts: &TransitionSystem, depth: usize, vals: &[f64]) -> LocallyConstantPotential {
    let k = ts.k();
    LocallyConstantPotential::from_fn(ts, depth, |w| {
        let code = w.iter().fold(0, |acc, &s| acc * k + (s - 1));
        vals[code % vals.len()]
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rpf_oracles_are_additive_and_invariant(
        sys in 0usize..3,
        depth in 1usize..=2,
        vals in proptest::collection::vec(-2.0f64..2.0, 9),
    ) {
        let ts = &systems()[sys];
        let g = build_rpf(&table_potential(ts, depth, &vals)).unwrap();
        prop_assert!(additivity_defect(&g.measure, 8).0 <= 1e-12);
        prop_assert!(invariance_defect(&g.measure, 8).0 <= 1e-10);
    }

    #[test]
    fn markov_oracles_are_additive_and_invariant(a in 0.05f64..0.95, b in 0.05f64..0.95) {
        let ts = TransitionSystem::full_shift(2);
        let mu = MarkovMeasure::from_transition(&ts, vec![vec![a, 1.0 - a], vec![b, 1.0 - b]]).unwrap();
        prop_assert!(additivity_defect(&mu, 10).0 <= 1e-12);
        prop_assert!(invariance_defect(&mu, 10).0 <= 1e-10);
    }

    #[test]
    fn birkhoff_cocycle_is_exact_on_dyadic_values(
        sys in 0usize..3,
        depth in 1usize..=3,
        vals in proptest::collection::vec(-64i32..64, 27),
        n in 1usize..12,
        m in 1usize..12,
        seed in any::<u64>(),
    ) {
        // multiples of 1/64 add without rounding
        let ts = &systems()[sys];
        let dy: Vec<f64> = vals.iter().map(|&v| v as f64 / 64.0).collect();
        let phi = table_potential(ts, depth, &dy);
        let len = n + m + depth - 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = vec![rng.gen_range(1..=ts.k())];
        while w.len() < len {
            let succ = ts.successors(*w.last().unwrap());
            w.push(*succ.choose(&mut rng).unwrap());
        }
        let whole = phi.birkhoff_sum_word(&w, n + m);
        let split = phi.birkhoff_sum_word(&w, n) + phi.birkhoff_sum_word(&w[n..], m);
        prop_assert_eq!(whole.to_bits(), split.to_bits());
    }

    #[test]
    fn log_sum_exp_is_permutation_invariant(
        vals in proptest::collection::vec(-700.0f64..700.0, 1..400),
        seed in any::<u64>(),
    ) {
        let mut shuffled = vals.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = log_sum_exp(&vals);
        let b = log_sum_exp(&shuffled);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn legendre_curves_are_concave(p in 0.01f64..0.99, s1 in 1.1f64..12.0, s2 in 1.1f64..12.0) {
        prop_assume!(1.0 / s1 + 1.0 / s2 <= 1.0);
        let c = legendre_bernoulli(p, s1, s2, 200).unwrap();
        prop_assert!(c.is_concave(1e-9), "defect {}", c.concavity_defect());
        prop_assert!(c.within_unit_interval(1e-12));
    }
}
