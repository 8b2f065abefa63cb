//! Property tests for the metric and loss invariants.

use dqpope_core::env::ReturnDistribution;
use dqpope_core::metrics::{pinball, w1_empirical};
use dqpope_core::ope::cateope_project;
use proptest::prelude::*;

fn samples(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..50.0f64, n)
}

proptest! {
    #[test]
    fn w1_is_symmetric_and_triangular(a in samples(12), b in samples(12), c in samples(12)) {
        let da = ReturnDistribution::from_samples(a).unwrap();
        let db = ReturnDistribution::from_samples(b).unwrap();
        let dc = ReturnDistribution::from_samples(c).unwrap();
        let ab = w1_empirical(&da, &db);
        let ba = w1_empirical(&db, &da);
        prop_assert_eq!(ab, ba);
        let ac = w1_empirical(&da, &dc);
        let cb = w1_empirical(&dc, &db);
        prop_assert!(ab <= ac + cb + 1e-12);
    }

    #[test]
    fn mean_difference_is_bounded_by_w1(a in samples(16), b in samples(16)) {
        let da = ReturnDistribution::from_samples(a).unwrap();
        let db = ReturnDistribution::from_samples(b).unwrap();
        let gap = (da.mean() - db.mean()).abs();
        prop_assert!(gap <= w1_empirical(&da, &db) + 1e-12);
    }

    #[test]
    fn w1_handles_unequal_sizes_symmetrically(a in samples(7), b in samples(13)) {
        let da = ReturnDistribution::from_samples(a).unwrap();
        let db = ReturnDistribution::from_samples(b).unwrap();
        let ab = w1_empirical(&da, &db);
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, w1_empirical(&db, &da));
        prop_assert!((da.mean() - db.mean()).abs() <= ab + 1e-12);
    }

    #[test]
    fn return_distribution_is_permutation_invariant(mut a in samples(10), swap in 0usize..9) {
        let before = ReturnDistribution::from_samples(a.clone()).unwrap();
        a.swap(swap, swap + 1);
        let after = ReturnDistribution::from_samples(a).unwrap();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn pinball_is_convex_in_the_prediction(
        y in -10.0..10.0f64,
        tau in 0.01..0.99f64,
        p1 in -10.0..10.0f64,
        delta in 0.01..10.0f64,
    ) {
        let p2 = p1 + delta;
        let mid = 0.5 * (p1 + p2);
        let chord = 0.5 * (pinball(y - p1, tau) + pinball(y - p2, tau));
        prop_assert!(pinball(y - mid, tau) <= chord + 1e-12);
    }

    #[test]
    fn categorical_projection_conserves_mass(
        reward in -30.0..30.0f64,
        gamma in 0.0..1.0f64,
        raw in prop::collection::vec(0.001..1.0f64, 2..40),
        v_min in -20.0..0.0f64,
        width in 0.5..40.0f64,
    ) {
        let count = raw.len();
        let v_max = v_min + width;
        let dz = width / (count - 1) as f64;
        let atoms: Vec<f64> = (0..count).map(|k| v_min + k as f64 * dz).collect();
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let mass = cateope_project(reward, gamma, &probs, &atoms, v_min, v_max);
        let sum: f64 = mass.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(mass.iter().all(|m| *m >= 0.0));
    }
}
