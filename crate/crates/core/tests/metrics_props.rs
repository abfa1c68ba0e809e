//! Information-power properties and an independent summation oracle.

use infopower_core::metrics::{
    empirical_weights, information_power, information_power_user, uniform_weights, WeightVector,
};
use proptest::prelude::*;

/// Straight per-feature fractions summed in reverse order, then scaled.
fn ip_user_oracle(a_m: f64, w: &[f64], learned: &[u32], totals: &[u32]) -> f64 {
    let terms: Vec<f64> = (0..w.len()).map(|j| w[j] * learned[j] as f64 / totals[j] as f64).collect();
    a_m * terms.iter().rev().sum::<f64>()
}

/// Two-pass mean: naive mean plus the mean residual.
fn mean_oracle(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    m + xs.iter().map(|x| x - m).sum::<f64>() / n
}

fn inputs() -> impl Strategy<Value = (f64, Vec<u64>, Vec<u32>, Vec<u32>)> {
    (1usize..12).prop_flat_map(|k| {
        (
            0.0f64..=1.0,
            prop::collection::vec(0u64..50, k),
            prop::collection::vec(1u32..6, k),
        )
            .prop_flat_map(|(a, counts, totals)| {
                let learned = totals.iter().map(|&t| 0..=t).collect::<Vec<_>>();
                (Just(a), Just(counts), learned, Just(totals))
            })
    })
}

fn weights_for(counts: &[u64]) -> WeightVector {
    empirical_weights(counts).unwrap_or_else(|_| uniform_weights(counts.len()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn per_user_matches_oracle_and_bounds((a, counts, learned, totals) in inputs()) {
        let w = weights_for(&counts);
        let ip = information_power_user(a, &w, &learned, &totals).unwrap();
        prop_assert!((ip - ip_user_oracle(a, w.as_slice(), &learned, &totals)).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&ip));
    }

    #[test]
    fn more_learning_never_lowers_ip((a, counts, learned, totals) in inputs(), j in any::<prop::sample::Index>()) {
        let w = weights_for(&counts);
        let j = j.index(learned.len());
        let before = information_power_user(a, &w, &learned, &totals).unwrap();
        let mut more = learned.clone();
        more[j] = (more[j] + 1).min(totals[j]);
        let after = information_power_user(a, &w, &more, &totals).unwrap();
        prop_assert!(after >= before);
    }

    #[test]
    fn ip_scales_linearly_with_accuracy((a, counts, learned, totals) in inputs(), s in 0.0f64..=1.0) {
        let w = weights_for(&counts);
        let full = information_power_user(a, &w, &learned, &totals).unwrap();
        let scaled = information_power_user(a * s, &w, &learned, &totals).unwrap();
        prop_assert!((scaled - s * full).abs() <= 1e-12);
    }

    #[test]
    fn weights_sum_to_one(counts in prop::collection::vec(0u64..1000, 1..64)) {
        match empirical_weights(&counts) {
            Ok(w) => {
                prop_assert!((w.sum() - 1.0).abs() <= 1e-9);
                for (g, c) in w.as_slice().iter().zip(&counts) {
                    prop_assert_eq!(*g == 0.0, *c == 0);
                }
            }
            Err(_) => prop_assert!(counts.iter().all(|&c| c == 0)),
        }
    }

    #[test]
    fn aggregate_matches_two_pass_mean(xs in prop::collection::vec(0.0f64..=1.0, 1..200)) {
        let ip = information_power(&xs).unwrap();
        prop_assert!((ip - mean_oracle(&xs)).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&ip));
    }
}

#[test]
fn uniform_weights_sum_to_one_up_to_ten_thousand() {
    for k in (1..=10_000).step_by(97).chain([10_000]) {
        let w = uniform_weights(k).unwrap();
        assert!((w.sum() - 1.0).abs() <= 1e-12, "k = {k}");
    }
}
