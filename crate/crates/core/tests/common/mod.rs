#![allow(dead_code)]

use proptest::prelude::*;
use statpriv::{DatabaseModel, Pmf};

/// Normalized pmf on outcomes 0..weights.len(); zero weights drop the outcome.
pub fn pmf_from_weights(weights: &[f64]) -> Pmf {
    let total: f64 = weights.iter().sum();
    Pmf::from_pairs(
        weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, w)| (i as f64, w / total)),
    )
    .unwrap()
}

/// Pmf on a random subset of 0..k.
pub fn pmf(k: usize) -> impl Strategy<Value = Pmf> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 3 => 0.01f64..1.0], k)
        .prop_filter("some mass", |w| w.iter().any(|x| *x > 0.0))
        .prop_map(|w| pmf_from_weights(&w))
}

/// Pmf with every outcome in 0..k present.
pub fn full_pmf(k: usize) -> impl Strategy<Value = Pmf> {
    prop::collection::vec(0.01f64..1.0, k).prop_map(|w| pmf_from_weights(&w))
}

pub fn bernoulli() -> impl Strategy<Value = Pmf> {
    (0.05f64..0.95).prop_map(|p| Pmf::bernoulli(p).unwrap())
}

/// Product of independent Bernoulli entries with their own parameters.
pub fn bernoulli_product(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = DatabaseModel> {
    prop::collection::vec(bernoulli(), n).prop_map(|e| DatabaseModel::new(e).unwrap())
}

/// Product of entries on {0, 1, 2} with full support.
pub fn ternary_product(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = DatabaseModel> {
    prop::collection::vec(full_pmf(3), n).prop_map(|e| DatabaseModel::new(e).unwrap())
}
