mod common;

use common::{bernoulli_product, pmf};
use proptest::prelude::*;
use statpriv::divergence::{hockey_stick, total_variation};
use statpriv::{pushforward, Query};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn zero_epsilon_is_total_variation(mu in pmf(6), nu in pmf(6)) {
        let half_l1: f64 = (0..6)
            .map(|i| (mu.prob(i as f64) - nu.prob(i as f64)).abs())
            .sum::<f64>()
            / 2.0;
        let hs = hockey_stick(&mu, &nu, 0.0).unwrap();
        prop_assert!((hs - half_l1).abs() <= 1e-12);
        prop_assert!((total_variation(&mu, &nu) - half_l1).abs() <= 1e-12);
    }

    #[test]
    fn monotone_convex_and_bounded(
        mu in pmf(6),
        nu in pmf(6),
        e in prop::collection::vec(0.0f64..3.0, 3),
    ) {
        let mut e = e;
        e.sort_by(f64::total_cmp);
        prop_assume!(e[2] - e[0] > 1e-6);
        let d: Vec<f64> = e.iter().map(|&x| hockey_stick(&mu, &nu, x).unwrap()).collect();
        for (x, y) in e.iter().zip(&d) {
            prop_assert!(*y <= 1.0 && *y >= (1.0 - x.exp()).max(0.0) - 1e-15);
        }
        prop_assert!(d[1] <= d[0] + 1e-15 && d[2] <= d[1] + 1e-15);
        // convex in s = e^ε
        let s: Vec<f64> = e.iter().map(|x| x.exp()).collect();
        let t = (s[1] - s[0]) / (s[2] - s[0]);
        prop_assert!(d[1] <= (1.0 - t) * d[0] + t * d[2] + 1e-12);
    }

    #[test]
    fn conditioning_against_the_prior_is_dominated(
        db in bernoulli_product(1..=5),
        j in 0usize..5,
        v in 0u8..2,
        eps in prop::sample::select(vec![0.0, 0.25, 0.5, 1.0]),
    ) {
        let j = j % db.len();
        let q = Query::sum();
        let fixed = pushforward(&db.condition(j, f64::from(v)).unwrap(), &q).unwrap();
        let prior = pushforward(&db, &q).unwrap();
        let lhs = hockey_stick(&fixed, &prior, eps).unwrap();
        let rhs = db
            .support()
            .iter()
            .map(|&w| hockey_stick(&fixed, &pushforward(&db.condition(j, w).unwrap(), &q).unwrap(), eps).unwrap())
            .fold(0.0, f64::max);
        prop_assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
    }
}
