mod common;

use common::bernoulli_product;
use proptest::prelude::*;
use statpriv::amplify::{eps_shrink, normal_approx_delta, poisson_bound, wor_bound, wr_bound};
use statpriv::divergence::sp_curve;
use statpriv::iid::phi_at;
use statpriv::oracle::oracle_divergence;
use statpriv::{DatabaseModel, Error, Pmf, Query, Technique, TemplateDistribution};

const GRID: [f64; 4] = [0.0, 0.25, 0.5, 1.0];

fn worst_direct(db: &DatabaseModel, tech: Technique, eps: f64) -> f64 {
    let td = TemplateDistribution::new(tech).unwrap();
    let q = Query::sum();
    let mut best: f64 = 0.0;
    for j in 0..db.len() {
        for (v, w) in [(0.0, 1.0), (1.0, 0.0)] {
            let d =
                oracle_divergence(&db.condition(j, v).unwrap(), &db.condition(j, w).unwrap(), &td, &q, eps).unwrap();
            best = best.max(d);
        }
    }
    best
}

fn sizes() -> impl Strategy<Value = (DatabaseModel, usize)> {
    bernoulli_product(1..=4).prop_flat_map(|db| {
        let n = db.len();
        (Just(db), 1..=n)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn wor_bound_dominates((db, m) in sizes()) {
        let n = db.len();
        let b = wor_bound(&db, &Query::sum(), n, m, &GRID).unwrap();
        for (_, p) in b.iter() {
            let direct = worst_direct(&db, Technique::WithoutReplacement { n, m }, p.eps_prime);
            prop_assert!(direct <= p.delta_prime + 1e-10, "{direct} > {}", p.delta_prime);
        }
    }

    #[test]
    fn poisson_bound_dominates(db in bernoulli_product(1..=4), rate in prop::sample::select(vec![0.25, 0.5, 0.75])) {
        let n = db.len();
        let b = poisson_bound(&db, &Query::sum(), n, rate, &GRID).unwrap();
        for (eps, delta) in b.iter() {
            let direct = worst_direct(&db, Technique::Poisson { n, rate }, eps);
            prop_assert!(direct <= delta + 1e-10, "{direct} > {delta}");
        }
    }

    #[test]
    fn wr_bound_dominates_or_refuses(db in bernoulli_product(1..=3), m in 1usize..=4) {
        let n = db.len();
        match wr_bound(&db, &Query::sum(), n, m, &GRID) {
            Ok(b) => {
                for (_, p) in b.iter() {
                    let direct = worst_direct(&db, Technique::WithReplacement { n, m }, p.eps_prime);
                    prop_assert!(direct <= p.delta_prime + 1e-10, "{direct} > {}", p.delta_prime);
                }
            }
            Err(Error::NotSamplable { .. }) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn full_sample_reproduces_the_curve(db in bernoulli_product(1..=5)) {
        let n = db.len();
        let q = Query::sum();
        let b = wor_bound(&db, &q, n, n, &GRID).unwrap();
        let phi = sp_curve(&db, &q, &GRID).unwrap();
        for ((e, p), d) in b.iter().zip(phi.values()) {
            prop_assert_eq!(p.eps_prime, e);
            prop_assert!((p.delta_prime - d).abs() <= 1e-12);
        }
    }

    #[test]
    fn poisson_grows_with_rate_at_zero(db in bernoulli_product(1..=4), a in 0.05f64..1.0, b in 0.05f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let n = db.len();
        let q = Query::sum();
        let at = |r: f64| poisson_bound(&db, &q, n, r, &[0.0]).unwrap().values()[0];
        prop_assert!(at(lo) <= at(hi) + 1e-12);
    }

    #[test]
    fn eps_shrink_matches_log1p(eps in 0.0f64..5.0, rate in 0.001f64..=1.0) {
        let direct = (rate * (eps.exp() - 1.0)).ln_1p();
        let got = eps_shrink(eps, rate).unwrap();
        prop_assert!((got - direct).abs() <= 1e-12 * (1.0 + direct));
        prop_assert!(got <= eps + 1e-15);
    }
}

// The closed-form normal approximation overshoots the exact tail at large n
// by orders of magnitude, so only the upper-bound direction is asserted.
#[test]
fn normal_approximation_is_an_upper_estimate() {
    let entry = Pmf::bernoulli(0.5).unwrap();
    for n in [500, 750, 1000] {
        for eps in [0.5, 0.75, 1.0] {
            let exact = phi_at(&entry, &Query::count(), n, eps).unwrap();
            let approx = normal_approx_delta(n, 0.5, eps).unwrap();
            assert!(exact <= approx, "n={n} eps={eps}: {exact} > {approx}");
        }
    }
}
