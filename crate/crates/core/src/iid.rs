//! Privacy curves for i.i.d. product models.
//!
//! For sum, count and mean queries the answer on a database with entry `j`
//! fixed to `v` is `v` shifted onto the (n−1)-fold self-convolution of the
//! entry distribution, so Φ is computable in polynomial time at sizes where
//! enumerating W^n is hopeless. Custom queries fall back to enumeration.

use crate::dist::{DatabaseModel, Pmf, Query, QueryKind};
use crate::divergence::{self, worst_pair, PrivacyCurve};
use crate::error::{Error, Result};
use crate::par;

/// Answer distributions of `q` on `size` i.i.d. copies of `entry`, one per
/// value `v` of the support, with the first entry fixed to `v`.
pub fn conditioned_answers(entry: &Pmf, q: &Query, size: usize) -> Result<Vec<Pmf>> {
    if size == 0 {
        return Err(Error::InvalidSize("database size must be at least 1".into()));
    }
    let support = entry.outcomes();
    match q.kind() {
        QueryKind::Sum | QueryKind::Mean => {
            let rest = entry.convolve_power(size - 1)?;
            let scale = if q.kind() == QueryKind::Mean { size as f64 } else { 1.0 };
            support.iter().map(|&v| rest.map(|x| (v + x) / scale)).collect()
        }
        QueryKind::Count => {
            let indicator = entry.map(|x| if x > 0.0 { 1.0 } else { 0.0 })?;
            let rest = indicator.convolve_power(size - 1)?;
            support
                .iter()
                .map(|&v| {
                    let hit = if v > 0.0 { 1.0 } else { 0.0 };
                    rest.map(|x| x + hit)
                })
                .collect()
        }
        QueryKind::Custom => {
            let db = DatabaseModel::iid(entry.clone(), size)?;
            support
                .iter()
                .map(|&v| crate::dist::pushforward(&db.condition(0, v)?, q))
                .collect()
        }
    }
}

/// Φ for `size` i.i.d. copies of `entry`.
pub fn phi_curve(entry: &Pmf, q: &Query, size: usize, grid: &[f64]) -> Result<PrivacyCurve> {
    divergence::validate_grid(grid)?;
    let answers = conditioned_answers(entry, q, size)?;
    PrivacyCurve::new(grid.to_vec(), worst_pair(&answers, grid))
}

/// Φ at a single ε.
pub fn phi_at(entry: &Pmf, q: &Query, size: usize, eps: f64) -> Result<f64> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::NegativeEpsilon(eps));
    }
    let answers = conditioned_answers(entry, q, size)?;
    Ok(worst_pair(&answers, &[eps])[0])
}

/// Φ for several database sizes, computed in parallel.
pub fn phi_curves(entry: &Pmf, q: &Query, sizes: &[usize], grid: &[f64]) -> Result<Vec<PrivacyCurve>> {
    par::try_map(sizes, |&n| phi_curve(entry, q, n, grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::sp_curve;

    #[test]
    fn fast_path_matches_enumeration() {
        let grid = [0.0, 0.3, 1.0, 2.0];
        let entries = [
            Pmf::bernoulli(0.3).unwrap(),
            Pmf::from_pairs([(0.0, 0.2), (1.0, 0.5), (3.0, 0.3)]).unwrap(),
        ];
        for entry in &entries {
            for q in [Query::sum(), Query::count(), Query::mean()] {
                for n in 1..=5 {
                    let db = DatabaseModel::iid(entry.clone(), n).unwrap();
                    let slow = sp_curve(&db, &q, &grid).unwrap();
                    let fast = phi_curve(entry, &q, n, &grid).unwrap();
                    for (a, b) in slow.values().iter().zip(fast.values()) {
                        assert!((a - b).abs() < 1e-12, "{} n={n}: {a} vs {b}", q.name());
                    }
                }
            }
        }
    }

    #[test]
    fn custom_query_enumerates() {
        let q = Query::custom("max", |s| s.iter().cloned().fold(0.0, f64::max), true, true, 0.0);
        let entry = Pmf::bernoulli(0.5).unwrap();
        let c = phi_curve(&entry, &q, 2, &[0.0]).unwrap();
        // max is 1 for v=1, Bern(0.5) for v=0
        assert!((c.values()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn large_sizes_are_cheap() {
        let entry = Pmf::bernoulli(0.5).unwrap();
        let c = phi_curves(&entry, &Query::count(), &[500, 1000], &[0.1]).unwrap();
        assert!(c[0].values()[0] > c[1].values()[0]);
        assert!(c[1].values()[0] > 0.0);
    }

    #[test]
    fn rejects_empty_database() {
        assert!(phi_at(&Pmf::bernoulli(0.5).unwrap(), &Query::sum(), 0, 0.0).is_err());
    }
}
