//! Brute-force ground truth.
//!
//! `oracle_divergence` enumerates the joint space of (template, full
//! database realization) and aggregates answers itself; it shares no
//! aggregation code with the sampling pipeline. `oracle_tradeoff` searches
//! every deterministic rejection set. Both are single-threaded.

use std::collections::BTreeMap;

use crate::dist::{DatabaseModel, Pmf, Query, DEFAULT_BUDGET};
use crate::error::{Error, Result};
use crate::sampling::TemplateDistribution;

/// Largest union support accepted by [`oracle_tradeoff`].
pub const TRADEOFF_SUPPORT_LIMIT: usize = 12;

/// Compensated accumulator.
#[derive(Clone, Copy, Default, Debug)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Answers keyed by their 12-significant-digit decimal rendering.
fn answer_key(a: f64) -> String {
    let a = if a == 0.0 { 0.0 } else { a };
    format!("{a:.11e}")
}

fn joint_answer_masses(
    db: &DatabaseModel,
    td: &TemplateDistribution,
    q: &Query,
    budget: u64,
) -> Result<BTreeMap<String, Kahan>> {
    let n = db.len();
    let per_entry: Vec<Vec<(f64, f64)>> = (0..n)
        .map(|i| match db.fixed(i) {
            Some(v) => vec![(v, 1.0)],
            None => db.entry(i).iter().filter(|(_, w)| *w > 0.0).collect(),
        })
        .collect();
    let realizations = per_entry
        .iter()
        .try_fold(1u128, |acc, s| acc.checked_mul(s.len() as u128))
        .unwrap_or(u128::MAX);
    let states = realizations.saturating_mul(td.len() as u128);
    if states > budget as u128 {
        return Err(Error::BudgetExceeded { states, budget });
    }

    let mut masses: BTreeMap<String, Kahan> = BTreeMap::new();
    let mut sample = Vec::new();
    for (t, pt) in td.support() {
        let mut idx = vec![0usize; n];
        'realizations: loop {
            let mut w = *pt;
            for (i, s) in idx.iter().zip(&per_entry) {
                w *= s[*i].1;
            }
            sample.clear();
            sample.extend(t.indices().iter().map(|&pos| per_entry[pos][idx[pos]].0));
            masses.entry(answer_key(q.evaluate(&sample))).or_default().add(w);

            for d in 0..n {
                idx[d] += 1;
                if idx[d] < per_entry[d].len() {
                    continue 'realizations;
                }
                idx[d] = 0;
            }
            break;
        }
    }
    Ok(masses)
}

/// Hockey-stick divergence at `eps` between the sampled answer
/// distributions of `db_v` and `db_w`, by joint enumeration with the
/// default budget.
pub fn oracle_divergence(
    db_v: &DatabaseModel,
    db_w: &DatabaseModel,
    td: &TemplateDistribution,
    q: &Query,
    eps: f64,
) -> Result<f64> {
    oracle_divergence_with_budget(db_v, db_w, td, q, eps, DEFAULT_BUDGET)
}

pub fn oracle_divergence_with_budget(
    db_v: &DatabaseModel,
    db_w: &DatabaseModel,
    td: &TemplateDistribution,
    q: &Query,
    eps: f64,
    budget: u64,
) -> Result<f64> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::NegativeEpsilon(eps));
    }
    for db in [db_v, db_w] {
        if db.len() != td.n() {
            return Err(Error::InvalidSize(format!(
                "technique is for n={} but the database has {} entries",
                td.n(),
                db.len()
            )));
        }
    }
    let mu = joint_answer_masses(db_v, td, q, budget)?;
    let nu = joint_answer_masses(db_w, td, q, budget)?;
    let scale = eps.exp();
    let mut total = Kahan::default();
    for (k, m) in &mu {
        let other = nu.get(k).map(|x| x.sum).unwrap_or(0.0);
        let d = m.sum - scale * other;
        if d > 0.0 {
            total.add(d);
        }
    }
    Ok(total.sum.clamp(0.0, 1.0))
}

/// T(α) = inf { mu(S) : nu(Sᶜ) ≤ α } over randomized tests, found by
/// enumerating every deterministic set S and interpolating between pairs of
/// Pareto-optimal sets.
pub fn oracle_tradeoff(mu: &Pmf, nu: &Pmf, alpha: f64) -> Result<f64> {
    let mut union: Vec<f64> = mu.outcomes().iter().chain(nu.outcomes()).copied().collect();
    union.sort_by(f64::total_cmp);
    union.dedup();
    if union.len() > TRADEOFF_SUPPORT_LIMIT {
        return Err(Error::SupportTooLarge {
            size: union.len(),
            limit: TRADEOFF_SUPPORT_LIMIT,
        });
    }
    let p: Vec<f64> = union.iter().map(|&a| mu.prob(a)).collect();
    let q: Vec<f64> = union.iter().map(|&a| nu.prob(a)).collect();
    let k = union.len();

    // (type-I error nu(Sᶜ), type-II error mu(S)) for every S
    let mut points: Vec<(f64, f64)> = (0u32..1 << k)
        .map(|s| {
            let (mut x, mut y) = (Kahan::default(), Kahan::default());
            for i in 0..k {
                if s & (1 << i) != 0 {
                    y.add(p[i]);
                } else {
                    x.add(q[i]);
                }
            }
            (x.sum, y.sum)
        })
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut front: Vec<(f64, f64)> = Vec::new();
    for pt in points {
        if front.last().is_none_or(|l| pt.1 < l.1) {
            front.push(pt);
        }
    }

    let alpha = alpha.clamp(0.0, 1.0);
    let mut best = f64::INFINITY;
    for (i, a) in front.iter().enumerate() {
        if a.0 <= alpha {
            best = best.min(a.1);
        }
        for b in &front[i + 1..] {
            if a.0 <= alpha && alpha <= b.0 && b.0 > a.0 {
                let t = (alpha - a.0) / (b.0 - a.0);
                best = best.min(a.1 + t * (b.1 - a.1));
            }
        }
    }
    Ok(best.max(0.0))
}
