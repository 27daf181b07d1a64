//! Privacy loss, hockey-stick divergence and statistical privacy curves.

use std::fmt::Write as _;

use crate::dist::{DatabaseModel, Pmf, Query};
use crate::error::{Error, Result};
use crate::par;

/// Slack allowed on curve values before they are clamped into [0, 1].
pub const CURVE_TOLERANCE: f64 = 1e-12;

/// ε ↦ δ evaluated on an increasing grid of ε ≥ 0.
#[derive(Clone, Debug, PartialEq)]
pub struct PrivacyCurve {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl PrivacyCurve {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_grid(&grid)?;
        if grid.len() != values.len() {
            return Err(Error::InvalidCurve(format!(
                "{} grid points but {} values",
                grid.len(),
                values.len()
            )));
        }
        for (e, d) in grid.iter().zip(&values) {
            if !(-CURVE_TOLERANCE..=1.0 + CURVE_TOLERANCE).contains(d) {
                return Err(Error::InvalidCurve(format!("delta {d} at epsilon {e}")));
            }
        }
        if let Some(i) = values.windows(2).position(|w| w[1] > w[0] + CURVE_TOLERANCE) {
            return Err(Error::InvalidCurve(format!(
                "delta increases between epsilon {} and {}",
                grid[i],
                grid[i + 1]
            )));
        }
        let values = values.into_iter().map(|d| d.clamp(0.0, 1.0)).collect();
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.iter().copied().zip(self.values.iter().copied())
    }

    /// δ at a grid point, if `eps` is one.
    pub fn at(&self, eps: f64) -> Option<f64> {
        self.grid.iter().position(|e| *e == eps).map(|i| self.values[i])
    }

    /// Linear interpolation between grid points.
    ///
    /// Off the grid, `extrapolate` decides: if false the call fails; if true
    /// the curve is continued conservatively (δ = 1 below the first point,
    /// the last value beyond the final point, which is valid for any
    /// nonincreasing curve).
    pub fn interpolate(&self, eps: f64, extrapolate: bool) -> Result<f64> {
        let first = self.grid[0];
        let last = *self.grid.last().expect("grid is nonempty");
        if eps < first {
            return if extrapolate {
                Ok(1.0)
            } else {
                Err(Error::CurveDomain(eps))
            };
        }
        if eps > last {
            return if extrapolate {
                Ok(*self.values.last().expect("nonempty"))
            } else {
                Err(Error::CurveDomain(eps))
            };
        }
        let i = self.grid.partition_point(|e| *e <= eps);
        if i == 0 {
            return Ok(self.values[0]);
        }
        let lo = i - 1;
        if lo + 1 == self.grid.len() || self.grid[lo] == eps {
            return Ok(self.values[lo]);
        }
        let (e0, e1) = (self.grid[lo], self.grid[lo + 1]);
        let (d0, d1) = (self.values[lo], self.values[lo + 1]);
        let t = (eps - e0) / (e1 - e0);
        Ok((d0 + t * (d1 - d0)).clamp(d1.min(d0), d0.max(d1)))
    }

    /// `epsilon,delta` CSV with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,delta\n");
        for (e, d) in self.iter() {
            let _ = writeln!(out, "{},{}", crate::fmt_num(e), crate::fmt_num(d));
        }
        out
    }
}

pub(crate) fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidCurve("empty epsilon grid".into()));
    }
    if let Some(e) = grid.iter().find(|e| !(**e >= 0.0) || !e.is_finite()) {
        return Err(Error::NegativeEpsilon(*e));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidCurve("epsilon grid must be strictly increasing".into()));
    }
    Ok(())
}

/// `start, start + step, …` up to `end` inclusive (with a small slack so
/// that `end` survives accumulated rounding).
pub fn grid_range(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !start.is_finite() || !end.is_finite() || end < start {
        return Err(Error::InvalidCurve(format!("bad grid range {start}:{end}:{step}")));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..=count)
        .map(|i| crate::dist::canonical(start + i as f64 * step))
        .collect();
    validate_grid(&grid)?;
    Ok(grid)
}

/// 0 to 3 in steps of 0.05.
pub fn default_grid() -> Vec<f64> {
    grid_range(0.0, 3.0, 0.05).expect("static grid is valid")
}

/// ln(mu(a) / nu(a)) with ln 0/0 = 0, ln x/0 = +∞ and ln 0/x = −∞.
pub fn plrv(mu: &Pmf, nu: &Pmf, a: f64) -> Result<f64> {
    if !mu.contains(a) && !nu.contains(a) {
        return Err(Error::AnswerOutsideSupport(a));
    }
    let (p, q) = (mu.prob(a), nu.prob(a));
    Ok(match (p > 0.0, q > 0.0) {
        (false, false) => 0.0,
        (true, false) => f64::INFINITY,
        (false, true) => f64::NEG_INFINITY,
        (true, true) => (p / q).ln(),
    })
}

/// Σ_a max(0, mu(a) − e^ε·nu(a)) over the union of supports.
pub fn hockey_stick(mu: &Pmf, nu: &Pmf, eps: f64) -> Result<f64> {
    if !(eps >= 0.0) {
        return Err(Error::NegativeEpsilon(eps));
    }
    Ok(hockey_stick_scaled(mu, nu, eps.exp()))
}

/// Hockey-stick divergence with the factor e^ε supplied directly.
pub(crate) fn hockey_stick_scaled(mu: &Pmf, nu: &Pmf, scale: f64) -> f64 {
    let (xs, ps) = (mu.outcomes(), mu.weights());
    let (ys, qs) = (nu.outcomes(), nu.weights());
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    while i < xs.len() {
        while j < ys.len() && ys[j] < xs[i] {
            j += 1;
        }
        let q = if j < ys.len() && ys[j] == xs[i] { qs[j] } else { 0.0 };
        let d = ps[i] - scale * q;
        if d > 0.0 {
            total += d;
        }
        i += 1;
    }
    total.clamp(0.0, 1.0)
}

/// Total variation distance, 0.5·Σ|mu − nu|.
pub fn total_variation(mu: &Pmf, nu: &Pmf) -> f64 {
    let mut total = 0.0;
    for (a, w) in mu.iter() {
        total += (w - nu.prob(a)).abs();
    }
    for (a, w) in nu.iter() {
        if !mu.contains(a) {
            total += w;
        }
    }
    0.5 * total
}

/// For each ε in `grid`, the largest divergence over ordered pairs drawn
/// from `pmfs`.
pub(crate) fn worst_pair(pmfs: &[Pmf], grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|e| {
            let scale = e.exp();
            let mut best: f64 = 0.0;
            for (a, mu) in pmfs.iter().enumerate() {
                for (b, nu) in pmfs.iter().enumerate() {
                    if a != b {
                        best = best.max(hockey_stick_scaled(mu, nu, scale));
                    }
                }
            }
            best
        })
        .collect()
}

/// Positions whose conditioning has to be scanned: one suffices when the
/// entries are exchangeable under a symmetric query.
pub(crate) fn sensitive_positions(db: &DatabaseModel, q: &Query) -> Vec<usize> {
    if db.is_iid() && q.is_symmetric() {
        vec![0]
    } else {
        (0..db.len()).collect()
    }
}

/// Statistical privacy curve Φ(ε): the worst divergence between the answer
/// distributions of the database conditioned on one entry taking value v
/// versus w, over all positions and ordered value pairs.
pub fn sp_curve(db: &DatabaseModel, q: &Query, grid: &[f64]) -> Result<PrivacyCurve> {
    validate_grid(grid)?;
    if !db.is_pure() {
        return Err(Error::InvalidModel(
            "privacy curves are defined for unconditioned models".into(),
        ));
    }
    let positions = sensitive_positions(db, q);
    let per_position: Vec<Vec<f64>> = par::try_map(&positions, |&j| {
        let conditioned: Vec<Pmf> = db
            .support()
            .iter()
            .map(|&v| crate::dist::pushforward(&db.condition(j, v)?, q))
            .collect::<Result<_>>()?;
        Ok(worst_pair(&conditioned, grid))
    })?;
    let values = fold_max(per_position, grid.len());
    PrivacyCurve::new(grid.to_vec(), values)
}

pub(crate) fn fold_max(curves: Vec<Vec<f64>>, len: usize) -> Vec<f64> {
    curves.into_iter().fold(vec![0.0; len], |mut acc, c| {
        for (a, v) in acc.iter_mut().zip(c) {
            *a = a.max(v);
        }
        acc
    })
}

/// Where a half-line check failed.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfLineWitness {
    pub epsilon: f64,
    /// An outcome inside the positive set's span that breaks contiguity.
    pub outcome: f64,
    pub positive_set: Vec<f64>,
}

/// Result of [`half_line_check`]; `witness` is `None` when the check holds.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfLineCheck {
    pub witness: Option<HalfLineWitness>,
}

impl HalfLineCheck {
    pub fn holds(&self) -> bool {
        self.witness.is_none()
    }
}

impl From<HalfLineWitness> for Error {
    fn from(w: HalfLineWitness) -> Self {
        Error::NotSamplable {
            epsilon: w.epsilon,
            outcome: w.outcome,
            positive_set: w.positive_set,
        }
    }
}

const SIGN_TOLERANCE: f64 = 1e-14;

/// Checks, at every ε on the grid, that the optimal distinguishing set
/// {a : mu(a) > e^ε·nu(a)} can be taken as a prefix or suffix of the ordered
/// union support. Outcomes where the difference vanishes may go either way.
///
/// Only the supplied grid is certified, not the whole half-line ε ≥ 0.
pub fn half_line_check(mu: &Pmf, nu: &Pmf, grid: &[f64]) -> HalfLineCheck {
    let mut union: Vec<f64> = mu.outcomes().iter().chain(nu.outcomes()).copied().collect();
    union.sort_by(f64::total_cmp);
    union.dedup();
    let p: Vec<f64> = union.iter().map(|&a| mu.prob(a)).collect();
    let q: Vec<f64> = union.iter().map(|&a| nu.prob(a)).collect();

    for &eps in grid {
        let scale = eps.exp();
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for i in 0..union.len() {
            let d = p[i] - scale * q[i];
            if d > SIGN_TOLERANCE {
                pos.push(i);
            } else if d < -SIGN_TOLERANCE {
                neg.push(i);
            }
        }
        let (Some(&p_lo), Some(&p_hi), Some(&n_lo), Some(&n_hi)) = (pos.first(), pos.last(), neg.first(), neg.last())
        else {
            continue;
        };
        if p_hi < n_lo || n_hi < p_lo {
            continue;
        }
        let gap = neg
            .iter()
            .find(|&&i| i > p_lo && i < p_hi)
            .or_else(|| pos.iter().find(|&&i| i > n_lo && i < n_hi))
            .copied()
            .unwrap_or(n_lo);
        return HalfLineCheck {
            witness: Some(HalfLineWitness {
                epsilon: eps,
                outcome: union[gap],
                positive_set: pos.iter().map(|&i| union[i]).collect(),
            }),
        };
    }
    HalfLineCheck { witness: None }
}
