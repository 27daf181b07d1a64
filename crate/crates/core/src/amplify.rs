//! Amplification bounds for the three sampling techniques, the normal
//! approximation of Φ for counting queries, and the differential-privacy
//! side bounds for Poisson sampling.

use crate::dist::{DatabaseModel, Pmf, Query};
use crate::divergence::{self, half_line_check, validate_grid, PrivacyCurve};
use crate::error::{Error, Result};
use crate::fmt_num;
use crate::iid;
use crate::par;
use crate::sampling::{self, Selector, Technique, TemplateDistribution};

/// log(1 + rate·(e^eps − 1)).
pub fn eps_shrink(eps: f64, rate: f64) -> Result<f64> {
    check_eps(eps)?;
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::InvalidRate {
            value: rate,
            expected: "(0, 1]",
        });
    }
    if rate == 1.0 {
        return Ok(eps);
    }
    Ok((rate * eps.exp_m1()).ln_1p())
}

/// Inverse map log(1 + (e^eps − 1)/rate), the budget at which a size-m
/// sample must be evaluated.
fn eps_grow(eps: f64, rate: f64) -> f64 {
    if rate == 1.0 {
        eps
    } else {
        (eps.exp_m1() / rate).ln_1p()
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps >= 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::NegativeEpsilon(eps))
    }
}

fn check_sizes(n: usize, m: usize) -> Result<()> {
    if m == 0 || m > n {
        return Err(Error::InvalidSize(format!("need 1 <= m <= n, got n={n}, m={m}")));
    }
    Ok(())
}

fn check_db_size(db: &DatabaseModel, n: usize) -> Result<()> {
    if db.len() != n {
        return Err(Error::InvalidSize(format!(
            "bound is for n={n} but the database has {} entries",
            db.len()
        )));
    }
    Ok(())
}

fn check_poisson_rate(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidRate {
            value: lambda,
            expected: "(0, 1]",
        })
    }
}

/// An amplified (ε′, δ′) pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmplifiedParams {
    pub eps_prime: f64,
    pub delta_prime: f64,
}

/// Amplified pairs indexed by the unamplified ε.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplifiedCurve {
    grid: Vec<f64>,
    params: Vec<AmplifiedParams>,
}

impl AmplifiedCurve {
    fn new(grid: Vec<f64>, params: Vec<AmplifiedParams>) -> Self {
        Self { grid, params }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn params(&self) -> &[AmplifiedParams] {
        &self.params
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, AmplifiedParams)> + '_ {
        self.grid.iter().copied().zip(self.params.iter().copied())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,eps_prime,delta_prime\n");
        for (e, p) in self.iter() {
            out.push_str(&format!(
                "{},{},{}\n",
                fmt_num(e),
                fmt_num(p.eps_prime),
                fmt_num(p.delta_prime)
            ));
        }
        out
    }
}

fn scaled_curve(curve: &PrivacyCurve, rate: f64) -> Result<AmplifiedCurve> {
    let params = curve
        .iter()
        .map(|(e, d)| {
            Ok(AmplifiedParams {
                eps_prime: eps_shrink(e, rate)?,
                delta_prime: (rate * d).min(1.0),
            })
        })
        .collect::<Result<_>>()?;
    Ok(AmplifiedCurve::new(curve.grid().to_vec(), params))
}

/// Sampling without replacement of `m` out of `n`:
/// (log(1 + (m/n)(e^ε − 1)), (m/n)·SPC(ε)).
pub fn wor_bound(db: &DatabaseModel, q: &Query, n: usize, m: usize, grid: &[f64]) -> Result<AmplifiedCurve> {
    check_sizes(n, m)?;
    check_db_size(db, n)?;
    let td = TemplateDistribution::with_budget(Technique::WithoutReplacement { n, m }, db.budget())?;
    let spc = sampling::spc(db, q, &td, grid)?;
    scaled_curve(&spc, m as f64 / n as f64)
}

/// [`wor_bound`] for i.i.d. entries, where SPC reduces to Φ of the size-m
/// product model.
pub fn wor_bound_iid(entry: &Pmf, q: &Query, n: usize, m: usize, grid: &[f64]) -> Result<AmplifiedCurve> {
    check_sizes(n, m)?;
    let phi = iid::phi_curve(entry, q, m, grid)?;
    scaled_curve(&phi, m as f64 / n as f64)
}

/// (m/n)·Φ_m(log(1 + (n/m)(e^ε − 1))) / Φ_n(ε): below 1 when subsampling
/// buys a smaller δ at the same final ε.
pub fn viability_ratio(entry: &Pmf, q: &Query, n: usize, m: usize, eps: f64) -> Result<f64> {
    check_sizes(n, m)?;
    check_eps(eps)?;
    let denom = iid::phi_at(entry, q, n, eps)?;
    if denom == 0.0 {
        return Err(Error::ZeroDenominator(format!(
            "Φ of the size-{n} model at ε={eps} is 0"
        )));
    }
    let rate = m as f64 / n as f64;
    let num = rate * iid::phi_at(entry, q, m, eps_grow(eps, rate))?;
    Ok(num / denom)
}

/// ln C(n, m) · λ^m · (1 − λ)^(n − m), computed in log space.
fn binomial_weight(n: usize, m: usize, lambda: f64) -> f64 {
    if lambda == 1.0 {
        return if m == n { 1.0 } else { 0.0 };
    }
    let mut ln_c = 0.0;
    for i in 0..m {
        ln_c += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    (ln_c + m as f64 * lambda.ln() + (n - m) as f64 * (-lambda).ln_1p()).exp()
}

/// Sizes with nonzero Binomial(n, λ) weight, skipping m = 0 (its m/n factor
/// makes the term vanish).
fn poisson_terms(n: usize, lambda: f64) -> Vec<(usize, f64)> {
    (1..=n)
        .map(|m| (m, binomial_weight(n, m, lambda)))
        .filter(|(_, w)| *w > 0.0)
        .collect()
}

fn poisson_sum<F>(n: usize, lambda: f64, grid: &[f64], term: F) -> Result<PrivacyCurve>
where
    F: Fn(usize, &[f64]) -> Result<Vec<f64>> + Sync + Send,
{
    validate_grid(grid)?;
    check_poisson_rate(lambda)?;
    if n == 0 {
        return Err(Error::InvalidSize("poisson sampling needs n >= 1".into()));
    }
    let terms = poisson_terms(n, lambda);
    let per_size = par::try_map(&terms, |&(m, _)| {
        let rate = m as f64 / n as f64;
        let shifted: Vec<f64> = grid.iter().map(|&e| eps_grow(e, rate)).collect();
        term(m, &shifted)
    })?;
    let mut values = vec![0.0; grid.len()];
    for ((m, w), spc) in terms.iter().zip(per_size) {
        let c = w * *m as f64 / n as f64;
        for (v, s) in values.iter_mut().zip(spc) {
            *v += c * s;
        }
    }
    values.iter_mut().for_each(|v| *v = v.min(1.0));
    PrivacyCurve::new(grid.to_vec(), values)
}

/// Poisson sampling with rate λ:
/// δ*(ε) = Σ_{m≥1} C(n,m) λ^m (1−λ)^(n−m) · (m/n) · SPC_{n,m}(log(1 + (n/m)(e^ε − 1))).
///
/// λ = 1 is accepted and reduces to the unsampled SPC.
pub fn poisson_bound(db: &DatabaseModel, q: &Query, n: usize, lambda: f64, grid: &[f64]) -> Result<PrivacyCurve> {
    check_db_size(db, n)?;
    poisson_sum(n, lambda, grid, |m, shifted| {
        let td = TemplateDistribution::with_budget(Technique::WithoutReplacement { n, m }, db.budget())?;
        Ok(sampling::spc(db, q, &td, shifted)?.values().to_vec())
    })
}

/// [`poisson_bound`] for i.i.d. entries via the Φ fast path.
pub fn poisson_bound_iid(entry: &Pmf, q: &Query, n: usize, lambda: f64, grid: &[f64]) -> Result<PrivacyCurve> {
    poisson_sum(n, lambda, grid, |m, shifted| {
        Ok(iid::phi_curve(entry, q, m, shifted)?.values().to_vec())
    })
}

/// Probability that a fixed position is drawn exactly `k` times in `m`
/// uniform draws with replacement from `n`.
pub fn draw_count_weight(n: usize, m: usize, k: usize) -> f64 {
    if k > m {
        return 0.0;
    }
    if n == 1 {
        return if k == m { 1.0 } else { 0.0 };
    }
    let p = 1.0 / n as f64;
    let mut ln_c = 0.0;
    for i in 0..k {
        ln_c += ((m - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    (ln_c + k as f64 * p.ln() + (m - k) as f64 * (-p).ln_1p()).exp()
}

/// Per-k contribution of the with-replacement bound, for diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct DrawTerm {
    pub k: usize,
    /// P(K = k) with K ~ Binomial(m, 1/n).
    pub weight: f64,
    /// SPC of the view that draws the sensitive position exactly k times.
    pub spc: Vec<f64>,
}

/// With-replacement bound together with its per-k terms.
#[derive(Clone, Debug, PartialEq)]
pub struct WrBound {
    pub curve: AmplifiedCurve,
    /// Sampling rate 1 − (1 − 1/n)^m.
    pub rate: f64,
    /// Terms for the position that attains the maximum at the first grid point.
    pub terms: Vec<DrawTerm>,
}

/// Sampling `m` times with replacement from `n`:
/// ε′ = log(1 + λ̂(e^ε − 1)) with λ̂ = 1 − (1 − 1/n)^m and
/// δ′ = Σ_k P(K = k)·SPC_k(ε), K ~ Binomial(m, 1/n).
///
/// Requires a monotone query whose sampled answer distributions pass the
/// half-line check; otherwise refuses with the witness.
pub fn wr_bound(db: &DatabaseModel, q: &Query, n: usize, m: usize, grid: &[f64]) -> Result<AmplifiedCurve> {
    wr_bound_detailed(db, q, n, m, grid).map(|b| b.curve)
}

pub fn wr_bound_detailed(db: &DatabaseModel, q: &Query, n: usize, m: usize, grid: &[f64]) -> Result<WrBound> {
    wr_bound_inner(db, q, n, m, grid, true)
}

/// The with-replacement formula without the half-line precondition. The
/// result carries no guarantee; it exists to probe how the bound behaves on
/// models the precondition rejects.
pub fn wr_bound_unchecked(db: &DatabaseModel, q: &Query, n: usize, m: usize, grid: &[f64]) -> Result<WrBound> {
    wr_bound_inner(db, q, n, m, grid, false)
}

fn wr_bound_inner(db: &DatabaseModel, q: &Query, n: usize, m: usize, grid: &[f64], check: bool) -> Result<WrBound> {
    validate_grid(grid)?;
    check_db_size(db, n)?;
    if m == 0 {
        return Err(Error::InvalidSize("with replacement needs m >= 1".into()));
    }
    if !q.is_monotone() {
        return Err(Error::NotMonotone(q.name().to_string()));
    }
    let rate = -(m as f64 * (-1.0 / n as f64).ln_1p()).exp_m1();
    let eps_prime: Vec<f64> = grid.iter().map(|&e| eps_shrink(e, rate)).collect::<Result<_>>()?;
    let td = TemplateDistribution::with_budget(Technique::WithReplacement { n, m }, db.budget())?;

    let mut check_grid: Vec<f64> = grid.iter().chain(&eps_prime).copied().collect();
    check_grid.sort_by(f64::total_cmp);
    check_grid.dedup();

    let positions = divergence::sensitive_positions(db, q);
    let mut best: Option<(Vec<f64>, Vec<DrawTerm>)> = None;
    for j in positions {
        if check {
            samplable(db, q, &td, j, &check_grid)?;
        }
        let mut terms = Vec::new();
        for k in 1..=m {
            let weight = draw_count_weight(n, m, k);
            if weight == 0.0 {
                continue;
            }
            let view = td.conditioned_view(Selector::Drawn { j, k })?;
            let spc = sampling::spc_position(db, q, &view, j, grid)?;
            terms.push(DrawTerm {
                k,
                weight,
                spc: spc.values().to_vec(),
            });
        }
        let delta: Vec<f64> = (0..grid.len())
            .map(|i| terms.iter().map(|t| t.weight * t.spc[i]).sum::<f64>().min(1.0))
            .collect();
        best = Some(match best {
            None => (delta, terms),
            Some((b, bt)) => {
                let merged: Vec<f64> = b.iter().zip(&delta).map(|(x, y)| x.max(*y)).collect();
                if delta.first() > b.first() {
                    (merged, terms)
                } else {
                    (merged, bt)
                }
            }
        });
    }
    let (delta, terms) = best.expect("at least one sensitive position");
    let params = eps_prime
        .iter()
        .zip(delta)
        .map(|(&e, d)| AmplifiedParams {
            eps_prime: e,
            delta_prime: d,
        })
        .collect();
    Ok(WrBound {
        curve: AmplifiedCurve::new(grid.to_vec(), params),
        rate,
        terms,
    })
}

/// Half-line check on every per-template and technique-level pair of
/// conditioned answer distributions for sensitive position `j`.
fn samplable(db: &DatabaseModel, q: &Query, td: &TemplateDistribution, j: usize, grid: &[f64]) -> Result<()> {
    let conditioned: Vec<DatabaseModel> = db
        .support()
        .iter()
        .map(|&v| db.condition(j, v))
        .collect::<Result<_>>()?;
    let plus = td.conditioned_view(Selector::AtLeastOnce(j))?;
    let mut families: Vec<Vec<Pmf>> = Vec::new();
    for (t, _) in plus.grouped() {
        families.push(
            conditioned
                .iter()
                .map(|c| sampling::apply_template(c, &t, q))
                .collect::<Result<_>>()?,
        );
    }
    families.push(
        conditioned
            .iter()
            .map(|c| sampling::technique_pushforward(c, td, q))
            .collect::<Result<_>>()?,
    );
    for pmfs in &families {
        for (a, mu) in pmfs.iter().enumerate() {
            for (b, nu) in pmfs.iter().enumerate() {
                if a != b {
                    if let Some(w) = half_line_check(mu, nu, grid).witness {
                        return Err(w.into());
                    }
                }
            }
        }
    }
    Ok(())
}

/// min(1, 10 / (n·p·(1−p)·ε²)).
pub fn normal_approx_delta(n: usize, p: f64, eps: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidRate {
            value: p,
            expected: "(0, 1)",
        });
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::NegativeEpsilon(eps));
    }
    if n == 0 {
        return Err(Error::InvalidSize("n must be at least 1".into()));
    }
    Ok((10.0 / (n as f64 * p * (1.0 - p) * eps * eps)).min(1.0))
}

/// Classic subsampling for an (ε, δ)-DP mechanism:
/// (log(1 + rate·(e^ε − 1)), rate·δ).
pub fn dp_classic_subsample(eps: f64, delta: f64, rate: f64) -> Result<AmplifiedParams> {
    Ok(AmplifiedParams {
        eps_prime: eps_shrink(eps, rate)?,
        delta_prime: rate * delta,
    })
}

/// DP-side Poisson bound Σ_m C(n,m) λ^m (1−λ)^(n−m) (m/n) δ(log(1 + (n/m)(e^ε − 1)))
/// for a mechanism with curve `delta_curve`, read off by linear
/// interpolation. Beyond the grid's end the last value is used only when
/// `extrapolate` is set.
pub fn dp_poisson_bound(delta_curve: &PrivacyCurve, n: usize, lambda: f64, eps: f64, extrapolate: bool) -> Result<f64> {
    check_eps(eps)?;
    check_poisson_rate(lambda)?;
    if n == 0 {
        return Err(Error::InvalidSize("n must be at least 1".into()));
    }
    let mut total = 0.0;
    for (m, w) in poisson_terms(n, lambda) {
        let rate = m as f64 / n as f64;
        total += w * rate * delta_curve.interpolate(eps_grow(eps, rate), extrapolate)?;
    }
    Ok(total.min(1.0))
}

/// One row of the Poisson comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoissonComparison {
    pub epsilon: f64,
    /// δ* from the sample-size privacy curves.
    pub delta_star: f64,
    /// DP-side formula fed with the full-database Φ.
    pub delta_dp_curve: f64,
    /// Classic (ε′, λ·δ) pair with δ = Φ_n(ε).
    pub eps_classic: f64,
    pub delta_classic: f64,
}

/// Both Poisson bounds side by side for i.i.d. entries. The second bound is
/// evaluated on Φ_n computed exactly at every budget it needs, so no
/// interpolation error enters.
pub fn compare_poisson(entry: &Pmf, q: &Query, n: usize, lambda: f64, grid: &[f64]) -> Result<Vec<PoissonComparison>> {
    let star = poisson_bound_iid(entry, q, n, lambda, grid)?;
    let mut needed: Vec<f64> = grid.to_vec();
    for (m, _) in poisson_terms(n, lambda) {
        let rate = m as f64 / n as f64;
        needed.extend(grid.iter().map(|&e| eps_grow(e, rate)));
    }
    needed.sort_by(f64::total_cmp);
    needed.dedup();
    let phi_n = iid::phi_curve(entry, q, n, &needed)?;
    grid.iter()
        .zip(star.values())
        .map(|(&e, &d)| {
            let classic = dp_classic_subsample(e, phi_n.interpolate(e, false)?, lambda)?;
            Ok(PoissonComparison {
                epsilon: e,
                delta_star: d,
                delta_dp_curve: dp_poisson_bound(&phi_n, n, lambda, e, false)?,
                eps_classic: classic.eps_prime,
                delta_classic: classic.delta_prime,
            })
        })
        .collect()
}
