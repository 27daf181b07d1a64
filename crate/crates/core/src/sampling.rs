//! Sampling templates and techniques, couplings and the sampling privacy
//! curve.
//!
//! A template is the list of database positions that make up one sample. A
//! technique is a distribution over templates; all three supported
//! techniques are enumerated exactly. Repeated positions in a template refer
//! to the same random entry, which is how sampling with replacement
//! introduces dependence inside the sample.

use std::collections::BTreeMap;
use std::fmt;

use crate::dist::{DatabaseModel, Pmf, Query, DEFAULT_BUDGET, MASS_TOLERANCE};
use crate::divergence::{self, worst_pair, PrivacyCurve};
use crate::error::{Error, Result};
use crate::par;

/// Positions (zero-based) forming one sample, in draw order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Template(pub Vec<usize>);

impl Template {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    /// How often position `j` is drawn.
    pub fn count(&self, j: usize) -> usize {
        self.0.iter().filter(|&&i| i == j).count()
    }

    /// Representative of the template's multiset (sorted indices).
    pub fn sorted(&self) -> Template {
        let mut v = self.0.clone();
        v.sort_unstable();
        Template(v)
    }
}

/// The three sampling techniques over a database of size `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Technique {
    /// Uniform size-`m` subset.
    WithoutReplacement { n: usize, m: usize },
    /// Each entry independently with probability `rate`.
    Poisson { n: usize, rate: f64 },
    /// `m` independent uniform draws.
    WithReplacement { n: usize, m: usize },
}

impl Technique {
    pub fn n(&self) -> usize {
        match *self {
            Technique::WithoutReplacement { n, .. }
            | Technique::Poisson { n, .. }
            | Technique::WithReplacement { n, .. } => n,
        }
    }

    /// Parse `wor:n,m`, `poisson:n,lambda` or `wr:n,m`.
    pub fn parse(token: &str) -> Result<Self> {
        let bad = || Error::InvalidSize(format!("unrecognized technique `{token}`"));
        let (name, args) = token.split_once(':').ok_or_else(bad)?;
        let (a, b) = args.split_once(',').ok_or_else(bad)?;
        let n: usize = a.trim().parse().map_err(|_| bad())?;
        let t = match name.trim() {
            "wor" => Technique::WithoutReplacement {
                n,
                m: b.trim().parse().map_err(|_| bad())?,
            },
            "wr" => Technique::WithReplacement {
                n,
                m: b.trim().parse().map_err(|_| bad())?,
            },
            "poisson" => Technique::Poisson {
                n,
                rate: b.trim().parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Technique::WithoutReplacement { n, m } if n == 0 || m > n => Err(Error::InvalidSize(format!(
                "without replacement needs 1 <= n and m <= n, got n={n}, m={m}"
            ))),
            Technique::WithReplacement { n: 0, .. } => Err(Error::InvalidSize("with replacement needs n >= 1".into())),
            Technique::Poisson { n: 0, .. } => Err(Error::InvalidSize("poisson sampling needs n >= 1".into())),
            Technique::Poisson { rate, .. } if !(0.0..=1.0).contains(&rate) => Err(Error::InvalidRate {
                value: rate,
                expected: "[0, 1]",
            }),
            _ => Ok(()),
        }
    }

    /// Number of templates in the full support.
    fn support_size(&self) -> u128 {
        match *self {
            Technique::WithoutReplacement { n, m } => binomial_u128(n, m),
            Technique::Poisson { n, .. } => 1u128.checked_shl(n as u32).unwrap_or(u128::MAX),
            Technique::WithReplacement { n, m } => (n as u128).checked_pow(m as u32).unwrap_or(u128::MAX),
        }
    }

    /// Draws produce distinct positions.
    fn is_injective(&self) -> bool {
        !matches!(self, Technique::WithReplacement { .. })
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Technique::WithoutReplacement { n, m } => write!(f, "wor:{n},{m}"),
            Technique::Poisson { n, rate } => write!(f, "poisson:{n},{rate}"),
            Technique::WithReplacement { n, m } => write!(f, "wr:{n},{m}"),
        }
    }
}

fn binomial_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Events a template distribution can be conditioned on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selector {
    /// Sample size is exactly `m`.
    Size(usize),
    /// Position `j` is drawn exactly `k` times.
    Drawn { j: usize, k: usize },
    /// Position `j` is drawn at least once.
    AtLeastOnce(usize),
    /// Position `j` is never drawn.
    Never(usize),
}

impl Selector {
    pub fn matches(&self, t: &Template) -> bool {
        match *self {
            Selector::Size(m) => t.len() == m,
            Selector::Drawn { j, k } => t.count(j) == k,
            Selector::AtLeastOnce(j) => t.count(j) >= 1,
            Selector::Never(j) => t.count(j) == 0,
        }
    }

    fn position(&self) -> Option<usize> {
        match *self {
            Selector::Size(_) => None,
            Selector::Drawn { j, .. } | Selector::AtLeastOnce(j) | Selector::Never(j) => Some(j),
        }
    }
}

/// A technique's template distribution, possibly restricted to an event.
#[derive(Clone, Debug, PartialEq)]
pub struct TemplateDistribution {
    technique: Technique,
    conditions: Vec<Selector>,
    support: Vec<(Template, f64)>,
}

impl TemplateDistribution {
    pub fn new(technique: Technique) -> Result<Self> {
        Self::with_budget(technique, DEFAULT_BUDGET)
    }

    /// Enumerate the support, refusing if it has more than `budget` templates.
    pub fn with_budget(technique: Technique, budget: u64) -> Result<Self> {
        technique.validate()?;
        let states = technique.support_size();
        if states > budget as u128 {
            return Err(Error::BudgetExceeded { states, budget });
        }
        let support = match technique {
            Technique::WithoutReplacement { n, m } => {
                let subsets = subsets_of_size(n, m);
                let p = 1.0 / subsets.len() as f64;
                subsets.into_iter().map(|s| (Template(s), p)).collect()
            }
            Technique::Poisson { n, rate } => (0..=n)
                .flat_map(|m| {
                    let p = rate.powi(m as i32) * (1.0 - rate).powi((n - m) as i32);
                    subsets_of_size(n, m).into_iter().map(move |s| (Template(s), p))
                })
                .filter(|(_, p)| *p > 0.0)
                .collect(),
            Technique::WithReplacement { n, m } => {
                let p = (n as f64).powi(-(m as i32));
                sequences(n, m).into_iter().map(|s| (Template(s), p)).collect()
            }
        };
        Ok(Self {
            technique,
            conditions: Vec::new(),
            support,
        })
    }

    pub fn technique(&self) -> Technique {
        self.technique
    }

    pub fn n(&self) -> usize {
        self.technique.n()
    }

    /// Events this view has been conditioned on, in order.
    pub fn conditions(&self) -> &[Selector] {
        &self.conditions
    }

    pub fn support(&self) -> &[(Template, f64)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Probability of the event under this distribution.
    pub fn probability(&self, sel: Selector) -> f64 {
        self.support
            .iter()
            .filter(|(t, _)| sel.matches(t))
            .map(|(_, p)| p)
            .sum()
    }

    /// Renormalized restriction to the event.
    pub fn conditioned_view(&self, sel: Selector) -> Result<Self> {
        if let Some(j) = sel.position() {
            if j >= self.n() {
                return Err(Error::PositionOutOfRange {
                    position: j,
                    size: self.n(),
                });
            }
        }
        let mass = self.probability(sel);
        if !(mass > 0.0) {
            return Err(Error::ZeroProbabilityEvent);
        }
        let support = self
            .support
            .iter()
            .filter(|(t, _)| sel.matches(t))
            .map(|(t, p)| (t.clone(), p / mass))
            .collect();
        let mut conditions = self.conditions.clone();
        conditions.push(sel);
        Ok(Self {
            technique: self.technique,
            conditions,
            support,
        })
    }

    /// Templates merged by multiset, sorted; exact for symmetric queries.
    pub fn grouped(&self) -> Vec<(Template, f64)> {
        let mut groups: BTreeMap<Template, f64> = BTreeMap::new();
        for (t, p) in &self.support {
            *groups.entry(t.sorted()).or_insert(0.0) += p;
        }
        groups.into_iter().collect()
    }

    /// Whether the view depends on a particular position (so maximizing over
    /// positions by symmetry is not allowed).
    fn position_specific(&self) -> bool {
        self.conditions.iter().any(|c| c.position().is_some())
    }
}

fn subsets_of_size(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..=(n - left) {
            cur.push(i);
            rec(i + 1, n, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if m <= n {
        rec(0, n, m, &mut Vec::with_capacity(m), &mut out);
    }
    out
}

fn sequences(n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::with_capacity(m)];
    for _ in 0..m {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..n).map(move |i| {
                    let mut s = prefix.clone();
                    s.push(i);
                    s
                })
            })
            .collect();
    }
    out
}

fn check_template(db: &DatabaseModel, t: &Template) -> Result<()> {
    match t.0.iter().find(|&&i| i >= db.len()) {
        Some(&i) => Err(Error::PositionOutOfRange {
            position: i,
            size: db.len(),
        }),
        None => Ok(()),
    }
}

/// Answer distribution of `q` on the sample selected by `t`.
pub fn apply_template(db: &DatabaseModel, t: &Template, q: &Query) -> Result<Pmf> {
    check_template(db, t)?;
    db.answer_pmf(t.indices(), q)
}

fn template_work(td: &TemplateDistribution, q: &Query) -> Vec<(Template, f64)> {
    if q.is_symmetric() {
        td.grouped()
    } else {
        td.support().to_vec()
    }
}

/// Answer distribution after sampling: the template mixture
/// Σ_τ P(τ)·apply_template(db, τ, q).
pub fn technique_pushforward(db: &DatabaseModel, td: &TemplateDistribution, q: &Query) -> Result<Pmf> {
    if td.n() != db.len() {
        return Err(Error::InvalidSize(format!(
            "technique is for n={} but the database has {} entries",
            td.n(),
            db.len()
        )));
    }
    let work = template_work(td, q);
    let parts = par::try_map(&work, |(t, _)| apply_template(db, t, q))?;
    Pmf::mixture(work.iter().map(|(_, p)| *p).zip(parts.iter()))
}

/// Free-function form of [`TemplateDistribution::conditioned_view`].
pub fn conditioned_view(td: &TemplateDistribution, sel: Selector) -> Result<TemplateDistribution> {
    td.conditioned_view(sel)
}

/// Joint distribution over template pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    pairs: Vec<(Template, Template, f64)>,
}

impl Coupling {
    pub fn pairs(&self) -> &[(Template, Template, f64)] {
        &self.pairs
    }

    pub fn first_marginal(&self) -> Vec<(Template, f64)> {
        marginal(self.pairs.iter().map(|(a, _, p)| (a, *p)))
    }

    pub fn second_marginal(&self) -> Vec<(Template, f64)> {
        marginal(self.pairs.iter().map(|(_, b, p)| (b, *p)))
    }
}

fn marginal<'a>(items: impl Iterator<Item = (&'a Template, f64)>) -> Vec<(Template, f64)> {
    let mut m: BTreeMap<Template, f64> = BTreeMap::new();
    for (t, p) in items {
        *m.entry(t.clone()).or_insert(0.0) += p;
    }
    m.into_iter().collect()
}

fn same_distribution(a: &[(Template, f64)], b: &[(Template, f64)]) -> bool {
    let a = marginal(a.iter().map(|(t, p)| (t, *p)));
    let b = marginal(b.iter().map(|(t, p)| (t, *p)));
    a.len() == b.len()
        && a.iter()
            .zip(&b)
            .all(|((ta, pa), (tb, pb))| ta == tb && (pa - pb).abs() <= MASS_TOLERANCE)
}

/// Couples a view that always draws `j` with one that never does, so that
/// every coupled pair agrees off the `j` slots and the `j` slots of the
/// first template are filled by other positions in the second.
///
/// For injective techniques each `j` slot is replaced by a position not yet
/// in the template, chosen uniformly. With replacement, every `j` slot is
/// replaced independently by a uniform position other than `j`. The second
/// marginal is checked against `minus` exactly.
pub fn matched_coupling(plus: &TemplateDistribution, minus: &TemplateDistribution, j: usize) -> Result<Coupling> {
    let n = plus.n();
    if minus.n() != n {
        return Err(Error::InfeasibleCoupling("views of different database sizes".into()));
    }
    if plus.support().iter().any(|(t, _)| t.count(j) == 0) {
        return Err(Error::InfeasibleCoupling(format!(
            "first view has templates without position {j}"
        )));
    }
    if minus.support().iter().any(|(t, _)| t.count(j) > 0) {
        return Err(Error::InfeasibleCoupling(format!(
            "second view has templates with position {j}"
        )));
    }
    let injective = plus.technique().is_injective();
    let mut joint: BTreeMap<(Template, Template), f64> = BTreeMap::new();
    for (t, p) in plus.support() {
        let slots: Vec<usize> = (0..t.len()).filter(|&s| t.0[s] == j).collect();
        let fillers: Vec<Vec<usize>> = if injective {
            let free: Vec<usize> = (0..n).filter(|i| !t.0.contains(i)).collect();
            if free.is_empty() || slots.len() != 1 {
                return Err(Error::InfeasibleCoupling(format!(
                    "no undrawn position left to replace {j} in {:?}",
                    t.0
                )));
            }
            free.into_iter().map(|i| vec![i]).collect()
        } else {
            let others: Vec<usize> = (0..n).filter(|&i| i != j).collect();
            if others.is_empty() {
                return Err(Error::InfeasibleCoupling("no position other than j".into()));
            }
            sequences(others.len(), slots.len())
                .into_iter()
                .map(|s| s.into_iter().map(|k| others[k]).collect())
                .collect()
        };
        let share = p / fillers.len() as f64;
        for fill in fillers {
            let mut other = t.0.clone();
            for (slot, value) in slots.iter().zip(fill) {
                other[*slot] = value;
            }
            let other = if injective {
                Template(other).sorted()
            } else {
                Template(other)
            };
            *joint.entry((t.clone(), other)).or_insert(0.0) += share;
        }
    }
    let coupling = Coupling {
        pairs: joint.into_iter().map(|((a, b), p)| (a, b, p)).collect(),
    };
    if !same_distribution(&coupling.second_marginal(), minus.support()) {
        return Err(Error::InfeasibleCoupling(
            "second marginal does not match the target view".into(),
        ));
    }
    Ok(coupling)
}

/// Sampling privacy curve for one sensitive position `j`: the expectation,
/// over templates that draw `j`, of the worst pairwise divergence between the
/// sampled answers with entry `j` fixed to `v` versus `w`.
pub fn spc_position(
    db: &DatabaseModel,
    q: &Query,
    td: &TemplateDistribution,
    j: usize,
    grid: &[f64],
) -> Result<PrivacyCurve> {
    divergence::validate_grid(grid)?;
    if td.n() != db.len() {
        return Err(Error::InvalidSize(format!(
            "technique is for n={} but the database has {} entries",
            td.n(),
            db.len()
        )));
    }
    let plus = td.conditioned_view(Selector::AtLeastOnce(j))?;
    let conditioned: Vec<DatabaseModel> = db
        .support()
        .iter()
        .map(|&v| db.condition(j, v))
        .collect::<Result<_>>()?;
    let work = template_work(&plus, q);
    let curves = par::try_map(&work, |(t, _)| {
        let pmfs: Vec<Pmf> = conditioned
            .iter()
            .map(|c| apply_template(c, t, q))
            .collect::<Result<_>>()?;
        Ok(worst_pair(&pmfs, grid))
    })?;
    let mut values = vec![0.0; grid.len()];
    for ((_, p), c) in work.iter().zip(curves) {
        for (v, x) in values.iter_mut().zip(c) {
            *v += p * x;
        }
    }
    PrivacyCurve::new(grid.to_vec(), values)
}

/// Sampling privacy curve maximized over sensitive positions.
pub fn spc(db: &DatabaseModel, q: &Query, td: &TemplateDistribution, grid: &[f64]) -> Result<PrivacyCurve> {
    let positions: Vec<usize> = if db.is_iid() && q.is_symmetric() && !td.position_specific() {
        vec![0]
    } else {
        (0..db.len()).collect()
    };
    let mut curves = Vec::with_capacity(positions.len());
    for j in positions {
        match spc_position(db, q, td, j, grid) {
            Ok(c) => curves.push(c.values().to_vec()),
            // positions the technique never draws contribute nothing
            Err(Error::ZeroProbabilityEvent) => {}
            Err(e) => return Err(e),
        }
    }
    if curves.is_empty() {
        return Err(Error::ZeroProbabilityEvent);
    }
    PrivacyCurve::new(grid.to_vec(), divergence::fold_max(curves, grid.len()))
}

/// Decomposition mu = (1−λ)·common + λ·mu_rest, nu = (1−λ)·common + λ·nu_rest
/// with λ the total variation distance.
#[derive(Clone, Debug, PartialEq)]
pub struct MaximalCoupling {
    pub lambda: f64,
    pub common: Pmf,
    pub mu_rest: Pmf,
    pub nu_rest: Pmf,
}

pub fn maximal_coupling_split(mu: &Pmf, nu: &Pmf) -> Result<MaximalCoupling> {
    let mut union: Vec<f64> = mu.outcomes().iter().chain(nu.outcomes()).copied().collect();
    union.sort_by(f64::total_cmp);
    union.dedup();
    let mut overlap = Vec::with_capacity(union.len());
    let mut mu_excess = Vec::new();
    let mut nu_excess = Vec::new();
    for &a in &union {
        let (p, q) = (mu.prob(a), nu.prob(a));
        overlap.push((a, p.min(q)));
        if p > q {
            mu_excess.push((a, p - q));
        } else if q > p {
            nu_excess.push((a, q - p));
        }
    }
    let lambda: f64 = mu_excess.iter().map(|x| x.1).sum();
    let shared: f64 = overlap.iter().map(|x| x.1).sum();
    let normalized = |items: Vec<(f64, f64)>| -> Result<Pmf> {
        let total: f64 = items.iter().map(|x| x.1).sum();
        Pmf::from_pairs(items.into_iter().map(|(a, w)| (a, w / total)))
    };
    if lambda == 0.0 || nu_excess.is_empty() {
        return Ok(MaximalCoupling {
            lambda: 0.0,
            common: mu.clone(),
            mu_rest: mu.clone(),
            nu_rest: nu.clone(),
        });
    }
    let common = if shared > 0.0 {
        normalized(overlap.into_iter().filter(|x| x.1 > 0.0).collect())?
    } else {
        mu.clone()
    };
    Ok(MaximalCoupling {
        lambda: lambda.min(1.0),
        common,
        mu_rest: normalized(mu_excess)?,
        nu_rest: normalized(nu_excess)?,
    })
}
