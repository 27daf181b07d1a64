//! Finite distributions, product database models and query pushforwards.
//!
//! Everything here is exact enumeration over finite supports. A database of
//! `n` independent entries is a [`DatabaseModel`]; fixing one entry to a value
//! gives the conditioned model used by every privacy notion in the crate.
//! Positions are zero-based throughout.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Tolerance on total mass of a [`Pmf`].
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Largest mass defect attributed to floating-point accumulation rather
/// than to a malformed input.
const ROUNDING_SLACK: f64 = 1e-9;

/// Default cap on the number of enumerated database states.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// Round to 12 significant digits so that answers differing only by
/// floating-point noise land on the same outcome.
pub fn canonical(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { 0.0 } else { x };
    }
    let exp = x.abs().log10().floor() as i32;
    let shift = 11 - exp;
    let y = if shift >= 0 {
        let scale = 10f64.powi(shift);
        (x * scale).round() / scale
    } else {
        let scale = 10f64.powi(-shift);
        (x / scale).round() * scale
    };
    if y == 0.0 {
        0.0
    } else {
        y
    }
}

fn key(x: f64) -> u64 {
    canonical(x).to_bits()
}

/// Probability mass function over a finite, strictly increasing set of real
/// outcomes.
#[derive(Clone, PartialEq)]
pub struct Pmf {
    outcomes: Vec<f64>,
    weights: Vec<f64>,
}

impl fmt::Debug for Pmf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.iter()).finish()
    }
}

impl Pmf {
    /// Outcomes are stored rounded to 12 significant digits.
    pub fn new(outcomes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let outcomes: Vec<f64> = outcomes.into_iter().map(canonical).collect();
        if outcomes.is_empty() {
            return Err(Error::InvalidPmf("empty outcome set".into()));
        }
        if outcomes.len() != weights.len() {
            return Err(Error::InvalidPmf(format!(
                "{} outcomes but {} weights",
                outcomes.len(),
                weights.len()
            )));
        }
        if outcomes.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidPmf("outcomes must be finite".into()));
        }
        if outcomes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPmf("outcomes must be strictly increasing".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidPmf(format!("weight {w} is not a probability")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidPmf(format!("weights sum to {total}")));
        }
        Ok(Self { outcomes, weights })
    }

    /// Build from unordered `(outcome, weight)` pairs, merging outcomes that
    /// agree to 12 significant digits.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut merged: HashMap<u64, (f64, f64)> = HashMap::new();
        for (x, w) in pairs {
            if !x.is_finite() {
                return Err(Error::InvalidPmf(format!("outcome {x} is not finite")));
            }
            let slot = merged.entry(key(x)).or_insert((canonical(x), 0.0));
            slot.1 += w;
        }
        Self::from_merged(merged.into_values().collect())
    }

    /// Sort merged pairs and absorb accumulated rounding error (at most
    /// `ROUNDING_SLACK`) by renormalizing.
    fn from_merged(mut items: Vec<(f64, f64)>) -> Result<Self> {
        items.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = items.iter().map(|p| p.1).sum();
        if (total - 1.0).abs() > ROUNDING_SLACK {
            return Err(Error::InvalidPmf(format!("weights sum to {total}")));
        }
        let (outcomes, weights) = items.into_iter().map(|(x, w)| (x, w / total)).unzip();
        Self::new(outcomes, weights)
    }

    pub fn point(x: f64) -> Self {
        Self {
            outcomes: vec![canonical(x)],
            weights: vec![1.0],
        }
    }

    /// Bernoulli(p) on {0, 1}. Both outcomes are kept even when `p` is 0 or 1
    /// so that the support stays {0, 1}.
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidPmf(format!("bernoulli parameter {p}")));
        }
        Self::new(vec![0.0, 1.0], vec![1.0 - p, p])
    }

    /// Uniform over the given distinct values.
    pub fn uniform(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidPmf("empty outcome set".into()));
        }
        let w = 1.0 / values.len() as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let total = w * sorted.len() as f64;
        let mut weights = vec![w; sorted.len()];
        // absorb rounding so the mass check is exact
        weights[0] += 1.0 - total;
        Self::new(sorted, weights)
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.outcomes.iter().copied().zip(self.weights.iter().copied())
    }

    /// Outcomes carrying positive weight, with their weights.
    pub fn support(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.iter().filter(|(_, w)| *w > 0.0)
    }

    /// Mass at `a`; zero for outcomes not in the outcome set.
    pub fn prob(&self, a: f64) -> f64 {
        let a = canonical(a);
        match self.outcomes.binary_search_by(|x| x.total_cmp(&a)) {
            Ok(i) => self.weights[i],
            Err(_) => 0.0,
        }
    }

    pub fn contains(&self, a: f64) -> bool {
        let a = canonical(a);
        self.outcomes.binary_search_by(|x| x.total_cmp(&a)).is_ok()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(x, w)| x * w).sum()
    }

    pub fn is_point_mass(&self) -> bool {
        self.support().count() == 1
    }

    /// Pushforward through `f`.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self> {
        Self::from_pairs(self.support().map(|(x, w)| (f(x), w)))
    }

    /// Convex combination `Σ c_i · pmf_i`; the coefficients must sum to 1.
    pub fn mixture<'a, I>(components: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, &'a Pmf)>,
    {
        let mut pairs = Vec::new();
        for (c, pmf) in components {
            if c < 0.0 {
                return Err(Error::InvalidPmf(format!("negative mixture weight {c}")));
            }
            if c > 0.0 {
                pairs.extend(pmf.support().map(|(x, w)| (x, c * w)));
            }
        }
        Self::from_pairs(pairs)
    }

    /// Distribution of the sum of independent draws from `self` and `other`.
    pub fn convolve(&self, other: &Pmf) -> Result<Self> {
        let mut pairs = Vec::with_capacity(self.len() * other.len());
        for (x, wx) in self.support() {
            for (y, wy) in other.support() {
                pairs.push((x + y, wx * wy));
            }
        }
        Self::from_pairs(pairs)
    }

    /// `k`-fold self convolution by repeated squaring; `k = 0` is the point
    /// mass at 0.
    pub fn convolve_power(&self, k: usize) -> Result<Self> {
        let mut acc = Pmf::point(0.0);
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.convolve(&base)?;
            }
            k >>= 1;
            if k > 0 {
                base = base.convolve(&base)?;
            }
        }
        Ok(acc)
    }

    /// True when both have the same outcomes and weights agree within `tol`.
    pub fn approx_eq(&self, other: &Pmf, tol: f64) -> bool {
        let mut a = self.support().peekable();
        let mut b = other.support().peekable();
        loop {
            match (a.peek().copied(), b.peek().copied()) {
                (None, None) => return true,
                (Some((x, wx)), Some((y, wy))) if x == y => {
                    if (wx - wy).abs() > tol {
                        return false;
                    }
                    a.next();
                    b.next();
                }
                (Some((x, wx)), Some((y, wy))) => {
                    if x < y {
                        if wx > tol {
                            return false;
                        }
                        a.next();
                    } else {
                        if wy > tol {
                            return false;
                        }
                        b.next();
                    }
                }
                (Some((_, w)), None) => {
                    if w > tol {
                        return false;
                    }
                    a.next();
                }
                (None, Some((_, w))) => {
                    if w > tol {
                        return false;
                    }
                    b.next();
                }
            }
        }
    }
}

/// Built-in query families. `Custom` queries are evaluated by enumeration
/// only; the others also admit the convolution fast path for i.i.d. models.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QueryKind {
    /// Sum of the entry values.
    Sum,
    /// Number of entries with a positive value.
    Count,
    /// Arithmetic mean of the entry values.
    Mean,
    Custom,
}

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A symmetric query family: one evaluator for every sample size.
#[derive(Clone)]
pub struct Query {
    name: String,
    kind: QueryKind,
    eval: Evaluator,
    monotone: bool,
    symmetric: bool,
    empty_answer: f64,
}

impl fmt::Debug for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Query")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("monotone", &self.monotone)
            .field("symmetric", &self.symmetric)
            .field("empty_answer", &self.empty_answer)
            .finish()
    }
}

impl Query {
    pub fn sum() -> Self {
        Self {
            name: "sum".into(),
            kind: QueryKind::Sum,
            eval: Arc::new(|xs: &[f64]| xs.iter().sum()),
            monotone: true,
            symmetric: true,
            empty_answer: 0.0,
        }
    }

    pub fn count() -> Self {
        Self {
            name: "count".into(),
            kind: QueryKind::Count,
            eval: Arc::new(|xs: &[f64]| xs.iter().filter(|x| **x > 0.0).count() as f64),
            monotone: true,
            symmetric: true,
            empty_answer: 0.0,
        }
    }

    pub fn mean() -> Self {
        Self {
            name: "mean".into(),
            kind: QueryKind::Mean,
            eval: Arc::new(|xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64),
            monotone: true,
            symmetric: true,
            empty_answer: 0.0,
        }
    }

    /// Ignores the data entirely.
    pub fn constant(c: f64) -> Self {
        Self::custom("constant", move |_| c, true, true, c)
    }

    pub fn custom<F>(name: &str, f: F, monotone: bool, symmetric: bool, empty_answer: f64) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            kind: QueryKind::Custom,
            eval: Arc::new(f),
            monotone,
            symmetric,
            empty_answer,
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sum" => Some(Self::sum()),
            "count" => Some(Self::count()),
            "mean" => Some(Self::mean()),
            _ => None,
        }
    }

    /// Same query with a different answer for the empty sample.
    pub fn with_empty_answer(mut self, a: f64) -> Self {
        self.empty_answer = a;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> QueryKind {
        self.kind
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn empty_answer(&self) -> f64 {
        self.empty_answer
    }

    pub fn evaluate(&self, sample: &[f64]) -> f64 {
        if sample.is_empty() {
            self.empty_answer
        } else {
            (self.eval)(sample)
        }
    }
}

/// Product distribution of `n` independent entries over a shared support,
/// some of which may be fixed to a value.
#[derive(Clone, Debug, PartialEq)]
pub struct DatabaseModel {
    entries: Vec<Pmf>,
    fixed: Vec<Option<f64>>,
    budget: u64,
}

impl DatabaseModel {
    pub fn new(entries: Vec<Pmf>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidModel("a database needs at least one entry".into()));
        }
        let support = entries[0].outcomes();
        if let Some(i) = entries.iter().position(|e| e.outcomes() != support) {
            return Err(Error::InvalidModel(format!(
                "entry {i} has support {:?}, expected {:?}",
                entries[i].outcomes(),
                support
            )));
        }
        let n = entries.len();
        Ok(Self {
            entries,
            fixed: vec![None; n],
            budget: DEFAULT_BUDGET,
        })
    }

    /// `n` i.i.d. copies of `entry`.
    pub fn iid(entry: Pmf, n: usize) -> Result<Self> {
        Self::new(vec![entry; n])
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The common entry support W.
    pub fn support(&self) -> &[f64] {
        self.entries[0].outcomes()
    }

    /// Prior distribution of entry `i`, ignoring any fixing.
    pub fn entry(&self, i: usize) -> &Pmf {
        &self.entries[i]
    }

    pub fn entries(&self) -> &[Pmf] {
        &self.entries
    }

    pub fn fixed(&self, i: usize) -> Option<f64> {
        self.fixed[i]
    }

    /// No entry is fixed.
    pub fn is_pure(&self) -> bool {
        self.fixed.iter().all(Option::is_none)
    }

    /// Pure model whose entries all share one distribution.
    pub fn is_iid(&self) -> bool {
        self.is_pure() && self.entries.windows(2).all(|w| w[0] == w[1])
    }

    /// The same model with every fixing removed.
    pub fn unfixed(&self) -> Self {
        Self {
            entries: self.entries.clone(),
            fixed: vec![None; self.entries.len()],
            budget: self.budget,
        }
    }

    /// Fix entry `j` to `w`.
    pub fn condition(&self, j: usize, w: f64) -> Result<Self> {
        if j >= self.len() {
            return Err(Error::PositionOutOfRange {
                position: j,
                size: self.len(),
            });
        }
        if !self.entries[j].contains(w) {
            return Err(Error::ValueOutsideSupport(w));
        }
        if self.fixed[j].is_some() {
            return Err(Error::AlreadyFixed(j));
        }
        let mut out = self.clone();
        out.fixed[j] = Some(canonical(w));
        Ok(out)
    }

    /// Distribution of entry `i` after conditioning, as (value, weight)
    /// pairs with positive weight.
    fn effective_support(&self, i: usize) -> Vec<(f64, f64)> {
        match self.fixed[i] {
            Some(v) => vec![(v, 1.0)],
            None => self.entries[i].support().collect(),
        }
    }

    /// Answer distribution of `q` on the sample picked out by `slots`
    /// (positions may repeat; repeats share one random value).
    pub(crate) fn answer_pmf(&self, slots: &[usize], q: &Query) -> Result<Pmf> {
        let mut distinct: Vec<usize> = slots.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        if let Some(&bad) = distinct.iter().find(|&&i| i >= self.len()) {
            return Err(Error::PositionOutOfRange {
                position: bad,
                size: self.len(),
            });
        }
        let supports: Vec<Vec<(f64, f64)>> = distinct.iter().map(|&i| self.effective_support(i)).collect();
        let states = supports
            .iter()
            .try_fold(1u128, |acc, s| acc.checked_mul(s.len() as u128))
            .unwrap_or(u128::MAX);
        if states > self.budget as u128 {
            return Err(Error::BudgetExceeded {
                states,
                budget: self.budget,
            });
        }
        // slot -> index into `distinct`
        let slot_src: Vec<usize> = slots
            .iter()
            .map(|i| distinct.binary_search(i).expect("slot index is in distinct set"))
            .collect();

        let mut acc: HashMap<u64, (f64, f64)> = HashMap::new();
        let mut digits = vec![0usize; supports.len()];
        let mut sample = vec![0.0; slots.len()];
        loop {
            let mut weight = 1.0;
            for (d, s) in digits.iter().zip(&supports) {
                weight *= s[*d].1;
            }
            for (slot, src) in sample.iter_mut().zip(&slot_src) {
                *slot = supports[*src][digits[*src]].0;
            }
            let a = q.evaluate(&sample);
            let e = acc.entry(key(a)).or_insert((canonical(a), 0.0));
            e.1 += weight;

            // odometer
            let mut pos = 0;
            loop {
                if pos == digits.len() {
                    return Pmf::from_merged(acc.into_values().collect());
                }
                digits[pos] += 1;
                if digits[pos] < supports[pos].len() {
                    break;
                }
                digits[pos] = 0;
                pos += 1;
            }
        }
    }
}

/// Fix entry `j` of `db` to `w`; see [`DatabaseModel::condition`].
pub fn condition(db: &DatabaseModel, j: usize, w: f64) -> Result<DatabaseModel> {
    db.condition(j, w)
}

/// Exact answer distribution of `q` over the whole database.
pub fn pushforward(db: &DatabaseModel, q: &Query) -> Result<Pmf> {
    let all: Vec<usize> = (0..db.len()).collect();
    db.answer_pmf(&all, q)
}

/// Distributional distance between two product models: the fewest entry
/// distributions that differ under the best matching of positions, plus the
/// size difference. Fixed entries count as point masses.
pub fn gamma_distance(a: &DatabaseModel, b: &DatabaseModel) -> usize {
    let effective = |db: &DatabaseModel| -> Vec<Pmf> {
        (0..db.len())
            .map(|i| match db.fixed(i) {
                Some(v) => Pmf::point(v),
                None => db.entry(i).clone(),
            })
            .collect()
    };
    let left = effective(a);
    let mut right = effective(b);
    let mut shared = 0;
    for pmf in &left {
        if let Some(pos) = right.iter().position(|r| r.approx_eq(pmf, MASS_TOLERANCE)) {
            right.swap_remove(pos);
            shared += 1;
        }
    }
    a.len().max(b.len()) - shared
}
