//! Verification matrix: the sampling pipeline against the joint-enumeration
//! oracle, and every amplification bound against the directly enumerated
//! divergence it is supposed to dominate.

use crate::amplify;
use crate::dist::{DatabaseModel, Pmf, Query};
use crate::divergence::hockey_stick;
use crate::error::{Error, Result};
use crate::fmt_num;
use crate::oracle::oracle_divergence;
use crate::par;
use crate::sampling::{technique_pushforward, Technique, TemplateDistribution};

pub const AGREEMENT_TOLERANCE: f64 = 1e-12;
pub const DOMINANCE_TOLERANCE: f64 = 1e-10;
pub const EPSILONS: [f64; 4] = [0.0, 0.5, 1.0, 2.0];
pub const BERNOULLI_PS: [f64; 2] = [0.3, 0.5];
pub const POISSON_RATES: [f64; 3] = [0.25, 0.5, 0.75];
/// Largest n and m for the with-replacement dominance rows.
pub const WR_MAX_N: usize = 3;
pub const WR_MAX_M: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    pub max_n: usize,
    /// Evaluate the pipeline at −ε instead of ε, which must make rows fail.
    pub inject_fault: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            max_n: 4,
            inject_fault: false,
        }
    }
}

/// Which check a row reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    /// Pipeline divergence equals the oracle.
    Agreement,
    /// Without-replacement δ′ dominates the oracle at ε′.
    WorDominance,
    /// Poisson δ* dominates the oracle at ε.
    PoissonDominance,
    /// With-replacement δ′ dominates the oracle at ε′.
    WrDominance,
}

impl Quantity {
    pub fn name(&self) -> &'static str {
        match self {
            Quantity::Agreement => "agreement",
            Quantity::WorDominance => "wor_dominance",
            Quantity::PoissonDominance => "poisson_dominance",
            Quantity::WrDominance => "wr_dominance",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyRow {
    pub case: String,
    pub quantity: Quantity,
    /// Pipeline value (agreement) or bound (dominance).
    pub pipeline: f64,
    pub oracle: f64,
    pub abs_diff: f64,
    pub pass: bool,
}

impl VerifyRow {
    fn agreement(case: String, pipeline: f64, oracle: f64) -> Self {
        let abs_diff = (pipeline - oracle).abs();
        Self {
            case,
            quantity: Quantity::Agreement,
            pipeline,
            oracle,
            abs_diff,
            pass: abs_diff <= AGREEMENT_TOLERANCE,
        }
    }

    fn dominance(case: String, quantity: Quantity, bound: f64, oracle: f64) -> Self {
        Self {
            case,
            quantity,
            pipeline: bound,
            oracle,
            abs_diff: (bound - oracle).abs(),
            pass: oracle <= bound + DOMINANCE_TOLERANCE,
        }
    }
}

/// A with-replacement configuration the bound refused because the
/// half-line precondition failed.
#[derive(Clone, Debug, PartialEq)]
pub struct Refusal {
    pub case: String,
    pub reason: String,
    /// Whether the formula, evaluated without the precondition, still
    /// dominated the oracle at every ε. Diagnostic only.
    pub unchecked_dominates: bool,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct VerifyReport {
    pub rows: Vec<VerifyRow>,
    pub refusals: Vec<Refusal>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &VerifyRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("case,quantity,pipeline,oracle,abs_diff,pass\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.case,
                r.quantity.name(),
                fmt_num(r.pipeline),
                fmt_num(r.oracle),
                fmt_num(r.abs_diff),
                r.pass
            ));
        }
        out
    }
}

/// Case prefix without commas, e.g. `wor_n3_m2/bern0.3`.
fn case_label(t: Technique, p: f64) -> String {
    let t = match t {
        Technique::WithoutReplacement { n, m } => format!("wor_n{n}_m{m}"),
        Technique::Poisson { n, rate } => format!("poisson_n{n}_rate{}", fmt_num(rate)),
        Technique::WithReplacement { n, m } => format!("wr_n{n}_m{m}"),
    };
    format!("{t}/bern{}", fmt_num(p))
}

fn model(p: f64, n: usize) -> Result<DatabaseModel> {
    DatabaseModel::iid(Pmf::bernoulli(p)?, n)
}

/// Worst oracle divergence over positions and ordered value pairs.
fn oracle_worst(db: &DatabaseModel, td: &TemplateDistribution, q: &Query, eps: f64) -> Result<f64> {
    let mut best: f64 = 0.0;
    for j in 0..db.len() {
        for &v in db.support() {
            for &w in db.support() {
                if v != w {
                    let d = oracle_divergence(&db.condition(j, v)?, &db.condition(j, w)?, td, q, eps)?;
                    best = best.max(d);
                }
            }
        }
    }
    Ok(best)
}

/// Agreement rows for one technique: every position, value pair and ε.
fn agreement_rows(
    db: &DatabaseModel,
    td: &TemplateDistribution,
    q: &Query,
    label: &str,
    fault: bool,
) -> Result<Vec<VerifyRow>> {
    let mut rows = Vec::new();
    for j in 0..db.len() {
        for &v in db.support() {
            for &w in db.support() {
                if v == w {
                    continue;
                }
                let (dv, dw) = (db.condition(j, v)?, db.condition(j, w)?);
                let mu = technique_pushforward(&dv, td, q)?;
                let nu = technique_pushforward(&dw, td, q)?;
                for &eps in &EPSILONS {
                    let pipe = if fault {
                        crate::divergence::hockey_stick_scaled(&mu, &nu, (-eps).exp())
                    } else {
                        hockey_stick(&mu, &nu, eps)?
                    };
                    let orc = oracle_divergence(&dv, &dw, td, q, eps)?;
                    rows.push(VerifyRow::agreement(
                        format!("{label}/j={j}/v={}/w={}/eps={}", fmt_num(v), fmt_num(w), fmt_num(eps)),
                        pipe,
                        orc,
                    ));
                }
            }
        }
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug)]
enum Job {
    Wor { p: f64, n: usize, m: usize },
    Poisson { p: f64, n: usize, rate: f64 },
    Wr { p: f64, n: usize, m: usize },
}

fn run_job(job: Job, fault: bool) -> Result<(Vec<VerifyRow>, Option<Refusal>)> {
    let q = Query::sum();
    let mut rows = Vec::new();
    match job {
        Job::Wor { p, n, m } => {
            let db = model(p, n)?;
            let technique = Technique::WithoutReplacement { n, m };
            let td = TemplateDistribution::new(technique)?;
            let label = case_label(technique, p);
            rows.extend(agreement_rows(&db, &td, &q, &label, fault)?);
            let bound = amplify::wor_bound(&db, &q, n, m, &EPSILONS)?;
            for (eps, b) in bound.iter() {
                let direct = oracle_worst(&db, &td, &q, b.eps_prime)?;
                rows.push(VerifyRow::dominance(
                    format!("{label}/eps={}", fmt_num(eps)),
                    Quantity::WorDominance,
                    b.delta_prime,
                    direct,
                ));
            }
            Ok((rows, None))
        }
        Job::Poisson { p, n, rate } => {
            let db = model(p, n)?;
            let technique = Technique::Poisson { n, rate };
            let td = TemplateDistribution::new(technique)?;
            let label = case_label(technique, p);
            rows.extend(agreement_rows(&db, &td, &q, &label, fault)?);
            let bound = amplify::poisson_bound(&db, &q, n, rate, &EPSILONS)?;
            for (eps, b) in bound.iter() {
                let direct = oracle_worst(&db, &td, &q, eps)?;
                rows.push(VerifyRow::dominance(
                    format!("{label}/eps={}", fmt_num(eps)),
                    Quantity::PoissonDominance,
                    b,
                    direct,
                ));
            }
            Ok((rows, None))
        }
        Job::Wr { p, n, m } => {
            let db = model(p, n)?;
            let technique = Technique::WithReplacement { n, m };
            let td = TemplateDistribution::new(technique)?;
            let label = case_label(technique, p);
            if m <= n {
                rows.extend(agreement_rows(&db, &td, &q, &label, fault)?);
            }
            if n > WR_MAX_N {
                return Ok((rows, None));
            }
            match amplify::wr_bound_detailed(&db, &q, n, m, &EPSILONS) {
                Ok(bound) => {
                    for (eps, b) in bound.curve.iter() {
                        let direct = oracle_worst(&db, &td, &q, b.eps_prime)?;
                        let weights: Vec<String> = bound
                            .terms
                            .iter()
                            .map(|t| format!("{}:{}", t.k, fmt_num(t.weight)))
                            .collect();
                        rows.push(VerifyRow::dominance(
                            format!("{label}/eps={}/k-weights={}", fmt_num(eps), weights.join(";")),
                            Quantity::WrDominance,
                            b.delta_prime,
                            direct,
                        ));
                    }
                    Ok((rows, None))
                }
                Err(e @ Error::NotSamplable { .. }) => {
                    let bound = amplify::wr_bound_unchecked(&db, &q, n, m, &EPSILONS)?;
                    let mut unchecked_dominates = true;
                    for (_, b) in bound.curve.iter() {
                        let direct = oracle_worst(&db, &td, &q, b.eps_prime)?;
                        unchecked_dominates &= direct <= b.delta_prime + DOMINANCE_TOLERANCE;
                    }
                    Ok((
                        rows,
                        Some(Refusal {
                            case: label,
                            reason: e.to_string(),
                            unchecked_dominates,
                        }),
                    ))
                }
                Err(e) => Err(e),
            }
        }
    }
}

fn jobs(max_n: usize) -> Vec<Job> {
    let mut jobs = Vec::new();
    for &p in &BERNOULLI_PS {
        for n in 1..=max_n {
            for m in 1..=n {
                jobs.push(Job::Wor { p, n, m });
            }
            for &rate in &POISSON_RATES {
                jobs.push(Job::Poisson { p, n, rate });
            }
            let wr_m = if n <= WR_MAX_N { WR_MAX_M.max(n) } else { n };
            for m in 1..=wr_m {
                jobs.push(Job::Wr { p, n, m });
            }
        }
    }
    jobs
}

/// Run the whole matrix. Rows come back in a fixed order.
pub fn run(opts: VerifyOptions) -> Result<VerifyReport> {
    let results = par::try_map(&jobs(opts.max_n), |&j| run_job(j, opts.inject_fault))?;
    let mut report = VerifyReport::default();
    for (rows, refusal) in results {
        report.rows.extend(rows);
        report.refusals.extend(refusal);
    }
    Ok(report)
}
