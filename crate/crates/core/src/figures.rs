//! Figure data for property (counting) queries over i.i.d. Bernoulli
//! entries, computed with the convolution fast path.

use crate::amplify;
use crate::dist::{Pmf, Query};
use crate::error::Result;
use crate::fmt_num;
use crate::iid;
use crate::par;

pub const FIG1_EPSILONS: [f64; 3] = [1.0, 0.3, 0.1];
pub const RATIO_EPSILONS: [f64; 4] = [0.1, 0.075, 0.05, 0.025];
pub const FIG2_N: usize = 1000;
pub const FIG3_N: usize = 100;

/// n = 10, 20, …, 200.
pub fn fig1_sizes() -> Vec<usize> {
    (1..=20).map(|i| 10 * i).collect()
}

/// λ = 0.1, 0.2, …, 1.0.
pub fn default_rates() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

/// One curve of a figure: x values against y values for a fixed ε.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub epsilon: f64,
    pub x_name: &'static str,
    pub y_name: &'static str,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},{}\n", self.x_name, self.y_name);
        for (x, y) in &self.points {
            out.push_str(&format!("{},{}\n", fmt_num(*x), fmt_num(*y)));
        }
        out
    }
}

/// Φ of the counting query against database size, one series per ε.
pub fn fig1(p: f64, sizes: &[usize], epsilons: &[f64]) -> Result<Vec<Series>> {
    let entry = Pmf::bernoulli(p)?;
    let q = Query::count();
    let mut grid = epsilons.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let curves = iid::phi_curves(&entry, &q, sizes, &grid)?;
    Ok(epsilons
        .iter()
        .map(|&e| Series {
            epsilon: e,
            x_name: "n",
            y_name: "delta",
            points: sizes
                .iter()
                .zip(&curves)
                .map(|(&n, c)| (n as f64, c.at(e).expect("ε is on the grid")))
                .collect(),
        })
        .collect())
}

/// Sample size for rate λ, at least 1.
pub fn sample_size(n: usize, rate: f64) -> usize {
    ((rate * n as f64).round() as usize).clamp(1, n)
}

/// Without-replacement viability ratio against λ = m/n, one series per ε.
pub fn fig2(p: f64, n: usize, rates: &[f64], epsilons: &[f64]) -> Result<Vec<Series>> {
    let entry = Pmf::bernoulli(p)?;
    let q = Query::count();
    let jobs: Vec<(f64, f64)> = epsilons
        .iter()
        .flat_map(|&e| rates.iter().map(move |&r| (e, r)))
        .collect();
    let ratios = par::try_map(&jobs, |&(e, r)| {
        amplify::viability_ratio(&entry, &q, n, sample_size(n, r), e)
    })?;
    Ok(collect_series(epsilons, rates, &ratios))
}

/// Poisson ratio δ*(ε) / Φ_n(ε) against λ, one series per ε.
pub fn fig3(p: f64, n: usize, rates: &[f64], epsilons: &[f64]) -> Result<Vec<Series>> {
    let entry = Pmf::bernoulli(p)?;
    let q = Query::count();
    let mut grid = epsilons.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let phi = iid::phi_curve(&entry, &q, n, &grid)?;
    let stars = par::try_map(rates, |&r| amplify::poisson_bound_iid(&entry, &q, n, r, &grid))?;
    let mut ratios = Vec::with_capacity(epsilons.len() * rates.len());
    for &e in epsilons {
        let denom = phi.at(e).expect("ε is on the grid");
        if denom == 0.0 {
            return Err(crate::Error::ZeroDenominator(format!(
                "Φ of the size-{n} model at ε={e} is 0"
            )));
        }
        for star in &stars {
            ratios.push(star.at(e).expect("ε is on the grid") / denom);
        }
    }
    Ok(collect_series(epsilons, rates, &ratios))
}

fn collect_series(epsilons: &[f64], rates: &[f64], ratios: &[f64]) -> Vec<Series> {
    epsilons
        .iter()
        .zip(ratios.chunks(rates.len()))
        .map(|(&e, chunk)| Series {
            epsilon: e,
            x_name: "lambda",
            y_name: "ratio",
            points: rates.iter().copied().zip(chunk.iter().copied()).collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig1_shape() {
        let s = fig1(0.5, &[10, 20, 30], &[1.0, 0.1]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].points.len(), 3);
        assert!(s[0].to_csv().starts_with("n,delta\n10,"));
    }

    #[test]
    fn ratio_is_one_without_subsampling() {
        let s = fig2(0.5, 50, &[0.5, 1.0], &[0.1]).unwrap();
        assert!((s[0].points[1].1 - 1.0).abs() < 1e-12);
        assert!(s[0].points[0].1 < 1.0);
        let s = fig3(0.5, 20, &[0.5, 1.0], &[0.1]).unwrap();
        assert!((s[0].points[1].1 - 1.0).abs() < 1e-12);
    }
}
