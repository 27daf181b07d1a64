//! Piecewise-linear trade-off functions.
//!
//! `T(α)` is the smallest type-II error of a test with type-I error at most
//! `α`. Every function here is convex, nonincreasing, maps [0,1] into [0,1]
//! and vanishes at 1 (the test that never rejects the alternative).

use crate::dist::Pmf;
use crate::divergence::PrivacyCurve;
use crate::error::{Error, Result};
use crate::fmt_num;

const HULL_TOLERANCE: f64 = 1e-12;
const SHAPE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct TradeoffFn {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl TradeoffFn {
    /// Validates convexity, monotonicity, range and the endpoints
    /// `xs[0] = 0`, `xs[last] = 1`, `T(1) = 0`.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidTradeoff(m));
        if xs.len() < 2 || xs.len() != ys.len() {
            return bad(format!(
                "need at least two breakpoints, got {} and {} values",
                xs.len(),
                ys.len()
            ));
        }
        if xs[0].abs() > SHAPE_TOLERANCE || (xs[xs.len() - 1] - 1.0).abs() > SHAPE_TOLERANCE {
            return bad("breakpoints must span [0, 1]".into());
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("breakpoints must be strictly increasing".into());
        }
        if ys
            .iter()
            .any(|y| !(*y >= -SHAPE_TOLERANCE && *y <= 1.0 + SHAPE_TOLERANCE))
        {
            return bad("values must lie in [0, 1]".into());
        }
        if ys[ys.len() - 1].abs() > SHAPE_TOLERANCE {
            return bad(format!("T(1) must be 0, got {}", ys[ys.len() - 1]));
        }
        if ys.windows(2).any(|w| w[1] > w[0] + SHAPE_TOLERANCE) {
            return bad("values must be nonincreasing".into());
        }
        let slopes: Vec<f64> = xs
            .windows(2)
            .zip(ys.windows(2))
            .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
            .collect();
        if slopes
            .windows(2)
            .any(|s| s[1] < s[0] - SHAPE_TOLERANCE * (1.0 + s[0].abs()))
        {
            return bad("function must be convex".into());
        }
        let mut xs = xs;
        let n = xs.len();
        xs[0] = 0.0;
        xs[n - 1] = 1.0;
        let mut ys: Vec<f64> = ys.into_iter().map(|y| y.clamp(0.0, 1.0)).collect();
        ys[n - 1] = 0.0;
        Ok(Self { xs, ys })
    }

    /// Convex closure of a point cloud covering [0, 1].
    pub fn from_points(points: &[(f64, f64)]) -> Result<Self> {
        let hull = lower_hull(points);
        let (xs, ys) = hull.into_iter().unzip();
        Self::new(xs, ys)
    }

    /// T(α) = 1 − α, the function of two identical distributions.
    pub fn identity() -> Self {
        Self {
            xs: vec![0.0, 1.0],
            ys: vec![1.0, 0.0],
        }
    }

    /// T ≡ 0, perfectly distinguishable distributions.
    pub fn zero() -> Self {
        Self {
            xs: vec![0.0, 1.0],
            ys: vec![0.0, 0.0],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    /// Linear interpolation; arguments are clamped into [0, 1].
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let i = self.xs.partition_point(|b| *b <= x);
        if i == 0 {
            return self.ys[0];
        }
        if i == self.xs.len() {
            return self.ys[i - 1];
        }
        let (x0, x1, y0, y1) = (self.xs[i - 1], self.xs[i], self.ys[i - 1], self.ys[i]);
        y0 + (x - x0) / (x1 - x0) * (y1 - y0)
    }

    /// `alpha,t_of_alpha` CSV at the breakpoints.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,t_of_alpha\n");
        for (x, y) in self.points() {
            out.push_str(&format!("{},{}\n", fmt_num(x), fmt_num(y)));
        }
        out
    }
}

/// Lower convex hull (monotone chain) of points sorted by x; for equal x the
/// smaller y is kept.
pub fn lower_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup_by(|b, a| a.0 == b.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross <= HULL_TOLERANCE * (a.0 - o.0).abs().max(p.0 - o.0) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Optimal trade-off between `nu` (null) and `mu` (alternative):
/// T(α) = inf { mu(S) : nu(Sᶜ) ≤ α }, so that
/// hockey_stick(mu, nu, ε) = 1 + T*(−e^ε).
///
/// Neyman–Pearson: starting from S = everything, outcomes leave S in order
/// of increasing likelihood ratio nu/mu, and randomizing between
/// consecutive sets traces the segments.
pub fn tradeoff_from_pmfs(mu: &Pmf, nu: &Pmf) -> TradeoffFn {
    let mut union: Vec<f64> = mu.outcomes().iter().chain(nu.outcomes()).copied().collect();
    union.sort_by(f64::total_cmp);
    union.dedup();
    let mut cells: Vec<(f64, f64)> = union
        .iter()
        .map(|&a| (mu.prob(a), nu.prob(a)))
        .filter(|(p, q)| *p > 0.0 || *q > 0.0)
        .collect();
    // nu/mu ascending, compared by cross multiplication so zeros order cleanly
    cells.sort_by(|a, b| (a.1 * b.0).total_cmp(&(b.1 * a.0)));
    let mut points = Vec::with_capacity(cells.len() + 1);
    let (mut x, mut y) = (0.0, 1.0);
    points.push((x, y));
    for (p, q) in cells {
        x += q;
        y -= p;
        points.push((x, y));
    }
    // absorb summation drift at the final corner
    let last = points.len() - 1;
    points[last] = (1.0, 0.0);
    let points: Vec<(f64, f64)> = points.into_iter().map(|(x, y)| (x.min(1.0), y.max(0.0))).collect();
    TradeoffFn::from_points(&points).expect("Neyman-Pearson curve is a valid trade-off function")
}

/// Convex conjugate T*(y) = sup_{x∈[0,1]} (y·x − T(x)), attained at a
/// breakpoint.
pub fn conjugate(t: &TradeoffFn, y: f64) -> f64 {
    t.points().map(|(x, v)| y * x - v).fold(f64::NEG_INFINITY, f64::max)
}

/// T⁻¹(α) = inf { x : T(x) ≤ α }.
pub fn inverse(t: &TradeoffFn) -> TradeoffFn {
    // first breakpoint where T reaches 0; before it T is strictly decreasing
    let k = t.ys.iter().position(|y| *y <= 0.0).unwrap_or(t.ys.len() - 1);
    let mut pts: Vec<(f64, f64)> = (0..=k).rev().map(|i| (t.ys[i], t.xs[i])).collect();
    if pts.last().map(|p| p.0 < 1.0).unwrap_or(true) {
        pts.push((1.0, 0.0));
    }
    TradeoffFn::from_points(&pts).expect("inverse of a trade-off function is one")
}

/// T_p(x) = p·T(x) + (1 − p)(1 − x).
pub fn p_sample(t: &TradeoffFn, p: f64) -> Result<TradeoffFn> {
    check_probability(p)?;
    let ys = t.points().map(|(x, y)| p * y + (1.0 - p) * (1.0 - x)).collect();
    TradeoffFn::new(t.xs.clone(), ys)
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidRate {
            value: p,
            expected: "[0, 1]",
        })
    }
}

/// Pointwise minimum of two trade-off functions, with breakpoints at both
/// inputs' breakpoints and at every crossing.
pub fn pointwise_min(a: &TradeoffFn, b: &TradeoffFn) -> Vec<(f64, f64)> {
    let mut xs: Vec<f64> = a.xs.iter().chain(&b.xs).copied().collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut pts = Vec::with_capacity(2 * xs.len());
    for w in xs.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let d0 = a.eval(x0) - b.eval(x0);
        let d1 = a.eval(x1) - b.eval(x1);
        pts.push((x0, a.eval(x0).min(b.eval(x0))));
        if d0 * d1 < 0.0 {
            let x = x0 + (x1 - x0) * d0 / (d0 - d1);
            pts.push((x, a.eval(x).min(b.eval(x))));
        }
    }
    pts.push((1.0, 0.0));
    pts
}

/// Ψ_p(T): convex closure of the pointwise minimum of T_p and T_p⁻¹.
pub fn psi_operator(t: &TradeoffFn, p: f64) -> Result<TradeoffFn> {
    let tp = p_sample(t, p)?;
    let inv = inverse(&tp);
    TradeoffFn::from_points(&pointwise_min(&tp, &inv))
}

/// Trade-off function implied by a statistical-privacy curve:
/// T(α) = sup_ε max{0, 1 − Φ(ε) − e^ε·α, e^{−ε}(1 − Φ(ε) − α)}, the sup
/// taken over the curve's grid.
///
/// The supremum of affine functions is computed exactly as their upper
/// envelope on [0, 1].
pub fn sp_to_tradeoff(phi: &PrivacyCurve) -> TradeoffFn {
    let mut lines: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    for (e, d) in phi.iter() {
        let r = 1.0 - d;
        lines.push((-e.exp(), r));
        lines.push((-(-e).exp(), (-e).exp() * r));
    }
    let f = |x: f64| lines.iter().map(|(a, b)| a * x + b).fold(f64::NEG_INFINITY, f64::max);
    let envelope = upper_envelope(&lines);
    let mut xs = vec![0.0, 1.0];
    for w in envelope.windows(2) {
        let ((a1, b1), (a2, b2)) = (w[0], w[1]);
        let x = (b1 - b2) / (a2 - a1);
        if x > 0.0 && x < 1.0 {
            xs.push(x);
        }
    }
    let points: Vec<(f64, f64)> = xs.into_iter().map(|x| (x, f(x).clamp(0.0, 1.0))).collect();
    TradeoffFn::from_points(&points).expect("envelope of affine minorants is a trade-off function")
}

/// Lines of the upper envelope over the real line, in increasing slope.
fn upper_envelope(lines: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut ls = lines.to_vec();
    ls.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    ls.dedup_by(|b, a| a.0 == b.0);
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for l in ls {
        while hull.len() >= 2 {
            let (l1, l2) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // l2 is useless if l1 and l meet no later than l1 and l2
            let x12 = (l1.1 - l2.1) / (l2.0 - l1.0);
            let x13 = (l1.1 - l.1) / (l.0 - l1.0);
            if x13 <= x12 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(l);
    }
    hull
}

/// δ(ε) = 1 + T*(−e^ε), clamped to [0, 1].
pub fn tradeoff_to_sp(t: &TradeoffFn, eps: f64) -> Result<f64> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::NegativeEpsilon(eps));
    }
    Ok((1.0 + conjugate(t, -eps.exp())).clamp(0.0, 1.0))
}

/// Ψ_{m/n}(T), the trade-off function after sampling m of n without
/// replacement.
pub fn subsampled_tradeoff(t: &TradeoffFn, n: usize, m: usize) -> Result<TradeoffFn> {
    if m == 0 || m > n {
        return Err(Error::InvalidSize(format!("need 1 <= m <= n, got n={n}, m={m}")));
    }
    psi_operator(t, m as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::hockey_stick;

    fn pmf(pairs: &[(f64, f64)]) -> Pmf {
        Pmf::from_pairs(pairs.iter().copied()).unwrap()
    }

    fn close(a: &TradeoffFn, b: &TradeoffFn) -> bool {
        (0..=200).all(|i| {
            let x = i as f64 / 200.0;
            (a.eval(x) - b.eval(x)).abs() < 1e-12
        })
    }

    #[test]
    fn validation() {
        assert!(TradeoffFn::new(vec![0.0, 1.0], vec![1.0, 0.0]).is_ok());
        assert!(TradeoffFn::new(vec![0.0, 0.5, 1.0], vec![1.0, 0.8, 0.0]).is_err());
        assert!(TradeoffFn::new(vec![0.0, 1.0], vec![0.0, 0.5]).is_err());
        assert!(TradeoffFn::new(vec![0.0, 1.0], vec![1.5, 0.0]).is_err());
        assert!(TradeoffFn::new(vec![0.1, 1.0], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn from_pmfs_examples() {
        let mu = pmf(&[(0.0, 0.75), (1.0, 0.25)]);
        let nu = pmf(&[(0.0, 0.25), (1.0, 0.75)]);
        assert!(close(&tradeoff_from_pmfs(&mu, &mu), &TradeoffFn::identity()));
        let far = pmf(&[(5.0, 1.0)]);
        assert!(close(&tradeoff_from_pmfs(&mu, &far), &TradeoffFn::zero()));
        let t = tradeoff_from_pmfs(&mu, &nu);
        assert_eq!(t.breakpoints(), &[0.0, 0.25, 1.0]);
        assert!((t.eval(0.0) - 1.0).abs() < 1e-15);
        assert!((t.eval(0.25) - 0.25).abs() < 1e-15);
        assert_eq!(t.eval(1.0), 0.0);
        for eps in [0.0, 0.5, 3f64.ln(), 2.0] {
            let hs = hockey_stick(&mu, &nu, eps).unwrap();
            assert!((hs - (1.0 + conjugate(&t, -eps.exp()))).abs() < 1e-12);
        }
    }

    #[test]
    fn conjugate_examples() {
        let id = TradeoffFn::identity();
        for eps in [0.0, 0.5, 2.0] {
            assert!((conjugate(&id, -f64::exp(eps)) + 1.0).abs() < 1e-15);
            assert_eq!(tradeoff_to_sp(&id, eps).unwrap(), 0.0);
            assert_eq!(tradeoff_to_sp(&TradeoffFn::zero(), eps).unwrap(), 1.0);
        }
        assert_eq!(conjugate(&id, 0.0), 0.0);
        assert_eq!(conjugate(&TradeoffFn::zero(), 0.7), 0.7);
    }

    #[test]
    fn inverse_examples() {
        assert!(close(&inverse(&TradeoffFn::identity()), &TradeoffFn::identity()));
        assert!(close(&inverse(&TradeoffFn::zero()), &TradeoffFn::zero()));
        let t = TradeoffFn::new(vec![0.0, 0.25, 1.0], vec![0.75, 0.25, 0.0]).unwrap();
        let inv = inverse(&t);
        assert!((inv.eval(0.25) - 0.25).abs() < 1e-15);
        assert!(close(&inverse(&inv), &t));
        assert_eq!(inv.eval(0.9), 0.0);
    }

    #[test]
    fn p_sample_examples() {
        let t = TradeoffFn::new(vec![0.0, 0.25, 1.0], vec![0.75, 0.25, 0.0]).unwrap();
        assert!(close(&p_sample(&t, 1.0).unwrap(), &t));
        assert!(close(&p_sample(&t, 0.0).unwrap(), &TradeoffFn::identity()));
        let half = p_sample(&TradeoffFn::zero(), 0.5).unwrap();
        assert!((half.eval(0.2) - 0.4).abs() < 1e-15);
        assert!(p_sample(&t, 1.5).is_err());
    }

    #[test]
    fn psi_examples() {
        let id = TradeoffFn::identity();
        for p in [0.0, 0.3, 1.0] {
            assert!(close(&psi_operator(&id, p).unwrap(), &id));
        }
        let t = TradeoffFn::new(vec![0.0, 0.25, 1.0], vec![0.75, 0.25, 0.0]).unwrap();
        assert!(close(&psi_operator(&t, 0.0).unwrap(), &id));
        // T ≡ 0 at p = 1/2: closure of min(0.5(1−x), max(0, 1−2x)) is max(0, 0.5 − x)
        let psi = psi_operator(&TradeoffFn::zero(), 0.5).unwrap();
        let want = TradeoffFn::new(vec![0.0, 0.5, 1.0], vec![0.5, 0.0, 0.0]).unwrap();
        assert!(close(&psi, &want));
        assert!(close(&subsampled_tradeoff(&TradeoffFn::zero(), 4, 2).unwrap(), &want));
        assert!(subsampled_tradeoff(&id, 2, 3).is_err());
    }

    #[test]
    fn sp_conversion_examples() {
        let grid = vec![0.0, 0.5, 1.0];
        let zero = PrivacyCurve::new(grid.clone(), vec![0.0; 3]).unwrap();
        assert!(close(&sp_to_tradeoff(&zero), &TradeoffFn::identity()));
        let one = PrivacyCurve::new(grid.clone(), vec![1.0; 3]).unwrap();
        assert!(close(&sp_to_tradeoff(&one), &TradeoffFn::zero()));
        let flat = PrivacyCurve::new(grid.clone(), vec![0.2; 3]).unwrap();
        assert!((sp_to_tradeoff(&flat).eval(0.0) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn csv() {
        assert_eq!(TradeoffFn::identity().to_csv(), "alpha,t_of_alpha\n0,1\n1,0\n");
    }
}
