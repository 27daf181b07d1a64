//! Exact statistical-privacy accounting for finite discrete database
//! distributions.
//!
//! The crate computes privacy curves Φ(ε) for symmetric queries over
//! databases of independent entries, evaluates the amplification bounds for
//! sampling without replacement, Poisson sampling and sampling with
//! replacement, converts between (ε, δ)-curves and trade-off functions, and
//! ships a brute-force oracle that checks every bound by joint enumeration.
//!
//! Modules, bottom-up:
//!
//! - [`dist`]: finite pmfs, product database models, conditioning, pushforward
//! - [`divergence`]: privacy loss, hockey-stick divergence, Φ, half-line check
//! - [`sampling`]: templates, the three techniques, couplings, the sampling
//!   privacy curve
//! - [`iid`]: convolution fast path for sum/count/mean over i.i.d. entries
//! - [`amplify`]: the amplification bounds
//! - [`tradeoff`]: piecewise-linear trade-off function calculus
//! - [`oracle`]: independent enumeration ground truth
//! - [`verify`], [`figures`]: the verification matrix and figure data used by
//!   the CLI

// `!(x >= 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amplify;
pub mod dist;
pub mod divergence;
pub mod error;
pub mod figures;
pub mod iid;
pub mod oracle;
pub mod par;
pub mod sampling;
pub mod tradeoff;
pub mod verify;

pub use amplify::{AmplifiedCurve, AmplifiedParams};
pub use dist::{condition, gamma_distance, pushforward, DatabaseModel, Pmf, Query, QueryKind};
pub use divergence::{hockey_stick, plrv, sp_curve, PrivacyCurve};
pub use error::{Error, Result};
pub use sampling::{Selector, Technique, Template, TemplateDistribution};
pub use tradeoff::TradeoffFn;

/// Shortest decimal that round-trips to the same `f64`. Integral values
/// print without a fractional part and very small or large magnitudes use
/// exponent notation.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() || x.is_infinite() {
        return format!("{x}");
    }
    let a = x.abs();
    if (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::fmt_num;

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(3.0), "3");
        assert_eq!(fmt_num(0.1 + 0.2), "0.30000000000000004");
        assert_eq!(fmt_num(1.2888752843567745e-52), "1.2888752843567745e-52");
        for x in [1e-7, 0.405465108108164, 123456.789, 2.5e20] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
    }
}
