use serde::Serialize;

use crate::error::{Error, Result};

use super::lattice::{series_price, DEFAULT_TAIL_TOL};
use super::model::JumpModel;
use super::payoff::Payoff;
use super::quad::integrate;

/// Absolute allowance for rounding when a bound is exactly zero.
pub const ROUND_SLACK: f64 = 1e-14;

/// Sup bounds of the slow rate r and of r′ on the relevant range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateBounds {
    pub r_sup: f64,
    pub rprime_sup: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WkbDiscount {
    pub exact: f64,
    pub frozen: f64,
    pub delta: f64,
    pub bound: f64,
    pub holds: bool,
}

/// exp(‖r‖∞(T−t))·(ε/2)·‖r′‖∞·(T−t)²
pub fn wkb_delta_bound(bounds: RateBounds, t: f64, t_end: f64, eps: f64) -> f64 {
    let span = t_end - t;
    (bounds.r_sup * span).exp() * 0.5 * eps * bounds.rprime_sup * span * span
}

fn check_args(t: f64, t_end: f64, eps: f64) -> Result<()> {
    if !(0.0 <= t && t <= t_end && t_end.is_finite()) {
        return Err(Error::BadTimePair { s: t, t: t_end });
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0, 1], got {eps}")));
    }
    Ok(())
}

/// Exact and frozen-rate discount factors for the slowed rate u ↦ r(εu).
pub fn wkb_discount(r_fn: &dyn Fn(f64) -> f64, bounds: RateBounds, t: f64, t_end: f64, eps: f64) -> Result<WkbDiscount> {
    check_args(t, t_end, eps)?;
    let integral = integrate(|u| r_fn(eps * u), t, t_end, 1e-15 * (1.0 + t_end - t))?;
    let exact = (-integral).exp();
    let frozen = (-r_fn(eps * t) * (t_end - t)).exp();
    if !(exact.is_finite() && frozen.is_finite() && frozen > 0.0) {
        return Err(Error::QuadratureFailure);
    }
    let delta = exact / frozen - 1.0;
    let bound = wkb_delta_bound(bounds, t, t_end, eps);
    Ok(WkbDiscount { exact, frozen, delta, bound, holds: delta.abs() <= bound + ROUND_SLACK })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WkbGap {
    pub exact_price: f64,
    pub frozen_price: f64,
    pub gap: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Term-structure price against the frozen-rate price at s.
#[allow(clippy::too_many_arguments)]
pub fn wkb_value_gap(
    model: &JumpModel,
    payoff: &Payoff,
    r_fn: &dyn Fn(f64) -> f64,
    bounds: RateBounds,
    t: f64,
    t_end: f64,
    eps: f64,
    s: f64,
) -> Result<WkbGap> {
    let d = wkb_discount(r_fn, bounds, t, t_end, eps)?;
    // the rate is deterministic, so both prices factor through the undiscounted expectation
    let m = series_price(&model.with_rate(0.0), payoff, t_end - t, s, DEFAULT_TAIL_TOL)?.value;
    let exact_price = d.exact * m;
    let frozen_price = d.frozen * m;
    let gap = (exact_price - frozen_price).abs();
    let bound = d.bound * payoff.sup_norm();
    Ok(WkbGap { exact_price, frozen_price, gap, bound, holds: gap <= bound + ROUND_SLACK })
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINEAR: RateBounds = RateBounds { r_sup: 0.05, rprime_sup: 0.02 };

    fn linear(u: f64) -> f64 {
        0.03 + 0.02 * u
    }

    #[test]
    fn constant_rate() {
        let d = wkb_discount(&|_| 0.04, RateBounds { r_sup: 0.04, rprime_sup: 0.0 }, 0.2, 1.0, 0.5).unwrap();
        assert!(d.delta.abs() < 1e-15 && d.bound == 0.0 && d.holds);
    }

    #[test]
    fn equal_times() {
        let d = wkb_discount(&linear, LINEAR, 0.7, 0.7, 0.1).unwrap();
        assert_eq!((d.delta, d.bound), (0.0, 0.0));
    }

    #[test]
    fn linear_rate_within_bound() {
        for eps in [1.0, 0.1, 0.01] {
            for (t, te) in [(0.0, 1.0), (0.25, 0.75), (0.5, 1.0)] {
                let d = wkb_discount(&linear, LINEAR, t, te, eps).unwrap();
                // closed form: ∫ r(εu) du = 0.03(T−t) + 0.01ε(T²−t²)
                let exact = (-(0.03 * (te - t) + 0.01 * eps * (te * te - t * t))).exp();
                assert!((d.exact - exact).abs() < 1e-15);
                assert!(d.holds, "{eps} {t} {te}: {d:?}");
            }
        }
    }

    #[test]
    fn value_gap_scaling() {
        let m = JumpModel::symmetric_pm1(0.1, 4.0, 0.0).unwrap();
        let one = Payoff::Constant { value: 1.0 };
        let two = Payoff::Constant { value: 2.0 };
        let a = wkb_value_gap(&m, &one, &linear, LINEAR, 0.0, 1.0, 0.1, 1.0).unwrap();
        let b = wkb_value_gap(&m, &one, &linear, LINEAR, 0.0, 1.0, 0.05, 1.0).unwrap();
        let c = wkb_value_gap(&m, &two, &linear, LINEAR, 0.0, 1.0, 0.1, 1.0).unwrap();
        assert!(a.holds && b.holds && c.holds);
        assert!((b.bound - 0.5 * a.bound).abs() < 1e-15 && b.gap < a.gap);
        assert!((c.bound - 2.0 * a.bound).abs() < 1e-15);
        let flat = wkb_value_gap(&m, &Payoff::Digital { strike: 1.0 }, &|_| 0.03, LINEAR, 0.0, 1.0, 0.1, 1.0).unwrap();
        assert!(flat.gap <= 1e-12);
    }
}
