//! Gauss–Legendre rules, adaptive integration and the Black–Scholes oracle.

use std::f64::consts::{PI, SQRT_2};
use std::sync::OnceLock;

use crate::error::{Error, Result};

use super::payoff::Payoff;

pub const BS_NODES: usize = 129;
const Z_RANGE: f64 = 10.0;

/// Nodes and weights on [−1, 1], by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl15() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(15))
}

fn bs_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(BS_NODES))
}

fn apply_rule(rule: &(Vec<f64>, Vec<f64>), f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    rule.0.iter().zip(&rule.1).map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h
}

/// Adaptive bisection with a 15-point rule, comparing each panel to its halves.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let rule = gl15();
    let mut stack = vec![(a, b, apply_rule(rule, &f, a, b), 0u32)];
    let mut total = 0.0;
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = apply_rule(rule, &f, lo, mid);
        let right = apply_rule(rule, &f, mid, hi);
        if !(left + right).is_finite() {
            return Err(Error::QuadratureFailure);
        }
        let width = (hi - lo).abs() / (b - a).abs();
        if (left + right - whole).abs() <= tol * width.max(1e-3) || depth >= 40 {
            if depth >= 40 {
                return Err(Error::QuadratureFailure);
            }
            total += left + right;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    Ok(total)
}

/// Standard normal distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// e^{−rT} N(d₂) for the digital call 1{S_T > K}.
pub fn bs_digital_call(s: f64, strike: f64, sigma: f64, r: f64, t: f64) -> f64 {
    let d2 = ((s / strike).ln() + (r - 0.5 * sigma * sigma) * t) / (sigma * t.sqrt());
    (-r * t).exp() * norm_cdf(d2)
}

/// e^{−rT} E[Φ(S_T)] under the lognormal law; closed form for digitals,
/// piecewise Gauss–Legendre in the normal variable otherwise.
pub fn bs_price(payoff: &Payoff, s: f64, sigma: f64, r: f64, t: f64) -> Result<f64> {
    if !(s > 0.0 && sigma >= 0.0 && t >= 0.0) {
        return Err(Error::InvalidParameter("Black-Scholes needs s > 0, sigma >= 0, T >= 0".into()));
    }
    if let Payoff::Digital { strike } = *payoff {
        if sigma > 0.0 && t > 0.0 {
            return Ok(bs_digital_call(s, strike, sigma, r, t));
        }
    }
    bs_price_quadrature(payoff, s, sigma, r, t)
}

pub fn bs_price_quadrature(payoff: &Payoff, s: f64, sigma: f64, r: f64, t: f64) -> Result<f64> {
    let disc = (-r * t).exp();
    let vol = sigma * t.sqrt();
    let drift = (r - 0.5 * sigma * sigma) * t;
    if vol == 0.0 {
        return Ok(disc * payoff.value(s * drift.exp()));
    }
    let mut cuts = vec![-Z_RANGE];
    for k in payoff.breakpoints() {
        let z = ((k / s).ln() - drift) / vol;
        if z > -Z_RANGE && z < Z_RANGE {
            cuts.push(z);
        }
    }
    cuts.push(Z_RANGE);
    cuts.sort_by(f64::total_cmp);
    let f = |z: f64| payoff.value(s * (drift + vol * z).exp()) * norm_pdf(z);
    let total: f64 = cuts.windows(2).map(|w| apply_rule(bs_rule(), &f, w[0], w[1])).sum();
    if !total.is_finite() {
        return Err(Error::QuadratureFailure);
    }
    Ok(disc * total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rules_integrate_polynomials() {
        for n in [1, 2, 5, 15, 129] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13, "n={n}");
            let even = 2 * n - 2;
            let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(even as i32)).sum();
            assert!((approx - 2.0 / (even as f64 + 1.0)).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn adaptive_integration() {
        let v = integrate(|x| x.sin(), 0.0, PI, 1e-14).unwrap();
        assert!((v - 2.0).abs() < 1e-13);
        let v = integrate(|x| (x - 0.3).abs(), 0.0, 1.0, 1e-13).unwrap();
        assert!((v - 0.29).abs() < 1e-11);
        assert!(integrate(|x| 1.0 / x, 0.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn quadrature_matches_digital_closed_form() {
        for (s, k) in [(100.0, 100.0), (100.0, 90.0), (1.0, 1.3)] {
            let p = Payoff::Digital { strike: k };
            let q = bs_price_quadrature(&p, s, 0.2, 0.05, 1.0).unwrap();
            assert!((q - bs_digital_call(s, k, 0.2, 0.05, 1.0)).abs() < 1e-13, "{s} {k}");
        }
    }

    #[test]
    fn put_matches_closed_form() {
        let (s, k, sig, r, t) = (1.0, 1.1, 0.25, 0.03, 2.0);
        let put = bs_price(&Payoff::Put { strike: k }, s, sig, r, t).unwrap();
        let d1 = ((s / k).ln() + (r + 0.5 * sig * sig) * t) / (sig * t.sqrt());
        let d2 = d1 - sig * t.sqrt();
        let exact = k * (-r * t).exp() * norm_cdf(-d2) - s * norm_cdf(-d1);
        assert!((put - exact).abs() < 1e-13);
    }

    #[test]
    fn degenerate_volatility() {
        let p = Payoff::Digital { strike: 0.9 };
        let v = bs_price(&p, 1.0, 0.0, 0.05, 1.0).unwrap();
        assert!((v - (-0.05f64).exp()).abs() < 1e-15);
        let small = bs_price(&p, 1.0, 1e-4, 0.05, 1.0).unwrap();
        assert!((small - (-0.05f64).exp()).abs() < 1e-12);
    }
}
