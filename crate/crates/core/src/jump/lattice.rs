use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::perturb::log_log_slope;
use crate::linalg::{mat_exp_real, RealMatrix};

use super::model::{diffusion_model, JumpModel};
use super::payoff::Payoff;
use super::quad::bs_price;

pub const SERIES_TERM_CAP: usize = 10_000;
pub const LEAK_TOL: f64 = 1e-9;
/// Leak targeted by automatic sizing; tight enough for 1e-10 price agreement.
pub const SIZING_LEAK: f64 = 1e-12;
pub const DEFAULT_TAIL_TOL: f64 = 1e-13;
const WINDOW_MARGIN: usize = 4;

pub(crate) fn poisson_pmf(mu: f64, n: usize) -> f64 {
    if mu == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (-mu + n as f64 * mu.ln() - libm::lgamma(n as f64 + 1.0)).exp()
}

/// P(N > n) for N ~ Poisson(μ), summed upward.
pub(crate) fn poisson_tail(mu: f64, n: usize) -> f64 {
    let mut acc = 0.0;
    let mut j = n + 1;
    loop {
        let p = poisson_pmf(mu, j);
        acc += p;
        if j as f64 > mu && p <= acc * 1e-17 {
            return acc;
        }
        j += 1;
    }
}

/// Sites x₀ + kΔx for |k| ≤ W, centred on a price s₀.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeGrid {
    pub center: f64,
    pub half_width: usize,
}

impl LatticeGrid {
    pub fn new(center: f64, half_width: usize) -> Result<Self> {
        if !(center > 0.0 && center.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid centre must be a positive price, got {center}")));
        }
        Ok(Self { center, half_width })
    }

    /// Starts from W = max_jump·⌈Λτ + 8√(Λτ)⌉ + 4 and widens by one jump
    /// until the leak bound is below SIZING_LEAK.
    pub fn sized_for(model: &JumpModel, tau: f64, center: f64) -> Result<Self> {
        let mu = model.total_intensity() * tau;
        let reach = (mu + 8.0 * mu.sqrt()).ceil() as usize;
        let mut grid = Self::new(center, model.max_jump() * reach + WINDOW_MARGIN)?;
        while grid.leak_bound(model, tau) > SIZING_LEAK {
            grid.half_width += model.max_jump().max(1);
        }
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn center_index(&self) -> usize {
        self.half_width
    }

    pub fn price(&self, model: &JumpModel, index: usize) -> f64 {
        self.center * ((index as f64 - self.half_width as f64) * model.dx()).exp()
    }

    /// Upper bound on the probability that a path started at the centre leaves the window by τ.
    pub fn leak_bound(&self, model: &JumpModel, tau: f64) -> f64 {
        let a = model.max_jump();
        if a == 0 {
            return 0.0;
        }
        let needed = self.half_width / a + 1;
        poisson_tail(model.total_intensity() * tau, needed - 1)
    }
}

/// Windowed generator; transitions leaving the window are dropped (absorbing boundary).
pub fn generator_matrix(model: &JumpModel, grid: &LatticeGrid) -> RealMatrix {
    let n = grid.len();
    let lambda = model.total_intensity();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        data[i * n + i] -= lambda;
        for (&a, &g) in model.gamma() {
            let j = i as i64 + a;
            if j >= 0 && (j as usize) < n {
                data[i * n + j as usize] += g;
            }
        }
    }
    RealMatrix::from_vec(n, data)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeriesPrice {
    pub value: f64,
    pub terms_used: usize,
    pub tail_bound: f64,
}

enum Stop {
    Tail(f64),
    Terms(usize),
}

fn series_core(model: &JumpModel, payoff: &Payoff, tau: f64, s: f64, stop: Stop) -> Result<SeriesPrice> {
    if !(tau >= 0.0 && tau.is_finite()) || !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("series pricing needs tau >= 0 and s > 0, got {tau}, {s}")));
    }
    payoff.validate()?;
    let lambda = model.total_intensity();
    let mu = lambda * tau;
    let disc = (-model.r() * tau).exp();
    let sup = payoff.sup_norm();
    if mu >= SERIES_TERM_CAP as f64 {
        return Err(Error::TailNotConverged { terms: SERIES_TERM_CAP });
    }
    let jumps: Vec<(i64, f64)> = model.gamma().iter().filter(|(_, &g)| g > 0.0).map(|(&a, &g)| (a, g / lambda)).collect();
    let (amin, amax) = jumps.iter().fold((0i64, 0i64), |(lo, hi), &(a, _)| (lo.min(a), hi.max(a)));
    // distribution of the n-jump displacement, offsets lo..lo+len
    let mut dist = vec![1.0];
    let mut lo = 0i64;
    let mut value = 0.0;
    for n in 0..SERIES_TERM_CAP {
        let expect: f64 = dist
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0.0)
            .map(|(k, &p)| p * payoff.value(s * ((lo + k as i64) as f64 * model.dx()).exp()))
            .sum();
        value += poisson_pmf(mu, n) * expect;
        let done = match stop {
            // P(N > n) is not small below the mean, so the tail is only evaluated past it
            Stop::Tail(tol) => n as f64 >= mu && disc * sup * poisson_tail(mu, n) <= tol,
            Stop::Terms(k) => n >= k,
        };
        if done {
            let tail_bound = disc * sup * poisson_tail(mu, n);
            return Ok(SeriesPrice { value: disc * value, terms_used: n + 1, tail_bound });
        }
        let width = (amax - amin) as usize;
        let mut next = vec![0.0; dist.len() + width];
        for (k, &p) in dist.iter().enumerate() {
            for &(a, q) in &jumps {
                next[k + (a - amin) as usize] += p * q;
            }
        }
        dist = next;
        lo += amin;
    }
    Err(Error::TailNotConverged { terms: SERIES_TERM_CAP })
}

/// e^{−rτ} Σ_n P(N_τ = n) E[Φ(s e^{Δx K_n})], truncated once the Poisson tail is below tail_tol.
pub fn series_price(model: &JumpModel, payoff: &Payoff, tau: f64, s: f64, tail_tol: f64) -> Result<SeriesPrice> {
    series_core(model, payoff, tau, s, Stop::Tail(tail_tol))
}

/// Partial sum over exactly n_max + 1 terms.
pub fn series_partial(model: &JumpModel, payoff: &Payoff, tau: f64, s: f64, n_max: usize) -> Result<SeriesPrice> {
    series_core(model, payoff, tau, s, Stop::Terms(n_max))
}

/// e^{−rτ} exp(τL)Φ on the window.
pub fn expm_price(model: &JumpModel, payoff: &Payoff, tau: f64, grid: &LatticeGrid) -> Result<Vec<f64>> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("tau must be >= 0, got {tau}")));
    }
    payoff.validate()?;
    let leak = grid.leak_bound(model, tau);
    if leak > LEAK_TOL {
        return Err(Error::WindowTooNarrow { leak });
    }
    let phi: Vec<f64> = (0..grid.len()).map(|i| payoff.value(grid.price(model, i))).collect();
    if tau == 0.0 {
        return Ok(phi);
    }
    let p = mat_exp_real(&generator_matrix(model, grid).scale(tau))?;
    let disc = (-model.r() * tau).exp();
    Ok(p.apply(&phi).into_iter().map(|v| disc * v).collect())
}

/// Centre value on an automatically sized window.
pub fn expm_price_at(model: &JumpModel, payoff: &Payoff, tau: f64, s: f64) -> Result<f64> {
    let grid = LatticeGrid::sized_for(model, tau, s)?;
    Ok(expm_price(model, payoff, tau, &grid)?[grid.center_index()])
}

/// Max over interior sites and times of |∂_tV + Σγ_α(V(·+α) − V) − rV|,
/// ∂_t = −∂_τ by central differences on a uniform τ grid.
pub fn backward_residual(model: &JumpModel, payoff: &Payoff, tau_grid: &[f64], grid: &LatticeGrid) -> Result<f64> {
    if tau_grid.len() < 3 {
        return Err(Error::InvalidParameter("backward residual needs at least three times".into()));
    }
    let h = tau_grid[1] - tau_grid[0];
    if !(h > 0.0) || tau_grid.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
        return Err(Error::InvalidParameter("time grid must be uniform and increasing".into()));
    }
    let tau_max = *tau_grid.last().unwrap();
    let leak = grid.leak_bound(model, tau_max);
    if leak > LEAK_TOL {
        return Err(Error::WindowTooNarrow { leak });
    }
    let n = grid.len();
    let l = generator_matrix(model, grid);
    let step = mat_exp_real(&l.scale(h))?;
    let r = model.r();
    let decay = (-r * h).exp();
    let mut slices = Vec::with_capacity(tau_grid.len());
    slices.push(expm_price(model, payoff, tau_grid[0], grid)?);
    for j in 1..tau_grid.len() {
        let next: Vec<f64> = step.apply(&slices[j - 1]).into_iter().map(|v| decay * v).collect();
        slices.push(next);
    }
    // sites whose own boundary leak is below LEAK_TOL; the centre always qualifies
    let a = model.max_jump().max(1);
    let mu = model.total_intensity() * tau_max;
    let interior: Vec<usize> = (0..n).filter(|&k| poisson_tail(mu, k.min(n - 1 - k) / a) <= LEAK_TOL).collect();
    let mut worst: f64 = 0.0;
    for j in 1..tau_grid.len() - 1 {
        let lv = l.apply(&slices[j]);
        for &k in &interior {
            let dt = -(slices[j + 1][k] - slices[j - 1][k]) / (2.0 * h);
            worst = worst.max((dt + lv[k] - r * slices[j][k]).abs());
        }
    }
    Ok(worst)
}

/// Σ_n P(N_h = n) m(u)ⁿ with m the jump-size MGF; equals e^{hψ(u)}.
pub fn mgf_series(model: &JumpModel, h: f64, u: f64) -> Result<f64> {
    let lambda = model.total_intensity();
    if lambda == 0.0 || h == 0.0 {
        return Ok(1.0);
    }
    let mu = lambda * h;
    let m: f64 = model.gamma().iter().map(|(&a, &g)| g / lambda * (u * a as f64 * model.dx()).exp()).sum();
    let mut acc = 0.0;
    for n in 0..SERIES_TERM_CAP {
        let term = (-mu + n as f64 * (mu * m).ln() - libm::lgamma(n as f64 + 1.0)).exp();
        acc += term;
        if n as f64 > mu * m && term <= acc * 1e-17 {
            return Ok(acc);
        }
    }
    Err(Error::TailNotConverged { terms: SERIES_TERM_CAP })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    pub lattice: f64,
    pub bs: f64,
    pub abs_error: f64,
}

/// Lattice prices of the nearest-neighbour diffusion approximation against Black–Scholes.
pub fn bs_limit_sweep(sigma: f64, r: f64, t: f64, payoff: &Payoff, deltas: &[f64], s: f64) -> Result<Vec<SweepRow>> {
    let bs = bs_price(payoff, s, sigma, r, t)?;
    deltas
        .par_iter()
        .map(|&delta| {
            let model = diffusion_model(sigma, r, delta)?;
            let lattice = expm_price_at(&model, payoff, t, s)?;
            Ok(SweepRow { delta, lattice, bs, abs_error: (lattice - bs).abs() })
        })
        .collect()
}

/// Errors nonincreasing along the sweep, allowing one step that grows by at most 5%.
pub fn sweep_monotone(rows: &[SweepRow]) -> bool {
    let mut exceptions = 0;
    for w in rows.windows(2) {
        if w[1].abs_error > w[0].abs_error {
            if w[1].abs_error > 1.05 * w[0].abs_error {
                return false;
            }
            exceptions += 1;
        }
    }
    exceptions <= 1
}

/// Fitted log-log slope of abs_error against Δ.
pub fn sweep_order(rows: &[SweepRow]) -> f64 {
    let d: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    let e: Vec<f64> = rows.iter().map(|r| r.abs_error).collect();
    log_log_slope(&d, &e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jump::model::calibrate_rn;
    use std::collections::BTreeMap;

    fn pm1() -> JumpModel {
        calibrate_rn(&BTreeMap::from([(-1, 0.5), (1, 0.5)]), 0.1, 0.05).unwrap()
    }

    const DIGITAL: Payoff = Payoff::Digital { strike: 1.0 };

    #[test]
    fn poisson_helpers() {
        let s: f64 = (0..60).map(|n| poisson_pmf(7.5, n)).sum();
        assert!((s - 1.0).abs() < 1e-14);
        assert!((poisson_tail(7.5, 0) - (1.0 - (-7.5f64).exp())).abs() < 1e-14);
        assert_eq!(poisson_tail(0.0, 0), 0.0);
    }

    #[test]
    fn series_trivial_cases() {
        let m = pm1();
        let v = series_price(&m, &DIGITAL, 0.0, 1.0, 1e-14).unwrap();
        assert_eq!((v.value, v.terms_used), (0.5, 1));
        let c = series_price(&m, &Payoff::Constant { value: 1.0 }, 0.7, 1.0, 1e-14).unwrap();
        assert!((c.value - (-0.05f64 * 0.7).exp()).abs() < 1e-13);
    }

    #[test]
    fn series_agrees_with_expm() {
        let m = pm1();
        for tau in [0.1, 0.5, 1.0] {
            let s = series_price(&m, &DIGITAL, tau, 1.0, 1e-14).unwrap();
            let e = expm_price_at(&m, &DIGITAL, tau, 1.0).unwrap();
            assert!((s.value - e).abs() < 1e-10, "tau={tau}: {} vs {e}", s.value);
        }
    }

    #[test]
    fn tail_bound_dominates_remaining_terms() {
        let m = pm1();
        for n in [2, 5, 10, 20] {
            let a = series_partial(&m, &DIGITAL, 1.0, 1.0, n).unwrap();
            let b = series_partial(&m, &DIGITAL, 1.0, 1.0, n + 10).unwrap();
            assert!((a.value - b.value).abs() <= a.tail_bound, "n={n}");
        }
    }

    #[test]
    fn term_cap() {
        let m = JumpModel::symmetric_pm1(0.01, 20_000.0, 0.0).unwrap();
        assert!(matches!(series_price(&m, &DIGITAL, 1.0, 1.0, 1e-14), Err(Error::TailNotConverged { .. })));
    }

    #[test]
    fn expm_window_checks() {
        let m = pm1();
        let narrow = LatticeGrid::new(1.0, 5).unwrap();
        assert!(matches!(expm_price(&m, &DIGITAL, 1.0, &narrow), Err(Error::WindowTooNarrow { .. })));
        let grid = LatticeGrid::sized_for(&m, 1.0, 1.0).unwrap();
        assert!(grid.leak_bound(&m, 1.0) <= SIZING_LEAK);
        let v0 = expm_price(&m, &DIGITAL, 0.0, &grid).unwrap();
        assert_eq!(v0[grid.center_index()], 0.5);
        assert_eq!(v0[grid.center_index() + 1], 1.0);
        let c = expm_price(&m, &Payoff::Constant { value: 3.0 }, 1.0, &grid).unwrap();
        assert!((c[grid.center_index()] - 3.0 * (-0.05f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn generator_rows_conserve_mass() {
        let m = pm1();
        let grid = LatticeGrid::sized_for(&m, 1.0, 1.0).unwrap();
        let l = generator_matrix(&m, &grid);
        for i in 1..grid.len() - 1 {
            assert!(l.row(i).iter().sum::<f64>().abs() < 1e-12);
        }
        let p = mat_exp_real(&l).unwrap();
        let c = grid.center_index();
        for i in c - 3..=c + 3 {
            assert!((p.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn backward_residual_is_second_order() {
        let m = pm1();
        let grid = LatticeGrid::sized_for(&m, 1.0, 1.0).unwrap();
        let mk = |steps: usize| (0..=steps).map(|j| j as f64 / steps as f64).collect::<Vec<_>>();
        // asymptotic once Λh is well below one
        let coarse = backward_residual(&m, &DIGITAL, &mk(160), &grid).unwrap();
        let fine = backward_residual(&m, &DIGITAL, &mk(320), &grid).unwrap();
        let ratio = coarse / fine;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
        let flat = backward_residual(&m, &Payoff::Constant { value: 1.0 }, &mk(20), &grid).unwrap();
        // central difference of e^{−rτ}: r³h²/6
        assert!(flat < 0.05f64.powi(3) * 0.05f64.powi(2) / 6.0 * 1.01 + 1e-14);
    }

    #[test]
    fn martingale_after_calibration() {
        let m = pm1();
        for h in [0.1, 1.0, 3.0] {
            let v = mgf_series(&m, h, 1.0).unwrap();
            assert!((v * (-m.r() * h).exp() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn sweep_monotonicity_rule() {
        let row = |e: f64| SweepRow { delta: 0.0, lattice: 0.0, bs: 0.0, abs_error: e };
        assert!(sweep_monotone(&[row(4.0), row(2.0), row(2.05), row(1.0)]));
        assert!(!sweep_monotone(&[row(4.0), row(2.0), row(2.2), row(1.0)]));
        assert!(!sweep_monotone(&[row(4.0), row(4.1), row(4.2)]));
    }
}
