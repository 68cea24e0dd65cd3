//! GKSL generators and the quantum Markov semigroups they generate, with
//! semigroup and conditioned valuation.
//!
//! Observables are vectorised by stacking columns, so X ↦ AXB has matrix Bᵀ ⊗ A.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::cond_exp::ConditionalExpectation;
use crate::error::{Error, Result};
use crate::linalg::random::{random_hermitian, seeded};
use crate::linalg::{choi_matrix, choi_min_eigenvalue, mat_exp, op_norm, ComplexMatrix, C64};
use crate::states::DensityState;

/// Gate on the Markov-compatibility residual before dynamic programming is asserted.
pub const DP_GATE_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct GkslSystem {
    h: ComplexMatrix,
    lindblad: Vec<ComplexMatrix>,
}

impl GkslSystem {
    pub fn new(h: ComplexMatrix, lindblad: Vec<ComplexMatrix>) -> Result<Self> {
        let tol = h.herm_tol();
        let residual = h.hermitian_residual();
        if !(residual <= tol) {
            return Err(Error::NotHermitianHamiltonian { residual });
        }
        for v in &lindblad {
            v.ensure_dim(h.dim())?;
        }
        Ok(Self { h: h.hermitian_part(), lindblad })
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.h
    }

    pub fn lindblad(&self) -> &[ComplexMatrix] {
        &self.lindblad
    }

    /// L(X) = i[H,X] + Σ (V*XV − ½{V*V, X}), applied directly.
    pub fn heisenberg(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::commutator(&self.h, x).scale_c(C64::I);
        for v in &self.lindblad {
            let vv = v.adjoint().matmul(v);
            out += &v.adjoint().matmul(x).matmul(v);
            out -= &ComplexMatrix::anticommutator(&vv, x).scale(0.5);
        }
        out
    }

    pub fn generator(&self) -> Superoperator {
        gksl_generator(self)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QmsJson {
    #[serde(rename = "H")]
    pub h: ComplexMatrix,
    #[serde(default)]
    pub lindblad: Vec<ComplexMatrix>,
    pub r: f64,
}

impl QmsJson {
    pub fn into_system(self) -> Result<(GkslSystem, f64)> {
        if !self.r.is_finite() {
            return Err(Error::Parse { path: "r".into(), message: "rate must be finite".into() });
        }
        let sys = GkslSystem::new(self.h, self.lindblad)
            .map_err(|e| Error::Parse { path: "$".into(), message: format!("{}: {e}", e.code()) })?;
        Ok((sys, self.r))
    }
}

pub fn system_from_json_str(s: &str) -> Result<(GkslSystem, f64)> {
    crate::algebra::parse_json::<QmsJson>(s)?.into_system()
}

pub fn vec_matrix(x: &ComplexMatrix) -> Vec<C64> {
    let n = x.dim();
    (0..n * n).map(|k| x[(k % n, k / n)]).collect()
}

pub fn unvec(v: &[C64], n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, |i, j| v[i + j * n])
}

/// n² × n² matrix of a linear map on n × n matrices; the Schrödinger dual is its adjoint.
#[derive(Debug)]
pub struct Superoperator {
    n: usize,
    matrix: ComplexMatrix,
    dual: OnceLock<ComplexMatrix>,
}

impl Clone for Superoperator {
    fn clone(&self) -> Self {
        Self::from_matrix(self.n, self.matrix.clone())
    }
}

impl Superoperator {
    pub fn from_matrix(n: usize, matrix: ComplexMatrix) -> Self {
        Self { n, matrix, dual: OnceLock::new() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dual_matrix(&self) -> &ComplexMatrix {
        self.dual.get_or_init(|| self.matrix.adjoint())
    }

    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        unvec(&self.matrix.apply(&vec_matrix(x)), self.n)
    }

    /// Tr(L†(ρ) X) = Tr(ρ L(X))
    pub fn apply_dual(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        unvec(&self.dual_matrix().apply(&vec_matrix(rho)), self.n)
    }

    pub fn norm(&self) -> f64 {
        op_norm(&self.matrix)
    }

    /// T_t = exp(tL)
    pub fn propagator(&self, t: f64) -> Result<Superoperator> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("semigroup time must be >= 0, got {t}")));
        }
        Ok(Self::from_matrix(self.n, mat_exp(&self.matrix.scale(t))?))
    }
}

pub fn gksl_generator(system: &GkslSystem) -> Superoperator {
    let n = system.dim();
    let id = ComplexMatrix::identity(n);
    let h = system.hamiltonian();
    let mut m = &id.kron(h) - &h.transpose().kron(&id);
    m = m.scale_c(C64::I);
    for v in system.lindblad() {
        let vv = v.adjoint().matmul(v);
        m += &v.transpose().kron(&v.adjoint());
        m -= &id.kron(&vv).scale(0.5);
        m -= &vv.transpose().kron(&id).scale(0.5);
    }
    Superoperator::from_matrix(n, m)
}

pub fn semigroup_apply(generator: &Superoperator, t: f64, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    x.ensure_dim(generator.dim())?;
    Ok(generator.propagator(t)?.apply(x))
}

/// Sample times {0.1, 1, 10}/‖L‖ (or {0.1, 1, 10} when L = 0).
pub fn sample_times(generator: &Superoperator) -> [f64; 3] {
    let norm = generator.norm();
    let unit = if norm > 0.0 { 1.0 / norm } else { 1.0 };
    [0.1 * unit, unit, 10.0 * unit]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InvariantReport {
    pub max_residual: f64,
    pub dual_norm: f64,
}

/// max over units E_ij and sampled t of |Tr(ρ T_t(E_ij)) − Tr(ρ E_ij)|, with ‖L†(ρ)‖.
pub fn invariant_state_check(system: &GkslSystem, state: &DensityState) -> Result<InvariantReport> {
    state.rho().ensure_dim(system.dim())?;
    let l = gksl_generator(system);
    let rho = state.rho();
    let mut worst: f64 = 0.0;
    for t in sample_times(&l) {
        // Tr(ρ T_t(E_ij)) is the (j, i) entry of T_t†(ρ)
        let moved = l.propagator(t)?.apply_dual(rho);
        worst = worst.max((&moved - rho).max_abs());
    }
    Ok(InvariantReport { max_residual: worst, dual_norm: op_norm(&l.apply_dual(rho)) })
}

fn check_times(t: f64, t_end: f64) -> Result<()> {
    if !(0.0 <= t && t <= t_end && t_end.is_finite()) {
        return Err(Error::BadTimePair { s: t, t: t_end });
    }
    Ok(())
}

/// V_t(X_T) = e^{−r(T−t)} T_{T−t}(X_T)
pub fn semigroup_value(system: &GkslSystem, x_end: &ComplexMatrix, t: f64, t_end: f64, r: f64) -> Result<ComplexMatrix> {
    check_times(t, t_end)?;
    x_end.ensure_dim(system.dim())?;
    if t == t_end {
        return Ok(x_end.clone());
    }
    let l = gksl_generator(system);
    Ok(l.propagator(t_end - t)?.apply(x_end).scale((-r * (t_end - t)).exp()))
}

/// Central-difference residual of ∂_tV + (L − r)V = 0 on a uniform grid in [0, T].
pub fn backward_ode_residual(system: &GkslSystem, x_end: &ComplexMatrix, t_end: f64, r: f64, t_grid: &[f64]) -> Result<f64> {
    if t_grid.len() < 3 {
        return Err(Error::InvalidParameter("backward residual needs at least three times".into()));
    }
    let h = t_grid[1] - t_grid[0];
    if !(h > 0.0) || t_grid.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
        return Err(Error::InvalidParameter("time grid must be uniform and increasing".into()));
    }
    let values: Vec<ComplexMatrix> =
        t_grid.iter().map(|&t| semigroup_value(system, x_end, t, t_end, r)).collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for j in 1..values.len() - 1 {
        let dt = (&values[j + 1] - &values[j - 1]).scale(1.0 / (2.0 * h));
        let res = &(&dt + &system.heisenberg(&values[j])) - &values[j].scale(r);
        worst = worst.max(res.max_abs());
    }
    Ok(worst)
}

/// Π_t(X_T) = e^{−r(T−t)} E_t(T_{T−t}(X_T))
pub fn conditioned_value(
    system: &GkslSystem,
    ce: &ConditionalExpectation,
    x_end: &ComplexMatrix,
    t: f64,
    t_end: f64,
    r: f64,
) -> Result<ComplexMatrix> {
    ce.apply(&semigroup_value(system, x_end, t, t_end, r)?)
}

/// max over random Hermitian X of ‖E_s(T_{t−s}(X)) − E_s(T_{t−s}(E_t(X)))‖.
pub fn markov_compat_check(
    system: &GkslSystem,
    ce_s: &ConditionalExpectation,
    ce_t: &ConditionalExpectation,
    gap: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let n = system.dim();
    let prop = gksl_generator(system).propagator(gap)?;
    let mut rng = seeded(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let x = random_hermitian(n, &mut rng);
        let a = ce_s.apply(&prop.apply(&x))?;
        let b = ce_s.apply(&prop.apply(&ce_t.apply(&x)?))?;
        worst = worst.max(op_norm(&(&a - &b)));
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DynamicProgramming {
    pub compat_residual: f64,
    pub residual: f64,
}

/// ‖Π_s(X_T) − e^{−r(t−s)} E_s(T_{t−s}(Π_t(X_T)))‖, asserted only under Markov compatibility.
#[allow(clippy::too_many_arguments)]
pub fn dynamic_programming_check(
    system: &GkslSystem,
    ce_s: &ConditionalExpectation,
    ce_t: &ConditionalExpectation,
    x_end: &ComplexMatrix,
    times: (f64, f64, f64),
    r: f64,
    samples: usize,
    seed: u64,
) -> Result<DynamicProgramming> {
    let (s, t, t_end) = times;
    check_times(s, t)?;
    check_times(t, t_end)?;
    let compat_residual = markov_compat_check(system, ce_s, ce_t, t - s, samples, seed)?;
    if compat_residual > DP_GATE_TOL {
        return Err(Error::CompatibilityGateFailed { residual: compat_residual, gate: DP_GATE_TOL });
    }
    let pi_s = conditioned_value(system, ce_s, x_end, s, t_end, r)?;
    let pi_t = conditioned_value(system, ce_t, x_end, t, t_end, r)?;
    let rolled = conditioned_value(system, ce_s, &pi_t, s, t, r)?;
    Ok(DynamicProgramming { compat_residual, residual: op_norm(&(&pi_s - &rolled)) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SemigroupReport {
    pub generator_unit_residual: f64,
    pub unitality: f64,
    pub choi_min_eigenvalue: f64,
    pub trace_preservation: f64,
    pub semigroup_law: f64,
}

/// Unitality, complete positivity, dual trace preservation and T_{s+t} = T_s T_t at sampled times.
pub fn semigroup_report(system: &GkslSystem, samples: usize, seed: u64) -> Result<SemigroupReport> {
    let n = system.dim();
    let l = gksl_generator(system);
    let id = ComplexMatrix::identity(n);
    let mut rep = SemigroupReport {
        generator_unit_residual: l.apply(&id).max_abs(),
        unitality: 0.0,
        choi_min_eigenvalue: f64::INFINITY,
        trace_preservation: 0.0,
        semigroup_law: 0.0,
    };
    let mut rng = seeded(seed);
    let times = sample_times(&l);
    for (k, &t) in times.iter().enumerate() {
        let p = l.propagator(t)?;
        rep.unitality = rep.unitality.max((&p.apply(&id) - &id).max_abs());
        let choi = choi_matrix(n, |x| Ok(p.apply(x)))?;
        rep.choi_min_eigenvalue = rep.choi_min_eigenvalue.min(choi_min_eigenvalue(&choi)?);
        let s = times[(k + 1) % times.len()];
        let q = l.propagator(s)?;
        let both = l.propagator(s + t)?;
        for _ in 0..samples {
            let rho = crate::linalg::random::random_density(n, &mut rng);
            rep.trace_preservation = rep.trace_preservation.max((p.apply_dual(&rho).trace() - C64::ONE).norm());
            let x = random_hermitian(n, &mut rng);
            rep.semigroup_law = rep.semigroup_law.max(op_norm(&(&both.apply(&x) - &q.apply(&p.apply(&x)))));
        }
    }
    Ok(rep)
}

/// Amplitude damping V = √γ|0⟩⟨1| with H = (ω/2)σz.
pub fn damping_system(gamma: f64, omega: f64) -> GkslSystem {
    let v = ComplexMatrix::unit(2, 0, 1).scale(gamma.sqrt());
    GkslSystem::new(ComplexMatrix::pauli_z().scale(0.5 * omega), vec![v]).expect("damping system is valid")
}

/// Dimension-4 system whose H and normal V leave the blocks {0,1} and {2,3} invariant.
pub fn block_system() -> GkslSystem {
    let h = ComplexMatrix::from_rows(&[
        vec![C64::new(0.7, 0.0), C64::new(0.2, -0.3), C64::ZERO, C64::ZERO],
        vec![C64::new(0.2, 0.3), C64::new(-0.4, 0.0), C64::ZERO, C64::ZERO],
        vec![C64::ZERO, C64::ZERO, C64::new(0.1, 0.0), C64::new(0.5, 0.0)],
        vec![C64::ZERO, C64::ZERO, C64::new(0.5, 0.0), C64::new(0.3, 0.0)],
    ])
    .expect("square");
    let v1 = ComplexMatrix::diag(&[0.6, -0.6, 0.0, 0.0]);
    let v2 = ComplexMatrix::real(&[&[0.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 0.4], &[0.0, 0.0, 0.4, 0.0]]);
    GkslSystem::new(h, vec![v1, v2]).expect("block system is valid")
}
