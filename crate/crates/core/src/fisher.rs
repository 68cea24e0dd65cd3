//! Conjugate variables, Fisher information and Cramér–Rao inequalities over an
//! abelian range algebra D with conditional expectation E_D.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::ProjectivePartition;
use crate::cond_exp::{best_predictor, ConditionalExpectation};
use crate::error::{Error, Result};
use crate::linalg::random::{random_matrix, seeded};
use crate::linalg::{min_eigenvalue, op_norm, ComplexMatrix, C64};
use crate::states::DensityState;

/// Certification tolerance for analytic pairs.
pub const CJ_TOL_ANALYTIC: f64 = 1e-6;
/// Certification tolerance for sampled semicircular pairs.
pub const CJ_TOL_MONTE_CARLO: f64 = 0.1;
/// Smallest admissible Fisher eigenvalue for the operator form.
pub const INV_TOL: f64 = 1e-12;
/// Order slack on top of the certification residual.
pub const ORDER_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct ConjugatePair {
    x: ComplexMatrix,
    j: ComplexMatrix,
    ce: ConditionalExpectation,
    cj_tol: f64,
    residual: f64,
}

impl ConjugatePair {
    pub fn new(x: ComplexMatrix, j: ComplexMatrix, ce: ConditionalExpectation, cj_tol: f64) -> Result<Self> {
        x.ensure_dim(ce.dim())?;
        j.ensure_dim(ce.dim())?;
        x.ensure_hermitian()?;
        let x = x.hermitian_part();
        let residual = identity_residual(&x, &j, &ce)?;
        Ok(Self { x, j, ce, cj_tol, residual })
    }

    pub fn x(&self) -> &ComplexMatrix {
        &self.x
    }

    pub fn j(&self) -> &ComplexMatrix {
        &self.j
    }

    pub fn ce(&self) -> &ConditionalExpectation {
        &self.ce
    }

    pub fn cj_tol(&self) -> f64 {
        self.cj_tol
    }

    pub fn is_certified(&self) -> bool {
        self.residual <= self.cj_tol
    }

    /// X ↦ cX, J ↦ J/c
    pub fn rescaled(&self, c: f64) -> Result<Self> {
        Self::new(self.x.scale(c), self.j.scale(1.0 / c), self.ce.clone(), self.cj_tol)
    }

    fn ensure_certified(&self) -> Result<()> {
        if self.is_certified() {
            Ok(())
        } else {
            Err(Error::UncertifiedPair { residual: self.residual, tol: self.cj_tol })
        }
    }
}

fn identity_residual(x: &ComplexMatrix, j: &ComplexMatrix, ce: &ConditionalExpectation) -> Result<f64> {
    let e = ce.apply(&j.adjoint().matmul(x))?;
    Ok(op_norm(&(&e - &ComplexMatrix::identity(x.dim()))))
}

/// ‖E_D(J*X) − I‖_op
pub fn conjugate_identity_check(pair: &ConjugatePair) -> f64 {
    pair.residual
}

/// E_D(J*J)
pub fn fisher_information(pair: &ConjugatePair) -> Result<ComplexMatrix> {
    pair.ensure_certified()?;
    pair.ce.apply(&pair.j.adjoint().matmul(&pair.j))
}

/// Largest range coefficient of E_D(Y) for Y ⪰ 0, i.e. ‖E_D(Y)‖_op.
fn range_norm(ce: &ConditionalExpectation, y: &ComplexMatrix) -> Result<f64> {
    Ok(ce.coefficients(y)?.iter().map(|c| c.norm()).fold(0.0, f64::max))
}

#[derive(Clone, Debug, Serialize)]
pub struct CramerRao {
    pub identity_residual: f64,
    pub cj_tol: f64,
    /// Φ · ‖E_D(X²)‖, compared with I
    pub lhs: ComplexMatrix,
    pub second_moment_norm: f64,
    pub norm_form_min_eig: f64,
    pub norm_form_holds: bool,
    /// E_D((X − E_D X)²) − I_D^{-1}, blockwise
    pub operator_form_min: f64,
    pub operator_form_holds: bool,
    /// ‖E_D((X − E_D X)²) − I_D^{-1}‖_op, zero at saturation
    pub equality_gap: f64,
}

pub fn cramer_rao_check(pair: &ConjugatePair) -> Result<CramerRao> {
    let fisher = fisher_information(pair)?;
    let ce = &pair.ce;
    let n = pair.x.dim();
    let id = ComplexMatrix::identity(n);
    let second_moment_norm = range_norm(ce, &pair.x.matmul(&pair.x))?;
    let lhs = fisher.scale(second_moment_norm);
    let tol = ORDER_TOL + 3.0 * pair.residual;
    let norm_form_min_eig = min_eigenvalue(&(&lhs - &id))?;

    // the range is abelian, so the operator order is checked coefficientwise
    let fisher_coeffs: Vec<f64> = ce.coefficients(&fisher)?.iter().map(|c| c.re).collect();
    let min_fisher = fisher_coeffs.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_fisher >= INV_TOL) {
        return Err(Error::SingularFisherInfo { min_eig: min_fisher });
    }
    let centred = &pair.x - &ce.apply(&pair.x)?;
    let variance: Vec<f64> = ce.coefficients(&centred.matmul(&centred))?.iter().map(|c| c.re).collect();
    let diffs: Vec<f64> = variance.iter().zip(&fisher_coeffs).map(|(v, f)| v - 1.0 / f).collect();
    let operator_form_min = diffs.iter().copied().fold(f64::INFINITY, f64::min);
    let equality_gap = diffs.iter().map(|d| d.abs()).fold(0.0, f64::max);
    Ok(CramerRao {
        identity_residual: pair.residual,
        cj_tol: pair.cj_tol,
        lhs,
        second_moment_norm,
        norm_form_min_eig,
        norm_form_holds: norm_form_min_eig >= -tol,
        operator_form_min,
        operator_form_holds: operator_form_min >= -tol,
        equality_gap,
    })
}

/// Largest eigenvalue of Φ·‖E_D(X²)‖; invariant under X ↦ cX, J ↦ J/c.
pub fn cr_product(pair: &ConjugatePair) -> Result<f64> {
    let fisher = fisher_information(pair)?;
    let m = range_norm(&pair.ce, &pair.x.matmul(&pair.x))?;
    Ok(range_norm(&pair.ce, &fisher)? * m)
}

#[derive(Clone, Debug, Serialize)]
pub struct MseLink {
    pub fisher_bound: f64,
    pub minimal_mse: f64,
    pub floor: f64,
    pub holds: bool,
}

/// With Φ ⪯ K·I (K the largest Fisher coefficient), the minimal prediction error is at least 1/K.
pub fn mse_floor_link(pair: &ConjugatePair) -> Result<MseLink> {
    let fisher = fisher_information(pair)?;
    let k = range_norm(&pair.ce, &fisher)?;
    if !(k > 0.0) {
        return Err(Error::SingularFisherInfo { min_eig: k });
    }
    let minimal_mse = best_predictor(&pair.ce, &pair.x)?.minimal_mse;
    let floor = 1.0 / k;
    let tol = ORDER_TOL + 3.0 * pair.residual;
    Ok(MseLink { fisher_bound: k, minimal_mse, floor, holds: minimal_mse >= floor - tol })
}

#[derive(Clone, Debug, Serialize)]
pub struct MultiCramerRao {
    pub n: usize,
    pub lhs_operator: ComplexMatrix,
    pub rhs_scalar: f64,
    pub min_eig: f64,
    pub holds: bool,
}

fn same_expectation(a: &ConditionalExpectation, b: &ConditionalExpectation) -> bool {
    a.dim() == b.dim()
        && a.partition().len() == b.partition().len()
        && (a.state().rho() - b.state().rho()).max_abs() <= 1e-14
        && a.partition().projections().iter().zip(b.partition().projections()).all(|(p, q)| (p - q).max_abs() <= 1e-14)
}

/// Φ = Σ E_D(J_j*J_j) against Φ · Σ‖E_D(X_j²)‖ ⪰ n².
pub fn multi_variable_cr(pairs: &[ConjugatePair]) -> Result<MultiCramerRao> {
    let first = pairs.first().ok_or_else(|| Error::InvalidParameter("need at least one pair".into()))?;
    if pairs.iter().any(|p| !same_expectation(&p.ce, &first.ce)) {
        return Err(Error::MixedExpectations);
    }
    let dim = first.x.dim();
    let mut phi = ComplexMatrix::zeros(dim);
    let mut moments = 0.0;
    let mut slack = ORDER_TOL;
    for p in pairs {
        phi += &fisher_information(p)?;
        moments += range_norm(&p.ce, &p.x.matmul(&p.x))?;
        slack += 3.0 * p.residual * pairs.len() as f64;
    }
    let n = pairs.len();
    let rhs_scalar = (n * n) as f64;
    let lhs_operator = phi.scale(moments);
    let min_eig = min_eigenvalue(&(&lhs_operator - &ComplexMatrix::identity(dim).scale(rhs_scalar)))?;
    Ok(MultiCramerRao { n, lhs_operator, rhs_scalar, min_eig, holds: min_eig >= -slack * rhs_scalar })
}

/// max over random pairs of ‖E_D(U*V)‖² − ‖E_D(U*U)‖·‖E_D(V*V)‖, relative to the right side.
pub fn module_cauchy_schwarz(ce: &ConditionalExpectation, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = seeded(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let u = random_matrix(ce.dim(), &mut rng);
        let v = random_matrix(ce.dim(), &mut rng);
        let uv = op_norm(&ce.apply(&u.adjoint().matmul(&v))?);
        let uu = range_norm(ce, &u.adjoint().matmul(&u))?;
        let vv = range_norm(ce, &v.adjoint().matmul(&v))?;
        worst = worst.max((uv * uv - uu * vv) / (uu * vv));
    }
    Ok(worst)
}

/// N×N GUE sample: diagonal N(0, 1/N), off-diagonal complex with E|z|² = 1/N.
pub fn gue<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let sd = (1.0 / n as f64).sqrt();
    let mut s = ComplexMatrix::zeros(n);
    for i in 0..n {
        let d: f64 = rng.sample(StandardNormal);
        s[(i, i)] = C64::new(sd * d, 0.0);
        for j in i + 1..n {
            let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            let z = C64::new(a, b) * (sd / std::f64::consts::SQRT_2);
            s[(i, j)] = z;
            s[(j, i)] = z.conj();
        }
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SemicircularDemo {
    pub n: usize,
    pub sigma: f64,
    pub seed: u64,
    pub identity_residual: f64,
    /// Φ·τ(X²)
    pub product: f64,
    pub deviation: f64,
    pub min_mse: f64,
}

/// X = σS and J = S/σ for a GUE matrix S, with D = span{I} and the normalised trace.
pub fn semicircular_demo(n: usize, sigma: f64, seed: u64) -> Result<SemicircularDemo> {
    if n < 64 {
        return Err(Error::InvalidParameter(format!("semicircular demo needs N >= 64, got {n}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let s = gue(n, &mut seeded(seed));
    let ce = ConditionalExpectation::new(ProjectivePartition::trivial(n), DensityState::maximally_mixed(n))?;
    let pair = ConjugatePair::new(s.scale(sigma), s.scale(1.0 / sigma), ce, CJ_TOL_MONTE_CARLO)?;
    let fisher = fisher_information(&pair)?;
    let tau = |m: &ComplexMatrix| pair.ce.expect(m).re;
    let product = tau(&fisher) * tau(&pair.x.matmul(&pair.x));
    let min_mse = best_predictor(&pair.ce, &pair.x)?.minimal_mse;
    Ok(SemicircularDemo {
        n,
        sigma,
        seed,
        identity_residual: pair.residual,
        product,
        deviation: (product - 1.0).abs(),
        min_mse,
    })
}

/// Demos over seeds seed, seed+1, … in parallel.
pub fn semicircular_sweep(n: usize, sigma: f64, seed: u64, count: usize) -> Result<Vec<SemicircularDemo>> {
    (0..count as u64).into_par_iter().map(|k| semicircular_demo(n, sigma, seed + k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trivial_ce(n: usize) -> ConditionalExpectation {
        ConditionalExpectation::new(ProjectivePartition::trivial(n), DensityState::maximally_mixed(n)).unwrap()
    }

    fn block_ce() -> ConditionalExpectation {
        let state = DensityState::diagonal(&[0.1, 0.3, 0.2, 0.4]).unwrap();
        ConditionalExpectation::new(ProjectivePartition::from_index_groups(4, &[vec![0, 1], vec![2, 3]]), state).unwrap()
    }

    /// Discretised standard normal: X = diag(x_i), ρ ∝ diag(φ(x_i)), score J = X.
    fn discretised_normal(points: usize) -> ConjugatePair {
        let xs: Vec<f64> = (0..points).map(|i| -6.0 + 12.0 * i as f64 / (points - 1) as f64).collect();
        let w: Vec<f64> = xs.iter().map(|x| (-0.5 * x * x).exp()).collect();
        let total: f64 = w.iter().sum();
        let state = DensityState::diagonal(&w.iter().map(|v| v / total).collect::<Vec<_>>()).unwrap();
        let ce = ConditionalExpectation::new(ProjectivePartition::trivial(points), state).unwrap();
        let x = ComplexMatrix::diag(&xs);
        ConjugatePair::new(x.clone(), x, ce, CJ_TOL_ANALYTIC).unwrap()
    }

    #[test]
    fn identity_residual_examples() {
        let coarse = discretised_normal(7);
        let fine = discretised_normal(121);
        assert!(conjugate_identity_check(&fine) < conjugate_identity_check(&coarse));
        assert!(conjugate_identity_check(&fine) < 1e-6);
        let ce = trivial_ce(3);
        let x = ComplexMatrix::diag(&[1.0, -1.0, 0.5]);
        let zero = ConjugatePair::new(x.clone(), ComplexMatrix::zeros(3), ce.clone(), CJ_TOL_ANALYTIC).unwrap();
        assert!((conjugate_identity_check(&zero) - 1.0).abs() < 1e-15);
        assert!(matches!(fisher_information(&zero), Err(Error::UncertifiedPair { .. })));
    }

    #[test]
    fn fisher_examples() {
        let ce = block_ce();
        let id = ComplexMatrix::identity(4);
        let p = ConjugatePair::new(id.clone(), id.clone(), ce.clone(), CJ_TOL_ANALYTIC).unwrap();
        assert!((&fisher_information(&p).unwrap() - &id).max_abs() < 1e-15);
        let q = ConjugatePair::new(id.scale(0.5), id.scale(2.0), ce, CJ_TOL_ANALYTIC).unwrap();
        assert!((&fisher_information(&q).unwrap() - &id.scale(4.0)).max_abs() < 1e-14);
    }

    /// Centred X with X² ∝ I on each block and J = X scaled blockwise so that E_D(J*X) = I.
    fn saturated_pair() -> ConjugatePair {
        let ce = block_ce();
        let x = ComplexMatrix::real(&[&[0.0, 2.0, 0.0, 0.0], &[2.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 0.5], &[0.0, 0.0, 0.5, 0.0]]);
        let j = x.matmul(&ComplexMatrix::diag(&[0.25, 0.25, 4.0, 4.0]));
        ConjugatePair::new(x, j, ce, CJ_TOL_ANALYTIC).unwrap()
    }

    #[test]
    fn cramer_rao_forms() {
        let pair = saturated_pair();
        assert!(pair.is_certified());
        let cr = cramer_rao_check(&pair).unwrap();
        assert!(cr.norm_form_holds && cr.operator_form_holds);
        assert!(cr.equality_gap < 1e-12);
        let link = mse_floor_link(&pair).unwrap();
        assert!(link.holds);
    }

    #[test]
    fn scaling_invariance() {
        let pair = saturated_pair();
        let base = cr_product(&pair).unwrap();
        for c in [0.1, 3.0, 17.0] {
            let scaled = pair.rescaled(c).unwrap();
            assert!(conjugate_identity_check(&scaled) < 1e-12);
            assert!((cr_product(&scaled).unwrap() - base).abs() <= 1e-12 * base);
        }
    }

    #[test]
    fn scalar_trace_case() {
        let pair = discretised_normal(101);
        let cr = cramer_rao_check(&pair).unwrap();
        assert!(cr.norm_form_holds);
        let tau = |m: &ComplexMatrix| pair.ce().expect(m).re;
        // τ(J*J)τ(X²) ≥ |τ(J*X)|², and τ(J*X) is 1 up to the certification residual
        let slack = ORDER_TOL + 3.0 * conjugate_identity_check(&pair);
        assert!(tau(&fisher_information(&pair).unwrap()) * tau(&pair.x().matmul(pair.x())) >= 1.0 - slack);
    }

    #[test]
    fn multi_variable() {
        let pair = saturated_pair();
        let one = multi_variable_cr(std::slice::from_ref(&pair)).unwrap();
        assert!(one.holds);
        let three = multi_variable_cr(&[pair.clone(), pair.clone(), pair.clone()]).unwrap();
        assert!(three.holds);
        assert!((&three.lhs_operator - &one.lhs_operator.scale(9.0)).max_abs() < 1e-12);
        let other = ConjugatePair::new(ComplexMatrix::identity(4), ComplexMatrix::identity(4), trivial_ce(4), 1e-6).unwrap();
        assert!(matches!(multi_variable_cr(&[pair, other]), Err(Error::MixedExpectations)));
    }

    #[test]
    fn module_cs() {
        assert!(module_cauchy_schwarz(&block_ce(), 200, 4).unwrap() <= 1e-12);
        assert!(module_cauchy_schwarz(&trivial_ce(3), 200, 5).unwrap() <= 1e-12);
    }

    #[test]
    fn semicircular() {
        let d = semicircular_demo(128, 2.0, 7).unwrap();
        assert!(d.deviation < 0.05);
        assert!((d.min_mse - 4.0).abs() < 0.2);
        assert!(semicircular_demo(32, 1.0, 1).is_err());
    }

    #[test]
    fn operator_form_needs_centred_conjugate() {
        // J with E_D(J) ≠ 0 may certify the identity yet break the operator order
        let ce = trivial_ce(2);
        let x = ComplexMatrix::diag(&[1.0, 3.0]);
        let j = ComplexMatrix::diag(&[0.5, 0.5]);
        let pair = ConjugatePair::new(x, j, ce, CJ_TOL_ANALYTIC).unwrap();
        assert!(pair.is_certified());
        let cr = cramer_rao_check(&pair).unwrap();
        assert!(cr.norm_form_holds);
        assert!(!cr.operator_form_holds);
    }
}
