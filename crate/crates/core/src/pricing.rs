//! Numéraire-normalised pricing operators
//! Π_t(X) = B_t^{1/2} E_t(B_T^{-1/2} X B_T^{-1/2}) B_t^{1/2}
//! and their structural checks.

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{element_in_subalgebra, AlgebraModel};
use crate::cond_exp::{tower_residual, ConditionalExpectation};
use crate::error::{Error, Result};
use crate::linalg::random::{random_matrix, seeded};
use crate::linalg::{choi_matrix, choi_min_eigenvalue, clamp_trunc, eig_hermitian, op_norm, ComplexMatrix};
use crate::states::DensityState;

/// Numéraire eigenvalues must stay above this before inversion.
pub const NUMERAIRE_FLOOR: f64 = 1e-10;
/// Tower residual a pricing system must meet.
pub const TOWER_TOL: f64 = 1e-10;
/// Truncation ladder; the saturating level max‖S̄‖ is appended.
pub const DEFAULT_LEVELS: [f64; 4] = [1.0, 2.0, 4.0, 8.0];

/// (B^{1/2}, B^{-1/2}) of a strictly positive numéraire.
pub fn numeraire_roots(b: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let d = eig_hermitian(b)?;
    if d.min() < NUMERAIRE_FLOOR {
        return Err(Error::SingularNumeraire { min_eig: d.min() });
    }
    Ok((d.map(f64::sqrt)?, d.map(|l| 1.0 / l.sqrt())?))
}

/// A market model with a certified pricing state and one conditional
/// expectation per time.
#[derive(Clone, Debug)]
pub struct PricingSystem {
    model: AlgebraModel,
    state: DensityState,
    ces: Vec<ConditionalExpectation>,
    sqrt_b: Vec<ComplexMatrix>,
    inv_sqrt_b: Vec<ComplexMatrix>,
    tower: f64,
}

impl PricingSystem {
    pub fn new(model: AlgebraModel, state: DensityState) -> Result<Self> {
        let ces = ConditionalExpectation::family(model.filtration(), &state)?;
        let tower = tower_residual(&ces, 8, 0x70e4)?;
        if tower > TOWER_TOL {
            return Err(Error::NotCompatible { residual: tower });
        }
        let mut sqrt_b = Vec::new();
        let mut inv_sqrt_b = Vec::new();
        for b in model.filtration().numeraires() {
            let (s, i) = numeraire_roots(b)?;
            sqrt_b.push(s);
            inv_sqrt_b.push(i);
        }
        Ok(Self { model, state, ces, sqrt_b, inv_sqrt_b, tower })
    }

    pub fn model(&self) -> &AlgebraModel {
        &self.model
    }

    pub fn state(&self) -> &DensityState {
        &self.state
    }

    pub fn cond_exp(&self, t: usize) -> &ConditionalExpectation {
        &self.ces[t]
    }

    pub fn cond_exps(&self) -> &[ConditionalExpectation] {
        &self.ces
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// Index of the horizon T.
    pub fn horizon(&self) -> usize {
        self.ces.len() - 1
    }

    pub fn tower_residual(&self) -> f64 {
        self.tower
    }

    pub fn numeraire(&self, t: usize) -> &ComplexMatrix {
        self.model.filtration().numeraire(t)
    }

    pub fn time_index(&self, t: f64) -> Result<usize> {
        self.model.filtration().time_index(t)
    }

    fn check_index(&self, t: usize) -> Result<()> {
        if t >= self.ces.len() {
            return Err(Error::UnknownTime(t as f64));
        }
        Ok(())
    }

    /// B_t^{-1/2} X B_t^{-1/2}
    pub fn discount_at(&self, x: &ComplexMatrix, t: usize) -> Result<ComplexMatrix> {
        self.check_index(t)?;
        x.ensure_dim(self.dim())?;
        Ok(self.inv_sqrt_b[t].matmul(x).matmul(&self.inv_sqrt_b[t]))
    }

    /// B_t^{1/2} X B_t^{1/2}
    pub fn undiscount_at(&self, x: &ComplexMatrix, t: usize) -> Result<ComplexMatrix> {
        self.check_index(t)?;
        x.ensure_dim(self.dim())?;
        Ok(self.sqrt_b[t].matmul(x).matmul(&self.sqrt_b[t]))
    }

    /// X̄ = B_T^{-1/2} X B_T^{-1/2} with T given as a filtration time.
    pub fn symmetric_discount(&self, x: &ComplexMatrix, t_maturity: f64) -> Result<ComplexMatrix> {
        self.discount_at(x, self.time_index(t_maturity)?)
    }

    /// Π̃_t(X) = E_t(X̄), T the horizon.
    pub fn discounted_price(&self, x: &ComplexMatrix, t: usize) -> Result<ComplexMatrix> {
        self.check_index(t)?;
        self.ces[t].apply(&self.discount_at(x, self.horizon())?)
    }

    /// Π_t(X), t a time index.
    pub fn price(&self, x: &ComplexMatrix, t: usize) -> Result<ComplexMatrix> {
        self.undiscount_at(&self.discounted_price(x, t)?, t)
    }

    /// Π_t(X), t a filtration time.
    pub fn pricing_operator(&self, x: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
        self.price(x, self.time_index(t)?)
    }

    /// Value process used by the consistency check: Π_t below the horizon and
    /// the identity at T.
    fn value(&self, x: &ComplexMatrix, t: usize) -> Result<ComplexMatrix> {
        if t == self.horizon() {
            Ok(x.clone())
        } else {
            self.price(x, t)
        }
    }

    /// π₀(X) = φ(X̄)
    pub fn price0(&self, x: &ComplexMatrix) -> Result<f64> {
        Ok(self.state.rho().trace_product(&self.discount_at(x, self.horizon())?).re)
    }

    /// Choi matrix, bimodularity, B_T normalisation and the unit payoff.
    pub fn verify_pricing_properties(&self, t: usize, samples: usize, seed: u64) -> Result<PricingReport> {
        self.check_index(t)?;
        let n = self.dim();
        let choi = choi_matrix(n, |x| self.price(x, t))?;
        let choi_min_eig = choi_min_eigenvalue(&choi)?;
        let mut rng = seeded(seed);
        let part = self.ces[t].partition();
        let mut bimodularity_residual: f64 = 0.0;
        for _ in 0..samples {
            let a = part.random_element(&mut rng);
            let b = part.random_element(&mut rng);
            let x = random_matrix(n, &mut rng);
            let lhs = self.price(&a.matmul(&x).matmul(&b), t)?;
            let rhs = a.matmul(&self.price(&x, t)?).matmul(&b);
            let scale = (1.0 + op_norm(&a) * op_norm(&b)) * (1.0 + op_norm(&x));
            bimodularity_residual = bimodularity_residual.max(op_norm(&(&lhs - &rhs)) / scale);
        }
        let bt = self.numeraire(self.horizon());
        let normalization_residual = op_norm(&(&self.price(bt, t)? - self.numeraire(t)));
        let unitality_residual = op_norm(&(&self.discounted_price(bt, t)? - &ComplexMatrix::identity(n)));
        let unit_payoff_value = self.price(&ComplexMatrix::identity(n), t)?;
        let unit_payoff_gap = op_norm(&(&unit_payoff_value - self.numeraire(t)));
        Ok(PricingReport {
            time_index: t,
            choi_min_eig,
            cp_choi_psd: choi_min_eig >= -1e-9,
            bimodularity_residual,
            normalization_residual,
            unitality_residual,
            unit_payoff_value,
            unit_payoff_gap,
        })
    }

    /// ‖Π_s(X) − B_s^{1/2} E_s(B_t^{-1/2} Π_t(X) B_t^{-1/2}) B_s^{1/2}‖ and
    /// ‖Π̃_s(X) − E_s(B_t^{-1/2} Π_t(X) B_t^{-1/2})‖, with Π_T the identity.
    pub fn time_consistency_check(&self, x: &ComplexMatrix, s: usize, t: usize) -> Result<TimeConsistency> {
        if s > t || t > self.horizon() {
            return Err(Error::BadTimePair { s: s as f64, t: t as f64 });
        }
        let vt = self.discount_at(&self.value(x, t)?, t)?;
        let inner = self.ces[s].apply(&vt)?;
        let vs = self.value(x, s)?;
        let residual = op_norm(&(&vs - &self.undiscount_at(&inner, s)?));
        let martingale_residual = op_norm(&(&self.discount_at(&vs, s)? - &inner));
        Ok(TimeConsistency { residual, martingale_residual })
    }

    fn discounted_process(&self, process: &[ComplexMatrix]) -> Result<Vec<ComplexMatrix>> {
        if process.len() != self.ces.len() {
            return Err(Error::DimMismatch { expected: self.ces.len(), found: process.len() });
        }
        process
            .iter()
            .enumerate()
            .map(|(t, s)| {
                s.ensure_dim(self.dim())?;
                let (member, residual) = element_in_subalgebra(s, self.ces[t].partition());
                if !member || s.hermitian_residual() > s.herm_tol() {
                    return Err(Error::ProcessOutsideAlgebra { t, residual: residual.max(s.hermitian_residual()) });
                }
                self.discount_at(s, t)
            })
            .collect()
    }

    /// max over s ≤ t and levels n of ‖E_s(f_n(S̄_t)) − f_n(S̄_s)‖.
    pub fn truncation_martingale_check(&self, process: &[ComplexMatrix], levels: Option<&[f64]>) -> Result<TruncationReport> {
        let bar = self.discounted_process(process)?;
        let mut levels: Vec<f64> = levels.map(<[f64]>::to_vec).unwrap_or_else(|| DEFAULT_LEVELS.to_vec());
        let saturating = bar.iter().map(op_norm).fold(0.0, f64::max);
        if saturating > 0.0 && !levels.contains(&saturating) {
            levels.push(saturating);
        }
        let per_level: Vec<(f64, f64)> = levels
            .par_iter()
            .map(|&n| -> Result<(f64, f64)> {
                let trunc: Vec<ComplexMatrix> = bar.iter().map(|b| clamp_trunc(b, n)).collect::<Result<_>>()?;
                let mut worst: f64 = 0.0;
                for s in 0..trunc.len() {
                    for t in s..trunc.len() {
                        let r = op_norm(&(&self.ces[s].apply(&trunc[t])? - &trunc[s]));
                        worst = worst.max(r);
                    }
                }
                Ok((n, worst))
            })
            .collect::<Result<_>>()?;
        let max_residual = per_level.iter().map(|p| p.1).fold(0.0, f64::max);
        Ok(TruncationReport { max_residual, per_level })
    }

    /// ‖Π_t(B_T^{1/2} f_n(S̄_T) B_T^{1/2}) − B_t^{1/2} f_n(S̄_t) B_t^{1/2}‖
    pub fn truncated_claim_identity(&self, process: &[ComplexMatrix], n: f64, t: usize) -> Result<f64> {
        let bar = self.discounted_process(process)?;
        let horizon = self.horizon();
        let claim = self.undiscount_at(&clamp_trunc(&bar[horizon], n)?, horizon)?;
        let want = self.undiscount_at(&clamp_trunc(&bar[t], n)?, t)?;
        Ok(op_norm(&(&self.price(&claim, t)? - &want)))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PricingReport {
    pub time_index: usize,
    pub choi_min_eig: f64,
    pub cp_choi_psd: bool,
    pub bimodularity_residual: f64,
    /// ‖Π_t(B_T) − B_t‖
    pub normalization_residual: f64,
    /// ‖Π̃_t(B_T) − I‖
    pub unitality_residual: f64,
    /// Π_t(I); equals B_t only when B_T = I.
    pub unit_payoff_value: ComplexMatrix,
    pub unit_payoff_gap: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TimeConsistency {
    pub residual: f64,
    pub martingale_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TruncationReport {
    pub max_residual: f64,
    /// (level n, residual at n)
    pub per_level: Vec<(f64, f64)>,
}

/// Π_t^ρ(X): the pricing operator under a reference state.
pub fn prediction_operator(model: &AlgebraModel, reference: &DensityState, x: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    PricingSystem::new(model.clone(), reference.clone())?.pricing_operator(x, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{validate_filtration, ProjectivePartition};
    use crate::linalg::random::{random_hermitian, random_psd};
    use crate::linalg::psd_check;

    fn diag_system() -> PricingSystem {
        let parts = vec![
            ProjectivePartition::trivial(4),
            ProjectivePartition::from_index_groups(4, &[vec![0, 1], vec![2, 3]]),
            ProjectivePartition::finest_diagonal(4),
        ];
        let b = vec![
            ComplexMatrix::identity(4),
            ComplexMatrix::diag(&[1.05, 1.05, 1.02, 1.02]),
            ComplexMatrix::diag(&[1.10, 1.08, 1.06, 1.03]),
        ];
        let f = validate_filtration(vec![0.0, 0.5, 1.0], parts, b).unwrap();
        let model = AlgebraModel::new(vec![1, 1, 1, 1], f).unwrap();
        PricingSystem::new(model, DensityState::diagonal(&[0.1, 0.2, 0.3, 0.4]).unwrap()).unwrap()
    }

    #[test]
    fn discount_examples() {
        let ps = diag_system();
        let bt = ps.numeraire(2).clone();
        let xbar = ps.symmetric_discount(&bt, 1.0).unwrap();
        assert!((&xbar - &ComplexMatrix::identity(4)).max_abs() < 1e-14);
        let x = ComplexMatrix::diag(&[1.0, 2.0, 3.0, 4.0]);
        let d = ps.symmetric_discount(&x, 1.0).unwrap();
        for (i, b) in [1.10, 1.08, 1.06, 1.03].iter().enumerate() {
            assert!((d[(i, i)].re - (i as f64 + 1.0) / b).abs() < 1e-14);
        }
    }

    #[test]
    fn commutative_prices_match_classical_oracle() {
        let ps = diag_system();
        let x = [3.0, -1.0, 2.0, 0.5];
        let b = [1.10, 1.08, 1.06, 1.03];
        let p = [0.1, 0.2, 0.3, 0.4];
        let pi = ps.price(&ComplexMatrix::diag(&x), 1).unwrap();
        for (group, bt) in [(vec![0usize, 1], 1.05), (vec![2, 3], 1.02)] {
            let mass: f64 = group.iter().map(|&i| p[i]).sum();
            let oracle = bt * group.iter().map(|&i| p[i] * x[i] / b[i]).sum::<f64>() / mass;
            for &i in &group {
                assert!((pi[(i, i)].re - oracle).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn structure_and_consistency() {
        let ps = diag_system();
        for t in 0..3 {
            let r = ps.verify_pricing_properties(t, 10, 1).unwrap();
            assert!(r.cp_choi_psd && r.bimodularity_residual < 1e-12, "{r:?}");
            assert!(r.normalization_residual < 1e-12 && r.unitality_residual < 1e-12);
        }
        // unit payoff differs from B_t under a non-trivial B_T
        assert!(ps.verify_pricing_properties(0, 0, 1).unwrap().unit_payoff_gap > 1e-3);
        let mut rng = seeded(2);
        let x = random_hermitian(4, &mut rng);
        for (s, t) in [(0, 0), (0, 1), (1, 2), (0, 2)] {
            let c = ps.time_consistency_check(&x, s, t).unwrap();
            assert!(c.residual < 1e-12 && c.martingale_residual < 1e-12, "{s},{t}: {c:?}");
        }
        assert!(matches!(ps.time_consistency_check(&x, 2, 1), Err(Error::BadTimePair { .. })));
        let pos = ps.price(&random_psd(4, &mut rng), 0).unwrap();
        assert!(psd_check(&pos, 1e-12).unwrap());
        assert!((ps.price0(ps.numeraire(2)).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn unit_numeraire_reduces_to_cond_exp() {
        let ps = diag_system();
        let flat = ps.model().with_numeraire(vec![ComplexMatrix::identity(4); 3]).unwrap();
        let ps = PricingSystem::new(flat, ps.state().clone()).unwrap();
        let mut rng = seeded(3);
        let x = random_matrix(4, &mut rng);
        assert!((&ps.price(&x, 1).unwrap() - &ps.cond_exp(1).apply(&x).unwrap()).max_abs() < 1e-14);
    }

    #[test]
    fn prediction_operator_trivial_partition() {
        let ps = diag_system();
        let reference = DensityState::maximally_mixed(4);
        let x = ComplexMatrix::diag(&[1.0, 2.0, 3.0, 4.0]);
        let v = prediction_operator(ps.model(), &reference, &x, 0.0).unwrap();
        let xbar = ps.discount_at(&x, 2).unwrap();
        assert!((v[(0, 0)].re - xbar.trace().re / 4.0).abs() < 1e-14);
        let bt = ps.numeraire(2).clone();
        let back = prediction_operator(ps.model(), &reference, &bt, 0.5).unwrap();
        assert!((&back - ps.numeraire(1)).max_abs() < 1e-14);
    }

    #[test]
    fn constant_process_is_martingale() {
        let ps = PricingSystem::new(
            diag_system().model().with_numeraire(vec![ComplexMatrix::identity(4); 3]).unwrap(),
            DensityState::maximally_mixed(4),
        )
        .unwrap();
        let c = vec![ComplexMatrix::identity(4).scale(3.0); 3];
        let r = ps.truncation_martingale_check(&c, None).unwrap();
        assert!(r.max_residual < 1e-15);
        assert_eq!(r.per_level.len(), 5);
        let outside = vec![ComplexMatrix::identity(4), ComplexMatrix::diag(&[1.0, 0.0, 0.0, 0.0]), ComplexMatrix::identity(4)];
        assert!(matches!(ps.truncation_martingale_check(&outside, None), Err(Error::ProcessOutsideAlgebra { t: 1, .. })));
    }
}
