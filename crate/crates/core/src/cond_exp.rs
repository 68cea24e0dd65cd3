//! State-preserving conditional expectations onto abelian partitions.
//!
//! For a faithful state ρ commuting with every P_k the unique φ-preserving
//! conditional expectation is E(X) = Σ_k φ(P_k X P_k)/φ(P_k) · P_k.

use serde::Serialize;

use crate::algebra::{element_in_subalgebra, AlgebraModel, Filtration, ProjectivePartition};
use crate::error::{Error, Result};
use crate::linalg::random::{random_matrix, seeded};
use crate::linalg::{op_norm, ComplexMatrix, C64};
use crate::states::DensityState;

/// Commutator tolerance of the compatibility certificate.
pub const MOD_TOL: f64 = 1e-9;
/// Conditional weights below this abort construction.
pub const WEIGHT_FLOOR: f64 = 1e-12;

fn commutator_norm(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let c = ComplexMatrix::commutator(a, b);
    if c.max_abs() == 0.0 {
        0.0
    } else {
        op_norm(&c)
    }
}

/// (max_k ‖[ρ, P_k]‖_op ≤ tol, max_k ‖[ρ, P_k]‖_op)
pub fn modular_compatible(state: &DensityState, partition: &ProjectivePartition, tol: f64) -> (bool, f64) {
    let residual = partition
        .projections()
        .iter()
        .map(|p| commutator_norm(state.rho(), p))
        .fold(0.0, f64::max);
    (residual <= tol, residual)
}

/// Certified E onto span{P_k} for a compatible faithful state.
#[derive(Clone, Debug)]
pub struct ConditionalExpectation {
    partition: ProjectivePartition,
    state: DensityState,
    weights: Vec<f64>,
    /// P_k ρ P_k, so that φ(P_k X P_k) = Tr(ρ_k X).
    compressed: Vec<ComplexMatrix>,
    certificate: f64,
}

impl ConditionalExpectation {
    pub fn new(partition: ProjectivePartition, state: DensityState) -> Result<Self> {
        state.rho().ensure_dim(partition.dim())?;
        if !state.is_faithful() {
            return Err(Error::InvalidState(format!(
                "state is not faithful: min eigenvalue {:.3e}",
                state.min_eigenvalue()
            )));
        }
        let (ok, certificate) = modular_compatible(&state, &partition, MOD_TOL);
        if !ok {
            return Err(Error::NotCompatible { residual: certificate });
        }
        let mut weights = Vec::with_capacity(partition.len());
        let mut compressed = Vec::with_capacity(partition.len());
        for (index, p) in partition.projections().iter().enumerate() {
            let rho_k = p.matmul(state.rho()).matmul(p);
            let weight = rho_k.trace().re;
            if weight < WEIGHT_FLOOR {
                return Err(Error::NonFaithful { index, weight });
            }
            weights.push(weight);
            compressed.push(rho_k);
        }
        Ok(Self { partition, state, weights, compressed, certificate })
    }

    /// One conditional expectation per filtration time.
    pub fn family(filtration: &Filtration, state: &DensityState) -> Result<Vec<Self>> {
        filtration.partitions().iter().map(|p| Self::new(p.clone(), state.clone())).collect()
    }

    pub fn partition(&self) -> &ProjectivePartition {
        &self.partition
    }

    pub fn state(&self) -> &DensityState {
        &self.state
    }

    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    /// φ(P_k)
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// max_k ‖[ρ, P_k]‖_op recorded at construction.
    pub fn certificate_residual(&self) -> f64 {
        self.certificate
    }

    /// c_k = φ(P_k X P_k)/φ(P_k), so that E(X) = Σ c_k P_k.
    pub fn coefficients(&self, x: &ComplexMatrix) -> Result<Vec<C64>> {
        x.ensure_dim(self.dim())?;
        Ok(self.compressed.iter().zip(&self.weights).map(|(r, w)| r.trace_product(x) / w).collect())
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        Ok(self.partition.combine(&self.coefficients(x)?))
    }

    /// φ(X)
    pub fn expect(&self, x: &ComplexMatrix) -> C64 {
        self.state.rho().trace_product(x)
    }

    /// Same partition, different state (re-certified).
    pub fn with_state(&self, state: DensityState) -> Result<Self> {
        Self::new(self.partition.clone(), state)
    }
}

/// E(X) for a certified conditional expectation.
pub fn cond_exp(ce: &ConditionalExpectation, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    ce.apply(x)
}

/// Per-axiom residuals of a conditional expectation on one observable.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct AxiomResiduals {
    pub unitality: f64,
    pub idempotence: f64,
    /// Negative part of the smallest eigenvalue of E(X*X).
    pub positivity: f64,
    pub state_preservation: f64,
    pub bimodularity: f64,
    pub range_membership: f64,
}

impl AxiomResiduals {
    pub fn max(&self) -> f64 {
        [
            self.unitality,
            self.idempotence,
            self.positivity,
            self.state_preservation,
            self.bimodularity,
            self.range_membership,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn merge(self, o: Self) -> Self {
        Self {
            unitality: self.unitality.max(o.unitality),
            idempotence: self.idempotence.max(o.idempotence),
            positivity: self.positivity.max(o.positivity),
            state_preservation: self.state_preservation.max(o.state_preservation),
            bimodularity: self.bimodularity.max(o.bimodularity),
            range_membership: self.range_membership.max(o.range_membership),
        }
    }
}

/// Checks every conditional-expectation axiom on `samples` random observables.
pub fn axiom_residuals(ce: &ConditionalExpectation, samples: usize, seed: u64) -> Result<AxiomResiduals> {
    let n = ce.dim();
    let mut rng = seeded(seed);
    let id = ComplexMatrix::identity(n);
    let mut out = AxiomResiduals { unitality: op_norm(&(&ce.apply(&id)? - &id)), ..Default::default() };
    for _ in 0..samples {
        let x = random_matrix(n, &mut rng);
        let ex = ce.apply(&x)?;
        let a = ce.partition().random_element(&mut rng);
        let b = ce.partition().random_element(&mut rng);
        let scale = 1.0 + op_norm(&x);
        let eex = ce.apply(&ex)?;
        let pos = ce.apply(&x.adjoint().matmul(&x))?;
        // E(X*X) lies in the abelian range; its spectrum is the coefficient list
        let min_coeff = ce.coefficients(&pos)?.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        let bimod = &ce.apply(&a.matmul(&x).matmul(&b))? - &a.matmul(&ex).matmul(&b);
        let ab = 1.0 + op_norm(&a) * op_norm(&b);
        out = out.merge(AxiomResiduals {
            unitality: 0.0,
            idempotence: op_norm(&(&eex - &ex)) / scale,
            positivity: (-min_coeff).max(0.0) / (scale * scale),
            state_preservation: (ce.expect(&ex) - ce.expect(&x)).norm() / scale,
            bimodularity: op_norm(&bimod) / (ab * scale),
            range_membership: element_in_subalgebra(&ex, ce.partition()).1 / scale,
        });
    }
    Ok(out)
}

/// max over random X and time pairs s ≤ t of ‖E_s(E_t(X)) − E_s(X)‖_op.
pub fn tower_check(filtration: &Filtration, state: &DensityState, samples: usize, seed: u64) -> Result<f64> {
    let ces = ConditionalExpectation::family(filtration, state)?;
    tower_residual(&ces, samples, seed)
}

/// Tower residual over an already certified family.
pub fn tower_residual(ces: &[ConditionalExpectation], samples: usize, seed: u64) -> Result<f64> {
    let Some(first) = ces.first() else { return Ok(0.0) };
    let mut rng = seeded(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let x = random_matrix(first.dim(), &mut rng);
        for s in 0..ces.len() {
            let esx = ces[s].apply(&x)?;
            for t in s..ces.len() {
                let r = op_norm(&(&ces[s].apply(&ces[t].apply(&x)?)? - &esx));
                worst = worst.max(r);
            }
        }
    }
    Ok(worst)
}

/// max over random A in the range of |⟨X − E(X), A⟩_φ|.
pub fn l2_orthogonality_check(ce: &ConditionalExpectation, x: &ComplexMatrix, samples: usize, seed: u64) -> Result<f64> {
    let y = (x - &ce.apply(x)?).adjoint();
    let mut rng = seeded(seed);
    let mut worst = ce.expect(&y).norm();
    for _ in 0..samples {
        let a = ce.partition().random_element(&mut rng);
        worst = worst.max(ce.expect(&y.matmul(&a)).norm());
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct MseDecomposition {
    /// E((R − A)²)
    pub total: ComplexMatrix,
    /// E(X²), X = R − E(R)
    pub innovation_term: ComplexMatrix,
    /// (A − E(R))²
    pub bias_term: ComplexMatrix,
    pub residual: f64,
}

fn ensure_predictor(ce: &ConditionalExpectation, a: &ComplexMatrix) -> Result<()> {
    a.ensure_dim(ce.dim())?;
    let (member, residual) = element_in_subalgebra(a, ce.partition());
    if !member || a.hermitian_residual() > a.herm_tol() {
        return Err(Error::PredictorOutsideAlgebra { residual: residual.max(a.hermitian_residual()) });
    }
    Ok(())
}

/// E((R−A)²) = E(X²) + (A − E(R))² for A in the range.
pub fn mse_decomposition(ce: &ConditionalExpectation, r: &ComplexMatrix, a: &ComplexMatrix) -> Result<MseDecomposition> {
    r.ensure_dim(ce.dim())?;
    r.ensure_hermitian()?;
    ensure_predictor(ce, a)?;
    let er = ce.apply(r)?;
    let d = r - a;
    let total = ce.apply(&d.matmul(&d))?;
    let x = r - &er;
    let innovation_term = ce.apply(&x.matmul(&x))?;
    let bias = a - &er;
    let bias_term = bias.matmul(&bias);
    let residual = op_norm(&(&(&total - &innovation_term) - &bias_term));
    Ok(MseDecomposition { total, innovation_term, bias_term, residual })
}

#[derive(Clone, Debug, Serialize)]
pub struct BestPredictor {
    pub predictor: ComplexMatrix,
    /// ‖E((R − E(R))²)‖_op
    pub minimal_mse: f64,
}

/// ‖E(Y)‖_op for Y with E(Y) ⪰ 0: the largest range coefficient.
fn range_norm(ce: &ConditionalExpectation, y: &ComplexMatrix) -> Result<f64> {
    Ok(ce.coefficients(y)?.iter().map(|c| c.norm()).fold(0.0, f64::max))
}

pub fn best_predictor(ce: &ConditionalExpectation, r: &ComplexMatrix) -> Result<BestPredictor> {
    r.ensure_dim(ce.dim())?;
    r.ensure_hermitian()?;
    let predictor = ce.apply(r)?;
    let x = r - &predictor;
    let minimal_mse = range_norm(ce, &x.matmul(&x))?;
    Ok(BestPredictor { predictor, minimal_mse })
}

/// ‖E((R − A)²)‖_op for a predictor A in the range.
pub fn mse(ce: &ConditionalExpectation, r: &ComplexMatrix, a: &ComplexMatrix) -> Result<f64> {
    ensure_predictor(ce, a)?;
    let d = r - a;
    range_norm(ce, &d.matmul(&d))
}

/// Conditional expectation onto the block algebra L∞(F) ⊗ M_n of a cq model
/// (atoms i, quantum dimension n, basis index i·n + a): within each atom group
/// the diagonal n×n blocks are averaged with the classical weights `p`.
/// Sends f ⊗ X to E[f | F] ⊗ X.
pub fn cq_block_conditional(
    model: &AlgebraModel,
    time_index: usize,
    p: &[f64],
    y: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    let n = model.block_dims()[0];
    let m = model.block_dims().len();
    if model.block_dims().iter().any(|&d| d != n) {
        return Err(Error::InvalidModel("cq model needs identical blocks".into()));
    }
    if p.len() != m {
        return Err(Error::DimMismatch { expected: m, found: p.len() });
    }
    y.ensure_dim(m * n)?;
    let partition = model.filtration().partition(time_index);
    let mut out = ComplexMatrix::zeros(m * n);
    for proj in partition.projections() {
        let atoms: Vec<usize> = (0..m).filter(|&i| proj[(i * n, i * n)].re > 0.5).collect();
        let mass: f64 = atoms.iter().map(|&i| p[i]).sum();
        if mass < WEIGHT_FLOOR {
            return Err(Error::NonFaithful { index: atoms.first().copied().unwrap_or(0), weight: mass });
        }
        let avg = ComplexMatrix::from_fn(n, |a, b| {
            atoms.iter().map(|&i| y[(i * n + a, i * n + b)] * p[i]).sum::<C64>() / mass
        });
        for &i in &atoms {
            for a in 0..n {
                for b in 0..n {
                    out[(i * n + a, i * n + b)] = avg[(a, b)];
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{build_cq_model, cq_embed, ProjectivePartition};
    use crate::linalg::random::{random_hermitian, random_psd};

    #[test]
    fn compatibility_examples() {
        let fine = ProjectivePartition::finest_diagonal(2);
        let diag = DensityState::diagonal(&[0.3, 0.7]).unwrap();
        assert_eq!(modular_compatible(&diag, &fine, MOD_TOL), (true, 0.0));
        let mixed = DensityState::maximally_mixed(2);
        assert!(modular_compatible(&mixed, &fine, MOD_TOL).0);
        let rho = DensityState::new(ComplexMatrix::real(&[&[0.6, 0.2], &[0.2, 0.4]])).unwrap();
        let single = ProjectivePartition::validate(vec![
            ComplexMatrix::diag(&[1.0, 0.0]),
            ComplexMatrix::diag(&[0.0, 1.0]),
        ])
        .unwrap();
        let (ok, r) = modular_compatible(&rho, &single, MOD_TOL);
        assert!(!ok);
        // [ρ, P] = [[0, −0.2], [0.2, 0]] has operator norm 0.2
        assert!((r - 0.2).abs() < 1e-14, "{r}");
        assert!(matches!(ConditionalExpectation::new(single, rho), Err(Error::NotCompatible { .. })));
    }

    #[test]
    fn trivial_partition_gives_state_value() {
        let mut rng = seeded(4);
        let state = DensityState::new(crate::linalg::random::random_density(3, &mut rng)).unwrap();
        let ce = ConditionalExpectation::new(ProjectivePartition::trivial(3), state.clone()).unwrap();
        let x = random_matrix(3, &mut rng);
        let ex = ce.apply(&x).unwrap();
        let phi = state.rho().trace_product(&x);
        assert!((&ex - &ComplexMatrix::identity(3).scale_c(phi)).max_abs() < 1e-14);
    }

    #[test]
    fn rank_one_diagonal_partition_takes_diagonal() {
        let state = DensityState::diagonal(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let ce = ConditionalExpectation::new(ProjectivePartition::finest_diagonal(4), state).unwrap();
        let mut rng = seeded(5);
        let x = random_matrix(4, &mut rng);
        let ex = ce.apply(&x).unwrap();
        assert!((&ex - &ComplexMatrix::diag_complex(&x.diagonal())).max_abs() < 1e-14);
    }

    #[test]
    fn two_block_axioms() {
        let mut rng = seeded(6);
        let r1 = crate::linalg::random::random_density(2, &mut rng).scale(0.4);
        let r2 = crate::linalg::random::random_density(2, &mut rng).scale(0.6);
        let rho = ComplexMatrix::from_fn(4, |i, j| match (i / 2, j / 2) {
            (0, 0) => r1[(i, j)],
            (1, 1) => r2[(i - 2, j - 2)],
            _ => C64::new(0.0, 0.0),
        });
        let state = DensityState::new(rho).unwrap();
        let part = ProjectivePartition::from_index_groups(4, &[vec![0, 1], vec![2, 3]]);
        let ce = ConditionalExpectation::new(part, state).unwrap();
        let res = axiom_residuals(&ce, 50, 1).unwrap();
        assert!(res.max() < 1e-12, "{res:?}");
        let x = random_hermitian(4, &mut rng);
        assert!(l2_orthogonality_check(&ce, &x, 20, 2).unwrap() < 1e-12);
    }

    #[test]
    fn non_faithful_and_light_atoms() {
        let state = DensityState::diagonal(&[1.0, 0.0]).unwrap();
        assert!(ConditionalExpectation::new(ProjectivePartition::trivial(2), state).is_err());
    }

    #[test]
    fn predictor_examples() {
        let state = DensityState::maximally_mixed(2);
        let ce = ConditionalExpectation::new(ProjectivePartition::trivial(2), state).unwrap();
        let bp = best_predictor(&ce, &ComplexMatrix::diag(&[1.0, -1.0])).unwrap();
        assert!(bp.predictor.max_abs() < 1e-15);
        assert!((bp.minimal_mse - 1.0).abs() < 1e-15);
        let c = best_predictor(&ce, &ComplexMatrix::identity(2).scale(3.0)).unwrap();
        assert_eq!(c.minimal_mse, 0.0);
        let not_in = mse(&ce, &ComplexMatrix::pauli_z(), &ComplexMatrix::pauli_z());
        assert!(matches!(not_in, Err(Error::PredictorOutsideAlgebra { .. })));
    }

    #[test]
    fn mse_pythagoras() {
        let mut rng = seeded(8);
        let state = DensityState::diagonal(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let part = ProjectivePartition::from_index_groups(4, &[vec![0, 1], vec![2, 3]]);
        let ce = ConditionalExpectation::new(part.clone(), state).unwrap();
        for _ in 0..10 {
            let r = random_hermitian(4, &mut rng);
            let a = part.random_hermitian(&mut rng);
            let d = mse_decomposition(&ce, &r, &a).unwrap();
            assert!(d.residual < 1e-12);
            let best = best_predictor(&ce, &r).unwrap();
            assert!(mse(&ce, &r, &a).unwrap() >= best.minimal_mse - 1e-12);
            let at_best = mse_decomposition(&ce, &r, &best.predictor).unwrap();
            assert!(at_best.bias_term.max_abs() < 1e-12);
        }
    }

    #[test]
    fn positivity_on_psd_input() {
        let mut rng = seeded(12);
        let state = DensityState::diagonal(&[0.25, 0.25, 0.2, 0.3]).unwrap();
        let ce = ConditionalExpectation::new(ProjectivePartition::finest_diagonal(4), state).unwrap();
        let x = random_psd(4, &mut rng);
        assert!(crate::linalg::psd_check(&ce.apply(&x).unwrap(), 1e-12).unwrap());
    }

    #[test]
    fn cq_product_formulas() {
        let model = build_cq_model(2, 2, &[vec![vec![0, 1]], vec![vec![0], vec![1]]]).unwrap();
        let p = [0.3, 0.7];
        let sigma = ComplexMatrix::real(&[&[0.8, 0.1], &[0.1, 0.2]]);
        let state = DensityState::new(cq_embed(&p, &sigma)).unwrap();
        let ces = ConditionalExpectation::family(model.filtration(), &state).unwrap();
        let mut rng = seeded(13);
        let x = random_hermitian(2, &mut rng);
        let f = [2.0, -1.0];
        let y = cq_embed(&f, &x);
        let ef = 0.3 * 2.0 - 0.7;
        let sx = sigma.trace_product(&x);
        // abelian range: E[f|F_t] ⊗ φ_σ(X)·I
        let e0 = ces[0].apply(&y).unwrap();
        assert!((&e0 - &cq_embed(&[ef, ef], &ComplexMatrix::identity(2)).scale_c(sx)).max_abs() < 1e-14);
        let e1 = ces[1].apply(&y).unwrap();
        assert!((&e1 - &cq_embed(&f, &ComplexMatrix::identity(2)).scale_c(sx)).max_abs() < 1e-14);
        // block algebra: E[f|F_t] ⊗ X
        let b0 = cq_block_conditional(&model, 0, &p, &y).unwrap();
        assert!((&b0 - &cq_embed(&[ef, ef], &x)).max_abs() < 1e-14);
        let b1 = cq_block_conditional(&model, 1, &p, &y).unwrap();
        assert!((&b1 - &y).max_abs() < 1e-14);
        // the two agree on scalar quantum parts
        let yi = cq_embed(&f, &ComplexMatrix::identity(2));
        assert!((&ces[0].apply(&yi).unwrap() - &cq_block_conditional(&model, 0, &p, &yi).unwrap()).max_abs() < 1e-14);
    }
}
