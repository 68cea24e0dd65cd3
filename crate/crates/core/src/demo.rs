//! Bundled example models shared by the property suite, the CLI and the tests.

use std::collections::BTreeMap;

use crate::algebra::{build_cq_model, cq_embed, validate_filtration, AlgebraModel, ProjectivePartition};
use crate::arbitrage::GainsCone;
use crate::cond_exp::ConditionalExpectation;
use crate::error::Result;
use crate::fisher::{ConjugatePair, CJ_TOL_ANALYTIC};
use crate::jump::{calibrate_rn, JumpModel};
use crate::linalg::{ComplexMatrix, C64};
use crate::qms::{block_system, damping_system, GkslSystem};
use crate::states::DensityState;

/// Rate used by the binomial and jump examples.
pub const DEMO_RATE: f64 = 0.05;

/// A named market model with its pricing state.
#[derive(Clone, Debug)]
pub struct BundledModel {
    pub name: &'static str,
    pub model: AlgebraModel,
    pub state: DensityState,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Four classical atoms revealed in two steps, with a stochastic numéraire.
pub fn diagonal4() -> Result<BundledModel> {
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
    let f = validate_filtration(vec![0.0, 0.5, 1.0], parts, b)?;
    Ok(BundledModel {
        name: "diagonal4",
        model: AlgebraModel::new(vec![1, 1, 1, 1], f)?,
        state: DensityState::diagonal(&[0.1, 0.2, 0.3, 0.4])?,
    })
}

/// M₂ ⊕ M₂ where only the block label is ever observed; the state has
/// coherences inside each block.
pub fn two_block4() -> Result<BundledModel> {
    let blocks = ProjectivePartition::from_index_groups(4, &[vec![0, 1], vec![2, 3]]);
    let parts = vec![ProjectivePartition::trivial(4), blocks.clone(), blocks];
    let b = vec![
        ComplexMatrix::identity(4),
        ComplexMatrix::diag(&[1.02, 1.02, 1.03, 1.03]),
        ComplexMatrix::diag(&[1.05, 1.05, 1.04, 1.04]),
    ];
    let f = validate_filtration(vec![0.0, 0.5, 1.0], parts, b)?;
    let rho = ComplexMatrix::from_rows(&[
        vec![c(0.24, 0.0), c(0.04, -0.08), c(0.0, 0.0), c(0.0, 0.0)],
        vec![c(0.04, 0.08), c(0.16, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        vec![c(0.0, 0.0), c(0.0, 0.0), c(0.18, 0.0), c(0.09, 0.0)],
        vec![c(0.0, 0.0), c(0.0, 0.0), c(0.09, 0.0), c(0.42, 0.0)],
    ])?;
    Ok(BundledModel { name: "twoblock4", model: AlgebraModel::new(vec![2, 2], f)?, state: DensityState::new(rho)? })
}

/// Two classical atoms carrying a qubit each.
pub fn cq2x2() -> Result<BundledModel> {
    let base = build_cq_model(2, 2, &[vec![vec![0, 1]], vec![vec![0], vec![1]]])?;
    let model = base.with_numeraire(vec![ComplexMatrix::identity(4), cq_embed(&[1.04, 1.01], &ComplexMatrix::identity(2))])?;
    let sigma = ComplexMatrix::from_rows(&[vec![c(0.7, 0.0), c(0.0, 0.2)], vec![c(0.0, -0.2), c(0.3, 0.0)]])?;
    Ok(BundledModel { name: "cq2x2", model, state: DensityState::new(cq_embed(&[0.35, 0.65], &sigma))? })
}

/// Two-period binomial tree on four atoms, each carrying a qubit, with
/// numéraire e^{rt}.
pub fn binomial() -> Result<BundledModel> {
    let base = build_cq_model(4, 2, &[vec![vec![0, 1, 2, 3]], vec![vec![0, 1], vec![2, 3]], (0..4).map(|i| vec![i]).collect()])?;
    let id = ComplexMatrix::identity(8);
    let numeraire = base.times().iter().map(|t| id.scale((DEMO_RATE * t).exp())).collect();
    let model = base.with_numeraire(numeraire)?;
    let sigma = ComplexMatrix::from_rows(&[vec![c(0.6, 0.0), c(0.1, 0.1)], vec![c(0.1, -0.1), c(0.4, 0.0)]])?;
    Ok(BundledModel { name: "binomial", model, state: DensityState::new(cq_embed(&[0.25; 4], &sigma))? })
}

/// Undiscounted price S_t = e^{rt} S̄_t of the binomial asset. Without drift
/// S̄ is a martingale under the uniform atom weights; with drift the up-up
/// node is raised by 0.2.
pub fn binomial_process(drift: bool) -> Vec<ComplexMatrix> {
    let top = if drift { 1.2 } else { 1.0 };
    let bars: [&[f64]; 3] = [&[0.0; 4], &[0.5, 0.5, -0.5, -0.5], &[top, 0.0, 0.0, -1.0]];
    let id = ComplexMatrix::identity(2);
    bars.iter().enumerate().map(|(t, s)| cq_embed(s, &id).scale((DEMO_RATE * t as f64).exp())).collect()
}

/// The three algebra models whose conditional expectations the suite certifies.
pub fn core_models() -> Result<Vec<BundledModel>> {
    Ok(vec![diagonal4()?, two_block4()?, cq2x2()?])
}

/// Every bundled algebra model.
pub fn all_models() -> Result<Vec<BundledModel>> {
    let mut v = core_models()?;
    v.push(binomial()?);
    Ok(v)
}

/// {diag(1, −1)}: priced by any state with more weight on the second level.
pub fn gains_feasible() -> GainsCone {
    GainsCone::new(2, vec![ComplexMatrix::diag(&[1.0, -1.0])]).expect("valid cone")
}

/// {diag(1, 0)}: a gain that is never negative, hence an arbitrage once δ > 0.
pub fn gains_arbitrage() -> GainsCone {
    GainsCone::new(2, vec![ComplexMatrix::diag(&[1.0, 0.0])]).expect("valid cone")
}

/// Symmetric ±1 jumps with Δx = 0.1, calibrated to r = 0.05.
pub fn pm1_jump() -> JumpModel {
    calibrate_rn(&BTreeMap::from([(-1, 0.5), (1, 0.5)]), 0.1, DEMO_RATE).expect("calibratable shape")
}

/// Qubit amplitude damping, γ = 0.5 and ω = 1.
pub fn damping() -> GkslSystem {
    damping_system(0.5, 1.0)
}

pub fn blocks() -> GkslSystem {
    block_system()
}

/// State and conditional expectations (trivial, block) for the block system.
pub fn block_expectations() -> Result<(DensityState, ConditionalExpectation, ConditionalExpectation)> {
    let state = DensityState::diagonal(&[0.2, 0.2, 0.3, 0.3])?;
    let coarse = ConditionalExpectation::new(ProjectivePartition::trivial(4), state.clone())?;
    let fine = ConditionalExpectation::new(ProjectivePartition::from_index_groups(4, &[vec![0, 1], vec![2, 3]]), state.clone())?;
    Ok((state, coarse, fine))
}

/// A conjugate pair that saturates the operator Cramér–Rao bound: X is
/// block off-diagonal and J rescales it blockwise.
pub fn fisher_pair() -> Result<ConjugatePair> {
    let state = DensityState::diagonal(&[0.1, 0.3, 0.2, 0.4])?;
    let ce = ConditionalExpectation::new(ProjectivePartition::from_index_groups(4, &[vec![0, 1], vec![2, 3]]), state)?;
    let x = ComplexMatrix::real(&[&[0.0, 2.0, 0.0, 0.0], &[2.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 0.5], &[0.0, 0.0, 0.5, 0.0]]);
    let j = x.matmul(&ComplexMatrix::diag(&[0.25, 0.25, 4.0, 4.0]));
    ConjugatePair::new(x, j, ce, CJ_TOL_ANALYTIC)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricing::PricingSystem;

    #[test]
    fn bundled_models_are_priceable() {
        for m in all_models().unwrap() {
            assert!(m.state.is_faithful(), "{}", m.name);
            PricingSystem::new(m.model, m.state).unwrap();
        }
    }

    #[test]
    fn binomial_truncation() {
        let m = binomial().unwrap();
        let ps = PricingSystem::new(m.model, m.state).unwrap();
        let fair = ps.truncation_martingale_check(&binomial_process(false), None).unwrap();
        assert!(fair.max_residual <= 1e-11, "{fair:?}");
        let drifted = ps.truncation_martingale_check(&binomial_process(true), None).unwrap();
        assert!((drifted.max_residual - 0.1).abs() < 1e-12, "{drifted:?}");
    }

    #[test]
    fn systems_and_pairs() {
        assert_eq!(damping().dim(), 2);
        assert_eq!(blocks().dim(), 4);
        assert!(fisher_pair().unwrap().is_certified());
    }
}
