//! Gains cones and the pricing-state feasibility problem
//! ρ ⪰ δI, Tr ρ = 1, Tr(ρ G_i) ≤ 0, solved by Dykstra's cyclic projections.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, ComplexMatrix};
use crate::pricing::numeraire_roots;
use crate::states::DensityState;

pub const DEFAULT_FEAS_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 50_000;

/// Stated in every certificate: only the dual side is decided.
pub const DUAL_ONLY_NOTE: &str = "dual certificate: a state nonpositive on every generator was searched for; \
the primal condition C ∩ M+ = {0} is not decided";

/// Discounted attainable gains, given by Hermitian generators.
#[derive(Clone, Debug)]
pub struct GainsCone {
    dim: usize,
    generators: Vec<ComplexMatrix>,
}

impl GainsCone {
    pub fn new(dim: usize, generators: Vec<ComplexMatrix>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("cone dimension must be positive".into()));
        }
        for g in &generators {
            g.ensure_dim(dim)?;
            g.ensure_hermitian()?;
        }
        let generators = generators.into_iter().map(|g| g.hermitian_part()).collect();
        Ok(Self { dim, generators })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[ComplexMatrix] {
        &self.generators
    }

    /// Same cone with every generator multiplied by c.
    pub fn scaled(&self, c: f64) -> Self {
        Self { dim: self.dim, generators: self.generators.iter().map(|g| g.scale(c)).collect() }
    }

    /// max_i Tr(ρ G_i); 0 for the empty cone.
    pub fn max_violation(&self, rho: &ComplexMatrix) -> f64 {
        if self.generators.is_empty() {
            return 0.0;
        }
        self.generators.iter().map(|g| rho.trace_product(g).re).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn from_json_str(s: &str, dim: Option<usize>) -> Result<Self> {
        let raw: GainsJson = crate::algebra::parse_json(s)?;
        let dim = match (raw.gains.first(), dim) {
            (Some(g), _) => g.dim(),
            (None, Some(d)) => d,
            (None, None) => return Err(Error::Parse { path: "gains".into(), message: "empty cone needs a dimension".into() }),
        };
        Self::new(dim, raw.gains).map_err(|e| Error::Parse { path: "gains".into(), message: format!("{}: {e}", e.code()) })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsJson {
    pub gains: Vec<ComplexMatrix>,
}

#[derive(Clone, Debug)]
pub struct SeparationResult {
    pub state: DensityState,
    pub max_violation: f64,
    pub iterations: usize,
    pub faithful_floor: f64,
}

/// Frobenius projection onto {ρ ⪰ δI, Tr ρ = 1}.
pub fn project_spectrahedron(x: &ComplexMatrix, delta: f64) -> Result<ComplexMatrix> {
    let d = eig_hermitian(&x.hermitian_part())?;
    let lam = &d.eigenvalues;
    let total = |theta: f64| lam.iter().map(|l| (l - theta).max(delta)).sum::<f64>();
    let n = lam.len() as f64;
    // total(θ) is nonincreasing; bracket the root of total(θ) = 1
    let mut lo = d.min() - 1.0;
    let mut hi = d.max();
    while total(lo) < 1.0 {
        lo -= 2.0 * (hi - lo) + 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // exact shift on the active set
    let theta = 0.5 * (lo + hi);
    let active: Vec<usize> = (0..lam.len()).filter(|&i| lam[i] - theta > delta).collect();
    let values: Vec<f64> = if active.is_empty() {
        vec![1.0 / n; lam.len()]
    } else {
        let inactive = lam.len() - active.len();
        let sum_active: f64 = active.iter().map(|&i| lam[i]).sum();
        let theta = (sum_active + delta * inactive as f64 - 1.0) / active.len() as f64;
        lam.iter().map(|l| (l - theta).max(delta)).collect()
    };
    Ok(d.synthesize(&values).hermitian_part())
}

/// Frobenius projection onto {Tr(ρG) ≤ 0}.
fn project_halfspace(x: &ComplexMatrix, g: &ComplexMatrix, g_norm2: f64) -> ComplexMatrix {
    let v = x.trace_product(g).re;
    if v <= 0.0 || g_norm2 == 0.0 {
        x.clone()
    } else {
        x - &g.scale(v / g_norm2)
    }
}

/// Dykstra's algorithm from I/dim; the spectrahedron is projected last, so
/// every iterate is a state and only the half-space violations need checking.
pub fn find_pricing_state(cone: &GainsCone, delta: f64, feas_tol: f64, max_iter: usize) -> Result<SeparationResult> {
    let n = cone.dim();
    if !(delta >= 0.0) || delta * n as f64 >= 1.0 {
        return Err(Error::InvalidParameter(format!("faithfulness floor {delta} needs 0 <= delta < 1/{n}")));
    }
    let mut x = ComplexMatrix::identity(n).scale(1.0 / n as f64);
    let norms: Vec<f64> = cone.generators().iter().map(|g| g.hs_inner(g).re).collect();
    let mut incr = vec![ComplexMatrix::zeros(n); cone.generators().len() + 1];
    let mut violation = cone.max_violation(&x);
    let mut iterations = 0;
    while violation > feas_tol && iterations < max_iter {
        iterations += 1;
        for (k, g) in cone.generators().iter().enumerate() {
            let y = &x + &incr[k];
            let p = project_halfspace(&y, g, norms[k]);
            incr[k] = &y - &p;
            x = p;
        }
        let last = incr.len() - 1;
        let y = &x + &incr[last];
        let p = project_spectrahedron(&y, delta)?;
        incr[last] = &y - &p;
        x = p;
        violation = cone.max_violation(&x);
    }
    if violation > feas_tol {
        return Err(Error::Infeasible { max_violation: violation, iterations });
    }
    Ok(SeparationResult { state: DensityState::new(x)?, max_violation: violation, iterations, faithful_floor: delta })
}

#[derive(Clone, Debug, Serialize)]
pub struct NaCertificate {
    pub has_pricing_state: bool,
    pub state: Option<ComplexMatrix>,
    pub violation: f64,
    pub iterations: usize,
    pub note: &'static str,
}

pub fn na_certificate(cone: &GainsCone, delta: f64, feas_tol: f64) -> Result<NaCertificate> {
    match find_pricing_state(cone, delta, feas_tol, DEFAULT_MAX_ITER) {
        Ok(r) => Ok(NaCertificate {
            has_pricing_state: true,
            state: Some(r.state.rho().clone()),
            violation: r.max_violation,
            iterations: r.iterations,
            note: DUAL_ONLY_NOTE,
        }),
        Err(Error::Infeasible { max_violation, iterations }) => Ok(NaCertificate {
            has_pricing_state: false,
            state: None,
            violation: max_violation,
            iterations,
            note: DUAL_ONLY_NOTE,
        }),
        Err(e) => Err(e),
    }
}

/// π₀(X) = Tr(ρ B_T^{-1/2} X B_T^{-1/2})
pub fn price0(state: &DensityState, x: &ComplexMatrix, bt: &ComplexMatrix) -> Result<f64> {
    x.ensure_dim(state.dim())?;
    x.ensure_hermitian()?;
    let (_, inv) = numeraire_roots(bt)?;
    Ok(state.rho().trace_product(&inv.matmul(x).matmul(&inv)).re)
}

/// Independent recomputation of max_i Tr(ρ G_i).
pub fn separation_consistency(cone: &GainsCone, result: &SeparationResult) -> f64 {
    cone.max_violation(result.state.rho())
}
