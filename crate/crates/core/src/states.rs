//! Density-matrix states, Born distributions, Lüders updates, GNS inner
//! products and the Robertson–Schrödinger uncertainty check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, op_norm, ComplexMatrix, C64};

/// Minimum eigenvalue for a state to count as faithful.
pub const FAITH_TOL: f64 = 1e-10;
/// Allowed negative eigenvalue from round-off.
pub const PSD_TOL: f64 = 1e-12;
/// Allowed deviation of the trace from 1.
pub const TRACE_TOL: f64 = 1e-12;
/// Events below this probability are refused by the Lüders update.
pub const UPDATE_FLOOR: f64 = 1e-12;
/// Born atoms with |probability| at most this are dropped.
pub const ATOM_PRUNE: f64 = 1e-14;

/// Positive, unit-trace density matrix.
#[derive(Clone, Debug)]
pub struct DensityState {
    rho: ComplexMatrix,
    min_eig: f64,
}

impl DensityState {
    /// Certifies Hermiticity, positivity and unit trace.
    pub fn new(rho: ComplexMatrix) -> Result<Self> {
        rho.ensure_hermitian()?;
        let rho = rho.hermitian_part();
        let tr = rho.trace().re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min_eig = eig_hermitian(&rho)?.min();
        if min_eig < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:.3e}")));
        }
        Ok(Self { rho, min_eig })
    }

    /// Divides a positive matrix by its trace, then certifies it.
    pub fn normalized(rho: ComplexMatrix) -> Result<Self> {
        let tr = rho.trace().re;
        if !(tr > 0.0) {
            return Err(Error::InvalidState(format!("trace {tr} is not positive")));
        }
        Self::new(rho.scale(1.0 / tr))
    }

    /// I/n, built without an eigensolve.
    pub fn maximally_mixed(n: usize) -> Self {
        Self { rho: ComplexMatrix::identity(n).scale(1.0 / n as f64), min_eig: 1.0 / n as f64 }
    }

    /// diag(p) for a probability vector.
    pub fn diagonal(p: &[f64]) -> Result<Self> {
        Self::new(ComplexMatrix::diag(p))
    }

    pub fn rho(&self) -> &ComplexMatrix {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eig
    }

    pub fn is_faithful(&self) -> bool {
        self.min_eig >= FAITH_TOL
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: StateJson = crate::algebra::parse_json(s)?;
        Self::new(raw.rho).map_err(|e| Error::Parse { path: "rho".into(), message: format!("{}: {e}", e.code()) })
    }

    pub fn to_json(&self) -> StateJson {
        StateJson { rho: self.rho.clone() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateJson {
    pub rho: ComplexMatrix,
}

/// φ_ρ(X) = Tr(ρX)
pub fn expect(state: &DensityState, x: &ComplexMatrix) -> Result<C64> {
    x.ensure_dim(state.dim())?;
    Ok(state.rho.trace_product(x))
}

/// ⟨X, Y⟩ = Tr(ρ X* Y)
pub fn gns_inner(state: &DensityState, x: &ComplexMatrix, y: &ComplexMatrix) -> Result<C64> {
    x.ensure_dim(state.dim())?;
    y.ensure_dim(state.dim())?;
    Ok(state.rho.trace_product(&x.adjoint().matmul(y)))
}

/// Spectral measure of X in the state: atoms (eigenvalue, probability).
#[derive(Clone, Debug, Serialize)]
pub struct BornDistribution {
    pub atoms: Vec<(f64, f64)>,
}

impl BornDistribution {
    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(x, p)| x * p).sum()
    }

    /// `eigenvalue,probability` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eigenvalue,probability\n");
        for (x, p) in &self.atoms {
            out.push_str(&format!("{x:.17e},{p:.17e}\n"));
        }
        out
    }
}

pub fn born_distribution(state: &DensityState, x: &ComplexMatrix) -> Result<BornDistribution> {
    x.ensure_dim(state.dim())?;
    let d = eig_hermitian(x)?;
    let merge_tol = 1e-8 * (1.0 + d.spectral_radius());
    let u = &d.eigenvectors;
    let n = d.dim();
    let weight = |k: usize| -> f64 {
        let v = u.column(k);
        let rv = state.rho.apply(&v);
        v.iter().zip(&rv).map(|(a, b)| a.conj() * b).sum::<C64>().re
    };
    let mut atoms = Vec::new();
    let mut k = 0;
    while k < n {
        let start = k;
        let (mut sum_l, mut prob) = (0.0, 0.0);
        while k < n && d.eigenvalues[k] - d.eigenvalues[start] <= merge_tol {
            sum_l += d.eigenvalues[k];
            prob += weight(k);
            k += 1;
        }
        if prob.abs() > ATOM_PRUNE {
            atoms.push((sum_l / (k - start) as f64, prob));
        }
    }
    Ok(BornDistribution { atoms })
}

/// PρP / Tr(ρP)
pub fn luders_update(state: &DensityState, p: &ComplexMatrix) -> Result<DensityState> {
    p.ensure_dim(state.dim())?;
    let residual = op_norm(&(&p.matmul(p) - p)).max(p.hermitian_residual());
    if residual > crate::algebra::PARTITION_TOL {
        return Err(Error::NotProjection { index: 0, residual });
    }
    let prob = state.rho.trace_product(p).re;
    if prob <= UPDATE_FLOOR {
        return Err(Error::ZeroProbabilityEvent { prob });
    }
    let post = p.matmul(&state.rho).matmul(p).scale(1.0 / prob).hermitian_part();
    let min_eig = eig_hermitian(&post)?.min();
    Ok(DensityState { rho: post, min_eig })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RobertsonReport {
    pub var_x: f64,
    pub var_y: f64,
    /// ¼(Tr ρ{X̃,Ỹ})² + ¼|Tr ρ[X,Y]|²
    pub rs_rhs: f64,
    /// ¼|Tr ρ[X,Y]|²
    pub robertson_rhs: f64,
    pub holds: bool,
}

pub fn robertson_check(state: &DensityState, x: &ComplexMatrix, y: &ComplexMatrix) -> Result<RobertsonReport> {
    x.ensure_dim(state.dim())?;
    y.ensure_dim(state.dim())?;
    x.ensure_hermitian()?;
    y.ensure_hermitian()?;
    let n = state.dim();
    let id = ComplexMatrix::identity(n);
    let xc = x - &id.scale(expect(state, x)?.re);
    let yc = y - &id.scale(expect(state, y)?.re);
    let var_x = state.rho.trace_product(&xc.matmul(&xc)).re;
    let var_y = state.rho.trace_product(&yc.matmul(&yc)).re;
    let anti = state.rho.trace_product(&ComplexMatrix::anticommutator(&xc, &yc)).re;
    let comm = state.rho.trace_product(&ComplexMatrix::commutator(x, y)).norm_sqr();
    let robertson_rhs = 0.25 * comm;
    let rs_rhs = 0.25 * anti * anti + robertson_rhs;
    Ok(RobertsonReport { var_x, var_y, rs_rhs, robertson_rhs, holds: var_x * var_y >= rs_rhs - 1e-10 })
}
