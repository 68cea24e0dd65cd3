use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::eig::{eig_hermitian, SpectralDecomposition};
use crate::linalg::matrix::{ComplexMatrix, C64, ZERO};

pub const GAP_TOL: f64 = 1e-8;
pub const EIG_TOL: f64 = 1e-10;

/// First-order splitting of an isolated eigenvalue cluster of H0 under H0 + εW.
#[derive(Clone, Debug)]
pub struct ClusterPerturbation {
    pub base_eigenvalue: f64,
    /// Distance from h_n to the rest of the base spectrum (∞ if none).
    pub gap: f64,
    /// K = Q* W Q on the eigenspace, Q an orthonormal basis of it.
    pub compressed: ComplexMatrix,
    /// Eigenvalues of K, ascending.
    pub shifts: Vec<f64>,
    basis: ComplexMatrix,
    cluster: Vec<usize>,
    base: SpectralDecomposition,
    w: ComplexMatrix,
    k_eig: SpectralDecomposition,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClusterSummary {
    pub base_eigenvalue: f64,
    pub gap: f64,
    pub multiplicity: usize,
    pub shifts: Vec<f64>,
}

impl ClusterPerturbation {
    pub fn multiplicity(&self) -> usize {
        self.cluster.len()
    }

    /// First-order eigenvalue predictions h_n + ε μ_j.
    pub fn predicted(&self, eps: f64) -> Vec<f64> {
        self.shifts.iter().map(|m| self.base_eigenvalue + eps * m).collect()
    }

    /// Orthonormal basis of the unperturbed eigenspace (columns, dim × d).
    pub fn basis_vectors(&self) -> Vec<Vec<C64>> {
        (0..self.multiplicity()).map(|j| self.basis.column(j)[..self.base.dim()].to_vec()).collect()
    }

    /// Zeroth-order eigenvector e = Q c_j belonging to shift μ_j.
    pub fn zeroth_order_vector(&self, j: usize) -> Vec<C64> {
        let n = self.base.dim();
        let d = self.multiplicity();
        let c = self.k_eig.eigenvectors.column(j);
        (0..n)
            .map(|i| (0..d).map(|k| self.base.eigenvectors[(i, self.cluster[k])] * c[k]).sum())
            .collect()
    }

    /// −P⊥(H0 − h_n)^{-1}P⊥ W e for a simple shift μ_j.
    pub fn eigvec_correction(&self, j: usize) -> Result<Vec<C64>> {
        let d = self.multiplicity();
        if j >= d {
            return Err(Error::InvalidParameter(format!("shift index {j} out of range 0..{d}")));
        }
        let mu = self.shifts[j];
        let spread = 1e-8 * (1.0 + self.shifts.iter().fold(0.0f64, |m, s| m.max(s.abs())));
        if self.shifts.iter().enumerate().any(|(k, s)| k != j && (s - mu).abs() <= spread) {
            return Err(Error::InvalidParameter(format!("shift {mu} is not simple")));
        }
        let e = self.zeroth_order_vector(j);
        let we = self.w.apply(&e);
        let n = self.base.dim();
        let u = &self.base.eigenvectors;
        let mut out = vec![ZERO; n];
        for (k, &lambda) in self.base.eigenvalues.iter().enumerate() {
            if self.cluster.contains(&k) {
                continue;
            }
            let coeff: C64 = (0..n).map(|i| u[(i, k)].conj() * we[i]).sum::<C64>() / (lambda - self.base_eigenvalue);
            for i in 0..n {
                out[i] -= u[(i, k)] * coeff;
            }
        }
        Ok(out)
    }

    pub fn summary(&self) -> ClusterSummary {
        ClusterSummary {
            base_eigenvalue: self.base_eigenvalue,
            gap: self.gap,
            multiplicity: self.multiplicity(),
            shifts: self.shifts.clone(),
        }
    }
}

/// Groups base eigenvalues within γ_n/4 of h_n and diagonalises the
/// compression of W onto that eigenspace.
pub fn first_order_cluster(h0: &ComplexMatrix, w: &ComplexMatrix, h_n: f64) -> Result<ClusterPerturbation> {
    w.ensure_dim(h0.dim())?;
    w.ensure_hermitian()?;
    let base = eig_hermitian(h0)?;
    let dist: Vec<f64> = base.eigenvalues.iter().map(|l| (l - h_n).abs()).collect();
    let nearest = dist.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = 1.0 + base.spectral_radius();
    if !(nearest <= EIG_TOL * scale) {
        return Err(Error::NotEigenvalue { value: h_n, distance: nearest });
    }
    // Members sit within the tolerance; everything else is at least γ_n away,
    // so the quarter-gap radius selects the same set whenever γ_n/4 exceeds it.
    let radius = EIG_TOL * scale;
    let cluster: Vec<usize> = (0..dist.len()).filter(|&k| dist[k] <= radius).collect();
    let gap = (0..dist.len())
        .filter(|k| !cluster.contains(k))
        .map(|k| dist[k])
        .fold(f64::INFINITY, f64::min);
    if gap <= GAP_TOL || gap / 4.0 < radius {
        return Err(Error::NoGap { gap });
    }
    let n = h0.dim();
    let d = cluster.len();
    let u = &base.eigenvectors;
    // K_ab = q_a* W q_b
    let wq: Vec<Vec<C64>> = cluster.iter().map(|&k| w.apply(&u.column(k))).collect();
    let compressed = ComplexMatrix::from_fn(d, |a, b| {
        (0..n).map(|i| u[(i, cluster[a])].conj() * wq[b][i]).sum()
    })
    .hermitian_part();
    let k_eig = eig_hermitian(&compressed)?;
    let mut basis = ComplexMatrix::zeros(n.max(d));
    for (a, &k) in cluster.iter().enumerate() {
        for i in 0..n {
            basis[(i, a)] = u[(i, k)];
        }
    }
    Ok(ClusterPerturbation {
        base_eigenvalue: h_n,
        gap,
        shifts: k_eig.eigenvalues.clone(),
        compressed,
        basis,
        cluster,
        base,
        w: w.clone(),
        k_eig,
    })
}

/// Max over the cluster of |θ_exact − (h_n + ε μ_j)|, pairing sorted lists.
/// θ_exact are the `d` eigenvalues of H0 + εW closest to h_n.
pub fn perturbation_error(h0: &ComplexMatrix, w: &ComplexMatrix, cp: &ClusterPerturbation, eps: f64) -> Result<f64> {
    let h = h0 + &w.scale(eps);
    let ev = eig_hermitian(&h)?.eigenvalues;
    let mut near: Vec<f64> = ev.clone();
    near.sort_by(|a, b| (a - cp.base_eigenvalue).abs().total_cmp(&(b - cp.base_eigenvalue).abs()));
    near.truncate(cp.multiplicity());
    near.sort_by(f64::total_cmp);
    let pred = cp.predicted(eps);
    Ok(near.iter().zip(&pred).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Least-squares slope of log(error) against log(ε).
pub fn log_log_slope(eps: &[f64], err: &[f64]) -> f64 {
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// H0 = diag(1, 1, 3) with W coupling the degenerate pair by `a` and leaking
/// into the third level.
pub fn demo_cluster_problem(a: f64) -> (ComplexMatrix, ComplexMatrix) {
    let h0 = ComplexMatrix::diag(&[1.0, 1.0, 3.0]);
    let w = ComplexMatrix::real(&[&[0.0, a, 0.3], &[a, 0.0, 0.2], &[0.3, 0.2, 0.5]]);
    (h0, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_pair_splits_by_plus_minus_a() {
        let (h0, w) = demo_cluster_problem(0.7);
        let cp = first_order_cluster(&h0, &w, 1.0).unwrap();
        assert_eq!(cp.multiplicity(), 2);
        assert!((cp.shifts[0] + 0.7).abs() < 1e-14);
        assert!((cp.shifts[1] - 0.7).abs() < 1e-14);
        assert!((cp.gap - 2.0).abs() < 1e-14);
        assert_eq!(cp.predicted(0.0), vec![1.0, 1.0]);
    }

    #[test]
    fn remainder_is_second_order() {
        let (h0, w) = demo_cluster_problem(0.7);
        let cp = first_order_cluster(&h0, &w, 1.0).unwrap();
        let eps = [1e-2, 1e-3, 1e-4, 1e-5];
        let err: Vec<f64> = eps.iter().map(|&e| perturbation_error(&h0, &w, &cp, e).unwrap()).collect();
        assert!(log_log_slope(&eps, &err) >= 1.8, "{err:?}");
    }

    #[test]
    fn eigenvector_correction_matches_finite_difference() {
        // simple eigenvalue 3 of diag(1,1,3)
        let (h0, w) = demo_cluster_problem(0.7);
        let cp = first_order_cluster(&h0, &w, 3.0).unwrap();
        let corr = cp.eigvec_correction(0).unwrap();
        let eps = 1e-6;
        let d = eig_hermitian(&(&h0 + &w.scale(eps))).unwrap();
        let v = d.eigenvectors.column(2);
        // fix phase so the component along e_3 is real positive
        let ph = v[2] / v[2].norm();
        for i in 0..2 {
            let fd = (v[i] / ph) / eps;
            assert!((fd - corr[i]).norm() < 1e-5, "{i}: {fd} vs {}", corr[i]);
        }
    }

    #[test]
    fn errors() {
        let (h0, w) = demo_cluster_problem(0.7);
        assert!(matches!(first_order_cluster(&h0, &w, 2.0), Err(Error::NotEigenvalue { .. })));
        let h_close = ComplexMatrix::diag(&[1.0, 1.0 + 1e-9, 3.0]);
        assert!(matches!(first_order_cluster(&h_close, &w, 1.0), Err(Error::NoGap { .. })));
        let h_tight = ComplexMatrix::diag(&[1.0, 1.0 + 1e-9]);
        let w2 = ComplexMatrix::pauli_x();
        assert!(matches!(first_order_cluster(&h_tight, &w2, 1.0), Err(Error::NoGap { .. })));
    }
}
