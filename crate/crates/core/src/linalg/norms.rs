use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::eig::jacobi_rotation;
use crate::linalg::matrix::{ComplexMatrix, C64};

const MAX_SWEEPS: usize = 80;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Norms {
    pub op_norm: f64,
    pub trace_norm: f64,
    pub hs_norm: f64,
    pub trace: C64,
}

/// Singular values, descending, by one-sided Jacobi.
pub fn singular_values(a: &ComplexMatrix) -> Result<Vec<f64>> {
    let n = a.dim();
    // column-major copy so columns are contiguous
    let mut cols: Vec<C64> = (0..n).flat_map(|j| a.column(j)).collect();
    let col = |c: &[C64], j: usize| c[j * n..(j + 1) * n].to_vec();
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (cp, cq) = (col(&cols, p), col(&cols, q));
                let alpha: f64 = cp.iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = cq.iter().map(|z| z.norm_sqr()).sum();
                let gamma: C64 = cp.iter().zip(&cq).map(|(x, y)| x.conj() * y).sum();
                if gamma.norm() <= 1e-15 * (alpha * beta).sqrt() || gamma.norm() <= f64::MIN_POSITIVE {
                    continue;
                }
                rotated = true;
                let (c, s, ph) = jacobi_rotation(alpha, beta, gamma);
                for k in 0..n {
                    let (x, y) = (cp[k], cq[k]);
                    cols[p * n + k] = x * c - y * ph * s;
                    cols[q * n + k] = x * s + y * ph * c;
                }
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::ConvergenceFailure { routine: "jacobi svd", iterations: MAX_SWEEPS });
    }
    let mut sv: Vec<f64> = (0..n)
        .map(|j| cols[j * n..(j + 1) * n].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

pub fn norms(a: &ComplexMatrix) -> Result<Norms> {
    let sv = singular_values(a)?;
    Ok(Norms {
        op_norm: sv.first().copied().unwrap_or(0.0),
        trace_norm: sv.iter().sum(),
        hs_norm: a.frobenius_norm(),
        trace: a.trace(),
    })
}

/// Largest singular value.
pub fn op_norm(a: &ComplexMatrix) -> f64 {
    match singular_values(a) {
        Ok(sv) => sv.first().copied().unwrap_or(0.0),
        // Frobenius bounds the operator norm from above; never hit in practice.
        Err(_) => a.frobenius_norm(),
    }
}

pub fn trace_norm(a: &ComplexMatrix) -> Result<f64> {
    Ok(singular_values(a)?.iter().sum())
}

/// ‖a − b‖_op
pub fn op_dist(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    op_norm(&(a - b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random::{random_matrix, random_vector, seeded};

    #[test]
    fn identity_norms() {
        let n = norms(&ComplexMatrix::identity(3)).unwrap();
        assert!((n.op_norm - 1.0).abs() < 1e-15);
        assert!((n.trace_norm - 3.0).abs() < 1e-15);
        assert!((n.hs_norm - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(n.trace, C64::new(3.0, 0.0));
    }

    #[test]
    fn rank_one_norms() {
        let mut rng = seeded(3);
        let u = random_vector(5, &mut rng);
        let v = random_vector(5, &mut rng);
        let nu = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let nv = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let n = norms(&ComplexMatrix::outer(&u, &v)).unwrap();
        assert!((n.op_norm - nu * nv).abs() < 1e-12 * nu * nv);
        assert!((n.trace_norm - nu * nv).abs() < 1e-12 * nu * nv);
    }

    #[test]
    fn singular_values_match_eigenvalues_of_gram() {
        let mut rng = seeded(9);
        let a = random_matrix(7, &mut rng);
        let sv = singular_values(&a).unwrap();
        let ev = crate::linalg::eig::eigvals_hermitian(&a.adjoint().matmul(&a)).unwrap();
        for (s, e) in sv.iter().rev().zip(&ev) {
            assert!((s * s - e).abs() < 1e-10 * (1.0 + e));
        }
    }

    #[test]
    fn hs_cauchy_schwarz() {
        let mut rng = seeded(4);
        for _ in 0..20 {
            let a = random_matrix(4, &mut rng);
            let b = random_matrix(4, &mut rng);
            assert!(a.trace_product(&b).norm() <= a.frobenius_norm() * b.frobenius_norm() * (1.0 + 1e-14));
        }
    }
}
