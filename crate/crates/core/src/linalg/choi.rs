use crate::error::{Error, Result};
use crate::linalg::matrix::ComplexMatrix;
use crate::linalg::random::{complex_normal, random_matrix, seeded};

/// Tolerance of the linearity spot check, relative to the output scale.
pub const LINEARITY_TOL: f64 = 1e-9;

/// C = Σ_ij E_ij ⊗ map(E_ij). The map is first spot-checked for linearity on
/// a fixed random combination.
pub fn choi_matrix<F>(n: usize, map: F) -> Result<ComplexMatrix>
where
    F: Fn(&ComplexMatrix) -> Result<ComplexMatrix>,
{
    let mut rng = seeded(0x0c401);
    let a = random_matrix(n, &mut rng);
    let b = random_matrix(n, &mut rng);
    let (ca, cb) = (complex_normal(&mut rng), complex_normal(&mut rng));
    let combined = map(&(&a.scale_c(ca) + &b.scale_c(cb)))?;
    let (ma, mb) = (map(&a)?, map(&b)?);
    combined.ensure_dim(n)?;
    let expected = &ma.scale_c(ca) + &mb.scale_c(cb);
    let residual = (&combined - &expected).max_abs();
    if !(residual <= LINEARITY_TOL * (1.0 + expected.max_abs())) {
        return Err(Error::NonLinearMap { residual });
    }

    let mut c = ComplexMatrix::zeros(n * n);
    for i in 0..n {
        for j in 0..n {
            let image = map(&ComplexMatrix::unit(n, i, j))?;
            image.ensure_dim(n)?;
            for k in 0..n {
                for l in 0..n {
                    c[(i * n + k, j * n + l)] = image[(k, l)];
                }
            }
        }
    }
    Ok(c)
}

/// Smallest eigenvalue of the (Hermitian part of the) Choi matrix.
pub fn choi_min_eigenvalue(choi: &ComplexMatrix) -> Result<f64> {
    crate::linalg::eig::min_eigenvalue(&choi.hermitian_part())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use crate::linalg::eig::eigvals_hermitian;

    #[test]
    fn identity_map() {
        let c = choi_matrix(2, |x| Ok(x.clone())).unwrap();
        let ev = eigvals_hermitian(&c).unwrap();
        assert!((ev[3] - 2.0).abs() < 1e-14);
        assert!(ev[..3].iter().all(|e| e.abs() < 1e-14));
        assert!((c.trace().re - 2.0).abs() < 1e-15);
    }

    #[test]
    fn transpose_map_is_not_cp() {
        let c = choi_matrix(2, |x| Ok(x.transpose())).unwrap();
        let ev = eigvals_hermitian(&c).unwrap();
        assert!((ev[0] + 1.0).abs() < 1e-14);
        assert!((ev[3] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kraus_map_is_cp() {
        let mut rng = seeded(1);
        let v = random_matrix(3, &mut rng);
        let c = choi_matrix(3, |x| Ok(v.adjoint().matmul(x).matmul(&v))).unwrap();
        assert!(choi_min_eigenvalue(&c).unwrap() > -1e-12);
    }

    #[test]
    fn nonlinear_map_rejected() {
        let r = choi_matrix(2, |x| Ok(x.map(|z| C64::new(z.norm(), 0.0))));
        assert!(matches!(r, Err(Error::NonLinearMap { .. })));
    }
}
