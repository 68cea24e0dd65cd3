use crate::error::{Error, Result};
use crate::linalg::matrix::{ComplexMatrix, C64, ZERO};

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a Hermitian matrix: A = U diag(λ) U*, λ ascending.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors as columns.
    pub eigenvectors: ComplexMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// U diag(f(λ)) U*
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
        let values: Vec<f64> = self
            .eigenvalues
            .iter()
            .map(|&l| {
                let v = f(l);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::DomainError(format!("f({l:.6e}) = {v}")))
                }
            })
            .collect::<Result<_>>()?;
        Ok(self.synthesize(&values))
    }

    /// U diag(values) U*
    pub fn synthesize(&self, values: &[f64]) -> ComplexMatrix {
        let u = &self.eigenvectors;
        let n = self.dim();
        let scaled = ComplexMatrix::from_fn(n, |i, j| u[(i, j)] * values[j]);
        scaled.matmul(&u.adjoint())
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.synthesize(&self.eigenvalues)
    }

    /// Orthogonal projection onto span of the given eigenvector columns.
    pub fn projection(&self, columns: &[usize]) -> ComplexMatrix {
        let n = self.dim();
        let u = &self.eigenvectors;
        ComplexMatrix::from_fn(n, |i, j| columns.iter().map(|&k| u[(i, k)] * u[(j, k)].conj()).sum())
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// Largest |λ|, which is the operator norm.
    pub fn spectral_radius(&self) -> f64 {
        self.min().abs().max(self.max().abs())
    }
}

/// The 2×2 unitary [[c, s], [−s·e^{−iφ}, c·e^{−iφ}]] that diagonalises
/// [[app, apq], [conj(apq), aqq]] under V* · · V.
#[inline]
pub(crate) fn jacobi_rotation(app: f64, aqq: f64, apq: C64) -> (f64, f64, C64) {
    let g = apq.norm();
    let theta = (aqq - app) / (2.0 * g);
    let t = if theta == 0.0 {
        1.0
    } else {
        theta.signum() / (theta.abs() + theta.hypot(1.0))
    };
    let c = 1.0 / t.hypot(1.0);
    (c, t * c, (apq / g).conj())
}

/// Cyclic complex Jacobi on a row-major Hermitian buffer. Returns (diagonal, U).
fn jacobi(a: &mut [C64], n: usize) -> Result<(Vec<f64>, Vec<C64>)> {
    let mut u = vec![ZERO; n * n];
    for i in 0..n {
        u[i * n + i] = C64::new(1.0, 0.0);
    }
    let scale = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if scale == 0.0 {
        return Ok((vec![0.0; n], u));
    }
    let target = 1e-15 * scale;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q].norm_sqr();
            }
        }
        if off.sqrt() <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.norm() <= f64::MIN_POSITIVE {
                    continue;
                }
                let (c, s, ph) = jacobi_rotation(a[p * n + p].re, a[q * n + q].re, apq);
                // A ← A V
                for k in 0..n {
                    let (x, y) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = x * c - y * ph * s;
                    a[k * n + q] = x * s + y * ph * c;
                }
                // A ← V* A
                let phc = ph.conj();
                for k in 0..n {
                    let (x, y) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = x * c - y * phc * s;
                    a[q * n + k] = x * s + y * phc * c;
                }
                a[p * n + q] = ZERO;
                a[q * n + p] = ZERO;
                a[p * n + p] = C64::new(a[p * n + p].re, 0.0);
                a[q * n + q] = C64::new(a[q * n + q].re, 0.0);
                // U ← U V
                for k in 0..n {
                    let (x, y) = (u[k * n + p], u[k * n + q]);
                    u[k * n + p] = x * c - y * ph * s;
                    u[k * n + q] = x * s + y * ph * c;
                }
            }
        }
    }
    if !converged {
        return Err(Error::ConvergenceFailure { routine: "jacobi eigensolver", iterations: MAX_SWEEPS });
    }
    Ok(((0..n).map(|i| a[i * n + i].re).collect(), u))
}

/// Hermitian eigensolver. Eigenvalues ascending, ties kept in solver order.
pub fn eig_hermitian(a: &ComplexMatrix) -> Result<SpectralDecomposition> {
    a.ensure_hermitian()?;
    let n = a.dim();
    let mut work = a.hermitian_part().into_vec();
    let (diag, u) = jacobi(&mut work, n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let eigenvalues = order.iter().map(|&k| diag[k]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, |i, j| u[i * n + order[j]]);
    Ok(SpectralDecomposition { eigenvalues, eigenvectors })
}

pub fn eigvals_hermitian(a: &ComplexMatrix) -> Result<Vec<f64>> {
    Ok(eig_hermitian(a)?.eigenvalues)
}

/// f(A) by spectral calculus.
pub fn func_calc(a: &ComplexMatrix, f: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
    eig_hermitian(a)?.map(f)
}

/// f_n(A) with f_n(λ) = max(−n, min(λ, n)).
pub fn clamp_trunc(a: &ComplexMatrix, n: f64) -> Result<ComplexMatrix> {
    if !(n > 0.0) {
        return Err(Error::DomainError(format!("truncation level must be positive, got {n}")));
    }
    func_calc(a, |l| l.clamp(-n, n))
}

pub fn min_eigenvalue(a: &ComplexMatrix) -> Result<f64> {
    Ok(eig_hermitian(a)?.min())
}

/// True iff the smallest eigenvalue is at least −tol.
pub fn psd_check(a: &ComplexMatrix, tol: f64) -> Result<bool> {
    Ok(min_eigenvalue(a)? >= -tol)
}
