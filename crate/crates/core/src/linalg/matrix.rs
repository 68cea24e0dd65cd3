use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Dense square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = self
                .row(i)
                .iter()
                .map(|z| format!("{:+.4e}{:+.4e}i", z.re, z.im))
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    /// Wraps a row-major buffer of length `dim * dim`.
    pub fn from_vec(dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimMismatch { expected: dim * dim, found: data.len() });
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimMismatch { expected: n, found: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim: n, data })
    }

    /// Real matrix from rows; panics if the rows are ragged.
    pub fn real(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        Self::from_fn(n, |i, j| {
            assert_eq!(rows[i].len(), n, "ragged row {i}");
            C64::new(rows[i][j], 0.0)
        })
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    pub fn diag_complex(values: &[C64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// |u⟩⟨v|
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        assert_eq!(u.len(), v.len());
        Self::from_fn(u.len(), |i, j| u[i] * v[j].conj())
    }

    /// Matrix unit E_ij.
    pub fn unit(dim: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(dim);
        m[(i, j)] = ONE;
        m
    }

    pub fn pauli_x() -> Self {
        Self::real(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    pub fn pauli_y() -> Self {
        Self::from_rows(&[vec![ZERO, -I], vec![I, ZERO]]).unwrap()
    }

    pub fn pauli_z() -> Self {
        Self::diag(&[1.0, -1.0])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    pub fn ensure_dim(&self, dim: usize) -> Result<()> {
        if self.dim != dim {
            return Err(Error::DimMismatch { expected: dim, found: self.dim });
        }
        Ok(())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&z| f(z)).collect() }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|z| z * c)
    }

    pub fn scale_c(&self, c: C64) -> Self {
        self.map(|z| z * c)
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Tr(self · other) without forming the product.
    pub fn trace_product(&self, other: &Self) -> C64 {
        assert_eq!(self.dim, other.dim, "trace_product dimension mismatch");
        let n = self.dim;
        let mut acc = ZERO;
        for i in 0..n {
            for k in 0..n {
                acc += self.data[i * n + k] * other.data[k * n + i];
            }
        }
        acc
    }

    /// Frobenius inner product Tr(self* · other).
    pub fn hs_inner(&self, other: &Self) -> C64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Induced 1-norm (max column sum).
    pub fn norm1(&self) -> f64 {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// max |A_ij − conj(A_ji)|
    pub fn hermitian_residual(&self) -> f64 {
        let n = self.dim;
        let mut r: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                r = r.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        r
    }

    /// Default Hermiticity tolerance 1e-10·(1 + ‖A‖), with the Frobenius norm as the scale.
    pub fn herm_tol(&self) -> f64 {
        1e-10 * (1.0 + self.frobenius_norm())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_residual() <= tol
    }

    pub fn ensure_hermitian(&self) -> Result<()> {
        let residual = self.hermitian_residual();
        let tol = self.herm_tol();
        if residual > tol {
            return Err(Error::NotHermitian { residual, tol });
        }
        Ok(())
    }

    /// (A + A*)/2
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.dim, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        if n == 0 {
            return out;
        }
        zgemm(n, n, n, &self.data, &other.data, &mut out.data);
        out
    }

    /// self · v
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// A · X · A*
    pub fn sandwich(&self, x: &Self) -> Self {
        self.matmul(x).matmul(&self.adjoint())
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        Self::from_fn(n * m, |r, c| self[(r / m, c / m)] * other[(r % m, c % m)])
    }

    pub fn commutator(a: &Self, b: &Self) -> Self {
        &a.matmul(b) - &b.matmul(a)
    }

    pub fn anticommutator(a: &Self, b: &Self) -> Self {
        &a.matmul(b) + &b.matmul(a)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest |entry| outside the diagonal blocks of the given sizes.
    pub fn off_block_mass(&self, block_dims: &[usize]) -> f64 {
        let mut block_of = Vec::with_capacity(self.dim);
        for (b, &d) in block_dims.iter().enumerate() {
            block_of.extend(std::iter::repeat_n(b, d));
        }
        let mut r: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                if block_of.get(i) != block_of.get(j) {
                    r = r.max(self[(i, j)].norm());
                }
            }
        }
        r
    }
}

/// c = a · b for row-major a (m×k) and b (k×n).
pub(crate) fn zgemm(m: usize, k: usize, n: usize, a: &[C64], b: &[C64], c: &mut [C64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    // SAFETY: Complex64 is repr(C) with layout [re, im]; slice lengths are checked above.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            k as isize,
            1,
            b.as_ptr() as *const [f64; 2],
            n as isize,
            1,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            n as isize,
            1,
        );
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "add dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "sub dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Mul<f64> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, c: f64) -> ComplexMatrix {
        self.scale(c)
    }
}

impl Mul<C64> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, c: C64) -> ComplexMatrix {
        self.scale_c(c)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.map(|z| -z)
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!(self.dim, rhs.dim, "add dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&ComplexMatrix> for ComplexMatrix {
    fn sub_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!(self.dim, rhs.dim, "sub dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_matches_naive() {
        let a = ComplexMatrix::from_fn(5, |i, j| C64::new(i as f64 - 0.3 * j as f64, (i * j) as f64 * 0.1));
        let b = ComplexMatrix::from_fn(5, |i, j| C64::new((i + 2 * j) as f64, -(i as f64)));
        let c = a.matmul(&b);
        for i in 0..5 {
            for j in 0..5 {
                let want: C64 = (0..5).map(|k| a[(i, k)] * b[(k, j)]).sum();
                assert!((c[(i, j)] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn kron_of_units() {
        let e01 = ComplexMatrix::unit(2, 0, 1);
        let e10 = ComplexMatrix::unit(2, 1, 0);
        let k = e01.kron(&e10);
        // (0,1)⊗(1,0) sits at row 0*2+1, column 1*2+0
        assert_eq!(k[(1, 2)], ONE);
        assert!((k.frobenius_norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trace_product_equals_trace_of_product() {
        let a = ComplexMatrix::from_fn(4, |i, j| C64::new((i * 3 + j) as f64, 1.0));
        let b = ComplexMatrix::from_fn(4, |i, j| C64::new(j as f64, i as f64));
        assert!((a.trace_product(&b) - a.matmul(&b).trace()).norm() < 1e-10);
    }

    #[test]
    fn pauli_algebra() {
        let (x, y, z) = (ComplexMatrix::pauli_x(), ComplexMatrix::pauli_y(), ComplexMatrix::pauli_z());
        let xy = x.matmul(&y);
        assert_eq!(xy, z.scale_c(I));
        assert_eq!(ComplexMatrix::commutator(&x, &y), z.scale_c(C64::new(0.0, 2.0)));
    }

    #[test]
    fn off_block_mass_detects_coupling() {
        let mut m = ComplexMatrix::identity(4);
        assert_eq!(m.off_block_mass(&[2, 2]), 0.0);
        m[(1, 2)] = C64::new(0.5, 0.0);
        assert_eq!(m.off_block_mass(&[2, 2]), 0.5);
    }
}
