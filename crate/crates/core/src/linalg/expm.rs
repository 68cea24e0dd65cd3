//! Matrix exponential: scaling and squaring with diagonal Padé approximants
//! (orders 3, 5, 7, 9, 13), selected by the 1-norm.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::linalg::matrix::{zgemm, ComplexMatrix, C64};
use crate::linalg::real::RealMatrix;

/// Largest 1-norm accepted before refusing with `Error::Overflow`.
pub const EXP_NORM_CAP: f64 = 1e6;

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

pub(crate) trait Scalar:
    Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn zero() -> Self;
    fn real(x: f64) -> Self;
    fn modulus(self) -> f64;
    fn div(self, other: Self) -> Self;
    /// c = a · b, all n×n row-major.
    fn gemm(n: usize, a: &[Self], b: &[Self], c: &mut [Self]);
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn real(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn div(self, other: Self) -> Self {
        self / other
    }
    fn gemm(n: usize, a: &[Self], b: &[Self], c: &mut [Self]) {
        crate::linalg::real::dgemm(n, n, n, a, b, c)
    }
}

impl Scalar for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn real(x: f64) -> Self {
        C64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn div(self, other: Self) -> Self {
        self / other
    }
    fn gemm(n: usize, a: &[Self], b: &[Self], c: &mut [Self]) {
        zgemm(n, n, n, a, b, c)
    }
}

fn mul<T: Scalar>(n: usize, a: &[T], b: &[T]) -> Vec<T> {
    let mut c = vec![T::zero(); n * n];
    T::gemm(n, a, b, &mut c);
    c
}

/// Σ c_k M_k + c_I·I
fn combo<T: Scalar>(n: usize, terms: &[(f64, &[T])], identity_coeff: f64) -> Vec<T> {
    let mut out = vec![T::zero(); n * n];
    for &(c, m) in terms {
        let c = T::real(c);
        for (o, &x) in out.iter_mut().zip(m) {
            *o = *o + c * x;
        }
    }
    for i in 0..n {
        out[i * n + i] = out[i * n + i] + T::real(identity_coeff);
    }
    out
}

fn norm1<T: Scalar>(n: usize, a: &[T]) -> f64 {
    (0..n)
        .map(|j| (0..n).map(|i| a[i * n + j].modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves P X = Q in place (Q overwritten by X) by LU with partial pivoting.
fn solve<T: Scalar>(n: usize, mut p: Vec<T>, q: &mut [T]) -> Result<()> {
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| p[i * n + k].modulus().total_cmp(&p[j * n + k].modulus()))
            .unwrap_or(k);
        if p[piv * n + k].modulus() == 0.0 {
            return Err(Error::ConvergenceFailure { routine: "pade denominator solve", iterations: k });
        }
        if piv != k {
            for j in 0..n {
                p.swap(k * n + j, piv * n + j);
                q.swap(k * n + j, piv * n + j);
            }
        }
        let d = p[k * n + k];
        for i in (k + 1)..n {
            let l = p[i * n + k].div(d);
            if l.modulus() == 0.0 {
                continue;
            }
            p[i * n + k] = l;
            let (top, bottom) = p.split_at_mut(i * n);
            let prow = &top[k * n..k * n + n];
            for j in (k + 1)..n {
                bottom[j] = bottom[j] - l * prow[j];
            }
            let (qtop, qbottom) = q.split_at_mut(i * n);
            let qrow = &qtop[k * n..k * n + n];
            for j in 0..n {
                qbottom[j] = qbottom[j] - l * qrow[j];
            }
        }
    }
    for k in (0..n).rev() {
        let d = p[k * n + k];
        for j in 0..n {
            q[k * n + j] = q[k * n + j].div(d);
        }
        for i in 0..k {
            let u = p[i * n + k];
            if u.modulus() == 0.0 {
                continue;
            }
            let (top, bottom) = q.split_at_mut(k * n);
            let krow = &bottom[..n];
            for j in 0..n {
                top[i * n + j] = top[i * n + j] - u * krow[j];
            }
        }
    }
    Ok(())
}

fn pade_low<T: Scalar>(n: usize, a: &[T], b: &[f64]) -> (Vec<T>, Vec<T>) {
    let m = b.len() - 1;
    let a2 = mul(n, a, a);
    let mut powers = vec![a2];
    for _ in 1..m / 2 {
        let next = mul(n, powers.last().unwrap(), &powers[0]);
        powers.push(next);
    }
    // U = A (b1 I + b3 A² + …), V = b0 I + b2 A² + …
    let odd: Vec<(f64, &[T])> = powers.iter().enumerate().map(|(k, p)| (b[2 * k + 3], p.as_slice())).collect();
    let even: Vec<(f64, &[T])> = powers.iter().enumerate().map(|(k, p)| (b[2 * k + 2], p.as_slice())).collect();
    let u = mul(n, a, &combo(n, &odd, b[1]));
    let v = combo(n, &even, b[0]);
    (u, v)
}

fn pade13<T: Scalar>(n: usize, a: &[T]) -> (Vec<T>, Vec<T>) {
    let b = &B13;
    let a2 = mul(n, a, a);
    let a4 = mul(n, &a2, &a2);
    let a6 = mul(n, &a4, &a2);
    let inner_u = combo(n, &[(b[13], &a6), (b[11], &a4), (b[9], &a2)], 0.0);
    let outer_u = combo(n, &[(b[7], &a6), (b[5], &a4), (b[3], &a2)], b[1]);
    let mut w = mul(n, &a6, &inner_u);
    for (x, y) in w.iter_mut().zip(&outer_u) {
        *x = *x + *y;
    }
    let u = mul(n, a, &w);
    let inner_v = combo(n, &[(b[12], &a6), (b[10], &a4), (b[8], &a2)], 0.0);
    let mut v = mul(n, &a6, &inner_v);
    let outer_v = combo(n, &[(b[6], &a6), (b[4], &a4), (b[2], &a2)], b[0]);
    for (x, y) in v.iter_mut().zip(&outer_v) {
        *x = *x + *y;
    }
    (u, v)
}

pub(crate) fn expm_generic<T: Scalar>(n: usize, a: &[T], cap: f64) -> Result<Vec<T>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let nrm = norm1(n, a);
    if !nrm.is_finite() || nrm > cap {
        return Err(Error::Overflow { norm: nrm, cap });
    }
    let mut scaled;
    let mut squarings = 0;
    let (u, v) = if let Some(&(m, _)) = THETA.iter().find(|&&(_, th)| nrm <= th) {
        let b: &[f64] = match m {
            3 => &B3,
            5 => &B5,
            7 => &B7,
            _ => &B9,
        };
        pade_low(n, a, b)
    } else {
        squarings = (nrm / THETA_13).log2().ceil().max(0.0) as u32;
        let f = T::real(0.5f64.powi(squarings as i32));
        scaled = a.to_vec();
        for x in scaled.iter_mut() {
            *x = *x * f;
        }
        pade13(n, &scaled)
    };
    let den: Vec<T> = v.iter().zip(&u).map(|(&v, &u)| v - u).collect();
    let mut r: Vec<T> = v.iter().zip(&u).map(|(&v, &u)| v + u).collect();
    solve(n, den, &mut r)?;
    for _ in 0..squarings {
        r = mul(n, &r, &r);
    }
    Ok(r)
}

/// exp(A) with the default norm cap.
pub fn mat_exp(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    mat_exp_with_cap(a, EXP_NORM_CAP)
}

pub fn mat_exp_with_cap(a: &ComplexMatrix, cap: f64) -> Result<ComplexMatrix> {
    let n = a.dim();
    let e = expm_generic(n, a.as_slice(), cap)?;
    let out = ComplexMatrix::from_vec(n, e)?;
    if !out.is_finite() {
        return Err(Error::Overflow { norm: a.norm1(), cap });
    }
    Ok(out)
}

/// ‖exp(A) exp(−A) − I‖_max, the self-consistency residual of the exponential.
pub fn exp_residual(a: &ComplexMatrix) -> Result<f64> {
    let e = mat_exp(a)?;
    let f = mat_exp(&a.scale(-1.0))?;
    Ok((&e.matmul(&f) - &ComplexMatrix::identity(a.dim())).max_abs())
}

pub fn mat_exp_real(a: &RealMatrix) -> Result<RealMatrix> {
    let n = a.dim();
    let e = expm_generic(n, a.as_slice(), EXP_NORM_CAP)?;
    if e.iter().any(|x| !x.is_finite()) {
        return Err(Error::Overflow { norm: a.norm1(), cap: EXP_NORM_CAP });
    }
    Ok(RealMatrix::from_vec(n, e))
}
