//! Seeded random matrices for property checks and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::matrix::{ComplexMatrix, C64};

pub type TestRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Entries i.i.d. standard complex normal.
pub fn random_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, |_, _| complex_normal(rng))
}

pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    random_matrix(n, rng).hermitian_part()
}

/// B*B
pub fn random_psd<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let b = random_matrix(n, rng);
    b.adjoint().matmul(&b)
}

/// Full-rank density matrix.
pub fn random_density<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let p = random_psd(n, rng);
    let tr = p.trace().re;
    p.scale(1.0 / tr)
}

pub fn random_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<C64> {
    (0..n).map(|_| complex_normal(rng)).collect()
}
