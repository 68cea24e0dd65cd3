//! Dense complex linear algebra.

pub mod choi;
pub mod eig;
pub mod expm;
mod json;
pub mod matrix;
pub mod norms;
pub mod perturb;
pub mod random;
pub mod real;

pub use choi::{choi_matrix, choi_min_eigenvalue};
pub use eig::{clamp_trunc, eig_hermitian, eigvals_hermitian, func_calc, min_eigenvalue, psd_check, SpectralDecomposition};
pub use expm::{mat_exp, mat_exp_real};
pub use matrix::{ComplexMatrix, C64};
pub use norms::{norms, op_dist, op_norm, singular_values, Norms};
pub use perturb::{first_order_cluster, ClusterPerturbation};
pub use real::RealMatrix;
