//! Operator-algebraic arbitrage pricing on finite-dimensional matrix markets.
//!
//! Markets are block-diagonal matrix algebras with an increasing family of
//! abelian information partitions. On top of that the crate provides
//! state-preserving conditional expectations, numéraire-normalised pricing
//! operators, a pricing-state feasibility solver, lattice jump-model pricers
//! with their diffusion limit, quantum Markov semigroup valuation and
//! Cramér–Rao style error floors.

// `!(x <= tol)` is used on purpose so that NaN fails a check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod arbitrage;
pub mod cli;
pub mod cond_exp;
pub mod demo;
pub mod error;
pub mod fisher;
pub mod jump;
pub mod linalg;
pub mod pricing;
pub mod qms;
pub mod states;
pub mod suite;

pub use error::{Error, ErrorClass, Result};
pub use linalg::{ComplexMatrix, C64};
