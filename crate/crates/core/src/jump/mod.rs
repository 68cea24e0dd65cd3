//! Compound-Poisson lattice models: cumulant exponent, calibration, series and
//! matrix-exponential pricers, term-structure bounds, error floors and the diffusion limit.

pub mod lattice;
pub mod mc;
pub mod model;
pub mod payoff;
pub mod quad;
pub mod wkb;

pub use lattice::{
    backward_residual, bs_limit_sweep, expm_price, expm_price_at, generator_matrix, mgf_series, series_partial,
    series_price, sweep_monotone, sweep_order, LatticeGrid, SeriesPrice, SweepRow,
};
pub use mc::{empirical_mse, floor_experiment, simulate_increments, EmpiricalMse, FloorExperiment};
pub use model::{calibrate_rn, diffusion_model, error_floor, increment_moments, IncrementMoments, JumpJson, JumpModel};
pub use payoff::Payoff;
pub use quad::{bs_digital_call, bs_price};
pub use wkb::{wkb_discount, wkb_value_gap, RateBounds, WkbDiscount, WkbGap};
