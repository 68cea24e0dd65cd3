//! Seeded Monte Carlo of lattice log-returns, used as an oracle for the moments and the error floor.

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

use super::model::{error_floor, increment_moments, JumpModel};

const CHUNK: usize = 1 << 16;

/// Log-returns R_h = Δx Σ α_i over `paths` independent paths. Chunk k draws from
/// ChaCha stream k, so the sample does not depend on the thread count.
pub fn simulate_increments(model: &JumpModel, h: f64, paths: usize, seed: u64) -> Result<Vec<f64>> {
    if !(h >= 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon must be >= 0, got {h}")));
    }
    let jumps: Vec<(i64, f64)> = model.gamma().iter().filter(|(_, &g)| g > 0.0).map(|(&a, &g)| (a, g)).collect();
    let mu = model.total_intensity() * h;
    if jumps.is_empty() || mu == 0.0 {
        return Ok(vec![0.0; paths]);
    }
    let count = Poisson::new(mu).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let pick = WeightedIndex::new(jumps.iter().map(|j| j.1)).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let dx = model.dx();
    let chunks = paths.div_ceil(CHUNK);
    let out: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = CHUNK.min(paths - c * CHUNK);
            (0..len)
                .map(|_| {
                    let n = count.sample(&mut rng) as u64;
                    let k: i64 = (0..n).map(|_| jumps[rng.sample(&pick)].0).sum();
                    k as f64 * dx
                })
                .collect()
        })
        .collect();
    Ok(out.concat())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EmpiricalMse {
    pub predictor: f64,
    pub mse: f64,
    pub std_error: f64,
}

/// Sample mean of (R − a)² with its standard error.
pub fn empirical_mse(sample: &[f64], a: f64) -> EmpiricalMse {
    let n = sample.len() as f64;
    let sq: Vec<f64> = sample.iter().map(|x| (x - a) * (x - a)).collect();
    let mse = sq.iter().sum::<f64>() / n;
    let var = sq.iter().map(|v| (v - mse) * (v - mse)).sum::<f64>() / (n - 1.0);
    EmpiricalMse { predictor: a, mse, std_error: (var / n).sqrt() }
}

#[derive(Clone, Debug, Serialize)]
pub struct FloorExperiment {
    pub floor: f64,
    pub paths: usize,
    pub sample_mean: f64,
    pub sample_variance: f64,
    pub optimal: EmpiricalMse,
    pub others: Vec<EmpiricalMse>,
    /// |MSE of the optimal constant − floor| ≤ 3 standard errors
    pub matches_floor: bool,
    /// every tried predictor has MSE ≥ floor − 3 standard errors
    pub none_beats_floor: bool,
}

/// Compares the floor with the empirical MSE of constant predictors, including the
/// true mean and the sample mean.
pub fn floor_experiment(model: &JumpModel, h: f64, paths: usize, seed: u64, offsets: &[f64]) -> Result<FloorExperiment> {
    if paths < 2 {
        return Err(Error::InvalidParameter("need at least two paths".into()));
    }
    let sample = simulate_increments(model, h, paths, seed)?;
    let floor = error_floor(model, h);
    let mean = increment_moments(model, h).mean;
    let n = sample.len() as f64;
    let sample_mean = sample.iter().sum::<f64>() / n;
    let sample_variance = sample.iter().map(|x| (x - sample_mean).powi(2)).sum::<f64>() / (n - 1.0);
    let optimal = empirical_mse(&sample, mean);
    let mut others: Vec<EmpiricalMse> = offsets.iter().map(|d| empirical_mse(&sample, mean + d)).collect();
    others.push(empirical_mse(&sample, sample_mean));
    let matches_floor = (optimal.mse - floor).abs() <= 3.0 * optimal.std_error;
    let none_beats_floor = others.iter().chain([&optimal]).all(|e| e.mse >= floor - 3.0 * e.std_error);
    Ok(FloorExperiment { floor, paths, sample_mean, sample_variance, optimal, others, matches_floor, none_beats_floor })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn deterministic_given_seed() {
        let m = JumpModel::new(0.1, BTreeMap::from([(-2, 1.0), (1, 3.0)]), 0.0).unwrap();
        let a = simulate_increments(&m, 0.5, 70_000, 3).unwrap();
        let b = simulate_increments(&m, 0.5, 70_000, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, simulate_increments(&m, 0.5, 70_000, 4).unwrap());
    }

    #[test]
    fn moments_match_within_standard_errors() {
        let m = JumpModel::new(0.1, BTreeMap::from([(-2, 1.0), (1, 3.0)]), 0.0).unwrap();
        let s = simulate_increments(&m, 0.5, 200_000, 11).unwrap();
        let mo = increment_moments(&m, 0.5);
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        assert!((mean - mo.mean).abs() < 3.0 * (mo.variance / n).sqrt());
        let e = empirical_mse(&s, mo.mean);
        assert!((e.mse - mo.variance).abs() < 3.0 * e.std_error);
    }

    #[test]
    fn zero_horizon() {
        let m = JumpModel::symmetric_pm1(0.1, 10.0, 0.05).unwrap();
        assert!(simulate_increments(&m, 0.0, 5, 1).unwrap().iter().all(|&x| x == 0.0));
    }
}
