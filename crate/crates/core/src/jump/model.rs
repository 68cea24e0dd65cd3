use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Compound-Poisson log-price lattice: jumps of α·dx at intensity γ_α.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpModel {
    dx: f64,
    gamma: BTreeMap<i64, f64>,
    r: f64,
}

impl JumpModel {
    pub fn new(dx: f64, gamma: BTreeMap<i64, f64>, r: f64) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidParameter(format!("lattice step must be positive, got {dx}")));
        }
        if !r.is_finite() {
            return Err(Error::InvalidParameter("short rate must be finite".into()));
        }
        for (&a, &g) in &gamma {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::InvalidParameter(format!("intensity of jump {a} must be finite and >= 0, got {g}")));
            }
        }
        Ok(Self { dx, gamma, r })
    }

    /// Nearest-neighbour model with γ₊ = γ₋ = λ/2.
    pub fn symmetric_pm1(dx: f64, lambda: f64, r: f64) -> Result<Self> {
        Self::new(dx, BTreeMap::from([(-1, 0.5 * lambda), (1, 0.5 * lambda)]), r)
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn gamma(&self) -> &BTreeMap<i64, f64> {
        &self.gamma
    }

    pub fn with_rate(&self, r: f64) -> Self {
        Self { r, ..self.clone() }
    }

    /// Λ = Σ γ_α
    pub fn total_intensity(&self) -> f64 {
        self.gamma.values().sum()
    }

    /// Largest |α| carrying positive intensity.
    pub fn max_jump(&self) -> usize {
        self.gamma.iter().filter(|(_, &g)| g > 0.0).map(|(&a, _)| a.unsigned_abs() as usize).max().unwrap_or(0)
    }

    /// ψ(u) = Σ γ_α (e^{uαΔx} − 1)
    pub fn psi(&self, u: f64) -> f64 {
        self.gamma.iter().map(|(&a, &g)| g * (u * a as f64 * self.dx).exp_m1()).sum()
    }

    /// Σ α² γ_α
    pub fn second_moment(&self) -> f64 {
        self.gamma.iter().map(|(&a, &g)| (a * a) as f64 * g).sum()
    }

    pub fn first_moment(&self) -> f64 {
        self.gamma.iter().map(|(&a, &g)| a as f64 * g).sum()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: JumpJson = crate::algebra::parse_json(s)?;
        raw.into_model()
    }

    pub fn to_json(&self) -> JumpJson {
        JumpJson {
            dx: self.dx,
            gamma: self.gamma.iter().map(|(a, g)| (a.to_string(), *g)).collect(),
            r: self.r,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpJson {
    pub dx: f64,
    pub gamma: BTreeMap<String, f64>,
    pub r: f64,
}

impl JumpJson {
    pub fn into_model(self) -> Result<JumpModel> {
        let mut gamma = BTreeMap::new();
        for (key, g) in self.gamma {
            let a: i64 = key.trim().parse().map_err(|_| Error::Parse {
                path: format!("gamma.{key}"),
                message: "jump size keys must be integers".into(),
            })?;
            if gamma.insert(a, g).is_some() {
                return Err(Error::Parse { path: format!("gamma.{key}"), message: "duplicate jump size".into() });
            }
        }
        JumpModel::new(self.dx, gamma, self.r).map_err(|e| Error::Parse { path: "$".into(), message: format!("{}: {e}", e.code()) })
    }
}

/// Scales a user shape γ̂ uniformly so that ψ(1) = r.
pub fn calibrate_rn(shape: &BTreeMap<i64, f64>, dx: f64, r: f64) -> Result<JumpModel> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("calibration needs r > 0, got {r}")));
    }
    let raw = JumpModel::new(dx, shape.clone(), r)?;
    let psi1 = raw.psi(1.0);
    if !(psi1 > 0.0) {
        return Err(Error::NotCalibratable { psi1 });
    }
    let c = r / psi1;
    JumpModel::new(dx, shape.iter().map(|(&a, &g)| (a, c * g)).collect(), r)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IncrementMoments {
    pub mean: f64,
    pub variance: f64,
}

/// Mean and variance of the log-return over a horizon h.
pub fn increment_moments(model: &JumpModel, h: f64) -> IncrementMoments {
    IncrementMoments {
        mean: h * model.dx() * model.first_moment(),
        variance: h * model.dx() * model.dx() * model.second_moment(),
    }
}

/// Minimal mean-square error of any predictor of the log-return: h(Δx)² Σ α²γ_α.
pub fn error_floor(model: &JumpModel, h: f64) -> f64 {
    h * model.dx() * model.dx() * model.second_moment()
}

/// γ± = σ²/(2Δ²) ± μ/(2Δ) with μ = r − σ²/2.
pub fn diffusion_model(sigma: f64, r: f64, delta: f64) -> Result<JumpModel> {
    if !(sigma > 0.0 && delta > 0.0 && sigma.is_finite() && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("need sigma > 0 and step > 0, got {sigma}, {delta}")));
    }
    let mu = r - 0.5 * sigma * sigma;
    let base = sigma * sigma / (2.0 * delta * delta);
    let drift = mu / (2.0 * delta);
    let (up, down) = (base + drift, base - drift);
    if up < 0.0 || down < 0.0 {
        return Err(Error::StepTooLarge { step: delta, gamma_down: up.min(down) });
    }
    JumpModel::new(delta, BTreeMap::from([(-1, down), (1, up)]), r)
}
