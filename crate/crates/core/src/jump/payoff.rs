use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative distance at which a site counts as sitting on the strike.
pub const STRIKE_TOL: f64 = 1e-12;

/// Bounded terminal payoffs on the price lattice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Payoff {
    /// 1{S > K}, with value ½ on the strike itself.
    Digital { strike: f64 },
    Put { strike: f64 },
    CallSpread { lower: f64, upper: f64 },
    Constant { value: f64 },
}

impl Payoff {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Payoff::Digital { strike } | Payoff::Put { strike } => strike > 0.0 && strike.is_finite(),
            Payoff::CallSpread { lower, upper } => lower > 0.0 && upper > lower && upper.is_finite(),
            Payoff::Constant { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid payoff {self:?}")))
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        match *self {
            Payoff::Digital { strike } => {
                if ((s - strike) / strike).abs() <= STRIKE_TOL {
                    0.5
                } else if s > strike {
                    1.0
                } else {
                    0.0
                }
            }
            Payoff::Put { strike } => (strike - s).max(0.0),
            Payoff::CallSpread { lower, upper } => (s - lower).clamp(0.0, upper - lower),
            Payoff::Constant { value } => value,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match *self {
            Payoff::Digital { .. } => 1.0,
            Payoff::Put { strike } => strike,
            Payoff::CallSpread { lower, upper } => upper - lower,
            Payoff::Constant { value } => value.abs(),
        }
    }

    /// Prices where the payoff is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Payoff::Digital { strike } | Payoff::Put { strike } => vec![strike],
            Payoff::CallSpread { lower, upper } => vec![lower, upper],
            Payoff::Constant { .. } => vec![],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        let d = Payoff::Digital { strike: 1.0 };
        assert_eq!((d.value(0.9), d.value(1.0), d.value(1.1)), (0.0, 0.5, 1.0));
        assert_eq!(Payoff::Put { strike: 2.0 }.value(0.5), 1.5);
        let cs = Payoff::CallSpread { lower: 1.0, upper: 1.5 };
        assert_eq!((cs.value(0.5), cs.value(1.2), cs.value(3.0)), (0.0, 0.19999999999999996, 0.5));
        assert_eq!(cs.sup_norm(), 0.5);
    }

    #[test]
    fn json_form() {
        let p: Payoff = serde_json::from_str(r#"{"kind":"digital","strike":1.0}"#).unwrap();
        assert_eq!(p, Payoff::Digital { strike: 1.0 });
        assert!(serde_json::from_str::<Payoff>(r#"{"kind":"digital","strike":1.0,"x":1}"#).is_err());
        assert!(Payoff::CallSpread { lower: 2.0, upper: 1.0 }.validate().is_err());
    }
}
