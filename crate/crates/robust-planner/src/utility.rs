//! Value normalization and the robustness-parameterized utility function
//! `U_R(V) = V^(1-R)`.
//!
//! Raising the robustness factor `R` bends the curve upward, so lotteries
//! with less spread are preferred: the planner becomes more risk-averse.

use thiserror::Error;

use crate::model::{ModelError, Scenario};

#[derive(Debug, Error)]
pub enum UtilityError {
    #[error("value {value} outside declared bounds [{v_min}, {v_max}]; bounds are too tight")]
    ValueOutOfBounds { value: f64, v_min: f64, v_max: f64 },
    #[error("normalized value {0} outside [0,1]; utility is undefined there")]
    NormalizedOutOfRange(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Normalization bounds and robustness factor, validated on construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UtilityParams {
    pub robustness: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl UtilityParams {
    pub fn new(robustness: f64, v_min: f64, v_max: f64) -> Result<Self, UtilityError> {
        if !(0.0..1.0).contains(&robustness) {
            return Err(UtilityError::Model(ModelError::RobustnessRange(robustness)));
        }
        if !(v_min < v_max) {
            return Err(UtilityError::Model(ModelError::ValueBounds { v_min, v_max }));
        }
        Ok(UtilityParams {
            robustness,
            v_min,
            v_max,
        })
    }

    pub fn from_scenario(scenario: &Scenario) -> Result<Self, UtilityError> {
        Self::new(scenario.robustness, scenario.v_min, scenario.v_max)
    }

    /// Rescales a domain value to `V = (v - v_min) / (v_max - v_min)`.
    ///
    /// A value outside the declared bounds is a configuration error (the
    /// bounds were declared too tight) and is reported, not clamped.
    pub fn normalize(&self, v: f64) -> Result<f64, UtilityError> {
        if v < self.v_min || v > self.v_max || v.is_nan() {
            return Err(UtilityError::ValueOutOfBounds {
                value: v,
                v_min: self.v_min,
                v_max: self.v_max,
            });
        }
        Ok((v - self.v_min) / (self.v_max - self.v_min))
    }

    /// `U_R(V) = V^(1-R)`, defined only on `0 <= V <= 1`.
    pub fn utility(&self, v_norm: f64) -> Result<f64, UtilityError> {
        if !(0.0..=1.0).contains(&v_norm) {
            return Err(UtilityError::NormalizedOutOfRange(v_norm));
        }
        Ok(v_norm.powf(1.0 - self.robustness))
    }

    /// Utility of a raw domain value: `U_R(V(v))`.
    pub fn utility_of_value(&self, v: f64) -> Result<f64, UtilityError> {
        let norm = self.normalize(v)?;
        self.utility(norm)
    }
}
