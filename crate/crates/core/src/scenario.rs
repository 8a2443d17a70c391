//! Piecewise-constant reference and load profiles.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DisturbanceSpec, ReactiveDisturbanceForm};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("profile `{0}` is empty")]
    Empty(&'static str),
    #[error("profile `{0}` must start at t = 0")]
    MissingOrigin(&'static str),
    #[error("profile `{0}` timestamps must be strictly increasing and finite")]
    Unsorted(&'static str),
    #[error("profile `{name}` value {value} at t = {t} must be strictly positive")]
    NonPositive { name: &'static str, t: f64, value: f64 },
    #[error("time {t} precedes the first profile entry")]
    BeforeStart { t: f64 },
    #[error("step size must be positive and finite, got {0}")]
    StepSize(f64),
    #[error("duration must be non-negative and finite, got {0}")]
    Duration(f64),
    #[error("duration {duration} is not a whole number of steps of {step_size}")]
    FractionalSteps { duration: f64, step_size: f64 },
}

/// Sorted `(time, value)` breakpoints; the value holds until the next entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Profile(pub Vec<(f64, f64)>);

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile(vec![(0.0, value)])
    }

    pub fn steps(entries: &[(f64, f64)]) -> Self {
        Profile(entries.to_vec())
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.0
    }

    /// Value of the last entry with time `≤ t`.
    pub fn value_at(&self, t: f64) -> Result<f64, ScenarioError> {
        let first = self.0.first().ok_or(ScenarioError::Empty("profile"))?;
        if t < first.0 {
            return Err(ScenarioError::BeforeStart { t });
        }
        let idx = self.0.partition_point(|&(time, _)| time <= t);
        Ok(self.0[idx - 1].1)
    }

    fn validate(&self, name: &'static str, positive: bool) -> Result<(), ScenarioError> {
        let first = self.0.first().ok_or(ScenarioError::Empty(name))?;
        if first.0 != 0.0 {
            return Err(ScenarioError::MissingOrigin(name));
        }
        if self.0.iter().any(|&(t, v)| !t.is_finite() || !v.is_finite())
            || self.0.windows(2).any(|w| w[1].0 <= w[0].0)
        {
            return Err(ScenarioError::Unsorted(name));
        }
        if positive {
            if let Some(&(t, value)) = self.0.iter().find(|&&(_, v)| v <= 0.0) {
                return Err(ScenarioError::NonPositive { name, t, value });
            }
        }
        Ok(())
    }
}

pub fn profile_value(profile: &Profile, t: f64) -> Result<f64, ScenarioError> {
    profile.value_at(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioProfile {
    pub duration: f64,
    pub step_size: f64,
    /// Output-voltage reference `V_o*` (V), not squared.
    pub v_ref: Profile,
    /// Reactive-power reference `Q*`.
    pub q_ref: Profile,
    /// True load `R_l(t)` seen by the plant.
    pub load: Profile,
    pub disturbance: DisturbanceSpec,
}

impl Default for ScenarioProfile {
    fn default() -> Self {
        ScenarioProfile {
            duration: 2.5,
            step_size: 1e-4,
            v_ref: Profile::steps(&[(0.0, 1000.0), (1.25, 800.0)]),
            q_ref: Profile::steps(&[(0.0, 0.0), (1.75, 5000.0)]),
            load: Profile::constant(200.0),
            disturbance: DisturbanceSpec {
                g_form: ReactiveDisturbanceForm::State,
                ..Default::default()
            },
        }
    }
}

impl ScenarioProfile {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(ScenarioError::StepSize(self.step_size));
        }
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(ScenarioError::Duration(self.duration));
        }
        self.step_count()?;
        self.v_ref.validate("v_ref", true)?;
        self.q_ref.validate("q_ref", false)?;
        self.load.validate("load", true)?;
        Ok(())
    }

    /// Number of integration steps, `duration / h`.
    pub fn step_count(&self) -> Result<usize, ScenarioError> {
        let ratio = self.duration / self.step_size;
        let steps = ratio.round();
        // 2 ulp of the ratio absorbs the rounding of the division itself
        if (ratio - steps).abs() > 2.0 * f64::EPSILON * ratio.max(1.0) {
            return Err(ScenarioError::FractionalSteps {
                duration: self.duration,
                step_size: self.step_size,
            });
        }
        Ok(steps as usize)
    }
}
