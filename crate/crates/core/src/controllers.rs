//! Backstepping voltage and reactive-power controllers, and the adaptive
//! voltage controller that estimates the load coefficient `a_pn`.
//!
//! Each step is a pure function of its inputs. The adaptive estimate is owned
//! by the caller, which integrates the returned derivative.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::DerivedCoefficients;

/// Boundary-layer width of the robust compensation, as a fraction of the bound.
pub const BOUNDARY_LAYER_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error("gain `{name}` must be strictly positive and finite, got {value}")]
    InvalidGain { name: &'static str, value: f64 },
    #[error("disturbance mode `oracle` requires the {signal} value but none was supplied")]
    MissingOracle { signal: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisturbanceMode {
    /// No compensation term.
    #[default]
    None,
    /// The exact lumped disturbance is handed to the controller.
    Oracle,
    /// `ρ·sat(s/ε)` on the relevant error surface.
    RobustBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdaptationVariant {
    /// `dâ/dt = γ·ẋ_p·e_s`, from the Lyapunov derivation.
    Derived,
    /// `dâ/dt = γ·e_v`, the rule the reference results were produced with.
    #[default]
    Code,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateSource {
    /// `u_p` uses `â`.
    #[default]
    Hat,
    /// `u_p` uses `a_pn − â`, with `a_pn` the nominal coefficient.
    Tilde,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerGains {
    pub k_v: f64,
    pub k_s: f64,
    pub k_q: f64,
    pub rho_p: f64,
    pub rho_q: f64,
    pub gamma: f64,
    pub disturbance_mode: DisturbanceMode,
    pub adaptation_variant: AdaptationVariant,
    pub up_estimate_source: EstimateSource,
}

impl Default for ControllerGains {
    fn default() -> Self {
        ControllerGains {
            k_v: 500.0,
            k_s: 500.0,
            k_q: 0.2,
            rho_p: 0.5,
            rho_q: 0.5,
            gamma: 1e-3,
            disturbance_mode: DisturbanceMode::None,
            adaptation_variant: AdaptationVariant::Code,
            up_estimate_source: EstimateSource::Hat,
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<(), ControllerError> {
        let checks = [
            ("k_v", self.k_v),
            ("k_s", self.k_s),
            ("k_q", self.k_q),
            ("gamma", self.gamma),
            ("rho_p", self.rho_p),
            ("rho_q", self.rho_q),
        ];
        for (name, value) in checks {
            if !(value.is_finite() && value > 0.0) {
                return Err(ControllerError::InvalidGain { name, value });
            }
        }
        Ok(())
    }
}

/// Measured voltage-loop signals.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VoltageMeasurement {
    pub x_p: f64,
    pub dx_p: f64,
    /// Active power `z = P`.
    pub z: f64,
}

/// Squared-voltage reference and its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VoltageReference {
    pub x: f64,
    pub dx: f64,
    pub ddx: f64,
}

impl VoltageReference {
    pub fn constant(x: f64) -> Self {
        VoltageReference { x, dx: 0.0, ddx: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VoltageTrackingState {
    pub e_v: f64,
    pub alpha: f64,
    pub e_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveEstimate {
    pub a_hat: f64,
    /// `a_pn − â` against the true coefficient; only known to a test harness.
    pub a_tilde: Option<f64>,
}

impl AdaptiveEstimate {
    pub fn new(a_hat: f64) -> Self {
        AdaptiveEstimate { a_hat, a_tilde: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReactiveTrackingState {
    pub e_q: f64,
}

fn saturate(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

fn compensation(
    mode: DisturbanceMode,
    bound: f64,
    surface: f64,
    oracle: Option<f64>,
    signal: &'static str,
) -> Result<f64, ControllerError> {
    match mode {
        DisturbanceMode::None => Ok(0.0),
        DisturbanceMode::Oracle => oracle.ok_or(ControllerError::MissingOracle { signal }),
        DisturbanceMode::RobustBound => {
            let layer = BOUNDARY_LAYER_FRACTION * bound;
            Ok(bound * saturate(surface / layer))
        }
    }
}

/// Shared voltage law; `a_used` is `a_pn` for the plain controller and the
/// estimate for the adaptive one.
fn voltage_law(
    a_used: f64,
    meas: &VoltageMeasurement,
    reference: &VoltageReference,
    coeffs: &DerivedCoefficients,
    gains: &ControllerGains,
    w1_oracle: Option<f64>,
) -> Result<(f64, VoltageTrackingState), ControllerError> {
    let e_v = meas.x_p - reference.x;
    let de_v = meas.dx_p - reference.dx;
    let alpha = reference.dx - gains.k_v * e_v;
    let dalpha = reference.ddx - gains.k_v * de_v;
    let e_s = meas.dx_p - alpha;
    let w1 = compensation(gains.disturbance_mode, gains.rho_p, e_s, w1_oracle, "w1")?;
    let u_p = (-a_used * meas.dx_p - coeffs.c_pn * meas.z - w1 + dalpha - gains.k_s * e_s - e_v)
        / coeffs.b_pn;
    Ok((u_p, VoltageTrackingState { e_v, alpha, e_s }))
}

/// Backstepping control `u_p` of the squared output voltage.
pub fn bsc_voltage_step(
    meas: &VoltageMeasurement,
    reference: &VoltageReference,
    coeffs: &DerivedCoefficients,
    gains: &ControllerGains,
    w1_oracle: Option<f64>,
) -> Result<(f64, VoltageTrackingState), ControllerError> {
    voltage_law(coeffs.a_pn, meas, reference, coeffs, gains, w1_oracle)
}

/// Adaptive backstepping control `u_p` and the estimate derivative `dâ/dt`.
///
/// `coeffs` holds nominal values; `a_pn` from it is only read for the
/// [`EstimateSource::Tilde`] wiring.
pub fn adaptive_voltage_step(
    meas: &VoltageMeasurement,
    reference: &VoltageReference,
    coeffs: &DerivedCoefficients,
    gains: &ControllerGains,
    estimate: &AdaptiveEstimate,
    w1_oracle: Option<f64>,
) -> Result<(f64, VoltageTrackingState, f64), ControllerError> {
    let a_used = match gains.up_estimate_source {
        EstimateSource::Hat => estimate.a_hat,
        EstimateSource::Tilde => coeffs.a_pn - estimate.a_hat,
    };
    let (u_p, tracking) = voltage_law(a_used, meas, reference, coeffs, gains, w1_oracle)?;
    let da_hat = match gains.adaptation_variant {
        AdaptationVariant::Derived => gains.gamma * meas.dx_p * tracking.e_s,
        AdaptationVariant::Code => gains.gamma * tracking.e_v,
    };
    Ok((u_p, tracking, da_hat))
}

/// Reactive-power reference and its derivative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReactiveReference {
    pub x: f64,
    pub dx: f64,
}

/// Backstepping control `u_q = −d_qn·x_q − k_q·e_q + ẋ_q* − g̃`.
pub fn bsc_reactive_step(
    x_q: f64,
    reference: &ReactiveReference,
    coeffs: &DerivedCoefficients,
    gains: &ControllerGains,
    g_oracle: Option<f64>,
) -> Result<(f64, ReactiveTrackingState), ControllerError> {
    let e_q = x_q - reference.x;
    let g = compensation(gains.disturbance_mode, gains.rho_q, e_q, g_oracle, "g")?;
    let u_q = -coeffs.d_qn * x_q - gains.k_q * e_q + reference.dx - g;
    Ok((u_q, ReactiveTrackingState { e_q }))
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("estimate a_hat = {a_hat} is not negative; no physical load corresponds to it")]
pub struct NonPhysicalEstimate {
    pub a_hat: f64,
}

/// Load implied by the estimate: `R̂ = −2/(â·C)`.
pub fn estimate_load(a_hat: f64, capacitance: f64) -> Result<f64, NonPhysicalEstimate> {
    if a_hat < 0.0 {
        Ok(-2.0 / (a_hat * capacitance))
    } else {
        Err(NonPhysicalEstimate { a_hat })
    }
}
