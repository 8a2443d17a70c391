//! Averaged state-space model of the three-phase PWM rectifier.
//!
//! The state is `(x_p, P, Q)` with `x_p = V_o²`. Two equivalent forms are
//! provided: the full model driven by the d-q duty cycles, and the decoupled
//! form driven by the virtual controls `u_p`, `u_q` that the controllers
//! compute. The simulator integrates the decoupled form.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parameter `{field}` must be strictly positive and finite, got {value}")]
    NonPositive { field: &'static str, value: f64 },
}

/// Physical plant constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RectifierParams {
    /// RMS phase voltage `E` (V).
    pub phase_voltage_rms: f64,
    /// Utility frequency `f` (Hz).
    pub frequency: f64,
    /// Filter inductance `L` (H).
    pub inductance: f64,
    /// Inductor resistance `r_L` (Ω).
    pub source_resistance: f64,
    /// DC-link capacitance `C` (F).
    pub capacitance: f64,
    /// Load the controllers are designed for (Ω).
    pub nominal_load: f64,
}

impl Default for RectifierParams {
    fn default() -> Self {
        RectifierParams {
            phase_voltage_rms: 311.0,
            frequency: 60.0,
            inductance: 12e-3,
            source_resistance: 0.1,
            capacitance: 3.3e-3,
            nominal_load: 200.0,
        }
    }
}

impl RectifierParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("phase_voltage_rms", self.phase_voltage_rms),
            ("frequency", self.frequency),
            ("inductance", self.inductance),
            ("source_resistance", self.source_resistance),
            ("capacitance", self.capacitance),
            ("nominal_load", self.nominal_load),
        ];
        for (field, value) in fields {
            positive(field, value)?;
        }
        Ok(())
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI * self.frequency
    }

    /// d-axis source voltage. The d axis is aligned with the source voltage
    /// vector, so `e_d = E` and `e_q = 0`.
    pub fn e_d(&self) -> f64 {
        self.phase_voltage_rms
    }
}

fn positive(field: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ModelError::NonPositive { field, value })
    }
}

/// Coefficients derived from [`RectifierParams`] for a given load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedCoefficients {
    /// `L / (√3·E)`
    pub l_s: f64,
    /// `r_L / (√3·E)`
    pub r_s: f64,
    /// `−2 / (R_l·C)`
    pub a_pn: f64,
    /// `3 / C`
    pub b_pn: f64,
    /// `−3·r_s / (L_s·C)`
    pub c_pn: f64,
    /// `r_s / L_s`, equal to `r_L / L`
    pub d_qn: f64,
    pub omega: f64,
}

/// Closed-form coefficients for `params` evaluated at load `load`.
pub fn derive_coefficients(
    params: &RectifierParams,
    load: f64,
) -> Result<DerivedCoefficients, ModelError> {
    params.validate()?;
    positive("load", load)?;
    let scale = 3f64.sqrt() * params.phase_voltage_rms;
    let l_s = params.inductance / scale;
    let r_s = params.source_resistance / scale;
    let c = params.capacitance;
    Ok(DerivedCoefficients {
        l_s,
        r_s,
        a_pn: -2.0 / (load * c),
        b_pn: 3.0 / c,
        c_pn: -3.0 * r_s / (l_s * c),
        d_qn: r_s / l_s,
        omega: params.omega(),
    })
}

/// `a = −2/(R·C)`; the only coefficient that depends on the load.
pub fn load_coefficient(load: f64, capacitance: f64) -> f64 {
    -2.0 / (load * capacitance)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlantState {
    /// Squared DC output voltage `V_o²`.
    pub x_p: f64,
    pub p: f64,
    pub q: f64,
}

impl PlantState {
    pub fn new(x_p: f64, p: f64, q: f64) -> Self {
        PlantState { x_p, p, q }
    }

    pub fn v_o(&self) -> f64 {
        self.x_p.max(0.0).sqrt()
    }
}

/// Time derivative of a [`PlantState`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDerivative {
    pub dx_p: f64,
    pub dp: f64,
    pub dq: f64,
}

/// Row 1 of the averaged model: `ẋ_p = −2·x_p/(R·C) + (3/C)·P`, using the
/// true load.
pub fn voltage_derivative(state: &PlantState, coeffs: &DerivedCoefficients, capacitance: f64, load_true: f64) -> f64 {
    load_coefficient(load_true, capacitance) * state.x_p + coeffs.b_pn * state.p
}

/// Full averaged model driven by the d-q duty cycles.
///
/// `coeffs` only contributes load-independent terms; the `ẋ_p` row uses
/// `load_true`.
#[allow(clippy::too_many_arguments)]
pub fn plant_derivative(
    state: &PlantState,
    duty_d: f64,
    duty_q: f64,
    v_o: f64,
    coeffs: &DerivedCoefficients,
    capacitance: f64,
    e_d: f64,
    load_true: f64,
) -> StateDerivative {
    let ratio = coeffs.r_s / coeffs.l_s;
    StateDerivative {
        dx_p: voltage_derivative(state, coeffs, capacitance, load_true),
        dp: -ratio * state.p - coeffs.omega * state.q + e_d / coeffs.l_s
            - duty_d / coeffs.l_s * v_o,
        dq: coeffs.omega * state.p + ratio * state.q + duty_q / coeffs.l_s * v_o,
    }
}

/// Decoupled power dynamics: `Ṗ = −(r_s/L_s)·P + u_p`, `Q̇ = (r_s/L_s)·Q + u_q`.
pub fn virtual_to_state_derivatives(
    state: &PlantState,
    u_p: f64,
    u_q: f64,
    coeffs: &DerivedCoefficients,
) -> (f64, f64) {
    let ratio = coeffs.r_s / coeffs.l_s;
    (-ratio * state.p + u_p, ratio * state.q + u_q)
}

/// Which signal `Δd` multiplies in the reactive-power disturbance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReactiveDisturbanceForm {
    /// `g = Δd·x_q`
    #[default]
    State,
    /// `g = Δd·ẋ_q`
    Derivative,
}

/// Additive parameter variations lumped into `w1` and `g`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DisturbanceSpec {
    pub delta_a: f64,
    pub delta_b: f64,
    pub delta_c: f64,
    pub delta_d: f64,
    pub g_form: ReactiveDisturbanceForm,
}

impl DisturbanceSpec {
    pub fn is_zero(&self) -> bool {
        self.delta_a == 0.0 && self.delta_b == 0.0 && self.delta_c == 0.0 && self.delta_d == 0.0
    }
}

/// `(w1, g)` for the given signals.
///
/// `reactive_signal` is `x_q` or `ẋ_q` depending on `spec.g_form`; the caller
/// supplies whichever the form requires.
pub fn lumped_disturbances(
    spec: &DisturbanceSpec,
    dx_p: f64,
    u_p: f64,
    z: f64,
    reactive_signal: f64,
) -> (f64, f64) {
    let w1 = spec.delta_a * dx_p + spec.delta_b * u_p + spec.delta_c * z;
    let g = spec.delta_d * reactive_signal;
    (w1, g)
}

/// First step at which a lumped disturbance left its declared bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundViolation {
    pub step: usize,
    pub w1: f64,
    pub g: f64,
}

/// `true` when `|w1| < rho_p` and `|g| < rho_q`.
pub fn within_bounds(w1: f64, g: f64, rho_p: f64, rho_q: f64) -> bool {
    w1.abs() < rho_p && g.abs() < rho_q
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1() -> DerivedCoefficients {
        derive_coefficients(&RectifierParams::default(), 200.0).unwrap()
    }

    #[test]
    fn table1_coefficients() {
        let c = table1();
        // hand values: 2/(200*3.3e-3), 3/3.3e-3, 0.1/0.012, 0.012/(sqrt(3)*311), 0.1/(sqrt(3)*311)
        assert!((c.a_pn + 3.030_303_030_303).abs() < 1e-9);
        assert!((c.b_pn - 909.090_909_090_9).abs() < 1e-9);
        assert!((c.d_qn - 8.333_333_333_333).abs() < 1e-9);
        assert!((c.l_s - 2.227_718e-5).abs() < 1e-10);
        assert!((c.r_s - 1.856_432e-4).abs() < 1e-9);
        assert!((c.c_pn + c.b_pn * c.d_qn).abs() < 1e-9);
    }

    #[test]
    fn d_qn_is_r_over_l() {
        let p = RectifierParams { inductance: 0.02, source_resistance: 0.3, phase_voltage_rms: 120.0, ..Default::default() };
        let c = derive_coefficients(&p, 50.0).unwrap();
        assert!((c.d_qn - 0.3 / 0.02).abs() < 1e-12);
    }

    #[test]
    fn doubling_load_halves_a() {
        let p = RectifierParams::default();
        let c1 = derive_coefficients(&p, 200.0).unwrap();
        let c2 = derive_coefficients(&p, 400.0).unwrap();
        assert!((c2.a_pn - c1.a_pn / 2.0).abs() < 1e-15);
        assert_eq!((c1.b_pn, c1.c_pn, c1.d_qn, c1.l_s, c1.r_s), (c2.b_pn, c2.c_pn, c2.d_qn, c2.l_s, c2.r_s));
    }

    #[test]
    fn rejects_non_positive_fields() {
        let p = RectifierParams { capacitance: 0.0, ..Default::default() };
        match derive_coefficients(&p, 200.0) {
            Err(ModelError::NonPositive { field, .. }) => assert_eq!(field, "capacitance"),
            other => panic!("unexpected {other:?}"),
        }
        let err = derive_coefficients(&RectifierParams::default(), -1.0).unwrap_err();
        assert!(err.to_string().contains("load"));
    }

    #[test]
    fn origin_is_fixed_point() {
        let c = table1();
        let d = plant_derivative(&PlantState::default(), 0.0, 0.0, 0.0, &c, 3.3e-3, 0.0, 200.0);
        assert_eq!(d, StateDerivative::default());
    }

    #[test]
    fn full_equilibrium() {
        let c = table1();
        let x_p: f64 = 1.0e6;
        let p_eq = 2.0 * x_p / (3.0 * 200.0);
        assert!((p_eq - 3333.333_333_333).abs() < 1e-6);
        let v_o = x_p.sqrt();
        let e_d = 311.0;
        // rows 2 and 3 solved for the duties with Q = 0
        let duty_d = (e_d - c.r_s * p_eq) / v_o;
        let duty_q = -c.l_s * c.omega * p_eq / v_o;
        let s = PlantState::new(x_p, p_eq, 0.0);
        let d = plant_derivative(&s, duty_d, duty_q, v_o, &c, 3.3e-3, e_d, 200.0);
        assert!(d.dx_p.abs() < 1e-9);
        assert!(d.dp.abs() < 1e-9 * (e_d / c.l_s));
        assert!(d.dq.abs() < 1e-9 * (e_d / c.l_s));
    }

    #[test]
    fn virtual_controls_cancel() {
        let c = table1();
        let s = PlantState::new(4.0e5, 1200.0, -300.0);
        let (dp, dq) = virtual_to_state_derivatives(&s, c.d_qn * s.p, -c.d_qn * s.q, &c);
        assert_eq!((dp, dq), (0.0, 0.0));
        let zero = PlantState::new(1.0, 0.0, 0.0);
        assert_eq!(virtual_to_state_derivatives(&zero, 2.5, -7.0, &c), (2.5, -7.0));
    }

    #[test]
    fn disturbance_products() {
        let none = DisturbanceSpec::default();
        assert_eq!(lumped_disturbances(&none, 3.0, 4.0, 5.0, 6.0), (0.0, 0.0));
        let da = DisturbanceSpec { delta_a: 0.1, ..Default::default() };
        let (w1, g) = lumped_disturbances(&da, 2.0, 0.0, 0.0, 0.0);
        assert!((w1 - 0.2).abs() < 1e-15);
        assert_eq!(g, 0.0);
        assert!(within_bounds(0.2, 0.0, 0.5, 0.5));
        assert!(!within_bounds(0.6, 0.0, 0.5, 0.5));
    }
}
