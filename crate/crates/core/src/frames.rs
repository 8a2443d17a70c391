//! abc / d-q transforms, instantaneous power and duty-cycle recovery.
//!
//! The d-q frame rotates at `θ = ωt` and the transform is amplitude
//! invariant: a balanced set of peak `A` aligned with phase a maps to
//! `(d, q) = (A, 0)`.

use std::f64::consts::PI;

use thiserror::Error;

use crate::model::{DerivedCoefficients, PlantState};

const TWO_PI_3: f64 = 2.0 * PI / 3.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrameError {
    #[error("duty cycles are undefined at V_o = {v_o} (must be > 0)")]
    SingularOperatingPoint { v_o: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AbcTriple {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DqPair {
    pub d: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerPair {
    pub p: f64,
    pub q: f64,
}

/// Balanced positive-sequence set with peak `amplitude`, phase a at `angle`.
pub fn balanced_abc(amplitude: f64, angle: f64) -> AbcTriple {
    AbcTriple {
        a: amplitude * angle.cos(),
        b: amplitude * (angle - TWO_PI_3).cos(),
        c: amplitude * (angle + TWO_PI_3).cos(),
    }
}

pub fn abc_to_dq(v: AbcTriple, theta: f64) -> DqPair {
    let (ta, tb, tc) = (theta, theta - TWO_PI_3, theta + TWO_PI_3);
    DqPair {
        d: 2.0 / 3.0 * (v.a * ta.cos() + v.b * tb.cos() + v.c * tc.cos()),
        q: -2.0 / 3.0 * (v.a * ta.sin() + v.b * tb.sin() + v.c * tc.sin()),
    }
}

/// Inverse of [`abc_to_dq`] on zero-sequence-free signals.
pub fn dq_to_abc(v: DqPair, theta: f64) -> AbcTriple {
    let phase = |t: f64| v.d * t.cos() - v.q * t.sin();
    AbcTriple {
        a: phase(theta),
        b: phase(theta - TWO_PI_3),
        c: phase(theta + TWO_PI_3),
    }
}

/// `P = e_d·i_d + e_q·i_q`, `Q = e_q·i_d − e_d·i_q`.
pub fn instantaneous_power(e: DqPair, i: DqPair) -> PowerPair {
    PowerPair {
        p: e.d * i.d + e.q * i.q,
        q: e.q * i.d - e.d * i.q,
    }
}

/// Virtual controls produced by duty cycles `(D_d, D_q)`:
/// `u_p = (e_d − L_s·ω·Q − D_d·V_o)/L_s`, `u_q = (L_s·ω·P + D_q·V_o)/L_s`.
pub fn virtual_controls(
    state: &PlantState,
    duty_d: f64,
    duty_q: f64,
    v_o: f64,
    coeffs: &DerivedCoefficients,
    e_d: f64,
) -> (f64, f64) {
    let l_s = coeffs.l_s;
    let u_p = (e_d - l_s * coeffs.omega * state.q - duty_d * v_o) / l_s;
    let u_q = (l_s * coeffs.omega * state.p + duty_q * v_o) / l_s;
    (u_p, u_q)
}

/// Duty cycles that realize the virtual controls `(u_p, u_q)`.
pub fn recover_duty_cycles(
    state: &PlantState,
    u_p: f64,
    u_q: f64,
    v_o: f64,
    coeffs: &DerivedCoefficients,
    e_d: f64,
) -> Result<(f64, f64), FrameError> {
    if !(v_o > 0.0) {
        return Err(FrameError::SingularOperatingPoint { v_o });
    }
    let l_s = coeffs.l_s;
    let duty_d = (e_d - l_s * coeffs.omega * state.q - l_s * u_p) / v_o;
    let duty_q = (l_s * u_q - l_s * coeffs.omega * state.p) / v_o;
    Ok((duty_d, duty_q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{derive_coefficients, RectifierParams};

    #[test]
    fn aligned_balanced_set_maps_to_d_axis() {
        for &theta in &[0.0, 0.3, 2.0, -1.1] {
            let dq = abc_to_dq(balanced_abc(311.0, theta), theta);
            assert!((dq.d - 311.0).abs() < 1e-10);
            assert!(dq.q.abs() < 1e-10);
        }
    }

    #[test]
    fn zero_in_zero_out() {
        assert_eq!(abc_to_dq(AbcTriple::default(), 0.7), DqPair { d: 0.0, q: 0.0 });
        let abc = dq_to_abc(DqPair::default(), 0.7);
        assert_eq!((abc.a, abc.b, abc.c), (0.0, 0.0, 0.0));
    }

    #[test]
    fn unit_d_at_zero_angle_peaks_phase_a() {
        let abc = dq_to_abc(DqPair { d: 1.0, q: 0.0 }, 0.0);
        assert_eq!(abc.a, 1.0);
        assert!((abc.b + 0.5).abs() < 1e-15 && (abc.c + 0.5).abs() < 1e-15);
    }

    #[test]
    fn balanced_set_sums_to_zero() {
        let v = balanced_abc(100.0, 0.123);
        assert!((v.a + v.b + v.c).abs() < 1e-9 * 100.0);
    }

    #[test]
    fn power_examples() {
        let s = instantaneous_power(DqPair { d: 311.0, q: 0.0 }, DqPair { d: 10.0, q: 0.0 });
        assert_eq!(s, PowerPair { p: 3110.0, q: 0.0 });
        let s = instantaneous_power(DqPair { d: 0.0, q: 1.0 }, DqPair { d: 1.0, q: 0.0 });
        assert_eq!(s, PowerPair { p: 0.0, q: 1.0 });
    }

    #[test]
    fn zero_duty_fixed_point() {
        let c = derive_coefficients(&RectifierParams::default(), 200.0).unwrap();
        let state = PlantState::new(9.0e5, 0.0, 1500.0);
        let e_d = 311.0;
        let u_p = e_d / c.l_s - c.omega * state.q;
        let (dd, dq) = recover_duty_cycles(&state, u_p, 0.0, 950.0, &c, e_d).unwrap();
        assert!(dd.abs() < 1e-12 && dq.abs() < 1e-12);
    }

    #[test]
    fn singular_at_zero_voltage() {
        let c = derive_coefficients(&RectifierParams::default(), 200.0).unwrap();
        let err = recover_duty_cycles(&PlantState::default(), 1.0, 1.0, 0.0, &c, 311.0).unwrap_err();
        assert_eq!(err, FrameError::SingularOperatingPoint { v_o: 0.0 });
    }

    #[test]
    fn recovers_equilibrium_duties() {
        let c = derive_coefficients(&RectifierParams::default(), 200.0).unwrap();
        let p_eq = 2.0e6 / 600.0;
        let state = PlantState::new(1.0e6, p_eq, 0.0);
        let e_d = 311.0;
        let dd_eq = (e_d - c.r_s * p_eq) / 1000.0;
        let dq_eq = -c.l_s * c.omega * p_eq / 1000.0;
        // equilibrium virtual controls: u_p = d·P, u_q = −d·Q
        let (dd, dq) = recover_duty_cycles(&state, c.d_qn * p_eq, 0.0, 1000.0, &c, e_d).unwrap();
        assert!((dd - dd_eq).abs() < 1e-12);
        assert!((dq - dq_eq).abs() < 1e-12);
    }
}
