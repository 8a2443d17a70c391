//! Step-response metrics, Lyapunov-decrease checks and load-estimate
//! convergence over recorded traces.

use serde::Serialize;
use thiserror::Error;

use crate::controllers::ControllerGains;
use crate::sim::{ControllerKind, Trace, TraceRecord};

/// Default settling band, percent.
pub const DEFAULT_BAND_PCT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("no trace samples between t = {from} and t = {until}")]
    EmptyWindow { from: f64, until: f64 },
    #[error("metric unavailable: {0}")]
    Unavailable(&'static str),
    #[error("band must be positive, got {0}%")]
    Band(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventSignal {
    VRef,
    QRef,
    Load,
}

impl EventSignal {
    pub fn name(self) -> &'static str {
        match self {
            EventSignal::VRef => "v_ref",
            EventSignal::QRef => "q_ref",
            EventSignal::Load => "load",
        }
    }

    /// Signal whose response the event is judged on.
    pub fn measured(self) -> Measured {
        match self {
            EventSignal::VRef | EventSignal::Load => Measured::VOut,
            EventSignal::QRef => Measured::Q,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measured {
    VOut,
    Q,
    RlEst,
}

impl Measured {
    pub fn sample(self, r: &TraceRecord) -> f64 {
        match self {
            Measured::VOut => r.v_o,
            Measured::Q => r.q,
            Measured::RlEst => r.r_l_est,
        }
    }
}

/// A change in one scenario input.
///
/// `from_value`/`to_value` are in units of the measured response: for
/// reference steps they are the old and new reference (the startup event
/// starts from the initial measured value); for load steps they are the
/// voltage reference held across the change, and the load values are kept
/// in `load_change`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepEvent {
    pub t_step: f64,
    pub from_value: f64,
    pub to_value: f64,
    pub signal: EventSignal,
    pub load_change: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepMetrics {
    /// `None` when the band is not held through the end of the window.
    pub settling_time: Option<f64>,
    pub overshoot_pct: f64,
    pub undershoot_pct: f64,
    pub steady_state_error: f64,
    pub band_pct: f64,
}

/// Reference and load events recorded in the trace, ordered by time. The
/// references contribute a startup event at `t = 0`.
pub fn events_from_trace(trace: &Trace) -> Vec<StepEvent> {
    let recs = &trace.records;
    let Some(first) = recs.first() else { return Vec::new() };
    let mut events = vec![
        StepEvent { t_step: first.t, from_value: first.v_o, to_value: first.v_ref, signal: EventSignal::VRef, load_change: None },
        StepEvent { t_step: first.t, from_value: first.q, to_value: first.q_ref, signal: EventSignal::QRef, load_change: None },
    ];
    for w in recs.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if b.v_ref != a.v_ref {
            events.push(StepEvent { t_step: b.t, from_value: a.v_ref, to_value: b.v_ref, signal: EventSignal::VRef, load_change: None });
        }
        if b.q_ref != a.q_ref {
            events.push(StepEvent { t_step: b.t, from_value: a.q_ref, to_value: b.q_ref, signal: EventSignal::QRef, load_change: None });
        }
        if b.r_l_true != a.r_l_true {
            events.push(StepEvent {
                t_step: b.t,
                from_value: b.v_ref,
                to_value: b.v_ref,
                signal: EventSignal::Load,
                load_change: Some((a.r_l_true, b.r_l_true)),
            });
        }
    }
    events
}

/// Start of the first event strictly after `t`, or `+∞`.
pub fn next_event_time(events: &[StepEvent], t: f64) -> f64 {
    events
        .iter()
        .map(|e| e.t_step)
        .filter(|&te| te > t)
        .fold(f64::INFINITY, f64::min)
}

fn window<'a>(trace: &'a Trace, from: f64, until: f64) -> Result<&'a [TraceRecord], MetricError> {
    let recs = &trace.records;
    let start = recs.partition_point(|r| r.t < from);
    let end = recs.partition_point(|r| r.t < until);
    if start >= end {
        return Err(MetricError::EmptyWindow { from, until });
    }
    Ok(&recs[start..end])
}

/// Settling time, overshoot and undershoot of `measured` after `event`,
/// evaluated on `[event.t_step, until)`.
///
/// The band is `±band_pct` of `|to_value|`, or of the step magnitude when the
/// target is zero. Overshoot is the excursion past the target in the step
/// direction and undershoot the excursion past the start value against it,
/// both as a percentage of the step magnitude (of `|to_value|` when the
/// value does not change).
pub fn step_metrics(
    trace: &Trace,
    event: &StepEvent,
    measured: Measured,
    band_pct: f64,
    until: f64,
) -> Result<StepMetrics, MetricError> {
    if !(band_pct > 0.0) {
        return Err(MetricError::Band(band_pct));
    }
    let samples = window(trace, event.t_step, until)?;
    let (from, to) = (event.from_value, event.to_value);
    let scale = if to != 0.0 { to.abs() } else { (to - from).abs() };
    let band = band_pct / 100.0 * scale;

    let in_band = |r: &TraceRecord| (measured.sample(r) - to).abs() <= band;
    let settling_time = if in_band(samples.last().unwrap()) {
        let first_kept = samples
            .iter()
            .rposition(|r| !in_band(r))
            .map_or(0, |i| i + 1);
        Some(samples[first_kept].t - event.t_step)
    } else {
        None
    };

    let step = to - from;
    let (overshoot, undershoot, denom) = if step != 0.0 {
        let dir = step.signum();
        let over = samples.iter().map(|r| dir * (measured.sample(r) - to)).fold(0.0, f64::max);
        let under = samples.iter().map(|r| dir * (from - measured.sample(r))).fold(0.0, f64::max);
        (over, under, step.abs())
    } else {
        let over = samples.iter().map(|r| measured.sample(r) - to).fold(0.0, f64::max);
        let under = samples.iter().map(|r| to - measured.sample(r)).fold(0.0, f64::max);
        (over, under, if to != 0.0 { to.abs() } else { 1.0 })
    };

    Ok(StepMetrics {
        settling_time,
        overshoot_pct: 100.0 * overshoot / denom,
        undershoot_pct: 100.0 * undershoot / denom,
        steady_state_error: measured.sample(samples.last().unwrap()) - to,
        band_pct,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LyapunovFunction {
    /// `½e_v² + ½e_s²`
    V2,
    /// `V2 + ã²/(2γ)`
    V4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovOptions {
    /// Allowed rise between samples as a fraction of the interval's peak `V`.
    pub increase_tol: f64,
    /// Floor of the relative-error denominator as a fraction of the
    /// interval's peak `|V̇|`.
    pub floor_frac: f64,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        LyapunovOptions { increase_tol: 1e-12, floor_frac: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Increase {
    /// Index of the sample at which `V` rose.
    pub step: usize,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LyapunovReport {
    pub samples_checked: usize,
    pub increases: usize,
    pub worst_increase: Option<Increase>,
    /// Largest `|fd(V) − V̇| / max(|fd(V)|, floor)`.
    pub worst_rel_error: f64,
    pub worst_rel_step: Option<usize>,
}

impl LyapunovReport {
    pub fn non_increasing(&self) -> bool {
        self.increases == 0
    }

    pub fn passes(&self, rel_tol: f64) -> bool {
        self.non_increasing() && self.worst_rel_error <= rel_tol
    }
}

/// Forward-difference check of `dV/dt ≤ 0` and `dV/dt = −k_v·e_v² − k_s·e_s²`
/// on each interval between events, skipping the two differences that
/// straddle every event instant.
pub fn lyapunov_check(
    trace: &Trace,
    gains: &ControllerGains,
    function: LyapunovFunction,
    options: &LyapunovOptions,
) -> LyapunovReport {
    let recs = &trace.records;
    let h = trace.step_size;
    let value = |r: &TraceRecord| match function {
        LyapunovFunction::V2 => r.v2,
        LyapunovFunction::V4 => r.v4,
    };
    let rate = |r: &TraceRecord| -gains.k_v * r.e_v * r.e_v - gains.k_s * r.e_s * r.e_s;

    let mut cuts: Vec<usize> = events_from_trace(trace)
        .iter()
        .map(|e| (e.t_step / h).round() as usize)
        .filter(|&m| m > 0)
        .collect();
    cuts.sort_unstable();
    cuts.dedup();

    let v_peak = recs.iter().map(|r| value(r).abs()).fold(0.0, f64::max);
    let rate_peak = recs.iter().map(|r| rate(r).abs()).fold(0.0, f64::max);
    let floor = (options.floor_frac * rate_peak).max(f64::MIN_POSITIVE);

    let mut report = LyapunovReport::default();
    let mut bounds = vec![0];
    bounds.extend(cuts.iter().copied());
    bounds.push(recs.len());

    for seg in bounds.windows(2) {
        let (start, end) = (seg[0], seg[1]);
        if end <= start + 1 {
            continue;
        }
        // differences n → n+1 inside the segment; the one leaving the segment
        // and the first one inside it straddle an event
        let first = if start == 0 { 0 } else { start + 1 };
        for n in first..end.saturating_sub(1) {
            let (a, b) = (&recs[n], &recs[n + 1]);
            let dv = value(b) - value(a);
            report.samples_checked += 1;
            if dv > options.increase_tol * v_peak {
                report.increases += 1;
                if report.worst_increase.is_none_or(|w| dv > w.amount) {
                    report.worst_increase = Some(Increase { step: n + 1, amount: dv });
                }
            }
            let fd = dv / h;
            let rel = (fd - rate(a)).abs() / fd.abs().max(floor);
            if rel > report.worst_rel_error || rel.is_nan() {
                report.worst_rel_error = if rel.is_nan() { f64::INFINITY } else { rel };
                report.worst_rel_step = Some(n);
            }
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateConvergence {
    pub final_error_pct: f64,
    /// Time after `from` at which the estimate entered the threshold for
    /// good; `None` if it is outside at the end of the window.
    pub convergence_time: Option<f64>,
}

/// Convergence of `R̂` to `target` on `[from, until)`, using a relative
/// threshold `threshold` (e.g. `0.1` for 10%).
pub fn estimate_convergence(
    trace: &Trace,
    target: f64,
    threshold: f64,
    from: f64,
    until: f64,
) -> Result<EstimateConvergence, MetricError> {
    if trace.controller != ControllerKind::Adaptive {
        return Err(MetricError::Unavailable("load estimate convergence needs an adaptive trace"));
    }
    let samples = window(trace, from, until)?;
    let rel = |r: &TraceRecord| (r.r_l_est - target).abs() / target;
    let inside = |r: &TraceRecord| rel(r) < threshold;
    let last = samples.last().unwrap();
    let convergence_time = if inside(last) {
        let first_kept = samples.iter().rposition(|r| !inside(r)).map_or(0, |i| i + 1);
        Some(samples[first_kept].t - from)
    } else {
        None
    };
    Ok(EstimateConvergence { final_error_pct: 100.0 * rel(last), convergence_time })
}
