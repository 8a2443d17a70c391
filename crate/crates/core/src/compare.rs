//! Side-by-side metrics of a BSC run and an adaptive run on the same scenario.

use std::fmt;

use crate::metrics::{
    estimate_convergence, events_from_trace, next_event_time, step_metrics, EstimateConvergence,
    EventSignal, MetricError, StepEvent, StepMetrics,
};
use crate::sim::{run_simulation, SimConfig, SimError, SimRun, Trace};

/// Relative band for the load-estimate convergence column.
pub const ESTIMATE_THRESHOLD: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub event: StepEvent,
    pub bsc: Result<StepMetrics, MetricError>,
    pub adaptive: Result<StepMetrics, MetricError>,
    /// BSC settling time over adaptive settling time.
    pub settling_ratio: Option<f64>,
    /// Load-estimate convergence after load events.
    pub estimate: Option<Result<EstimateConvergence, MetricError>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub band_pct: f64,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub bsc: SimRun,
    pub adaptive: SimRun,
    pub table: ComparisonTable,
}

/// `bsc / adaptive`; `1` when both settle instantly.
pub fn settling_ratio(bsc: Option<f64>, adaptive: Option<f64>) -> Option<f64> {
    match (bsc, adaptive) {
        (Some(b), Some(a)) if a == 0.0 && b == 0.0 => Some(1.0),
        (Some(b), Some(a)) => Some(b / a),
        _ => None,
    }
}

pub fn compare_traces(bsc: &Trace, adaptive: &Trace, band_pct: f64) -> ComparisonTable {
    let events = events_from_trace(bsc);
    let rows = events
        .iter()
        .map(|event| {
            let until = next_event_time(&events, event.t_step);
            let measured = event.signal.measured();
            let b = step_metrics(bsc, event, measured, band_pct, until);
            let a = step_metrics(adaptive, event, measured, band_pct, until);
            let settling_ratio = match (&b, &a) {
                (Ok(b), Ok(a)) => settling_ratio(b.settling_time, a.settling_time),
                _ => None,
            };
            let estimate = event.load_change.map(|(_, to)| {
                estimate_convergence(adaptive, to, ESTIMATE_THRESHOLD, event.t_step, until)
            });
            ComparisonRow { event: *event, bsc: b, adaptive: a, settling_ratio, estimate }
        })
        .collect();
    ComparisonTable { band_pct, rows }
}

/// Runs both configurations and tabulates their per-event metrics.
pub fn run_comparison(
    config_bsc: &SimConfig,
    config_adaptive: &SimConfig,
    band_pct: f64,
) -> Result<Comparison, SimError> {
    let (s1, s2) = (&config_bsc.scenario, &config_adaptive.scenario);
    if s1.step_size != s2.step_size || s1.duration != s2.duration {
        return Err(SimError::Config("compared runs must share duration and step size".into()));
    }
    let bsc = run_simulation(config_bsc)?;
    let adaptive = run_simulation(config_adaptive)?;
    let table = compare_traces(&bsc.trace, &adaptive.trace, band_pct);
    Ok(Comparison { bsc, adaptive, table })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "not settled".to_string(), |x| format!("{x:.5}"))
}

fn settle_cell(m: &Result<StepMetrics, MetricError>) -> String {
    match m {
        Ok(m) => opt(m.settling_time),
        Err(_) => "n/a".into(),
    }
}

fn pct_cell(m: &Result<StepMetrics, MetricError>, f: fn(&StepMetrics) -> f64) -> String {
    m.as_ref().map_or_else(|_| "n/a".into(), |m| format!("{:.3}", f(m)))
}

impl fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "settling band: ±{}%", self.band_pct)?;
        writeln!(
            f,
            "{:<7} {:>8} {:>16} {:>12} {:>12} {:>8} {:>9} {:>9} {:>9} {:>9}  estimate",
            "event", "t [s]", "change", "bsc settle", "adapt settle", "ratio", "bsc os%", "adp os%", "bsc us%", "adp us%"
        )?;
        for row in &self.rows {
            let e = &row.event;
            let change = match e.load_change {
                Some((a, b)) => format!("{a}->{b} ohm"),
                None => format!("{}->{}", e.from_value, e.to_value),
            };
            let estimate = match &row.estimate {
                Some(Ok(c)) => format!("err {:.2}% conv {}", c.final_error_pct, opt(c.convergence_time)),
                Some(Err(err)) => err.to_string(),
                None => String::new(),
            };
            writeln!(
                f,
                "{:<7} {:>8.4} {:>16} {:>12} {:>12} {:>8} {:>9} {:>9} {:>9} {:>9}  {}",
                e.signal.name(),
                e.t_step,
                change,
                settle_cell(&row.bsc),
                settle_cell(&row.adaptive),
                row.settling_ratio.map_or("-".into(), |r| format!("{r:.3}")),
                pct_cell(&row.bsc, |m| m.overshoot_pct),
                pct_cell(&row.adaptive, |m| m.overshoot_pct),
                pct_cell(&row.bsc, |m| m.undershoot_pct),
                pct_cell(&row.adaptive, |m| m.undershoot_pct),
                estimate
            )?;
        }
        Ok(())
    }
}

impl EventSignal {
    pub fn is_reference(self) -> bool {
        matches!(self, EventSignal::VRef | EventSignal::QRef)
    }
}
