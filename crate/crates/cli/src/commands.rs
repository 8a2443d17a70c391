use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use bsdpc_core::compare::{compare_traces, ESTIMATE_THRESHOLD};
use bsdpc_core::controllers::AdaptationVariant;
use bsdpc_core::metrics::{
    estimate_convergence, events_from_trace, lyapunov_check, next_event_time, step_metrics, EventSignal,
    LyapunovFunction, LyapunovReport,
};
use bsdpc_core::trace_csv::{read_trace, write_trace};
use bsdpc_core::{run_simulation, ConfigFile, ControllerGains, ControllerKind, SimConfig, SimError, SimRun, Trace};
use rayon::prelude::*;

use crate::{plot, Common, ControllerArg, VariantArg};

fn load_config(common: &Common) -> Result<ConfigFile> {
    let mut cfg = match &common.config {
        Some(path) => ConfigFile::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => ConfigFile::canonical(),
    };
    match common.controller {
        Some(ControllerArg::Bsc) => cfg.controller.kind = ControllerKind::Bsc,
        Some(ControllerArg::Adaptive) => cfg.controller.kind = ControllerKind::Adaptive,
        None => {}
    }
    if let Some(v) = common.variant {
        cfg.gains.adaptation_variant = variant(v);
    }
    if !(common.band_pct > 0.0 && common.band_pct.is_finite()) {
        bail!("--band-pct must be positive, got {}", common.band_pct);
    }
    Ok(cfg)
}

fn variant(v: VariantArg) -> AdaptationVariant {
    match v {
        VariantArg::Derived => AdaptationVariant::Derived,
        VariantArg::Code => AdaptationVariant::Code,
    }
}

fn variant_name(v: AdaptationVariant) -> &'static str {
    match v {
        AdaptationVariant::Derived => "derived",
        AdaptationVariant::Code => "code",
    }
}

fn write_csv(path: &Path, run: &SimRun) -> Result<()> {
    let mut buf = Vec::new();
    write_trace(&mut buf, &run.trace.records)?;
    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
}

fn lyapunov(trace: &Trace, gains: &ControllerGains) -> LyapunovReport {
    let function = match trace.controller {
        ControllerKind::Bsc => LyapunovFunction::V2,
        ControllerKind::Adaptive => LyapunovFunction::V4,
    };
    lyapunov_check(trace, gains, function, &Default::default())
}

/// Headline numbers of one trace, shared by `run` and `sweep`.
#[derive(Debug, Clone, Default)]
struct Summary {
    final_v_o: f64,
    final_q: f64,
    /// Largest settling time over voltage-reference events; `None` if any
    /// of them never settles.
    vref_settling: Option<f64>,
    vref_overshoot_pct: f64,
    q_overshoot_pct: f64,
    lyapunov: LyapunovReport,
    estimate: Option<(Option<f64>, f64)>,
}

fn summarize(trace: &Trace, gains: &ControllerGains, band_pct: f64) -> Summary {
    let last = trace.final_record();
    let events = events_from_trace(trace);
    let mut s = Summary { final_v_o: last.v_o, final_q: last.q, vref_settling: Some(0.0), ..Default::default() };
    for ev in &events {
        let until = next_event_time(&events, ev.t_step);
        let Ok(m) = step_metrics(trace, ev, ev.signal.measured(), band_pct, until) else { continue };
        match ev.signal {
            EventSignal::VRef => {
                s.vref_settling = s.vref_settling.zip(m.settling_time).map(|(a, b)| a.max(b));
                s.vref_overshoot_pct = s.vref_overshoot_pct.max(m.overshoot_pct);
            }
            EventSignal::QRef => s.q_overshoot_pct = s.q_overshoot_pct.max(m.overshoot_pct),
            EventSignal::Load => {}
        }
    }
    if trace.controller == ControllerKind::Adaptive {
        // after the last load change, or over the whole run when the load is fixed
        let (from, target, until) = match events.iter().rev().find(|e| e.signal == EventSignal::Load) {
            Some(ev) => (ev.t_step, ev.load_change.unwrap().1, next_event_time(&events, ev.t_step)),
            None => (trace.records[0].t, trace.records[0].r_l_true, f64::INFINITY),
        };
        if let Ok(c) = estimate_convergence(trace, target, ESTIMATE_THRESHOLD, from, until) {
            s.estimate = Some((c.convergence_time, c.final_error_pct));
        }
    }
    s.lyapunov = lyapunov(trace, gains);
    s
}

fn settle_text(t: Option<f64>) -> String {
    t.map_or_else(|| "not settled".into(), |t| format!("{t:.5}"))
}

pub fn run(common: &Common, out: &Path) -> Result<()> {
    let cfg = load_config(common)?.to_sim_config();
    let run = run_simulation(&cfg)?;
    write_csv(out, &run)?;
    let s = summarize(&run.trace, &cfg.gains, common.band_pct);
    println!(
        "{} rows -> {}: final V_o = {:.4} V, final Q = {:.3} var, lyapunov: {} increases, worst rel error {:.3e}",
        run.trace.records.len(),
        out.display(),
        s.final_v_o,
        s.final_q,
        s.lyapunov.increases,
        s.lyapunov.worst_rel_error
    );
    let d = &run.diagnostics;
    if d.bound_violations > 0 || d.duty_saturations > 0 || d.nonphysical_estimates > 0 {
        println!(
            "diagnostics: {} disturbance bound violations, {} duty saturations, {} non-physical estimates",
            d.bound_violations, d.duty_saturations, d.nonphysical_estimates
        );
    }
    Ok(())
}

fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let probe = dir.join(".bsdpc-write-probe");
    fs::write(&probe, b"").with_context(|| format!("{} is not writable", dir.display()))?;
    fs::remove_file(&probe).ok();
    Ok(())
}

pub fn compare(common: &Common, out: &Path) -> Result<()> {
    let file = load_config(common)?;
    ensure_writable(out)?;
    let base = file.to_sim_config();
    let variants = match common.variant {
        Some(v) => vec![variant(v)],
        None => vec![AdaptationVariant::Derived, AdaptationVariant::Code],
    };
    let mut jobs = vec![SimConfig { controller: ControllerKind::Bsc, ..base.clone() }];
    for &v in &variants {
        let mut cfg = SimConfig { controller: ControllerKind::Adaptive, ..base.clone() };
        cfg.gains.adaptation_variant = v;
        jobs.push(cfg);
    }
    let mut runs: Vec<Result<SimRun, SimError>> = jobs.par_iter().map(run_simulation).collect();
    let bsc = runs.remove(0).context("BSC run")?;
    write_csv(&out.join("bsc.csv"), &bsc)?;

    let mut report = String::new();
    let mut written = Vec::new();
    for (v, result) in variants.iter().zip(runs) {
        let name = variant_name(*v);
        writeln!(report, "== bsc vs adaptive ({name}) ==")?;
        match result {
            Ok(run) => {
                let file_name = format!("adaptive_{name}.csv");
                write_csv(&out.join(&file_name), &run)?;
                written.push(file_name);
                write!(report, "{}", compare_traces(&bsc.trace, &run.trace, common.band_pct))?;
            }
            Err(err) => writeln!(report, "adaptive run failed: {err}")?,
        }
        writeln!(report)?;
    }
    fs::write(out.join("metrics.txt"), &report)?;
    fs::write(out.join("plot_traces.py"), plot::script(&written))?;
    print!("{report}");
    println!("wrote {}", out.display());
    if written.is_empty() {
        bail!("every adaptive run failed");
    }
    Ok(())
}

const SWEEP_HEADER: [&str; 13] = [
    "param",
    "value",
    "status",
    "final_v_o",
    "final_q",
    "vref_settling",
    "vref_overshoot_pct",
    "q_overshoot_pct",
    "lyapunov_increases",
    "lyapunov_worst_rel_error",
    "estimate_convergence_time",
    "estimate_final_error_pct",
    "message",
];

fn sweep_row(param: &str, value: f64, result: &Result<Summary, String>) -> Vec<String> {
    let mut row = vec![param.to_string(), format!("{value:e}")];
    match result {
        Ok(s) => {
            let (conv, err) = match s.estimate {
                Some((c, e)) => (settle_text(c), format!("{e:.6}")),
                None => (String::new(), String::new()),
            };
            row.extend([
                "ok".into(),
                format!("{:.12e}", s.final_v_o),
                format!("{:.12e}", s.final_q),
                settle_text(s.vref_settling),
                format!("{:.6}", s.vref_overshoot_pct),
                format!("{:.6}", s.q_overshoot_pct),
                s.lyapunov.increases.to_string(),
                format!("{:.6e}", s.lyapunov.worst_rel_error),
                conv,
                err,
                String::new(),
            ]);
        }
        Err(msg) => {
            row.push("error".into());
            row.extend(std::iter::repeat_n(String::new(), 9));
            row.push(msg.clone());
        }
    }
    row
}

pub fn sweep(common: &Common, param: &str, values: &[f64], out: &Path) -> Result<()> {
    let file = load_config(common)?;
    // reject unknown names before doing any work
    file.clone().set_numeric(param, values[0])?;
    let band = common.band_pct;
    let results: Vec<Result<Summary, String>> = values
        .par_iter()
        .map(|&value| {
            let mut f = file.clone();
            f.set_numeric(param, value).map_err(|e| e.to_string())?;
            let cfg = f.to_sim_config();
            let run = run_simulation(&cfg).map_err(|e| e.to_string())?;
            Ok(summarize(&run.trace, &cfg.gains, band))
        })
        .collect();

    let mut w = csv::Writer::from_path(out).with_context(|| format!("writing {}", out.display()))?;
    w.write_record(SWEEP_HEADER)?;
    for (value, result) in values.iter().zip(&results) {
        w.write_record(sweep_row(param, *value, result))?;
        match result {
            Ok(s) => println!(
                "{param} = {value:e}: final V_o {:.4} V, v_ref settling {}, lyapunov worst rel error {:.3e}",
                s.final_v_o,
                settle_text(s.vref_settling),
                s.lyapunov.worst_rel_error
            ),
            Err(msg) => println!("{param} = {value:e}: {msg}"),
        }
    }
    w.flush()?;
    Ok(())
}

pub fn metrics(common: &Common, path: &Path) -> Result<()> {
    let file = load_config(common)?;
    let cfg = file.to_sim_config();
    let input = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let records = read_trace(input).with_context(|| format!("reading {}", path.display()))?;
    if records.is_empty() {
        bail!("{} holds no records", path.display());
    }
    let step_size = match records.as_slice() {
        [a, b, ..] => b.t - a.t,
        _ => cfg.scenario.step_size,
    };
    let trace = Trace { controller: cfg.controller, step_size, records };
    let events = events_from_trace(&trace);

    println!("{} records, h = {step_size:e}, settling band ±{}%", trace.records.len(), common.band_pct);
    println!(
        "{:<7} {:>8} {:>16} {:>12} {:>10} {:>10} {:>12}",
        "event", "t [s]", "change", "settle [s]", "os%", "us%", "ss error"
    );
    for ev in &events {
        let until = next_event_time(&events, ev.t_step);
        let change = match ev.load_change {
            Some((a, b)) => format!("{a}->{b} ohm"),
            None => format!("{}->{}", ev.from_value, ev.to_value),
        };
        match step_metrics(&trace, ev, ev.signal.measured(), common.band_pct, until) {
            Ok(m) => println!(
                "{:<7} {:>8.4} {:>16} {:>12} {:>10.3} {:>10.3} {:>12.4e}",
                ev.signal.name(),
                ev.t_step,
                change,
                settle_text(m.settling_time),
                m.overshoot_pct,
                m.undershoot_pct,
                m.steady_state_error
            ),
            Err(err) => println!("{:<7} {:>8.4} {:>16} {err}", ev.signal.name(), ev.t_step, change),
        }
    }
    let l = lyapunov(&trace, &cfg.gains);
    println!(
        "lyapunov ({}): {} samples, {} increases, worst rel error {:.3e}",
        if trace.controller == ControllerKind::Adaptive { "V4" } else { "V2" },
        l.samples_checked,
        l.increases,
        l.worst_rel_error
    );
    if let Some((conv, err)) = summarize(&trace, &cfg.gains, common.band_pct).estimate {
        println!("load estimate: final error {err:.3}%, converged {}", settle_text(conv));
    }
    Ok(())
}
