use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_bsdpc");

fn bsdpc(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/configs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn column(csv_text: &str, name: &str) -> Vec<String> {
    let mut lines = csv_text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

#[test]
fn run_canonical_bsc() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bsc.csv");
    let o = bsdpc(&["run", "--controller", "bsc", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("final V_o"));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 25_002);
    let v: f64 = column(&text, "V_o").last().unwrap().parse().unwrap();
    assert!((v - 800.0).abs() <= 8.0, "{v}");
}

#[test]
fn zero_duration_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("zero.toml");
    let text = bsdpc_core::config::CANONICAL.replace("duration = 2.5", "duration = 0.0");
    assert_ne!(text, bsdpc_core::config::CANONICAL);
    fs::write(&cfg, text).unwrap();
    let out = dir.path().join("t.csv");
    let o = bsdpc(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 2);
}

#[test]
fn malformed_key_names_section_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[gains]\nk_v = 500.0\nkv = 3.0\n").unwrap();
    let out = dir.path().join("t.csv");
    let o = bsdpc(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("[gains]") && err.contains("`kv`") && err.contains("line 3"), "{err}");
    assert!(!out.exists());
}

#[test]
fn divergence_is_a_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = bsdpc(&["run", "--controller", "adaptive", "--variant", "derived", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("diverged at step"), "{}", stderr(&o));
}

#[test]
fn repeated_runs_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("canonical_load_step.toml");
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for p in [&a, &b] {
        let o = bsdpc(&["run", "--config", cfg.to_str().unwrap(), "--out", p.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn compare_writes_traces_table_and_script() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp");
    let cfg = configs().join("canonical_load_step.toml");
    let o = bsdpc(&["compare", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["bsc.csv", "adaptive_code.csv", "metrics.txt", "plot_traces.py"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let table = fs::read_to_string(out.join("metrics.txt")).unwrap();
    assert!(table.contains("adaptive (derived)") && table.contains("adaptive (code)"));
    assert!(table.contains("200->100 ohm"), "{table}");
    let script = fs::read_to_string(out.join("plot_traces.py")).unwrap();
    assert!(script.contains("\"adaptive_code.csv\""));
}

#[test]
fn compare_frozen_estimate_ratios_are_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("frozen.toml");
    let text = bsdpc_core::config::CANONICAL.replace("freeze_estimate = false", "freeze_estimate = true");
    assert_ne!(text, bsdpc_core::config::CANONICAL);
    fs::write(&cfg, text).unwrap();
    let out = dir.path().join("cmp");
    let o = bsdpc(&["compare", "--config", cfg.to_str().unwrap(), "--variant", "code", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(out.join("metrics.txt")).unwrap();
    let rows: Vec<&str> = table.lines().filter(|l| l.starts_with("v_ref") || l.starts_with("q_ref")).collect();
    assert_eq!(rows.len(), 4);
    for row in rows.iter().filter(|r| !r.contains("not settled")) {
        assert_eq!(row.split_whitespace().nth(5), Some("1.000"), "{row}");
    }
}

#[test]
fn compare_rejects_unwritable_dir_before_simulating() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = blocker.join("sub");
    let o = bsdpc(&["compare", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stdout(&o).is_empty(), "{}", stdout(&o));
}

#[test]
fn sweep_keeps_input_order_and_records_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = bsdpc(&[
        "sweep",
        "--param",
        "gains.k_v",
        "--values",
        "500,-1,250",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(column(&text, "value"), ["5e2", "-1e0", "2.5e2"]);
    assert_eq!(column(&text, "status"), ["ok", "error", "ok"]);
}

#[test]
fn single_value_sweep_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = bsdpc(&["sweep", "--param", "gains.k_v", "--values", "500", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let swept: f64 = column(&text, "final_v_o")[0].parse().unwrap();

    let trace = dir.path().join("t.csv");
    assert!(bsdpc(&["run", "--out", trace.to_str().unwrap()]).status.success());
    let ran: f64 = column(&fs::read_to_string(&trace).unwrap(), "V_o").last().unwrap().parse().unwrap();
    assert!((swept - ran).abs() <= 1e-9 * ran, "{swept} vs {ran}");
}

#[test]
fn step_size_sweep_converges() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = bsdpc(&["sweep", "--param", "scenario.step_size", "--values", "1e-4,5e-5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Vec<f64> = column(&fs::read_to_string(&out).unwrap(), "final_v_o").iter().map(|s| s.parse().unwrap()).collect();
    assert!((v[0] - v[1]).abs() / v[0] < 1e-3, "{v:?}");
}

#[test]
fn sweep_rejects_unknown_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = bsdpc(&["sweep", "--param", "plant.bogus", "--values", "1", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("not a sweepable parameter"));
    assert!(!out.exists());
}

#[test]
fn metrics_reads_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    assert!(bsdpc(&["run", "--out", trace.to_str().unwrap()]).status.success());
    let o = bsdpc(&["metrics", "--trace", trace.to_str().unwrap(), "--band-pct", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("25001 records") && s.contains("1000->800") && s.contains("lyapunov (V2)"), "{s}");
}

#[test]
fn seedless_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = bsdpc(&["run", "--seedless", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--seedless"));
    assert!(!out.exists());
}
