/// Stand-alone matplotlib script that plots the traces written next to it.
pub fn script(adaptive_files: &[String]) -> String {
    let files: Vec<String> = std::iter::once("bsc.csv".to_string())
        .chain(adaptive_files.iter().cloned())
        .map(|f| format!("    \"{f}\","))
        .collect();
    format!(
        r#"#!/usr/bin/env python3
# Plots V_o, Q and the load estimate against their references.
# Usage: python3 plot_traces.py [output.png]
import csv
import os
import sys

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
FILES = [
{files}
]


def load(name):
    with open(os.path.join(HERE, name), newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {{k: [float(r[k]) for r in rows] for k in rows[0]}}


fig, (ax_v, ax_q, ax_r) = plt.subplots(3, 1, sharex=True, figsize=(9, 9))
for i, name in enumerate(FILES):
    d = load(name)
    label = name[:-4]
    ax_v.plot(d["t"], d["V_o"], label=label)
    ax_q.plot(d["t"], d["Q"], label=label)
    if name != "bsc.csv":
        ax_r.plot(d["t"], d["R_l_est"], label=label + " estimate")
    if i == 0:
        ax_v.plot(d["t"], d["v_ref"], "k--", label="V*")
        ax_q.plot(d["t"], d["q_ref"], "k--", label="Q*")
        ax_r.plot(d["t"], d["R_l_true"], "k--", label="R_L")

ax_v.set_ylabel("V_o [V]")
ax_q.set_ylabel("Q [var]")
ax_r.set_ylabel("R_L [ohm]")
ax_r.set_xlabel("t [s]")
for ax in (ax_v, ax_q, ax_r):
    ax.grid(True)
    ax.legend(loc="best")
fig.tight_layout()
out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(HERE, "traces.png")
fig.savefig(out, dpi=120)
print("saved", out)
"#,
        files = files.join("\n")
    )
}
