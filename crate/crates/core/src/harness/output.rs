use std::path::{Path, PathBuf};

use super::{Mode, PolarizationRecord};
use crate::error::{Error, Result};
use crate::sim::Trajectory;

const STATIC_COLUMNS: [&str; 9] = [
    "sweep_value",
    "sweep_unit",
    "I_fc_A",
    "v_cell_V",
    "E_nernst_V",
    "v_act_V",
    "v_ohm_V",
    "v_conc_V",
    "v_stack_V",
];

const DYNAMIC_COLUMNS: [&str; 9] = [
    "omega_cp_rad_s",
    "P_sm_Pa",
    "m_sm_kg",
    "m_O2_kg",
    "m_N2_kg",
    "P_rm_Pa",
    "W_cp_kg_s",
    "P_ca_Pa",
    "converged_flag",
];

pub const TRAJECTORY_HEADER: [&str; 15] = [
    "t_s",
    "v_cm_V",
    "I_fc_A",
    "omega_cp_rad_s",
    "P_sm_Pa",
    "m_sm_kg",
    "m_O2_kg",
    "m_N2_kg",
    "P_rm_Pa",
    "W_cp_kg_s",
    "P_ca_Pa",
    "P_O2_Pa",
    "v_cell_V",
    "v_stack_V",
    "flags",
];

pub fn csv_header(mode: Mode) -> Vec<&'static str> {
    let mut h = STATIC_COLUMNS.to_vec();
    if mode == Mode::Dynamic {
        h.extend(DYNAMIC_COLUMNS);
    }
    h
}

/// 17 significant digits, enough to round-trip any f64.
fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(header).map_err(to_io)?;
    for r in rows {
        w.write_record(&r).map_err(to_io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Write polarization records, one row each, in the given order.
pub fn emit_csv(records: &[PolarizationRecord], mode: Mode, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(r) = records.iter().find(|r| r.dynamic.is_some() != (mode == Mode::Dynamic)) {
        return Err(Error::validation(
            "records",
            format!("record at {} A does not match the {} column layout", r.i_fc, mode.name()),
        ));
    }
    let rows = records.iter().map(|r| {
        let (value, unit) = match &r.sweep {
            Some(s) => (real(s.value), s.unit.clone()),
            None => (String::new(), "none".into()),
        };
        let v = &r.v;
        let mut row = vec![value, unit];
        row.extend([r.i_fc, v.v_cell, v.e_nernst, v.v_act, v.v_ohm, v.v_conc, v.v_stack].map(real));
        if let Some(d) = &r.dynamic {
            let x = &d.x;
            row.extend([x.omega_cp, x.p_sm, x.m_sm, x.m_o2, x.m_n2, x.p_rm, d.q.w_cp, d.q.p_ca].map(real));
            row.push(d.status.code().to_string());
        }
        row
    });
    write_rows(path, &csv_header(mode), rows)
}

/// Write every recorded sample of a trajectory. `flags` is 1 when any clamp
/// or flow reversal was active at that sample.
pub fn emit_trajectory_csv(traj: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    let rows = traj.samples.iter().map(|s| {
        let x = &s.x;
        let mut row: Vec<String> = [
            s.t, s.u.v_cm, s.d.i_fc, x.omega_cp, x.p_sm, x.m_sm, x.m_o2, x.m_n2, x.p_rm, s.q.w_cp, s.q.p_ca,
            s.q.p_o2, s.v.v_cell, s.v.v_stack,
        ]
        .map(real)
        .to_vec();
        row.push(u8::from(s.q.flags.any()).to_string());
        row
    });
    write_rows(path.as_ref(), &TRAJECTORY_HEADER, rows)
}

fn python_str(s: &str) -> String {
    let mut out = String::from("'");
    for c in s.chars() {
        match c {
            '\\' | '\'' => {
                out.push('\\');
                out.push(c);
            }
            _ => out.push(c),
        }
    }
    out.push('\'');
    out
}

/// Write a matplotlib script that draws `v_cell_V` against `I_fc_A`, one
/// series per CSV, labelled by its swept value. Paths below the script's
/// directory are stored relative to it.
pub fn emit_plot_script(csv_paths: &[PathBuf], title: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().unwrap_or(Path::new(""));
    let files: Vec<String> = csv_paths
        .iter()
        .map(|p| python_str(&p.strip_prefix(dir).unwrap_or(p).to_string_lossy()))
        .collect();
    let png = python_str(&path.with_extension("png").file_name().unwrap_or_default().to_string_lossy());
    let script = format!(
        r#"#!/usr/bin/env python3
"""Polarization curves written by pemfc. Usage: python3 {name}"""
import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
FILES = [
{files}
]


def load(path):
    with open(os.path.join(HERE, path), newline="") as f:
        rows = list(csv.DictReader(f))
    ok = [r for r in rows if r.get("converged_flag", "1") == "1"]
    label = path
    if rows and rows[0]["sweep_unit"] != "none":
        label = "{{:g}} {{}}".format(float(rows[0]["sweep_value"]), rows[0]["sweep_unit"])
    return [float(r["I_fc_A"]) for r in ok], [float(r["v_cell_V"]) for r in ok], label


fig, ax = plt.subplots(figsize=(6, 4.5))
for path in FILES:
    i, v, label = load(path)
    ax.plot(i, v, marker="o", markersize=3, label=label)
ax.set_xlabel("stack current [A]")
ax.set_ylabel("cell voltage [V]")
ax.set_title({title})
ax.grid(True, alpha=0.3)
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(HERE, {png}), dpi=150)
"#,
        name = path.file_name().unwrap_or_default().to_string_lossy(),
        files = files.iter().map(|f| format!("    {f},")).collect::<Vec<_>>().join("\n"),
        title = python_str(title),
    );
    std::fs::write(path, script).map_err(|e| Error::io(path, e))
}
