//! Cross-run comparison of two artifact directories.

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::artifact::{StateFile, Trajectory, FINAL_STATE_FILE, TRAJECTORY_FILE};
use crate::error::{Error, Result};
use crate::observables::{fidelity, trajectory_std_window};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    /// Standard deviation of `a` against `b` per shared observable, matched at
    /// the nearest time of `b`.
    pub s: IndexMap<String, f64>,
    pub window: (f64, f64),
    /// Overlap of the two final states when both exist at the same time.
    pub final_fidelity: Option<f64>,
    pub n_cx_a: Option<f64>,
    pub n_cx_b: Option<f64>,
    /// `n_cx_a / n_cx_b` at the end of the runs.
    pub gate_ratio: Option<f64>,
}

impl CompareReport {
    /// Plain `key,value` lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantity,value\n");
        for (name, s) in &self.s {
            out.push_str(&format!("s_{name},{}\n", super::artifact::format_sig(*s)));
        }
        let opt = |v: Option<f64>| v.map(super::artifact::format_sig).unwrap_or_default();
        out.push_str(&format!("final_fidelity,{}\n", opt(self.final_fidelity)));
        out.push_str(&format!("n_cx_a,{}\n", opt(self.n_cx_a)));
        out.push_str(&format!("n_cx_b,{}\n", opt(self.n_cx_b)));
        out.push_str(&format!("gate_ratio,{}\n", opt(self.gate_ratio)));
        out
    }
}

/// Compares trajectories already in memory over `window` (whole run when `None`).
pub fn compare_trajectories(a: &Trajectory, b: &Trajectory, window: Option<(f64, f64)>) -> Result<CompareReport> {
    let shared: Vec<&str> = a
        .observable_columns()
        .into_iter()
        .filter(|c| b.observable_columns().contains(c))
        .collect();
    if shared.is_empty() {
        return Err(Error::arg("the runs share no observable columns"));
    }
    let window = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let mut s = IndexMap::new();
    for name in shared {
        let test = a.series(name).unwrap_or_default();
        let reference = b.series(name).unwrap_or_default();
        s.insert(name.to_string(), trajectory_std_window(&test, &reference, window.0, window.1)?);
    }
    let n_cx_a = a.last("n_cx");
    let n_cx_b = b.last("n_cx");
    let gate_ratio = match (n_cx_a, n_cx_b) {
        (Some(x), Some(y)) if y > 0.0 => Some(x / y),
        _ => None,
    };
    Ok(CompareReport {
        s,
        window,
        final_fidelity: None,
        n_cx_a,
        n_cx_b,
        gate_ratio,
    })
}

pub fn cmd_compare(dir_a: &Path, dir_b: &Path, window: Option<(f64, f64)>) -> Result<CompareReport> {
    let a = Trajectory::read(&dir_a.join(TRAJECTORY_FILE))?;
    let b = Trajectory::read(&dir_b.join(TRAJECTORY_FILE))?;
    let mut report = compare_trajectories(&a, &b, window)?;
    let (fa, fb) = (dir_a.join(FINAL_STATE_FILE), dir_b.join(FINAL_STATE_FILE));
    if fa.exists() && fb.exists() {
        let (sa, sb) = (StateFile::read(&fa)?, StateFile::read(&fb)?);
        if sa.n_qubits == sb.n_qubits && (sa.t - sb.t).abs() <= 1e-9 * sa.t.abs().max(1.0) {
            report.final_fidelity = Some(fidelity(&sa.state()?, &sb.state()?)?);
        }
    }
    Ok(report)
}
