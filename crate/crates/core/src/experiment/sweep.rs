//! Parameter sweeps over a config template, with scaling fits.
//!
//! A grid spec is a `;`-separated list of `key=values`. Keys are dotted paths
//! into the config JSON (`model.n`, `t_final`, `method.dtheta_max`); several
//! keys joined by `|` receive the same value. Values are `a:b` (inclusive
//! integer range) or a `,`-separated list of JSON scalars:
//!
//! ```text
//! model.n|schedule.pre.n=4:8;t_final=3,6
//! ```

use std::path::{Path, PathBuf};
use std::time::Instant;

use indexmap::IndexMap;
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::artifact::{format_sig, write_atomic};
use super::fit::{fit_exponential, fit_power_law, fit_quadratic, ExponentialFit, PowerLawFit, QuadraticFit};
use super::{execute, write_artifacts, ExperimentConfig, RunOutput};
use crate::error::{Error, Result};

/// One grid axis: keys that move together and the values they take.
#[derive(Clone, Debug, PartialEq)]
pub struct GridAxis {
    pub keys: Vec<String>,
    pub values: Vec<Value>,
}

pub fn parse_grid(spec: &str) -> Result<Vec<GridAxis>> {
    let mut axes = Vec::new();
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (lhs, rhs) = part
            .split_once('=')
            .ok_or_else(|| Error::arg(format!("grid entry `{part}` lacks `=`")))?;
        let keys: Vec<String> = lhs.split('|').map(|k| k.trim().to_string()).collect();
        if keys.iter().any(|k| k.is_empty() || k.split('.').any(str::is_empty)) {
            return Err(Error::arg(format!("bad key in grid entry `{part}`")));
        }
        let rhs = rhs.trim();
        let values = match rhs.split_once(':') {
            Some((a, b)) => {
                let parse = |s: &str| {
                    s.trim()
                        .parse::<i64>()
                        .map_err(|_| Error::arg(format!("range bound `{s}` is not an integer")))
                };
                let (a, b) = (parse(a)?, parse(b)?);
                if a > b {
                    return Err(Error::arg(format!("empty range `{rhs}`")));
                }
                (a..=b).map(Value::from).collect()
            }
            None => rhs
                .split(',')
                .map(|v| {
                    let v = v.trim();
                    serde_json::from_str::<Value>(v).or_else(|_| {
                        if v.is_empty() {
                            Err(Error::arg(format!("empty value in `{part}`")))
                        } else {
                            Ok(Value::String(v.to_string()))
                        }
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        };
        axes.push(GridAxis { keys, values });
    }
    if axes.is_empty() {
        return Err(Error::arg("empty grid"));
    }
    Ok(axes)
}

/// Cartesian product, first axis slowest.
pub fn grid_points(axes: &[GridAxis]) -> Vec<Vec<Value>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect()
    })
}

/// Sets `value` at a dotted path; the parent objects must exist.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().expect("split yields one part");
    let mut node = root;
    for p in &parts {
        node = node
            .get_mut(*p)
            .ok_or_else(|| Error::config(path, format!("template has no `{p}` block")))?;
    }
    match node {
        Value::Object(map) => {
            map.insert(last.to_string(), value);
            Ok(())
        }
        _ => Err(Error::config(path, "parent is not an object")),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    pub directory: PathBuf,
    pub overrides: IndexMap<String, Value>,
    pub n_qubits: Option<usize>,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub n_theta: Option<usize>,
    pub n_two_qubit: Option<usize>,
    pub n_cx: Option<usize>,
    /// `N_cx` at each requested cut time, `None` past `t_final`.
    pub n_cx_at_cuts: Vec<Option<usize>>,
    pub wall_time_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSet {
    pub quantity: String,
    pub group: String,
    pub sizes: Vec<f64>,
    pub values: Vec<f64>,
    pub power_law: Option<PowerLawFit>,
    pub exponential: Option<ExponentialFit>,
    pub quadratic: Option<QuadraticFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub grid: String,
    pub cuts: Vec<f64>,
    pub points: Vec<SweepPoint>,
    pub fits: Vec<FitSet>,
}

impl SweepReport {
    /// One row per point; no wall-clock columns.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let keys: Vec<String> = self
            .points
            .first()
            .map(|p| p.overrides.keys().cloned().collect())
            .unwrap_or_default();
        let mut header = vec!["point".to_string()];
        header.extend(keys.iter().cloned());
        header.extend(["status", "n_theta", "n_two_qubit", "n_cx"].map(String::from));
        header.extend(self.cuts.iter().map(|c| format!("n_cx_t{}", format_sig(*c))));
        w.write_record(&header)?;
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        for p in &self.points {
            let mut row = vec![p.index.to_string()];
            row.extend(keys.iter().map(|k| match &p.overrides[k] {
                Value::String(s) => s.clone(),
                Value::Number(n) => n.as_f64().map(format_sig).unwrap_or_else(|| n.to_string()),
                v => v.to_string(),
            }));
            row.push(p.status.clone());
            row.extend([opt(p.n_theta), opt(p.n_two_qubit), opt(p.n_cx)]);
            row.extend(p.n_cx_at_cuts.iter().map(|&v| opt(v)));
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn fit(&self, quantity: &str) -> Option<&FitSet> {
        self.fits.iter().find(|f| f.quantity == quantity)
    }
}

fn summarize(out: &RunOutput, cuts: &[f64]) -> (usize, Option<usize>, usize, Vec<Option<usize>>) {
    let last = out.last();
    let two_qubit = out.ansatz.as_ref().map(|a| a.multi_qubit_count());
    let at_cuts = cuts
        .iter()
        .map(|&c| {
            if c > out.t_final + 1e-9 {
                None
            } else {
                out.records.iter().rev().find(|r| r.t <= c + 1e-9).map(|r| r.n_cx)
            }
        })
        .collect();
    (last.n_theta, two_qubit, last.n_cx, at_cuts)
}

fn run_point(
    index: usize,
    template: &Value,
    axes: &[GridAxis],
    values: &[Value],
    cuts: &[f64],
    out_root: &Path,
    base_dir: &Path,
) -> SweepPoint {
    let directory = out_root.join(format!("point_{index}"));
    let mut overrides = IndexMap::new();
    for (axis, v) in axes.iter().zip(values) {
        overrides.insert(axis.keys.join("|"), v.clone());
    }
    let mut point = SweepPoint {
        index,
        directory: directory.clone(),
        overrides,
        n_qubits: None,
        status: "failed".into(),
        error: None,
        n_theta: None,
        n_two_qubit: None,
        n_cx: None,
        n_cx_at_cuts: vec![None; cuts.len()],
        wall_time_seconds: 0.0,
    };
    let start = Instant::now();
    let result = (|| -> Result<_> {
        let mut doc = template.clone();
        for (axis, v) in axes.iter().zip(values) {
            for key in &axis.keys {
                set_path(&mut doc, key, v.clone())?;
            }
        }
        set_path(&mut doc, "name", Value::String(format!("point_{index}")))?;
        let mut cfg = ExperimentConfig::from_value(doc)?;
        cfg.output.directory = Some(directory.clone());
        let t_final = cfg.t_final;
        cfg.output
            .checkpoints
            .extend(cuts.iter().copied().filter(|&c| c > 0.0 && c <= t_final));
        cfg.validate()?;
        let out = execute(&cfg, base_dir)?;
        write_artifacts(&directory, &cfg, &out, start.elapsed().as_secs_f64())?;
        Ok((cfg.n_qubits(), out))
    })();
    point.wall_time_seconds = start.elapsed().as_secs_f64();
    match result {
        Ok((n, out)) => {
            let (n_theta, two, n_cx, at_cuts) = summarize(&out, cuts);
            point.n_qubits = Some(n);
            point.status = "ok".into();
            point.n_theta = Some(n_theta);
            point.n_two_qubit = two;
            point.n_cx = Some(n_cx);
            point.n_cx_at_cuts = at_cuts;
            info!("point {index}: N = {n}, N_theta = {n_theta}, N_cx = {n_cx}");
        }
        Err(e) => {
            warn!("point {index} failed: {e}");
            point.error = Some(e.to_string());
        }
    }
    point
}

fn fit_set(quantity: String, group: String, sizes: Vec<f64>, values: Vec<f64>) -> FitSet {
    FitSet {
        power_law: fit_power_law(&sizes, &values).ok(),
        exponential: fit_exponential(&sizes, &values).ok(),
        quadratic: fit_quadratic(&sizes, &values).ok(),
        quantity,
        group,
        sizes,
        values,
    }
}

/// Fits of each quantity against the qubit count, grouped by the overrides
/// that do not change the size.
pub fn scaling_fits(points: &[SweepPoint], cuts: &[f64]) -> Vec<FitSet> {
    type Getter = Box<dyn Fn(&SweepPoint) -> Option<usize>>;
    let mut quantities: Vec<(String, Getter)> = vec![
        ("n_theta".into(), Box::new(|p: &SweepPoint| p.n_theta)),
        ("n_two_qubit".into(), Box::new(|p: &SweepPoint| p.n_two_qubit)),
        ("n_cx".into(), Box::new(|p: &SweepPoint| p.n_cx)),
    ];
    for (k, c) in cuts.iter().enumerate() {
        quantities.push((
            format!("n_cx_t{}", format_sig(*c)),
            Box::new(move |p: &SweepPoint| p.n_cx_at_cuts[k]),
        ));
    }
    let group_of = |p: &SweepPoint| -> String {
        p.overrides
            .iter()
            .filter(|(_, v)| p.n_qubits.map(|n| v.as_u64() != Some(n as u64)).unwrap_or(true))
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    };
    let mut groups: IndexMap<String, Vec<&SweepPoint>> = IndexMap::new();
    for p in points.iter().filter(|p| p.status == "ok") {
        groups.entry(group_of(p)).or_default().push(p);
    }
    let mut fits = Vec::new();
    for (group, members) in &groups {
        for (name, get) in &quantities {
            let pairs: Vec<(f64, f64)> = members
                .iter()
                .filter_map(|p| Some((p.n_qubits? as f64, get(p)? as f64)))
                .collect();
            let mut sizes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            sizes.dedup();
            if pairs.len() < 2 || sizes.len() != pairs.len() {
                continue;
            }
            let (xs, ys) = pairs.into_iter().unzip();
            fits.push(fit_set(name.clone(), group.clone(), xs, ys));
        }
    }
    fits
}

/// Runs every grid point of `template` (a config file) into `out_root/point_k`,
/// then writes `sweep.csv` and `sweep.json`.
pub fn cmd_sweep(template_path: &Path, grid: &str, cuts: &[f64], out_root: Option<&Path>) -> Result<SweepReport> {
    let text = std::fs::read_to_string(template_path).map_err(|e| {
        Error::config("<file>", format!("cannot read {}: {e}", template_path.display()))
    })?;
    let template: Value = serde_json::from_str(&text)?;
    let stem = template_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sweep".into());
    let out_root = out_root
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("runs").join(stem));
    let base_dir = template_path.parent().unwrap_or(Path::new("."));
    sweep(&template, grid, cuts, &out_root, base_dir)
}

pub fn sweep(template: &Value, grid: &str, cuts: &[f64], out_root: &Path, base_dir: &Path) -> Result<SweepReport> {
    let axes = parse_grid(grid)?;
    let points = grid_points(&axes);
    // Missing blocks in the template fail up front rather than once per point.
    if let Some(first) = points.first() {
        let mut doc = template.clone();
        for (axis, v) in axes.iter().zip(first) {
            for key in &axis.keys {
                set_path(&mut doc, key, v.clone())?;
            }
        }
    }
    let mut cuts = cuts.to_vec();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    std::fs::create_dir_all(out_root)?;
    let results: Vec<SweepPoint> = points
        .par_iter()
        .enumerate()
        .map(|(k, values)| run_point(k, template, &axes, values, &cuts, out_root, base_dir))
        .collect();
    let fits = scaling_fits(&results, &cuts);
    let report = SweepReport {
        grid: grid.to_string(),
        cuts,
        points: results,
        fits,
    };
    write_atomic(&out_root.join("sweep.csv"), report.to_csv()?.as_bytes())?;
    write_atomic(
        &out_root.join("sweep.json"),
        serde_json::to_string_pretty(&report)?.as_bytes(),
    )?;
    Ok(report)
}
