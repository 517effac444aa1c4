//! On-disk run artifacts: trajectory CSV, metadata JSON, state and ansatz snapshots.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::driver::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::state::StateVector;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const METADATA_FILE: &str = "metadata.json";
pub const FINAL_STATE_FILE: &str = "state_final.json";
pub const FINAL_ANSATZ_FILE: &str = "ansatz_final.json";

/// Non-observable CSV columns, after the observables.
pub const BOOKKEEPING_COLUMNS: [&str; 4] = ["n_theta", "n_cx", "L2", "dt"];

/// `x` with 12 significant digits, shortest form (like C's `%.12g`).
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        trim_zeros(&fixed)
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Writes through a temporary sibling and renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::arg(format!("not a file path: {}", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Header `t, <observables…>, n_theta, n_cx, L2, dt`; `L2` is empty where undefined.
pub fn trajectory_csv(records: &[TrajectoryRecord], observable_names: &[String]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend(observable_names.iter().cloned());
    header.extend(BOOKKEEPING_COLUMNS.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![format_sig(r.t)];
        for name in observable_names {
            let v = r
                .observables
                .get(name)
                .ok_or_else(|| Error::arg(format!("record at t = {} lacks `{name}`", r.t)))?;
            row.push(format_sig(*v));
        }
        row.push(r.n_theta.to_string());
        row.push(r.n_cx.to_string());
        row.push(r.l2.map(format_sig).unwrap_or_default());
        row.push(format_sig(r.dt_used));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// A trajectory CSV read back as columns of optional reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Trajectory {
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if columns.first().map(String::as_str) != Some("t") {
            return Err(Error::arg(format!("{} has no leading `t` column", path.display())));
        }
        let mut rows = Vec::new();
        for (k, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|field| {
                    if field.is_empty() {
                        Ok(None)
                    } else {
                        field.parse::<f64>().map(Some).map_err(|_| {
                            Error::arg(format!("{}: row {} has non-numeric `{field}`", path.display(), k + 1))
                        })
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Trajectory { columns, rows })
    }

    /// Names of observable columns.
    pub fn observable_columns(&self) -> Vec<&str> {
        self.columns[1..]
            .iter()
            .map(String::as_str)
            .filter(|c| !BOOKKEEPING_COLUMNS.contains(c))
            .collect()
    }

    /// `(t, value)` pairs for a column, skipping empty cells.
    pub fn series(&self, column: &str) -> Option<Vec<(f64, f64)>> {
        let k = self.columns.iter().position(|c| c == column)?;
        Some(
            self.rows
                .iter()
                .filter_map(|row| Some((row[0]?, row[k]?)))
                .collect(),
        )
    }

    pub fn last(&self, column: &str) -> Option<f64> {
        self.series(column)?.last().map(|&(_, v)| v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub n_qubits: usize,
    pub t: f64,
    pub amplitudes: Vec<[f64; 2]>,
}

impl StateFile {
    pub fn new(psi: &StateVector, t: f64) -> Self {
        StateFile {
            n_qubits: psi.n_qubits(),
            t,
            amplitudes: psi.amplitudes().iter().map(|a| [a.re, a.im]).collect(),
        }
    }

    pub fn state(&self) -> Result<StateVector> {
        let amps = self.amplitudes.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
        StateVector::new(self.n_qubits, amps)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// `ansatz_t<time>.json` with the time in fixed notation.
pub fn snapshot_name(t: f64) -> String {
    format!("ansatz_t{}.json", format_sig(t))
}

pub fn path_in(dir: &Path, file: &str) -> PathBuf {
    dir.join(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use indexmap::IndexMap;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(1.0), "1");
        assert_eq!(format_sig(-0.7), "-0.7");
        assert_eq!(format_sig(5e-4), "0.0005");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig(-14.618741234567891), "-14.6187412346");
        assert_eq!(format_sig(1e-7), "1e-7");
        assert_eq!(format_sig(1.234e15), "1.234e15");
        assert_eq!(format_sig(123456789012.0), "123456789012");
        for x in [0.1, 2.5e-3, 6.0, 1.0 / 7.0, -3.3e-9] {
            let back: f64 = format_sig(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 1e-11);
        }
    }

    #[test]
    fn csv_round_trip() {
        let mut obs = IndexMap::new();
        obs.insert("energy".to_string(), -1.25);
        let records = vec![
            TrajectoryRecord {
                t: 0.0,
                thetas: vec![],
                n_theta: 0,
                n_cx: 0,
                l2: None,
                dt_used: 0.0,
                observables: obs.clone(),
                stalled: false,
            },
            TrajectoryRecord {
                t: 0.005,
                thetas: vec![0.1],
                n_theta: 1,
                n_cx: 2,
                l2: Some(3e-4),
                dt_used: 0.005,
                observables: obs,
                stalled: false,
            },
        ];
        let text = trajectory_csv(&records, &["energy".to_string()]).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,energy,n_theta,n_cx,L2,dt");
        assert_eq!(text.lines().nth(1).unwrap(), "0,-1.25,0,0,,0");

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join(TRAJECTORY_FILE);
        write_atomic(&path, text.as_bytes()).unwrap();
        let tr = Trajectory::read(&path).unwrap();
        assert_eq!(tr.observable_columns(), vec!["energy"]);
        assert_eq!(tr.series("L2").unwrap(), vec![(0.005, 3e-4)]);
        assert_eq!(tr.last("n_cx"), Some(2.0));
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn state_file_round_trip() {
        let psi = crate::testing::random_state(3, 9);
        let f = StateFile::new(&psi, 1.5);
        let text = serde_json::to_string(&f).unwrap();
        let back: StateFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.state().unwrap(), psi);
        assert_eq!(snapshot_name(3.0), "ansatz_t3.json");
        assert_eq!(snapshot_name(0.25), "ansatz_t0.25.json");
    }
}
