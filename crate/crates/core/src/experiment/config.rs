//! Experiment configuration: a JSON document validated before any computation.
//!
//! ```json
//! {
//!   "name": "fig5_mfim",
//!   "model": {"kind": "mfim", "n": 8, "h_x": -2.0, "h_z": 0.5},
//!   "schedule": {"kind": "quench", "pre": {"kind": "mfim", "n": 8, "h_x": 0.0, "h_z": 0.0}},
//!   "t_final": 3.0,
//!   "method": {"kind": "avqds", "dtheta_max": 0.005},
//!   "initial_state": {"kind": "product"},
//!   "observables": [{"kind": "loschmidt"}, {"kind": "infidelity"}],
//!   "output": {"directory": "runs/fig5_mfim", "checkpoints": [1.0, 2.0, 3.0]}
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::driver::{AvqdsConfig, DEFAULT_DT_EXACT};
use crate::error::{Error, Result};
use crate::mclachlan::DEFAULT_XI;
use crate::models::{lsm_hamiltonian, mfim_hamiltonian, schedule_lsm_ramp, schedule_quench, Schedule};
use crate::observables::ObservableSet;
use crate::pauli::PauliSum;
use crate::state::MAX_DENSE_QUBITS;
use crate::vqe::VqeConfig;

/// Largest register the experiment layer accepts (exact references are dense).
pub const MAX_EXPERIMENT_QUBITS: usize = MAX_DENSE_QUBITS;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub model: ModelConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    pub t_final: f64,
    pub method: MethodConfig,
    #[serde(default)]
    pub initial_state: InitialStateConfig,
    #[serde(default)]
    pub observables: ObservableSet,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// Open XY chain in a transverse field. `gamma` is only used by
    /// non-ramp schedules.
    Lsm {
        n: usize,
        h_z: f64,
        #[serde(default = "one")]
        j: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
    Tfim {
        n: usize,
        h_x: f64,
        #[serde(default = "one")]
        j: f64,
        #[serde(default)]
        periodic: Boundary,
    },
    Mfim {
        n: usize,
        h_x: f64,
        h_z: f64,
        #[serde(default = "one")]
        j: f64,
        #[serde(default)]
        periodic: Boundary,
    },
}

fn one() -> f64 {
    1.0
}

/// `true`, `false`, or `"auto"` (periodic from 3 sites, open below).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Boundary {
    Flag(bool),
    Auto(AutoBoundary),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoBoundary {
    Auto,
}

impl Default for Boundary {
    fn default() -> Self {
        Boundary::Flag(true)
    }
}

impl Boundary {
    pub fn periodic_for(self, n: usize) -> bool {
        match self {
            Boundary::Flag(p) => p,
            Boundary::Auto(_) => n >= 3,
        }
    }
}

impl ModelConfig {
    pub fn n_qubits(&self) -> usize {
        match self {
            ModelConfig::Lsm { n, .. } | ModelConfig::Tfim { n, .. } | ModelConfig::Mfim { n, .. } => *n,
        }
    }

    pub fn hamiltonian(&self) -> Result<PauliSum> {
        match *self {
            ModelConfig::Lsm { n, h_z, j, gamma } => lsm_hamiltonian(n, gamma.unwrap_or(1.0), h_z, j),
            ModelConfig::Tfim { n, h_x, j, periodic } => {
                mfim_hamiltonian(n, j, h_x, 0.0, periodic.periodic_for(n))
            }
            ModelConfig::Mfim { n, h_x, h_z, j, periodic } => {
                mfim_hamiltonian(n, j, h_x, h_z, periodic.periodic_for(n))
            }
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        let n = self.n_qubits();
        if !(2..=MAX_EXPERIMENT_QUBITS).contains(&n) {
            return Err(Error::config(
                format!("{path}.n"),
                format!("must be between 2 and {MAX_EXPERIMENT_QUBITS}, got {n}"),
            ));
        }
        let reals: Vec<(&str, f64)> = match *self {
            ModelConfig::Lsm { h_z, j, gamma, .. } => {
                let mut v = vec![("h_z", h_z), ("j", j)];
                v.extend(gamma.map(|g| ("gamma", g)));
                v
            }
            ModelConfig::Tfim { h_x, j, .. } => vec![("h_x", h_x), ("j", j)],
            ModelConfig::Mfim { h_x, h_z, j, .. } => vec![("h_x", h_x), ("h_z", h_z), ("j", j)],
        };
        for (key, value) in reals {
            if !value.is_finite() {
                return Err(Error::config(format!("{path}.{key}"), "must be finite"));
            }
        }
        match self {
            ModelConfig::Tfim { periodic, .. } | ModelConfig::Mfim { periodic, .. }
                if periodic.periodic_for(n) && n < 3 =>
            {
                Err(Error::config(
                    format!("{path}.periodic"),
                    "periodic chains need at least 3 sites (use false or \"auto\")",
                ))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    /// The model Hamiltonian for all times.
    #[default]
    Constant,
    /// `γ(t) = 1 − 2t/T`, then held; needs an `lsm` model.
    LsmRamp { ramp_time: f64 },
    /// Sudden switch at `t = 0` from `pre` to the model Hamiltonian.
    Quench { pre: ModelConfig },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolChoice {
    #[default]
    Hamiltonian,
    TwoLocal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodConfig {
    Avqds {
        #[serde(default = "default_l2_cut")]
        l2_cut: f64,
        #[serde(default = "default_xi")]
        xi: f64,
        #[serde(default = "default_dtheta_max")]
        dtheta_max: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dt_max: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_adds_per_step: Option<usize>,
        #[serde(default = "default_improvement_floor")]
        improvement_floor: f64,
        #[serde(default)]
        pool: PoolChoice,
        /// Fine mesh for exact reference states (fidelity observables).
        #[serde(default = "default_dt_exact")]
        dt_exact: f64,
    },
    Trotter {
        dt: f64,
        #[serde(default = "default_dt_exact")]
        dt_exact: f64,
    },
    Exact {
        #[serde(default = "default_dt_exact")]
        dt: f64,
    },
}

fn default_l2_cut() -> f64 {
    AvqdsConfig::default().l2_cut
}

fn default_xi() -> f64 {
    DEFAULT_XI
}

fn default_dtheta_max() -> f64 {
    AvqdsConfig::default().dtheta_max
}

fn default_improvement_floor() -> f64 {
    AvqdsConfig::default().improvement_floor
}

fn default_dt_exact() -> f64 {
    DEFAULT_DT_EXACT
}

impl MethodConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            MethodConfig::Avqds { .. } => "avqds",
            MethodConfig::Trotter { .. } => "trotter",
            MethodConfig::Exact { .. } => "exact",
        }
    }

    pub fn avqds_config(&self) -> Option<AvqdsConfig> {
        match *self {
            MethodConfig::Avqds {
                l2_cut,
                xi,
                dtheta_max,
                dt_max,
                max_adds_per_step,
                improvement_floor,
                ..
            } => Some(AvqdsConfig {
                l2_cut,
                xi,
                dtheta_max,
                dt_max,
                max_adds_per_step,
                improvement_floor,
            }),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive: Vec<(&str, f64)> = match self {
            MethodConfig::Avqds { dt_exact, .. } => {
                let cfg = self.avqds_config().expect("avqds variant");
                cfg.validate().map_err(|e| prefixed(e, "method"))?;
                vec![("dt_exact", *dt_exact)]
            }
            MethodConfig::Trotter { dt, dt_exact } => vec![("dt", *dt), ("dt_exact", *dt_exact)],
            MethodConfig::Exact { dt } => vec![("dt", *dt)],
        };
        for (key, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::config(
                    format!("method.{key}"),
                    format!("must be positive and finite, got {value}"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialStateConfig {
    /// Computational basis state; `bits[i]` is qubit `i`, 0 is spin up. Defaults to all 0.
    Product {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bits: Option<Vec<u8>>,
    },
    /// Dense ground state of the schedule's Hamiltonian at time `t`
    /// (negative `t` selects the pre-quench Hamiltonian).
    DenseGround {
        #[serde(default)]
        t: f64,
    },
    /// Adaptive VQE on a product reference, targeting the Hamiltonian at `t`.
    AdaptVqe {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bits: Option<Vec<u8>>,
        #[serde(default)]
        t: f64,
        #[serde(default = "default_vqe_pool")]
        pool: PoolChoice,
        #[serde(default = "default_grad_tol")]
        grad_tol: f64,
        #[serde(default = "default_energy_tol")]
        energy_tol: f64,
        #[serde(default = "default_max_operators")]
        max_operators: usize,
        #[serde(default = "default_max_inner")]
        max_inner_iterations: usize,
    },
    /// Slow variational ramp from `−field Σ ±Z_i` (whose ground state is the
    /// product state `bits`) to the Hamiltonian at `t = 0`.
    AdiabaticRamp {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bits: Option<Vec<u8>>,
        ramp_time: f64,
        #[serde(default = "one")]
        field: f64,
    },
    /// Ansatz JSON file, relative to the config file.
    AnsatzFile { path: PathBuf },
}

impl Default for InitialStateConfig {
    fn default() -> Self {
        InitialStateConfig::Product { bits: None }
    }
}

fn default_vqe_pool() -> PoolChoice {
    PoolChoice::TwoLocal
}

fn default_grad_tol() -> f64 {
    VqeConfig::default().grad_tol
}

fn default_energy_tol() -> f64 {
    VqeConfig::default().energy_tol
}

fn default_max_operators() -> usize {
    VqeConfig::default().max_operators
}

fn default_max_inner() -> usize {
    VqeConfig::default().max_inner_iterations
}

impl InitialStateConfig {
    fn validate(&self, n: usize) -> Result<()> {
        let bits = match self {
            InitialStateConfig::Product { bits }
            | InitialStateConfig::AdaptVqe { bits, .. }
            | InitialStateConfig::AdiabaticRamp { bits, .. } => bits.as_ref(),
            _ => None,
        };
        if let Some(bits) = bits {
            if bits.len() != n {
                return Err(Error::config(
                    "initial_state.bits",
                    format!("expected {n} entries, got {}", bits.len()),
                ));
            }
            if let Some(k) = bits.iter().position(|&b| b > 1) {
                return Err(Error::config(format!("initial_state.bits[{k}]"), "must be 0 or 1"));
            }
        }
        match *self {
            InitialStateConfig::AdaptVqe {
                grad_tol,
                energy_tol,
                max_inner_iterations,
                ..
            } => {
                for (key, value) in [("grad_tol", grad_tol), ("energy_tol", energy_tol)] {
                    if !(value > 0.0) || !value.is_finite() {
                        return Err(Error::config(format!("initial_state.{key}"), "must be positive"));
                    }
                }
                if max_inner_iterations == 0 {
                    return Err(Error::config("initial_state.max_inner_iterations", "must be positive"));
                }
            }
            InitialStateConfig::AdiabaticRamp { ramp_time, field, .. } => {
                if !(ramp_time > 0.0) || !ramp_time.is_finite() {
                    return Err(Error::config("initial_state.ramp_time", "must be positive"));
                }
                if !(field > 0.0) || !field.is_finite() {
                    return Err(Error::config("initial_state.field", "must be positive"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn bits(&self, n: usize) -> Vec<u8> {
        match self {
            InitialStateConfig::Product { bits }
            | InitialStateConfig::AdaptVqe { bits, .. }
            | InitialStateConfig::AdiabaticRamp { bits, .. } => bits.clone().unwrap_or_else(|| vec![0; n]),
            _ => vec![0; n],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Defaults to `runs/<name>`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    /// Times at which ansatz snapshots are written (AVQDS only).
    pub snapshot_times: Vec<f64>,
    /// Times every method must land on exactly.
    pub checkpoints: Vec<f64>,
}

impl ExperimentConfig {
    /// Parses and validates. Errors carry the dotted key path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(path_error)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(path_error)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config("<file>", format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    pub fn n_qubits(&self) -> usize {
        self.model.n_qubits()
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate("model")?;
        let n = self.n_qubits();
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::config("t_final", format!("must be positive, got {}", self.t_final)));
        }
        match &self.schedule {
            ScheduleConfig::Constant => {}
            ScheduleConfig::LsmRamp { ramp_time } => {
                match self.model {
                    ModelConfig::Lsm { gamma: Some(_), .. } => {
                        return Err(Error::config("model.gamma", "the ramp sets gamma; remove it"));
                    }
                    ModelConfig::Lsm { .. } => {}
                    _ => return Err(Error::config("schedule.kind", "lsm_ramp needs an lsm model")),
                }
                if !(*ramp_time > 0.0) || !ramp_time.is_finite() {
                    return Err(Error::config("schedule.ramp_time", "must be positive"));
                }
            }
            ScheduleConfig::Quench { pre } => {
                pre.validate("schedule.pre")?;
                if pre.n_qubits() != n {
                    return Err(Error::config("schedule.pre.n", format!("must equal model.n = {n}")));
                }
            }
        }
        self.method.validate()?;
        self.initial_state.validate(n)?;
        self.observables.validate(Some(n))?;
        for (key, times) in [
            ("output.snapshot_times", &self.output.snapshot_times),
            ("output.checkpoints", &self.output.checkpoints),
        ] {
            if let Some(k) = times
                .iter()
                .position(|&t| !(t >= 0.0) || t > self.t_final || !t.is_finite())
            {
                return Err(Error::config(
                    format!("{key}[{k}]"),
                    format!("must lie in [0, t_final = {}]", self.t_final),
                ));
            }
        }
        self.schedule()?;
        Ok(())
    }

    pub fn schedule(&self) -> Result<Schedule> {
        match &self.schedule {
            ScheduleConfig::Constant => Ok(Schedule::Constant(self.model.hamiltonian()?)),
            ScheduleConfig::LsmRamp { ramp_time } => match self.model {
                ModelConfig::Lsm { n, h_z, j, .. } => {
                    let mut s = schedule_lsm_ramp(n, *ramp_time, h_z)?;
                    if let Schedule::LsmRamp { j: coupling, .. } = &mut s {
                        *coupling = j;
                    }
                    Ok(s)
                }
                _ => Err(Error::config("schedule.kind", "lsm_ramp needs an lsm model")),
            },
            ScheduleConfig::Quench { pre } => schedule_quench(pre.hamiltonian()?, self.model.hamiltonian()?),
        }
    }

    /// Output directory: explicit override, then the config, then `runs/<name>`.
    pub fn output_dir(&self, fallback_name: &str) -> PathBuf {
        self.output.directory.clone().unwrap_or_else(|| {
            PathBuf::from("runs").join(self.name.as_deref().unwrap_or(fallback_name))
        })
    }

    /// The config with every defaulted value written out.
    pub fn resolved(&self) -> Self {
        let mut cfg = self.clone();
        if let MethodConfig::Avqds { dt_max, dtheta_max, .. } = &mut cfg.method {
            dt_max.get_or_insert(*dtheta_max);
        }
        let n = cfg.n_qubits();
        match &mut cfg.initial_state {
            InitialStateConfig::Product { bits }
            | InitialStateConfig::AdaptVqe { bits, .. }
            | InitialStateConfig::AdiabaticRamp { bits, .. } => {
                bits.get_or_insert_with(|| vec![0; n]);
            }
            _ => {}
        }
        cfg
    }
}

/// Any error as a config error at `path`, keeping config paths underneath it.
pub(crate) fn prefixed_any(e: Error, path: &str) -> Error {
    match e {
        Error::Config { .. } => prefixed(e, path),
        other => Error::config(path, other.to_string()),
    }
}

/// Re-roots a config error under `prefix`.
pub(crate) fn prefixed(e: Error, prefix: &str) -> Error {
    match e {
        Error::Config { path, message } => Error::config(format!("{prefix}.{path}"), message),
        other => other,
    }
}

fn path_error(e: serde_path_to_error::Error<serde_json::Error>) -> Error {
    let mut path = e.path().to_string();
    let message = e.inner().to_string();
    // unknown keys inside tagged blocks are reported at the block; name the key itself
    if let Some(rest) = message.strip_prefix("unknown field `") {
        if let Some(key) = rest.split('`').next() {
            let tail = format!(".{key}");
            if path == "." || path.is_empty() {
                path = key.to_string();
            } else if !path.ends_with(&tail) && path != key {
                path.push_str(&tail);
            }
        }
    }
    if path.is_empty() {
        path = ".".into();
    }
    Error::Config { path, message }
}
