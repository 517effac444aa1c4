//! Declarative experiments: config in, trajectory and metadata out.

pub mod artifact;
pub mod compare;
pub mod config;
pub mod fit;
pub mod sweep;

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::ansatz::Ansatz;
use crate::driver::{self, two_local_pool, AvqdsConfig, RunOptions, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::evolve::{run_baseline, Baseline, BaselineOptions};
use crate::models::{schedule_interpolate, Schedule};
use crate::observables::ObservableSet;
use crate::pauli::{Pauli, PauliString, PauliSum};
use crate::state::{ground_state, product_state, StateVector};
use crate::vqe::{prepare_ground_state, VqeConfig};

use artifact::{snapshot_name, trajectory_csv, write_atomic, StateFile};
pub use config::ExperimentConfig;
use config::{InitialStateConfig, MethodConfig, PoolChoice};

/// Process exit status for an error: 2 for rejected input, 3 for numeric
/// failure, 1 for I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Parse { .. } | Error::Json(_) | Error::Argument(_) => 2,
        Error::Numeric(_) | Error::State(_) => 3,
        Error::Io(_) | Error::Csv(_) => 1,
    }
}

/// Sizes the global worker pool. Only the first call has an effect.
pub fn set_threads(n: usize) {
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
        warn!("thread pool already initialized: {e}");
    }
}

/// Everything a run produced, before it is written out.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<TrajectoryRecord>,
    pub observable_names: Vec<String>,
    pub final_state: StateVector,
    pub t_final: f64,
    pub ansatz: Option<Ansatz>,
    pub snapshots: Vec<(f64, Ansatz)>,
    pub stalled_steps: usize,
    /// Operators in the initial ansatz (non-zero after VQE or a prep ramp).
    pub initial_operators: usize,
}

impl RunOutput {
    pub fn stall_times(&self) -> Vec<f64> {
        self.records.iter().filter(|r| r.stalled).map(|r| r.t).collect()
    }

    pub fn last(&self) -> &TrajectoryRecord {
        self.records.last().expect("runs record the initial point")
    }
}

/// Pauli strings `±Z_i` chosen so that `bits` is the unique ground state.
fn aligning_field(bits: &[u8], field: f64) -> Result<PauliSum> {
    let n = bits.len();
    let terms = bits
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let sign = if b == 0 { -1.0 } else { 1.0 };
            Ok((sign * field, PauliString::single(n, i, Pauli::Z)?))
        })
        .collect::<Result<Vec<_>>>()?;
    PauliSum::from_terms(n, terms)
}

fn pool_for(choice: PoolChoice, schedule: &Schedule) -> Result<Vec<PauliString>> {
    match choice {
        PoolChoice::Hamiltonian => driver::pool_from_strings(schedule.structure()),
        PoolChoice::TwoLocal => two_local_pool(schedule.n_qubits()),
    }
}

/// Builds the starting ansatz (a reference state with possibly some operators).
pub fn initial_ansatz(cfg: &ExperimentConfig, schedule: &Schedule, base_dir: &Path) -> Result<Ansatz> {
    let n = cfg.n_qubits();
    match &cfg.initial_state {
        InitialStateConfig::Product { .. } => Ok(Ansatz::new(product_state(&cfg.initial_state.bits(n))?)),
        InitialStateConfig::DenseGround { t } => {
            let gs = ground_state(&schedule.hamiltonian_at(*t))?;
            if gs.is_degenerate() {
                warn!("ground state at t = {t} is (near) degenerate, gap {:.3e}", gs.gap);
            }
            Ok(Ansatz::new(gs.state))
        }
        InitialStateConfig::AdaptVqe {
            t,
            pool,
            grad_tol,
            energy_tol,
            max_operators,
            max_inner_iterations,
            ..
        } => {
            let h = schedule.hamiltonian_at(*t);
            let vqe = VqeConfig {
                pool: Some(pool_for(*pool, schedule)?),
                grad_tol: *grad_tol,
                energy_tol: *energy_tol,
                max_operators: *max_operators,
                max_inner_iterations: *max_inner_iterations,
            };
            let reference = product_state(&cfg.initial_state.bits(n))?;
            let result = prepare_ground_state(&h, &reference, &vqe)?;
            if !result.converged {
                warn!(
                    "adaptive VQE stopped before convergence (max gradient {:.3e})",
                    result.max_gradient
                );
            }
            info!(
                "VQE: {} operators, energy {:.10}",
                result.ansatz.len(),
                result.energy
            );
            Ok(result.ansatz)
        }
        InitialStateConfig::AdiabaticRamp { ramp_time, field, .. } => {
            let bits = cfg.initial_state.bits(n);
            let from = aligning_field(&bits, *field)?;
            let prep = schedule_interpolate(from, schedule.hamiltonian_at(0.0), *ramp_time)?;
            let avqds = cfg.method.avqds_config().unwrap_or_default();
            let run = driver::run(
                &prep,
                Ansatz::new(product_state(&bits)?),
                *ramp_time,
                &avqds,
                &ObservableSet::default(),
                &RunOptions::default(),
            )?;
            info!("preparation ramp: {} operators", run.ansatz.len());
            Ok(run.ansatz)
        }
        InitialStateConfig::AnsatzFile { path } => {
            let full = if path.is_absolute() { path.clone() } else { base_dir.join(path) };
            let text = std::fs::read_to_string(&full).map_err(|e| {
                Error::config("initial_state.path", format!("cannot read {}: {e}", full.display()))
            })?;
            let a = Ansatz::from_json(&text).map_err(|e| config::prefixed_any(e, "initial_state.path"))?;
            if a.n_qubits() != n {
                return Err(Error::config(
                    "initial_state.path",
                    format!("ansatz has {} qubits, model has {n}", a.n_qubits()),
                ));
            }
            Ok(a)
        }
    }
}

/// Runs a validated config. Relative paths inside it resolve against `base_dir`.
pub fn execute(cfg: &ExperimentConfig, base_dir: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    let schedule = cfg.schedule()?;
    let ansatz0 = initial_ansatz(cfg, &schedule, base_dir)?;
    let initial_operators = ansatz0.len();
    let observable_names: Vec<String> = cfg.observables.names().map(str::to_string).collect();
    let t_final = cfg.t_final;

    match &cfg.method {
        MethodConfig::Avqds { pool, dt_exact, .. } => {
            let avqds: AvqdsConfig = cfg.method.avqds_config().expect("avqds method");
            let opts = RunOptions {
                checkpoints: cfg.output.checkpoints.clone(),
                snapshot_times: cfg.output.snapshot_times.clone(),
                dt_exact: *dt_exact,
                pool: Some(pool_for(*pool, &schedule)?),
            };
            let run = driver::run(&schedule, ansatz0, t_final, &avqds, &cfg.observables, &opts)?;
            if run.stalled_steps > 0 {
                warn!("{} steps ended above the L2 cutoff", run.stalled_steps);
            }
            Ok(RunOutput {
                final_state: run.final_state(),
                records: run.records,
                observable_names,
                t_final,
                ansatz: Some(run.ansatz),
                snapshots: run.snapshots,
                stalled_steps: run.stalled_steps,
                initial_operators,
            })
        }
        MethodConfig::Trotter { dt, dt_exact } => {
            baseline(Baseline::Trotter, cfg, &schedule, &ansatz0, *dt, *dt_exact, observable_names)
        }
        MethodConfig::Exact { dt } => {
            baseline(Baseline::Exact, cfg, &schedule, &ansatz0, *dt, *dt, observable_names)
        }
    }
}

fn baseline(
    kind: Baseline,
    cfg: &ExperimentConfig,
    schedule: &Schedule,
    ansatz0: &Ansatz,
    dt: f64,
    dt_exact: f64,
    observable_names: Vec<String>,
) -> Result<RunOutput> {
    let opts = BaselineOptions {
        checkpoints: cfg
            .output
            .checkpoints
            .iter()
            .chain(&cfg.output.snapshot_times)
            .copied()
            .collect(),
        dt_exact,
    };
    let psi0 = ansatz0.evaluate();
    let run = run_baseline(kind, schedule, &psi0, cfg.t_final, dt, &cfg.observables, &opts)?;
    Ok(RunOutput {
        records: run.records,
        observable_names,
        final_state: run.final_state,
        t_final: cfg.t_final,
        ansatz: None,
        snapshots: Vec::new(),
        stalled_steps: 0,
        initial_operators: ansatz0.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub config: ExperimentConfig,
    pub code_version: String,
    pub wall_time_seconds: f64,
    pub status: String,
    pub n_records: usize,
    pub stalled_steps: usize,
    pub stall_times: Vec<f64>,
    pub final_n_theta: usize,
    pub final_n_cx: usize,
    pub initial_operators: usize,
    pub snapshots: Vec<String>,
}

/// Writes the artifact set for `out` into `dir`; returns the metadata.
pub fn write_artifacts(
    dir: &Path,
    cfg: &ExperimentConfig,
    out: &RunOutput,
    wall_time_seconds: f64,
) -> Result<Metadata> {
    std::fs::create_dir_all(dir)?;
    let csv = trajectory_csv(&out.records, &out.observable_names)?;
    write_atomic(&dir.join(artifact::TRAJECTORY_FILE), csv.as_bytes())?;

    let mut snapshots = Vec::new();
    for (t, a) in &out.snapshots {
        let name = snapshot_name(*t);
        write_atomic(&dir.join(&name), a.to_json()?.as_bytes())?;
        snapshots.push(name);
    }
    if let Some(a) = &out.ansatz {
        write_atomic(&dir.join(artifact::FINAL_ANSATZ_FILE), a.to_json()?.as_bytes())?;
    }
    let state = StateFile::new(&out.final_state, out.last().t);
    write_atomic(
        &dir.join(artifact::FINAL_STATE_FILE),
        serde_json::to_string(&state)?.as_bytes(),
    )?;

    let last = out.last();
    let meta = Metadata {
        config: cfg.resolved(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_seconds,
        status: if out.stalled_steps > 0 { "completed_with_stalls" } else { "ok" }.into(),
        n_records: out.records.len(),
        stalled_steps: out.stalled_steps,
        stall_times: out.stall_times(),
        final_n_theta: last.n_theta,
        final_n_cx: last.n_cx,
        initial_operators: out.initial_operators,
        snapshots,
    };
    write_atomic(
        &dir.join(artifact::METADATA_FILE),
        serde_json::to_string_pretty(&meta)?.as_bytes(),
    )?;
    Ok(meta)
}

/// Loads, runs and writes one experiment. `out_dir` overrides the config's directory.
pub fn cmd_run(config_path: &Path, out_dir: Option<&Path>) -> Result<(PathBuf, Metadata)> {
    let cfg = ExperimentConfig::load(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let stem = config_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir(&stem));
    let start = Instant::now();
    let out = execute(&cfg, base)?;
    let meta = write_artifacts(&dir, &cfg, &out, start.elapsed().as_secs_f64())?;
    info!(
        "{}: {} records, N_theta = {}, N_cx = {}",
        dir.display(),
        meta.n_records,
        meta.final_n_theta,
        meta.final_n_cx
    );
    Ok((dir, meta))
}
