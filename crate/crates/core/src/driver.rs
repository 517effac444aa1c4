//! The adaptive variational time-stepping loop.

use indexmap::{IndexMap, IndexSet};
use log::{debug, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::Ansatz;
use crate::error::{Error, Result};
use crate::evolve::ReferenceTracker;
use crate::mclachlan::{Candidate, McLachlanSystem, DEFAULT_XI};
use crate::models::Schedule;
use crate::observables::{EvalContext, ObservableSet};
use crate::pauli::{Pauli, PauliString, PauliSum};
use crate::state::StateVector;

/// Step of the fine mesh used for exact reference states.
pub const DEFAULT_DT_EXACT: f64 = 5e-4;

const THETA_DOT_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AvqdsConfig {
    pub l2_cut: f64,
    pub xi: f64,
    pub dtheta_max: f64,
    /// Defaults to `dtheta_max`.
    pub dt_max: Option<f64>,
    /// Defaults to the pool size.
    pub max_adds_per_step: Option<usize>,
    pub improvement_floor: f64,
}

impl Default for AvqdsConfig {
    fn default() -> Self {
        AvqdsConfig {
            l2_cut: 1e-3,
            xi: DEFAULT_XI,
            dtheta_max: 5e-3,
            dt_max: None,
            max_adds_per_step: None,
            improvement_floor: 1e-8,
        }
    }
}

impl AvqdsConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("l2_cut", self.l2_cut),
            ("xi", self.xi),
            ("dtheta_max", self.dtheta_max),
            ("dt_max", self.dt_max()),
            ("improvement_floor", self.improvement_floor),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::config(name, format!("must be positive and finite, got {value}")));
            }
        }
        if self.max_adds_per_step == Some(0) {
            return Err(Error::config("max_adds_per_step", "must be positive"));
        }
        if self.l2_cut <= self.improvement_floor {
            return Err(Error::config(
                "improvement_floor",
                "must be smaller than l2_cut",
            ));
        }
        Ok(())
    }

    pub fn dt_max(&self) -> f64 {
        self.dt_max.unwrap_or(self.dtheta_max)
    }
}

/// One accepted time step (or the initial point).
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub thetas: Vec<f64>,
    pub n_theta: usize,
    pub n_cx: usize,
    /// McLachlan distance used for the step that ended here; absent for
    /// the initial point and for the fixed-step baselines.
    pub l2: Option<f64>,
    pub dt_used: f64,
    pub observables: IndexMap<String, f64>,
    /// The adaptive step ended with `L² ≥ l2_cut`.
    pub stalled: bool,
}

/// Phase-free strings of `h`, first occurrence order.
pub fn hamiltonian_pool(h: &PauliSum) -> Result<Vec<PauliString>> {
    if h.is_empty() {
        return Err(Error::arg("cannot build an operator pool from an empty Hamiltonian"));
    }
    pool_from_strings(h.strings().copied())
}

/// Deduplicated phase-free strings, identity removed.
pub fn pool_from_strings<I>(strings: I) -> Result<Vec<PauliString>>
where
    I: IntoIterator<Item = PauliString>,
{
    let set: IndexSet<PauliString> = strings
        .into_iter()
        .map(|p| p.without_phase())
        .filter(|p| !p.is_identity())
        .collect();
    if set.is_empty() {
        return Err(Error::arg("operator pool is empty"));
    }
    Ok(set.into_iter().collect())
}

/// All one- and two-site strings. Singles come first (site-major, X<Y<Z),
/// then pairs `i < j` in lexicographic order with letters varying fastest on `j`.
pub fn two_local_pool(n_qubits: usize) -> Result<Vec<PauliString>> {
    if n_qubits < 2 {
        return Err(Error::arg(format!("two-local pool needs at least 2 qubits, got {n_qubits}")));
    }
    let letters = [Pauli::X, Pauli::Y, Pauli::Z];
    let mut out = Vec::with_capacity(3 * n_qubits + 9 * n_qubits * (n_qubits - 1) / 2);
    for i in 0..n_qubits {
        for &a in &letters {
            out.push(PauliString::single(n_qubits, i, a)?);
        }
    }
    for i in 0..n_qubits {
        for j in i + 1..n_qubits {
            for &a in &letters {
                for &b in &letters {
                    out.push(PauliString::from_sites(n_qubits, &[(i, a), (j, b)])?);
                }
            }
        }
    }
    Ok(out)
}

/// What one adaptive expansion did.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdaptOutcome {
    /// Pool indices appended, in order.
    pub added: Vec<usize>,
    /// The expansion stopped with `L² ≥ l2_cut`.
    pub stalled: bool,
}

/// Grows `ansatz` from `pool` until `L² < l2_cut`, keeping `sys` consistent
/// with the grown ansatz.
pub fn adapt_ansatz(
    ansatz: &mut Ansatz,
    sys: &mut McLachlanSystem,
    pool: &[PauliString],
    cfg: &AvqdsConfig,
) -> Result<AdaptOutcome> {
    let mut outcome = AdaptOutcome::default();
    if sys.n_params() != ansatz.len() {
        return Err(Error::arg("McLachlan system does not match the ansatz"));
    }
    let max_adds = cfg.max_adds_per_step.unwrap_or(pool.len());
    while sys.l2 >= cfg.l2_cut {
        if outcome.added.len() >= max_adds {
            debug!("reached {max_adds} additions with L² = {:e}", sys.l2);
            outcome.stalled = true;
            break;
        }
        let Some((index, best)) = best_candidate(sys, pool)? else {
            outcome.stalled = true;
            break;
        };
        if sys.l2 - best.l2 < cfg.improvement_floor {
            warn!(
                "operator pool cannot lower L² = {:e} below the cutoff (best gain {:e})",
                sys.l2,
                sys.l2 - best.l2
            );
            outcome.stalled = true;
            break;
        }
        ansatz.append(pool[index])?;
        sys.extend(best)?;
        outcome.added.push(index);
    }
    Ok(outcome)
}

/// Minimal bordered `L²` over the pool; ties go to the lowest index.
fn best_candidate(sys: &McLachlanSystem, pool: &[PauliString]) -> Result<Option<(usize, Candidate)>> {
    let scores: Vec<Result<f64>> = pool.par_iter().map(|g| sys.candidate(g).map(|c| c.l2)).collect();
    let mut best: Option<(usize, f64)> = None;
    for (k, score) in scores.into_iter().enumerate() {
        let l2 = match score {
            Ok(l2) if l2.is_finite() => l2,
            Ok(_) => continue,
            Err(Error::Numeric(msg)) => {
                debug!("skipping candidate {}: {msg}", pool[k]);
                continue;
            }
            Err(e) => return Err(e),
        };
        if best.map_or(true, |(_, b)| l2 < b) {
            best = Some((k, l2));
        }
    }
    match best {
        Some((k, _)) => Ok(Some((k, sys.candidate(&pool[k])?))),
        None => Ok(None),
    }
}

/// `min(dt_max, dθ_max / max(|θ̇|_∞, ε))`.
pub fn step_size(sys: &McLachlanSystem, cfg: &AvqdsConfig) -> Result<f64> {
    let rate = sys.theta_dot.iter().try_fold(0.0f64, |acc, x| {
        if x.is_finite() {
            Ok(acc.max(x.abs()))
        } else {
            Err(Error::numeric("non-finite parameter velocity"))
        }
    })?;
    Ok(cfg.dt_max().min(cfg.dtheta_max / rate.max(THETA_DOT_FLOOR)))
}

/// Euler update `θ ← θ + θ̇ dt` with the controlled step; returns `dt`.
pub fn advance(ansatz: &mut Ansatz, sys: &McLachlanSystem, cfg: &AvqdsConfig) -> Result<f64> {
    let dt = step_size(sys, cfg)?;
    apply_step(ansatz, sys, dt)?;
    Ok(dt)
}

fn apply_step(ansatz: &mut Ansatz, sys: &McLachlanSystem, dt: f64) -> Result<()> {
    let delta: Vec<f64> = sys.theta_dot.iter().map(|x| x * dt).collect();
    ansatz.shift_thetas(&delta)
}

/// Extra controls for [`run`].
#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Times the step sequence must land on exactly.
    pub checkpoints: Vec<f64>,
    /// Times at which to keep a copy of the ansatz (also landed on exactly).
    pub snapshot_times: Vec<f64>,
    /// Fine mesh for exact reference states of time-dependent schedules.
    pub dt_exact: f64,
    /// Operator pool; defaults to the schedule's Hamiltonian pool.
    pub pool: Option<Vec<PauliString>>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            checkpoints: Vec::new(),
            snapshot_times: Vec::new(),
            dt_exact: DEFAULT_DT_EXACT,
            pool: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AvqdsRun {
    pub records: Vec<TrajectoryRecord>,
    pub ansatz: Ansatz,
    pub snapshots: Vec<(f64, Ansatz)>,
    /// Steps whose adaptive expansion stalled.
    pub stalled_steps: usize,
    /// Operators added at each step, in step order.
    pub adds_per_step: Vec<usize>,
}

impl AvqdsRun {
    pub fn final_state(&self) -> StateVector {
        self.ansatz.evaluate()
    }

    /// Last record with `t ≤ time` (within rounding).
    pub fn record_at(&self, time: f64) -> Option<&TrajectoryRecord> {
        self.records.iter().rev().find(|r| r.t <= time + 1e-9)
    }
}

/// Runs the adaptive variational dynamics from `ansatz0` to `t_final`.
pub fn run(
    schedule: &Schedule,
    ansatz0: Ansatz,
    t_final: f64,
    cfg: &AvqdsConfig,
    observables: &ObservableSet,
    opts: &RunOptions,
) -> Result<AvqdsRun> {
    cfg.validate()?;
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::arg(format!("final time must be positive, got {t_final}")));
    }
    let n = schedule.n_qubits();
    if ansatz0.n_qubits() != n {
        return Err(Error::arg("ansatz and schedule registers differ"));
    }
    observables.validate(Some(n))?;
    let pool = match &opts.pool {
        Some(p) => pool_from_strings(p.iter().copied())?,
        None => pool_from_strings(schedule.structure())?,
    };
    if pool.iter().any(|p| p.n_qubits() != n) {
        return Err(Error::arg("pool and schedule registers differ"));
    }

    let mut stops: Vec<f64> = opts
        .checkpoints
        .iter()
        .chain(&opts.snapshot_times)
        .copied()
        .chain(schedule.breakpoints(t_final))
        .filter(|&t| t > 0.0 && t < t_final)
        .collect();
    stops.push(t_final);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let initial = ansatz0.evaluate();
    let mut reference = if observables.needs_reference() {
        Some(ReferenceTracker::new(schedule.clone(), initial.clone(), opts.dt_exact)?)
    } else {
        None
    };
    let mut ansatz = ansatz0;
    let mut out = AvqdsRun {
        records: Vec::new(),
        ansatz: ansatz.clone(),
        snapshots: Vec::new(),
        stalled_steps: 0,
        adds_per_step: Vec::new(),
    };
    let mut snapshot_queue: Vec<f64> = opts.snapshot_times.clone();
    snapshot_queue.sort_by(f64::total_cmp);
    let mut snapshot_queue = snapshot_queue.into_iter().peekable();

    let mut observe = |t: f64, psi: &StateVector| -> Result<IndexMap<String, f64>> {
        let h = schedule.hamiltonian_at(t);
        let ref_state = match reference.as_mut() {
            Some(r) => Some(r.state_at(t)?),
            None => None,
        };
        let ctx = EvalContext {
            psi,
            hamiltonian: &h,
            initial: &initial,
            reference: ref_state.as_ref(),
        };
        observables.evaluate(&ctx)
    };

    out.records.push(TrajectoryRecord {
        t: 0.0,
        thetas: ansatz.thetas().to_vec(),
        n_theta: ansatz.len(),
        n_cx: ansatz.cnot_count(),
        l2: None,
        dt_used: 0.0,
        observables: observe(0.0, &initial)?,
        stalled: false,
    });
    while snapshot_queue.peek().is_some_and(|&s| s <= 0.0) {
        out.snapshots.push((snapshot_queue.next().unwrap_or(0.0), ansatz.clone()));
    }

    let mut t = 0.0f64;
    let mut stop_index = 0;
    let mut step = 0usize;
    while t < t_final {
        let h = schedule.hamiltonian_at(t);
        let mut sys = McLachlanSystem::build(&ansatz, &h, cfg.xi)?;
        let outcome = adapt_ansatz(&mut ansatz, &mut sys, &pool, cfg)?;
        if outcome.stalled {
            out.stalled_steps += 1;
        }
        out.adds_per_step.push(outcome.added.len());

        let target = stops[stop_index];
        let mut dt = step_size(&sys, cfg)?;
        let landing = t + dt >= target - 1e-12 * target.max(1.0);
        if landing {
            dt = target - t;
        }
        apply_step(&mut ansatz, &sys, dt)?;
        t = if landing { target } else { t + dt };
        if landing {
            stop_index += 1;
        }
        step += 1;

        let psi = ansatz.evaluate();
        if !psi.is_finite() {
            return Err(Error::numeric(format!("ansatz state became non-finite at t = {t}")));
        }
        if step % 500 == 0 {
            info!(
                "t = {t:.4}, N_theta = {}, N_cx = {}, L2 = {:.3e}",
                ansatz.len(),
                ansatz.cnot_count(),
                sys.l2
            );
        }
        out.records.push(TrajectoryRecord {
            t,
            thetas: ansatz.thetas().to_vec(),
            n_theta: ansatz.len(),
            n_cx: ansatz.cnot_count(),
            l2: Some(sys.l2),
            dt_used: dt,
            observables: observe(t, &psi)?,
            stalled: outcome.stalled,
        });
        while snapshot_queue.peek().is_some_and(|&s| s <= t + 1e-12) {
            let s = snapshot_queue.next().unwrap_or(t);
            out.snapshots.push((s, ansatz.clone()));
        }
    }
    out.ansatz = ansatz;
    Ok(out)
}
