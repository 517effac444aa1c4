//! Baseline propagators: first-order Trotter steps and exact propagation.
//!
//! Time-dependent schedules are sampled at the start of every step in both
//! baselines, so `H(t)` is held constant on `[t, t + dt)`.

use log::debug;
use num_complex::Complex64;

use crate::ansatz::cnots_for_rotation;
use crate::driver::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::models::Schedule;
use crate::observables::{EvalContext, ObservableSet};
use crate::pauli::PauliSum;
use crate::state::{rotate_amplitudes, Spectrum, StateVector, MAX_DENSE_QUBITS};

/// `Π_μ e^{−i dt c_μ P_μ} |ψ⟩` in canonical term order (first term applied first).
pub fn trotter_step(psi: &StateVector, h: &PauliSum, dt: f64) -> Result<StateVector> {
    check_step(psi, h, dt)?;
    let mut amps = psi.amplitudes().to_vec();
    for (c, p) in h.terms() {
        rotate_amplitudes(&mut amps, p, c * dt);
    }
    Ok(StateVector::from_raw(psi.n_qubits(), amps))
}

fn check_step(psi: &StateVector, h: &PauliSum, dt: f64) -> Result<()> {
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::arg(format!("time step must be non-negative, got {dt}")));
    }
    if psi.n_qubits() != h.n_qubits() {
        return Err(Error::arg("state and Hamiltonian registers differ"));
    }
    Ok(())
}

/// CNOTs in one Trotter step: `Σ_terms 2(weight − 1)`.
pub fn trotter_cnots_per_step(h: &PauliSum) -> usize {
    h.strings().map(cnots_for_rotation).sum()
}

/// `e^{−iH dt}|ψ⟩` by dense Hermitian eigendecomposition.
pub fn exact_step(psi: &StateVector, h: &PauliSum, dt: f64) -> Result<StateVector> {
    check_step(psi, h, dt)?;
    Spectrum::of(h)?.evolve(psi, dt)
}

/// Exact propagation that reuses the eigendecomposition while the
/// Hamiltonian's terms and coefficients stay the same.
#[derive(Default)]
pub struct ExactPropagator {
    cache: Option<(PauliSum, Spectrum)>,
}

impl ExactPropagator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn spectrum(&mut self, h: &PauliSum) -> Result<&Spectrum> {
        let hit = matches!(&self.cache, Some((cached, _)) if cached == h);
        if !hit {
            debug!("diagonalizing {}-term Hamiltonian", h.len());
            self.cache = Some((h.clone(), Spectrum::of(h)?));
        }
        Ok(&self.cache.as_ref().expect("filled above").1)
    }

    pub fn step(&mut self, psi: &StateVector, h: &PauliSum, dt: f64) -> Result<StateVector> {
        check_step(psi, h, dt)?;
        self.spectrum(h)?.evolve(psi, dt)
    }
}

/// `e^{−iH dt}|ψ⟩` by a Taylor series summed to machine precision, on
/// substeps with `‖H‖₁ dt ≤ 1/2`. Used when `H` changes every step and a fresh
/// eigendecomposition per step would dominate the cost.
pub fn taylor_step(psi: &StateVector, h: &PauliSum, dt: f64) -> Result<StateVector> {
    check_step(psi, h, dt)?;
    let bound = h.one_norm() * dt;
    let substeps = (bound / 0.5).ceil().max(1.0) as usize;
    let tau = dt / substeps as f64;
    let dim = psi.dim();
    let mut amps = psi.amplitudes().to_vec();
    let mut term = vec![Complex64::new(0.0, 0.0); dim];
    let mut next = vec![Complex64::new(0.0, 0.0); dim];
    for _ in 0..substeps {
        term.copy_from_slice(&amps);
        for k in 1..64 {
            next.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
            h.apply_add(&term, &mut next);
            let scale = Complex64::new(0.0, -tau / k as f64);
            let mut norm = 0.0;
            for ((t, n), a) in term.iter_mut().zip(&next).zip(amps.iter_mut()) {
                *t = n * scale;
                *a += *t;
                norm += t.norm_sqr();
            }
            if norm.sqrt() < 1e-17 {
                break;
            }
        }
    }
    Ok(StateVector::from_raw(psi.n_qubits(), amps))
}

/// Running Trotter circuit.
#[derive(Clone, Debug)]
pub struct TrotterState {
    pub psi: StateVector,
    pub t: f64,
    pub steps_taken: usize,
    pub n_cx_total: usize,
}

impl TrotterState {
    pub fn new(psi: StateVector) -> Self {
        TrotterState {
            psi,
            t: 0.0,
            steps_taken: 0,
            n_cx_total: 0,
        }
    }

    pub fn step(&mut self, h: &PauliSum, dt: f64) -> Result<()> {
        self.psi = trotter_step(&self.psi, h, dt)?;
        self.t += dt;
        self.steps_taken += 1;
        self.n_cx_total += trotter_cnots_per_step(h);
        Ok(())
    }
}

/// Exact state along a schedule at arbitrary times.
///
/// Constant schedules use one eigendecomposition and jump straight to `t`.
/// Otherwise the state is marched on the grid `k·dt` with `H(k·dt)` held over
/// each cell, and an off-grid time takes a partial step from the last grid point.
pub struct ReferenceTracker {
    schedule: Schedule,
    initial: StateVector,
    dt: f64,
    grid_k: usize,
    grid_state: StateVector,
    propagator: ExactPropagator,
}

impl ReferenceTracker {
    pub fn new(schedule: Schedule, initial: StateVector, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::arg(format!("reference step must be positive, got {dt}")));
        }
        if schedule.n_qubits() > MAX_DENSE_QUBITS {
            return Err(Error::arg("reference propagation limited to dense sizes"));
        }
        Ok(ReferenceTracker {
            schedule,
            grid_state: initial.clone(),
            initial,
            dt,
            grid_k: 0,
            propagator: ExactPropagator::new(),
        })
    }

    /// Exact state at `t ≥` the last grid time reached.
    pub fn state_at(&mut self, t: f64) -> Result<StateVector> {
        if self.schedule.is_constant_after_start() {
            let h = self.schedule.hamiltonian_at(0.0);
            return self.propagator.spectrum(&h)?.evolve(&self.initial, t);
        }
        let eps = 1e-12 * self.dt.max(t.abs());
        while (self.grid_k + 1) as f64 * self.dt <= t + eps {
            let t0 = self.grid_k as f64 * self.dt;
            let h = self.schedule.hamiltonian_at(t0);
            self.grid_state = taylor_step(&self.grid_state, &h, self.dt)?;
            self.grid_k += 1;
        }
        let t0 = self.grid_k as f64 * self.dt;
        if t < t0 - eps {
            return Err(Error::arg(format!(
                "reference already advanced past t = {t} (grid at {t0})"
            )));
        }
        if t - t0 > eps {
            let h = self.schedule.hamiltonian_at(t0);
            taylor_step(&self.grid_state, &h, t - t0)
        } else {
            Ok(self.grid_state.clone())
        }
    }
}

/// Fixed-step trajectory of a baseline propagator.
#[derive(Clone, Debug)]
pub struct FixedStepRun {
    pub records: Vec<TrajectoryRecord>,
    pub final_state: StateVector,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Baseline {
    Trotter,
    Exact,
}

#[derive(Clone, Debug)]
pub struct BaselineOptions {
    /// Extra times added to the mesh (the cell containing one is split).
    pub checkpoints: Vec<f64>,
    /// Reference mesh for fidelity observables of Trotter runs.
    pub dt_exact: f64,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        BaselineOptions {
            checkpoints: Vec::new(),
            dt_exact: crate::driver::DEFAULT_DT_EXACT,
        }
    }
}

/// Times `0 = t_0 < t_1 < … < t_K = t_final`, spacing `dt`, last cell clipped.
pub fn fixed_mesh(t_final: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !(t_final > 0.0) {
        return Err(Error::arg(format!(
            "need positive step and final time, got dt = {dt}, t_final = {t_final}"
        )));
    }
    let n = ((t_final / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut mesh: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
    mesh.push(t_final);
    Ok(mesh)
}

fn mesh_with_stops(t_final: f64, dt: f64, stops: &[f64]) -> Result<Vec<f64>> {
    let mut mesh = fixed_mesh(t_final, dt)?;
    let tol = 1e-9 * dt;
    for &s in stops {
        if s > 0.0 && s < t_final && !mesh.iter().any(|&m| (m - s).abs() <= tol) {
            mesh.push(s);
        }
    }
    mesh.sort_by(f64::total_cmp);
    Ok(mesh)
}

/// Fixed-step march with either propagator.
pub fn run_baseline(
    kind: Baseline,
    schedule: &Schedule,
    psi0: &StateVector,
    t_final: f64,
    dt: f64,
    observables: &ObservableSet,
    opts: &BaselineOptions,
) -> Result<FixedStepRun> {
    if psi0.n_qubits() != schedule.n_qubits() {
        return Err(Error::arg("initial state and schedule registers differ"));
    }
    observables.validate(Some(psi0.n_qubits()))?;
    let mesh = mesh_with_stops(t_final, dt, &opts.checkpoints)?;
    let mut reference = if kind == Baseline::Trotter && observables.needs_reference() {
        Some(ReferenceTracker::new(schedule.clone(), psi0.clone(), opts.dt_exact)?)
    } else {
        None
    };
    let mut propagator = ExactPropagator::new();
    let constant = schedule.is_constant_after_start();
    let mut psi = psi0.clone();
    let mut n_cx = 0usize;
    let mut records = Vec::with_capacity(mesh.len());

    let mut record = |t: f64, psi: &StateVector, n_cx: usize, dt_used: f64| -> Result<()> {
        let h = schedule.hamiltonian_at(t);
        let ref_state = match reference.as_mut() {
            Some(r) => Some(r.state_at(t)?),
            None => None,
        };
        let ctx = EvalContext {
            psi,
            hamiltonian: &h,
            initial: psi0,
            reference: Some(ref_state.as_ref().unwrap_or(psi)),
        };
        records.push(TrajectoryRecord {
            t,
            thetas: Vec::new(),
            n_theta: 0,
            n_cx,
            l2: None,
            dt_used,
            observables: observables.evaluate(&ctx)?,
            stalled: false,
        });
        Ok(())
    };

    record(0.0, &psi, 0, 0.0)?;
    for w in mesh.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let step = t1 - t0;
        let h = schedule.hamiltonian_at(t0);
        psi = match kind {
            Baseline::Trotter => {
                n_cx += trotter_cnots_per_step(&h);
                trotter_step(&psi, &h, step)?
            }
            Baseline::Exact if constant => propagator.step(&psi, &h, step)?,
            Baseline::Exact => taylor_step(&psi, &h, step)?,
        };
        if !psi.is_finite() {
            return Err(Error::numeric(format!("state became non-finite at t = {t1}")));
        }
        record(t1, &psi, n_cx, step)?;
    }
    Ok(FixedStepRun {
        records,
        final_state: psi,
    })
}

/// First-order Trotter march with CNOT accounting in `n_cx`.
pub fn run_trotter(
    schedule: &Schedule,
    psi0: &StateVector,
    t_final: f64,
    dt: f64,
    observables: &ObservableSet,
) -> Result<FixedStepRun> {
    run_baseline(Baseline::Trotter, schedule, psi0, t_final, dt, observables, &BaselineOptions::default())
}

/// Numerically exact march with left-endpoint sampling of `H(t)`.
pub fn run_exact(
    schedule: &Schedule,
    psi0: &StateVector,
    t_final: f64,
    dt: f64,
    observables: &ObservableSet,
) -> Result<FixedStepRun> {
    run_baseline(Baseline::Exact, schedule, psi0, t_final, dt, observables, &BaselineOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{mfim_hamiltonian, schedule_lsm_ramp, schedule_quench};
    use crate::observables::{fidelity, Observable};
    use crate::state::product_state;
    use crate::testing::{dense_expm_of, random_state};
    use nalgebra::DVector;

    fn dense_exact(h: &PauliSum, psi: &StateVector, dt: f64) -> StateVector {
        let u = dense_expm_of(&(h.to_dense() * Complex64::new(dt, 0.0)));
        let v = u * DVector::from_column_slice(psi.amplitudes());
        StateVector::new(psi.n_qubits(), v.iter().copied().collect()).unwrap()
    }

    fn dist(a: &StateVector, b: &StateVector) -> f64 {
        a.amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn trotter_step_examples() {
        let h = PauliSum::parse(2, &[(0.7, "Z0"), (-0.3, "Z1")]).unwrap();
        let psi = random_state(2, 3);
        for dt in [0.01, 0.5, 2.0] {
            let tr = trotter_step(&psi, &h, dt).unwrap();
            assert!(dist(&tr, &dense_exact(&h, &psi, dt)) < 1e-12);
        }
        assert_eq!(trotter_step(&psi, &h, 0.0).unwrap(), psi);
        assert!(trotter_step(&psi, &h, -0.1).is_err());
    }

    #[test]
    fn trotter_step_error_is_second_order_locally() {
        let h = PauliSum::parse(1, &[(1.0, "X0"), (1.0, "Z0")]).unwrap();
        let zero = product_state(&[0]).unwrap();
        let err = |dt: f64| dist(&trotter_step(&zero, &h, dt).unwrap(), &dense_exact(&h, &zero, dt));
        let ratio = err(0.1) / err(0.05);
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn trotter_cnot_examples() {
        assert_eq!(trotter_cnots_per_step(&mfim_hamiltonian(8, 1.0, -2.0, 0.5, true).unwrap()), 16);
        let lsm = crate::models::lsm_hamiltonian(8, 0.5, -0.7, 1.0).unwrap();
        assert_eq!(trotter_cnots_per_step(&lsm), 28);
        let fields = PauliSum::parse(3, &[(1.0, "X0"), (0.5, "Z2")]).unwrap();
        assert_eq!(trotter_cnots_per_step(&fields), 0);
    }

    #[test]
    fn exact_step_examples() {
        let h = PauliSum::parse(1, &[(1.0, "X0")]).unwrap();
        let zero = product_state(&[0]).unwrap();
        let out = exact_step(&zero, &h, std::f64::consts::FRAC_PI_2).unwrap();
        assert!((out.amplitudes()[1] - Complex64::new(0.0, -1.0)).norm() < 1e-12);

        let h = PauliSum::parse(3, &[(1.0, "X0 X1"), (0.4, "Z2"), (-0.6, "Y1 Y2")]).unwrap();
        let psi = random_state(3, 2);
        assert!(dist(&exact_step(&psi, &h, 0.37).unwrap(), &dense_exact(&h, &psi, 0.37)) < 1e-12);
        assert!(dist(&taylor_step(&psi, &h, 0.37).unwrap(), &dense_exact(&h, &psi, 0.37)) < 1e-12);
        assert!(dist(&taylor_step(&psi, &h, 5.0).unwrap(), &dense_exact(&h, &psi, 5.0)) < 1e-11);
    }

    #[test]
    fn eigenstate_only_acquires_a_phase() {
        let h = mfim_hamiltonian(3, 1.0, -2.0, 0.5, true).unwrap();
        let gs = crate::state::ground_state(&h).unwrap();
        let out = exact_step(&gs.state, &h, 1.3).unwrap();
        assert!((fidelity(&gs.state, &out).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_propagation_conserves_norm_and_energy() {
        let h = mfim_hamiltonian(4, 1.0, -2.0, 0.5, true).unwrap();
        let mut psi = product_state(&[0; 4]).unwrap();
        let e0 = h.expectation(&psi).unwrap();
        let mut prop = ExactPropagator::new();
        for _ in 0..10_000 {
            psi = prop.step(&psi, &h, 1e-3).unwrap();
        }
        assert!((psi.norm() - 1.0).abs() < 1e-10);
        assert!((h.expectation(&psi).unwrap() - e0).abs() < 1e-10);

        let mut tr = TrotterState::new(product_state(&[0; 4]).unwrap());
        for _ in 0..10_000 {
            tr.step(&h, 1e-3).unwrap();
        }
        assert!((tr.psi.norm() - 1.0).abs() < 1e-10);
        assert_eq!(tr.n_cx_total, 10_000 * trotter_cnots_per_step(&h));
        assert_eq!(tr.steps_taken, 10_000);
    }

    #[test]
    fn taylor_propagation_is_unitary_over_many_steps() {
        let h = crate::models::lsm_hamiltonian(4, 0.3, -0.7, 1.0).unwrap();
        let mut psi = random_state(4, 1);
        for _ in 0..10_000 {
            psi = taylor_step(&psi, &h, 5e-4).unwrap();
        }
        assert!((psi.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn exact_runs_are_dt_independent_for_quenches() {
        let pre = mfim_hamiltonian(4, 1.0, 0.0, 0.0, true).unwrap();
        let post = mfim_hamiltonian(4, 1.0, -2.0, 0.5, true).unwrap();
        let s = schedule_quench(pre, post).unwrap();
        let psi0 = product_state(&[0; 4]).unwrap();
        let obs = ObservableSet::default();
        let coarse = run_exact(&s, &psi0, 1.0, 0.1, &obs).unwrap();
        let fine = run_exact(&s, &psi0, 1.0, 0.01, &obs).unwrap();
        let f = fidelity(&coarse.final_state, &fine.final_state).unwrap();
        assert!((f - 1.0).abs() < 1e-10);
    }

    #[test]
    fn trotter_global_error_is_first_order() {
        let s = schedule_lsm_ramp(4, 1.0, -0.7).unwrap();
        let h0 = s.hamiltonian_at(0.0);
        let psi0 = crate::state::ground_state(&h0).unwrap().state;
        let obs = ObservableSet::default();
        let exact = run_exact(&s, &psi0, 1.0, 5e-4, &obs).unwrap().final_state;
        let err = |dt: f64| {
            let tr = run_trotter(&s, &psi0, 1.0, dt, &obs).unwrap().final_state;
            (1.0 - fidelity(&tr, &exact).unwrap()).max(0.0).sqrt()
        };
        let (e1, e2, e3) = (err(4e-3), err(2e-3), err(1e-3));
        let order = ((e1 / e3).ln() / 4f64.ln()).abs();
        assert!((0.8..=1.2).contains(&order), "order {order}");
        let ratio = e1 / e2;
        assert!((1.5..=2.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn fixed_runs_record_observables_on_the_mesh() {
        let s = schedule_lsm_ramp(3, 1.0, 1.6).unwrap();
        let psi0 = product_state(&[0; 3]).unwrap();
        let obs = ObservableSet::new(vec![Observable::energy(), Observable::infidelity()]).unwrap();
        let run = run_trotter(&s, &psi0, 0.105, 0.01, &obs).unwrap();
        assert_eq!(run.records.len(), 12);
        assert!((run.records.last().unwrap().t - 0.105).abs() < 1e-15);
        assert!(run.records.windows(2).all(|w| w[1].t > w[0].t));
        let first_cost = trotter_cnots_per_step(&s.hamiltonian_at(0.0));
        assert_eq!(run.records[1].n_cx, first_cost);
        assert!(run.records.iter().all(|r| r.observables["infidelity"] < 1e-3));

        let opts = BaselineOptions {
            checkpoints: vec![0.025, 0.05],
            ..BaselineOptions::default()
        };
        let run = run_baseline(Baseline::Exact, &s, &psi0, 0.105, 0.01, &obs, &opts).unwrap();
        assert_eq!(run.records.len(), 13);
        assert!(run.records.iter().any(|r| r.t == 0.025));
    }
}
