//! Adaptive ground-state preparation from a two-local operator pool.

use log::{debug, info, warn};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{minus_i_apply, Ansatz};
use crate::driver::two_local_pool;
use crate::error::{Error, Result};
use crate::pauli::{PauliString, PauliSum};
use crate::state::{dot, rotate_amplitudes, StateVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VqeConfig {
    /// Defaults to the two-local pool of the register.
    #[serde(skip)]
    pub pool: Option<Vec<PauliString>>,
    pub grad_tol: f64,
    pub energy_tol: f64,
    pub max_operators: usize,
    pub max_inner_iterations: usize,
}

impl Default for VqeConfig {
    fn default() -> Self {
        VqeConfig {
            pool: None,
            grad_tol: 1e-3,
            energy_tol: 1e-8,
            max_operators: 200,
            max_inner_iterations: 2000,
        }
    }
}

impl VqeConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("grad_tol", self.grad_tol), ("energy_tol", self.energy_tol)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::config(name, format!("must be positive, got {value}")));
            }
        }
        if self.max_inner_iterations == 0 {
            return Err(Error::config("max_inner_iterations", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct VqeResult {
    pub ansatz: Ansatz,
    pub energy: f64,
    /// Largest pool gradient magnitude at exit.
    pub max_gradient: f64,
    /// Stopped on `grad_tol` rather than on the operator cap.
    pub converged: bool,
}

/// `d⟨H⟩/dθ` at `θ = 0` for appending `e^{−iθg}`: `−2 Im⟨gΨ|HΨ⟩`.
pub fn operator_gradient(a: &Ansatz, g: &PauliString, h: &PauliSum) -> Result<f64> {
    let psi = a.evaluate();
    let h_psi = h.apply(&psi)?;
    gradient_on(psi.amplitudes(), h_psi.amplitudes(), g)
}

fn gradient_on(psi: &[Complex64], h_psi: &[Complex64], g: &PauliString) -> Result<f64> {
    if !g.is_phase_free() {
        return Err(Error::arg(format!("generator {g} is not Hermitian")));
    }
    let mut g_psi = vec![Complex64::new(0.0, 0.0); psi.len()];
    g.apply_add(psi, Complex64::new(1.0, 0.0), &mut g_psi);
    Ok(-2.0 * dot(&g_psi, h_psi).im)
}

/// `⟨H⟩` and its gradient over all angles, by a reverse sweep.
pub fn energy_and_gradient(a: &Ansatz, h: &PauliSum) -> Result<(f64, DVector<f64>)> {
    let psi = a.evaluate();
    let mut phi = psi.amplitudes().to_vec();
    let mut lambda = h.apply(&psi)?.into_amplitudes();
    let energy = dot(&phi, &lambda).re;
    let n = a.len();
    let mut grad = DVector::zeros(n);
    for mu in (0..n).rev() {
        let g = &a.generators()[mu];
        let d = minus_i_apply(g, &phi);
        grad[mu] = 2.0 * dot(&lambda, &d).re;
        rotate_amplitudes(&mut phi, g, -a.thetas()[mu]);
        rotate_amplitudes(&mut lambda, g, -a.thetas()[mu]);
    }
    Ok((energy, grad))
}

/// Minimizes `⟨H⟩` over all angles of `a` in place; returns the final energy.
pub fn minimize_energy(a: &mut Ansatz, h: &PauliSum, cfg: &VqeConfig) -> Result<f64> {
    let n = a.len();
    let (mut e, mut g) = energy_and_gradient(a, h)?;
    if n == 0 {
        return Ok(e);
    }
    let mut inv_hess = DMatrix::<f64>::identity(n, n);
    for iter in 0..cfg.max_inner_iterations {
        if g.amax() < 1e-12 {
            break;
        }
        let mut dir = -(&inv_hess * &g);
        let mut slope = dir.dot(&g);
        if !(slope < 0.0) {
            inv_hess = DMatrix::identity(n, n);
            dir = -g.clone();
            slope = dir.dot(&g);
        }
        let x0 = DVector::from_column_slice(a.thetas());
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let x = &x0 + &dir * step;
            a.set_thetas(x.as_slice())?;
            let (e_new, g_new) = energy_and_gradient(a, h)?;
            if e_new <= e + 1e-4 * step * slope {
                accepted = Some((x, e_new, g_new));
                break;
            }
            step *= 0.5;
        }
        let Some((x, e_new, g_new)) = accepted else {
            a.set_thetas(x0.as_slice())?;
            debug!("line search failed after {iter} iterations");
            break;
        };
        let s = &x - &x0;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-16 {
            let rho = 1.0 / sy;
            let hy = &inv_hess * &y;
            let yhy = y.dot(&hy);
            inv_hess += (&s * s.transpose()) * (rho * (1.0 + rho * yhy))
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        let change = e - e_new;
        e = e_new;
        g = g_new;
        if change < cfg.energy_tol {
            break;
        }
    }
    Ok(e)
}

/// Grows an ansatz on `reference` by largest pool gradient, re-minimizing
/// all angles after each addition.
pub fn prepare_ground_state(h: &PauliSum, reference: &StateVector, cfg: &VqeConfig) -> Result<VqeResult> {
    cfg.validate()?;
    if h.n_qubits() != reference.n_qubits() {
        return Err(Error::arg("Hamiltonian and reference registers differ"));
    }
    let pool = match &cfg.pool {
        Some(p) => p.clone(),
        None => two_local_pool(reference.n_qubits())?,
    };
    let mut ansatz = Ansatz::new(reference.clone());
    let mut energy = h.expectation(reference)?;
    loop {
        let psi = ansatz.evaluate();
        let h_psi = h.apply(&psi)?;
        let grads: Vec<f64> = pool
            .par_iter()
            .map(|g| gradient_on(psi.amplitudes(), h_psi.amplitudes(), g))
            .collect::<Result<_>>()?;
        let (mut best, mut best_abs) = (0usize, -1.0f64);
        for (k, g) in grads.iter().enumerate() {
            if g.abs() > best_abs {
                best = k;
                best_abs = g.abs();
            }
        }
        if best_abs < cfg.grad_tol {
            info!(
                "ground state converged with {} operators, E = {energy:.12}",
                ansatz.len()
            );
            return Ok(VqeResult {
                ansatz,
                energy,
                max_gradient: best_abs.max(0.0),
                converged: true,
            });
        }
        if ansatz.len() >= cfg.max_operators {
            warn!(
                "operator cap {} reached with gradient {best_abs:e}; keeping best-so-far",
                cfg.max_operators
            );
            return Ok(VqeResult {
                ansatz,
                energy,
                max_gradient: best_abs,
                converged: false,
            });
        }
        ansatz.append(pool[best])?;
        let e_new = minimize_energy(&mut ansatz, h, cfg)?;
        debug!(
            "added {} (|g| = {best_abs:.3e}), E = {e_new:.12}",
            pool[best]
        );
        energy = e_new.min(energy);
    }
}
