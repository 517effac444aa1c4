//! McLachlan equations of motion for a pseudo-Trotter ansatz.
//!
//! With `d_μ = ∂_μ|Ψ⟩` and `o_μ = ⟨d_μ|Ψ⟩`:
//!
//! ```text
//! M_μν = 2 Re[⟨d_μ|d_ν⟩ + o_μ o_ν]
//! V_μ  = 2 Im[⟨d_μ|H|Ψ⟩ + conj(o_μ) ⟨H⟩]
//! var2 = 2 (⟨H²⟩ − ⟨H⟩²)
//! (M + ξI) θ̇ = V,   L² = var2 − Vᵀ θ̇
//! ```
//!
//! Both `θ̇` and `L²` come from the same regularized Cholesky factorization.
//! Appending a generator `g` at angle zero adds the derivative `−i g |Ψ⟩`
//! and leaves every existing derivative untouched, so a candidate only needs
//! one new row of `M` and one new entry of `V`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::ansatz::{minus_i_apply, Ansatz};
use crate::error::{Error, Result};
use crate::pauli::{PauliString, PauliSum};
use crate::state::{dot, StateVector};

/// Tikhonov shift added to the diagonal of `M`.
pub const DEFAULT_XI: f64 = 1e-6;

const PARALLEL_MIN_WORK: usize = 1 << 15;

/// Assembled and solved McLachlan system for one ansatz and Hamiltonian.
#[derive(Clone, Debug)]
pub struct McLachlanSystem {
    pub m: DMatrix<f64>,
    pub v: DVector<f64>,
    /// Twice the energy variance.
    pub var2: f64,
    pub energy: f64,
    pub xi: f64,
    pub theta_dot: DVector<f64>,
    pub l2: f64,
    chol: Option<Cholesky<f64, Dyn>>,
    state: StateVector,
    derivatives: Vec<Vec<Complex64>>,
    overlaps: Vec<Complex64>,
    h_psi: Vec<Complex64>,
}

/// The bordered quantities for appending one generator.
#[derive(Clone, Debug)]
pub struct Candidate {
    /// New off-diagonal row `M_{N,μ}`, `μ < N`.
    pub row: DVector<f64>,
    /// New diagonal entry `M_{N,N}` (without `ξ`).
    pub diag: f64,
    pub v_entry: f64,
    /// McLachlan distance of the bordered system.
    pub l2: f64,
    derivative: Vec<Complex64>,
    overlap: Complex64,
}

impl McLachlanSystem {
    pub fn build(ansatz: &Ansatz, h: &PauliSum, xi: f64) -> Result<Self> {
        if !(xi > 0.0) || !xi.is_finite() {
            return Err(Error::arg(format!("regularization must be positive, got {xi}")));
        }
        if h.n_qubits() != ansatz.n_qubits() {
            return Err(Error::arg("Hamiltonian and ansatz registers differ"));
        }
        let (state, derivatives) = ansatz.state_and_derivatives();
        if !state.is_finite() {
            return Err(Error::numeric("ansatz state is not finite"));
        }
        let psi = state.amplitudes();
        let mut h_psi = vec![Complex64::new(0.0, 0.0); psi.len()];
        h.apply_add(psi, &mut h_psi);
        let energy = dot(psi, &h_psi).re;
        let h2 = dot(&h_psi, &h_psi).re;
        let var2 = 2.0 * (h2 - energy * energy);

        let n = derivatives.len();
        let overlaps: Vec<Complex64> = derivatives.iter().map(|d| dot(d, psi)).collect();
        let m = gram(&derivatives, &overlaps);
        let v = DVector::from_iterator(
            n,
            derivatives
                .iter()
                .zip(&overlaps)
                .map(|(d, o)| 2.0 * (dot(d, &h_psi) + o.conj() * energy).im),
        );

        let mut sys = McLachlanSystem {
            m,
            v,
            var2,
            energy,
            xi,
            theta_dot: DVector::zeros(n),
            l2: var2,
            chol: None,
            state,
            derivatives,
            overlaps,
            h_psi,
        };
        sys.factor()?;
        Ok(sys)
    }

    fn factor(&mut self) -> Result<()> {
        let n = self.v.len();
        if n == 0 {
            self.chol = None;
            self.theta_dot = DVector::zeros(0);
            self.l2 = self.var2;
            return Ok(());
        }
        let mut a = self.m.clone();
        for i in 0..n {
            a[(i, i)] += self.xi;
        }
        let chol = Cholesky::new(a).ok_or_else(|| {
            Error::numeric("regularized metric is not positive definite")
        })?;
        self.theta_dot = chol.solve(&self.v);
        self.chol = Some(chol);
        self.update_l2()
    }

    fn update_l2(&mut self) -> Result<()> {
        if !self.theta_dot.iter().all(|x| x.is_finite()) {
            return Err(Error::numeric("non-finite parameter velocity"));
        }
        self.l2 = self.var2 - self.v.dot(&self.theta_dot);
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.v.len()
    }

    /// The ansatz state the system was built on.
    pub fn state(&self) -> &StateVector {
        &self.state
    }

    /// Energy variance `⟨H²⟩ − ⟨H⟩²`.
    pub fn variance(&self) -> f64 {
        self.var2 / 2.0
    }

    /// Bordered system for appending `g` at zero angle.
    pub fn candidate(&self, g: &PauliString) -> Result<Candidate> {
        if !g.is_phase_free() || g.n_qubits() != self.state.n_qubits() {
            return Err(Error::arg(format!("invalid candidate generator {g}")));
        }
        let psi = self.state.amplitudes();
        let d_new = minus_i_apply(g, psi);
        let o_new = dot(&d_new, psi);
        let n = self.n_params();
        let row = DVector::from_iterator(
            n,
            self.derivatives
                .iter()
                .zip(&self.overlaps)
                .map(|(d, o)| 2.0 * (dot(d, &d_new) + o * o_new).re),
        );
        let diag = 2.0 * (dot(&d_new, &d_new) + o_new * o_new).re;
        let v_entry = 2.0 * (dot(&d_new, &self.h_psi) + o_new.conj() * self.energy).im;

        // Schur complement of the regularized block.
        let (schur, numer) = match &self.chol {
            Some(chol) => {
                let solved = chol.solve(&row);
                (
                    diag + self.xi - row.dot(&solved),
                    v_entry - row.dot(&self.theta_dot),
                )
            }
            None => (diag + self.xi, v_entry),
        };
        if !(schur > 0.0) {
            return Err(Error::numeric(format!(
                "bordered metric lost definiteness for {g} (schur {schur:e})"
            )));
        }
        Ok(Candidate {
            row,
            diag,
            v_entry,
            l2: self.l2 - numer * numer / schur,
            derivative: d_new,
            overlap: o_new,
        })
    }

    /// Borders the system with a candidate computed from this system.
    pub fn extend(&mut self, cand: Candidate) -> Result<()> {
        let n = self.n_params();
        if cand.row.len() != n {
            return Err(Error::arg("candidate was computed for a different system"));
        }
        let mut m = self.m.clone().resize(n + 1, n + 1, 0.0);
        for i in 0..n {
            m[(n, i)] = cand.row[i];
            m[(i, n)] = cand.row[i];
        }
        m[(n, n)] = cand.diag;
        self.m = m;
        self.v = self.v.clone().push(cand.v_entry);
        self.derivatives.push(cand.derivative);
        self.overlaps.push(cand.overlap);

        let mut col = DVector::zeros(n + 1);
        for i in 0..n {
            col[i] = cand.row[i];
        }
        col[n] = cand.diag + self.xi;
        let chol = match self.chol.take() {
            Some(c) => c.insert_column(n, col),
            None => Cholesky::new(DMatrix::from_element(1, 1, col[0]))
                .ok_or_else(|| Error::numeric("1x1 metric is not positive"))?,
        };
        if chol.l_dirty().iter().any(|x| !x.is_finite()) {
            return Err(Error::numeric("bordered factorization is not finite"));
        }
        self.theta_dot = chol.solve(&self.v);
        self.chol = Some(chol);
        self.update_l2()
    }
}

fn gram(derivatives: &[Vec<Complex64>], overlaps: &[Complex64]) -> DMatrix<f64> {
    let n = derivatives.len();
    let dim = derivatives.first().map(|d| d.len()).unwrap_or(0);
    let row = |mu: usize| -> Vec<f64> {
        (mu..n)
            .map(|nu| 2.0 * (dot(&derivatives[mu], &derivatives[nu]) + overlaps[mu] * overlaps[nu]).re)
            .collect()
    };
    let rows: Vec<Vec<f64>> = if n * n * dim / 2 >= PARALLEL_MIN_WORK {
        (0..n).into_par_iter().map(row).collect()
    } else {
        (0..n).map(row).collect()
    };
    let mut m = DMatrix::zeros(n, n);
    for (mu, r) in rows.into_iter().enumerate() {
        for (k, val) in r.into_iter().enumerate() {
            m[(mu, mu + k)] = val;
            m[(mu + k, mu)] = val;
        }
    }
    m
}

/// `M` for an ansatz.
pub fn build_m(ansatz: &Ansatz) -> DMatrix<f64> {
    let (state, ders) = ansatz.state_and_derivatives();
    let overlaps: Vec<Complex64> = ders.iter().map(|d| dot(d, state.amplitudes())).collect();
    gram(&ders, &overlaps)
}

/// `V` for an ansatz and Hamiltonian.
pub fn build_v(ansatz: &Ansatz, h: &PauliSum) -> Result<DVector<f64>> {
    Ok(McLachlanSystem::build(ansatz, h, DEFAULT_XI)?.v)
}

/// `(M + ξI) θ̇ = V` by Cholesky factorization.
pub fn solve_theta_dot(m: &DMatrix<f64>, v: &DVector<f64>, xi: f64) -> Result<DVector<f64>> {
    if !(xi > 0.0) {
        return Err(Error::arg(format!("regularization must be positive, got {xi}")));
    }
    if m.nrows() != m.ncols() || m.nrows() != v.len() {
        return Err(Error::arg("metric and vector sizes differ"));
    }
    if m.iter().chain(v.iter()).any(|x| !x.is_finite()) {
        return Err(Error::numeric("non-finite entries in the equation of motion"));
    }
    if v.is_empty() {
        return Ok(DVector::zeros(0));
    }
    let mut a = m.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += xi;
    }
    let chol = Cholesky::new(a).ok_or_else(|| Error::numeric("regularized metric is not positive definite"))?;
    Ok(chol.solve(v))
}

/// `L² = var2 − Vᵀ(M + ξI)⁻¹V` as reported by the system.
pub fn mclachlan_distance(sys: &McLachlanSystem) -> f64 {
    sys.l2
}

/// Bordered row, `V` entry, and distance for appending `g` to `ansatz`.
pub fn candidate_row(
    ansatz: &Ansatz,
    g: &PauliString,
    h: &PauliSum,
    base: &McLachlanSystem,
) -> Result<(DVector<f64>, f64, f64)> {
    if base.n_params() != ansatz.len() || h.n_qubits() != ansatz.n_qubits() {
        return Err(Error::arg("base system does not belong to this ansatz"));
    }
    let c = base.candidate(g)?;
    Ok((c.row, c.v_entry, c.l2))
}

/// Upper bounds on distinct measurement circuits for one time step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct MeasurementCounts {
    pub direct: u64,
    pub hadamard: u64,
    /// Extra Hadamard-test circuits for the adaptive step with a Hamiltonian pool.
    pub adaptive_extra: u64,
}

pub fn estimate_measurement_resources(n_h: i64, n_theta: i64) -> Result<MeasurementCounts> {
    if n_h < 1 || n_theta < 1 {
        return Err(Error::arg(format!(
            "need N_H ≥ 1 and N_θ ≥ 1, got {n_h} and {n_theta}"
        )));
    }
    let (nh, nt) = (n_h as u64, n_theta as u64);
    Ok(MeasurementCounts {
        direct: (nh + 2) * nt + nh + nh * nh,
        hadamard: nh * (nt - 1) + nt * (nt - 1) / 2,
        adaptive_extra: nh * (nt - 1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::parse_pauli;
    use crate::state::product_state;
    use crate::testing::{random_state, random_string, rng};
    use rand::Rng;

    fn p(s: &str, n: usize) -> PauliString {
        parse_pauli(s, n).unwrap()
    }

    fn x_on_zero(theta: f64) -> Ansatz {
        Ansatz::with_operators(product_state(&[0]).unwrap(), vec![p("X0", 1)], vec![theta]).unwrap()
    }

    fn h1(s: &str) -> PauliSum {
        PauliSum::parse(1, &[(1.0, s)]).unwrap()
    }

    #[test]
    fn m_examples() {
        for theta in [0.0, 0.4, 2.3] {
            let m = build_m(&x_on_zero(theta));
            assert!((m[(0, 0)] - 2.0).abs() < 1e-14);
        }
        assert_eq!(build_m(&Ansatz::new(product_state(&[0]).unwrap())).nrows(), 0);
    }

    #[test]
    fn v_examples() {
        let sys = McLachlanSystem::build(&x_on_zero(0.0), &h1("X0"), DEFAULT_XI).unwrap();
        assert!((sys.v[0] - 2.0).abs() < 1e-14);
        assert!((sys.theta_dot[0] - 2.0 / (2.0 + DEFAULT_XI)).abs() < 1e-14);
        let sys = McLachlanSystem::build(&x_on_zero(0.0), &h1("Z0"), DEFAULT_XI).unwrap();
        assert!(sys.v[0].abs() < 1e-14);
        let empty = Ansatz::new(product_state(&[0]).unwrap());
        assert_eq!(build_v(&empty, &h1("Z0")).unwrap().len(), 0);
    }

    #[test]
    fn distance_examples() {
        let empty = Ansatz::new(product_state(&[0]).unwrap());
        let sys = McLachlanSystem::build(&empty, &h1("Z0"), DEFAULT_XI).unwrap();
        assert!(mclachlan_distance(&sys).abs() < 1e-15);
        let sys = McLachlanSystem::build(&empty, &h1("X0"), DEFAULT_XI).unwrap();
        assert!((mclachlan_distance(&sys) - 2.0).abs() < 1e-14);
        // 2·1 − 2²/(2 + ξ)
        let sys = McLachlanSystem::build(&x_on_zero(0.0), &h1("X0"), DEFAULT_XI).unwrap();
        let expected = 2.0 - 4.0 / (2.0 + DEFAULT_XI);
        assert!((sys.l2 - expected).abs() < 1e-14);
        assert!(sys.l2.abs() < 1e-6);
    }

    #[test]
    fn solve_examples() {
        let td = solve_theta_dot(&DMatrix::from_element(1, 1, 2.0), &DVector::from_element(1, 2.0), 1e-6)
            .unwrap();
        assert!((td[0] - 0.9999995).abs() < 1e-12);

        let zero = solve_theta_dot(&DMatrix::identity(3, 3), &DVector::zeros(3), 1e-6).unwrap();
        assert_eq!(zero, DVector::zeros(3));

        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let v = DVector::from_row_slice(&[1.0, 1.0]);
        let td = solve_theta_dot(&m, &v, 1e-6).unwrap();
        // regularized least squares: minimum-norm split of the unit sum
        assert!((td[0] - 1.0 / (2.0 + 1e-6)).abs() < 1e-9);
        let mut a = m.clone();
        a[(0, 0)] += 1e-6;
        a[(1, 1)] += 1e-6;
        assert!((a * &td - &v).norm() < 1e-10);

        let bad = DMatrix::from_element(1, 1, f64::NAN);
        assert!(matches!(
            solve_theta_dot(&bad, &DVector::from_element(1, 1.0), 1e-6),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn candidate_examples() {
        let empty = Ansatz::new(product_state(&[0]).unwrap());
        let h = h1("X0");
        let base = McLachlanSystem::build(&empty, &h, DEFAULT_XI).unwrap();
        let (row, v, l2) = candidate_row(&empty, &p("X0", 1), &h, &base).unwrap();
        assert_eq!(row.len(), 0);
        assert!((v - 2.0).abs() < 1e-14);
        assert!(l2.abs() < 1e-6);
    }

    #[test]
    fn redundant_candidate_leaves_distance_unchanged() {
        // The regularized split of one direction over two copies lowers L² by about
        // ξ θ̇²/2, so use a small ξ to make the redundancy visible at 1e-12.
        let xi = 1e-12;
        let n = 3;
        let h = PauliSum::parse(n, &[(0.7, "X0 X1"), (-0.4, "Z1"), (0.3, "Y1 Y2"), (0.5, "Z0")]).unwrap();
        let a = Ansatz::with_operators(
            random_state(n, 8),
            vec![p("X0 X1", n), p("Z1", n), p("Y1 Y2", n)],
            vec![0.3, -0.2, 0.0],
        )
        .unwrap();
        let base = McLachlanSystem::build(&a, &h, xi).unwrap();
        assert!(base.theta_dot[2].abs() < 1.0);
        let c = base.candidate(&p("Y1 Y2", n)).unwrap();
        assert!((c.l2 - base.l2).abs() < 1e-12, "{} vs {}", c.l2, base.l2);
    }

    #[test]
    fn bordered_candidate_equals_full_rebuild() {
        let mut r = rng(5);
        for trial in 0..20 {
            let n = r.gen_range(2..=3);
            let k = r.gen_range(0..=4);
            let gens: Vec<PauliString> = (0..k).map(|_| random_string(n, &mut r)).collect();
            let thetas: Vec<f64> = (0..k).map(|_| r.gen_range(-2.0..2.0)).collect();
            let a = Ansatz::with_operators(random_state(n, trial + 100), gens, thetas).unwrap();
            let h = PauliSum::from_terms(
                n,
                (0..4).map(|_| (r.gen_range(-1.0..1.0), random_string(n, &mut r))),
            )
            .unwrap();
            let base = McLachlanSystem::build(&a, &h, DEFAULT_XI).unwrap();
            for _ in 0..5 {
                let g = random_string(n, &mut r);
                let cand = base.candidate(&g).unwrap();
                let full = McLachlanSystem::build(&a.appended(g).unwrap(), &h, DEFAULT_XI).unwrap();
                assert!((cand.l2 - full.l2).abs() < 1e-10, "{} vs {}", cand.l2, full.l2);
                assert!(cand.l2 <= base.l2 + 1e-12);
                let mut ext = base.clone();
                ext.extend(cand).unwrap();
                assert!((ext.m.clone() - &full.m).norm() < 1e-12);
                assert!((ext.v.clone() - &full.v).norm() < 1e-12);
                assert!((ext.theta_dot.clone() - &full.theta_dot).norm() < 1e-6 * (1.0 + full.theta_dot.norm()));
                assert!((ext.l2 - full.l2).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn system_invariants_on_random_ansatze() {
        let mut r = rng(44);
        for trial in 0..20 {
            let n = r.gen_range(1..=3);
            let k = r.gen_range(1..=5);
            let gens: Vec<PauliString> = (0..k).map(|_| random_string(n, &mut r)).collect();
            let thetas: Vec<f64> = (0..k).map(|_| r.gen_range(-2.0..2.0)).collect();
            let a = Ansatz::with_operators(random_state(n, trial), gens, thetas).unwrap();
            let h = PauliSum::from_terms(
                n,
                (0..3).map(|_| (r.gen_range(-1.0..1.0), random_string(n, &mut r))),
            )
            .unwrap();
            let sys = McLachlanSystem::build(&a, &h, DEFAULT_XI).unwrap();
            assert!((sys.m.clone() - sys.m.transpose()).norm() < 1e-12);
            let eig = sys.m.clone().symmetric_eigen();
            assert!(eig.eigenvalues.iter().all(|&e| e > -1e-10));
            assert!(sys.m.iter().all(|x| x.abs() <= 2.0 + 1e-12));
            assert!(sys.l2 >= -1e-10);
            assert!(sys.var2 >= -1e-10);
            let var = h.variance(&a.evaluate()).unwrap();
            assert!((sys.variance() - var).abs() < 1e-12);
            let mut reg = sys.m.clone();
            for i in 0..k {
                reg[(i, i)] += DEFAULT_XI;
            }
            assert!((reg * &sys.theta_dot - &sys.v).norm() < 1e-10 * sys.v.norm().max(1.0));
        }
    }

    #[test]
    fn exact_flow_is_reproduced_by_euler_steps() {
        let h = h1("X0");
        let mut a = x_on_zero(0.0);
        let dt = 1e-4;
        for _ in 0..10_000 {
            let sys = McLachlanSystem::build(&a, &h, DEFAULT_XI).unwrap();
            let step = sys.theta_dot[0] * dt;
            a.shift_thetas(&[step]).unwrap();
        }
        assert!((a.thetas()[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn measurement_counts() {
        let c = estimate_measurement_resources(3, 2).unwrap();
        assert_eq!((c.direct, c.hadamard, c.adaptive_extra), (22, 4, 3));
        let c = estimate_measurement_resources(22, 1).unwrap();
        assert_eq!((c.hadamard, c.adaptive_extra), (0, 0));
        assert_eq!(c.direct, 24 + 22 + 484);
        let c = estimate_measurement_resources(22, 103).unwrap();
        assert_eq!(c.direct, 24 * 103 + 22 + 484);
        assert_eq!(c.hadamard, 22 * 102 + 103 * 51);
        assert_eq!(c.adaptive_extra, 22 * 102);
        assert!(estimate_measurement_resources(0, 2).is_err());
        assert!(estimate_measurement_resources(3, -1).is_err());
    }
}
