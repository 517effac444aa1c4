//! Pseudo-Trotter ansatz `|Ψ[θ]⟩ = e^{−iθ_{N−1}A_{N−1}} ⋯ e^{−iθ_0 A_0} |Ψ₀⟩`.
//!
//! Generator 0 acts first on the reference state; an appended generator acts
//! last and enters with angle zero, so appending never changes the state.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{format_pauli, parse_pauli, PauliString};
use crate::state::{rotate_amplitudes, StateVector};

/// Below this dimension the derivative sweep stays on one thread.
const PARALLEL_MIN_WORK: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq)]
pub struct Ansatz {
    reference: StateVector,
    generators: Vec<PauliString>,
    thetas: Vec<f64>,
}

impl Ansatz {
    /// Empty ansatz over a reference state.
    pub fn new(reference: StateVector) -> Self {
        Ansatz {
            reference,
            generators: Vec::new(),
            thetas: Vec::new(),
        }
    }

    pub fn with_operators(
        reference: StateVector,
        generators: Vec<PauliString>,
        thetas: Vec<f64>,
    ) -> Result<Self> {
        if generators.len() != thetas.len() {
            return Err(Error::arg(format!(
                "{} generators but {} angles",
                generators.len(),
                thetas.len()
            )));
        }
        let mut a = Ansatz::new(reference);
        for (g, t) in generators.into_iter().zip(thetas) {
            a.append(g)?;
            *a.thetas.last_mut().unwrap() = t;
        }
        Ok(a)
    }

    pub fn reference(&self) -> &StateVector {
        &self.reference
    }

    pub fn generators(&self) -> &[PauliString] {
        &self.generators
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn n_qubits(&self) -> usize {
        self.reference.n_qubits()
    }

    /// Number of variational parameters.
    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn set_thetas(&mut self, thetas: &[f64]) -> Result<()> {
        if thetas.len() != self.thetas.len() {
            return Err(Error::arg(format!(
                "expected {} angles, got {}",
                self.thetas.len(),
                thetas.len()
            )));
        }
        self.thetas.copy_from_slice(thetas);
        Ok(())
    }

    /// `θ ← θ + δθ`.
    pub fn shift_thetas(&mut self, delta: &[f64]) -> Result<()> {
        if delta.len() != self.thetas.len() {
            return Err(Error::arg("parameter update has the wrong length"));
        }
        self.thetas.iter_mut().zip(delta).for_each(|(t, d)| *t += d);
        Ok(())
    }

    /// Appends `g` at the end of the circuit with `θ = 0`.
    pub fn append(&mut self, g: PauliString) -> Result<()> {
        if !g.is_phase_free() {
            return Err(Error::arg(format!("generator {g} must carry phase +1")));
        }
        if g.n_qubits() != self.n_qubits() {
            return Err(Error::arg(format!(
                "{}-qubit generator for a {}-qubit ansatz",
                g.n_qubits(),
                self.n_qubits()
            )));
        }
        self.generators.push(g);
        self.thetas.push(0.0);
        Ok(())
    }

    pub fn appended(&self, g: PauliString) -> Result<Ansatz> {
        let mut a = self.clone();
        a.append(g)?;
        Ok(a)
    }

    /// `|Ψ[θ]⟩`.
    pub fn evaluate(&self) -> StateVector {
        let mut amps = self.reference.amplitudes().to_vec();
        for (g, &t) in self.generators.iter().zip(&self.thetas) {
            rotate_amplitudes(&mut amps, g, t);
        }
        StateVector::from_raw(self.n_qubits(), amps)
    }

    /// `∂|Ψ[θ]⟩/∂θ_μ`.
    pub fn derivative(&self, mu: usize) -> Result<StateVector> {
        if mu >= self.len() {
            return Err(Error::arg(format!(
                "parameter index {mu} out of range for {} parameters",
                self.len()
            )));
        }
        let mut amps = self.reference.amplitudes().to_vec();
        for (g, &t) in self.generators[..=mu].iter().zip(&self.thetas) {
            rotate_amplitudes(&mut amps, g, t);
        }
        let mut d = minus_i_apply(&self.generators[mu], &amps);
        for (g, &t) in self.generators[mu + 1..].iter().zip(&self.thetas[mu + 1..]) {
            rotate_amplitudes(&mut d, g, t);
        }
        Ok(StateVector::from_raw(self.n_qubits(), d))
    }

    /// The state and all parameter derivatives.
    ///
    /// One forward sweep caches the partial products `U_{≤μ}|Ψ₀⟩`; each is then
    /// hit with `−iA_μ` and carried through the remaining rotations.
    pub fn state_and_derivatives(&self) -> (StateVector, Vec<Vec<Complex64>>) {
        let n = self.len();
        let mut prefixes = Vec::with_capacity(n);
        let mut amps = self.reference.amplitudes().to_vec();
        for (g, &t) in self.generators.iter().zip(&self.thetas) {
            rotate_amplitudes(&mut amps, g, t);
            prefixes.push(amps.clone());
        }
        let finish = |mu: usize, prefix: &mut Vec<Complex64>| {
            let mut d = minus_i_apply(&self.generators[mu], prefix);
            for (g, &t) in self.generators[mu + 1..].iter().zip(&self.thetas[mu + 1..]) {
                rotate_amplitudes(&mut d, g, t);
            }
            *prefix = d;
        };
        let work = n * n * amps.len() / 2;
        if work >= PARALLEL_MIN_WORK {
            prefixes
                .par_iter_mut()
                .enumerate()
                .for_each(|(mu, p)| finish(mu, p));
        } else {
            prefixes
                .iter_mut()
                .enumerate()
                .for_each(|(mu, p)| finish(mu, p));
        }
        (StateVector::from_raw(self.n_qubits(), amps), prefixes)
    }

    /// CNOTs for the compiled circuit, `Σ_μ 2(weight(A_μ) − 1)`, all-to-all connectivity.
    pub fn cnot_count(&self) -> usize {
        self.generators.iter().map(cnots_for_rotation).sum()
    }

    /// Number of generators acting on two or more qubits.
    pub fn multi_qubit_count(&self) -> usize {
        self.generators.iter().filter(|g| g.weight() >= 2).count()
    }

    pub fn to_file(&self) -> AnsatzFile {
        let amps = self.reference.amplitudes();
        let basis = amps
            .iter()
            .position(|a| (a.re - 1.0).abs() == 0.0 && a.im == 0.0)
            .filter(|&k| amps.iter().enumerate().all(|(j, a)| j == k || a.norm() == 0.0));
        let reference = match basis {
            Some(k) => ReferenceFile::Product(
                (0..self.n_qubits()).map(|i| ((k >> i) & 1) as u8).collect(),
            ),
            None => ReferenceFile::Amplitudes(amps.iter().map(|a| [a.re, a.im]).collect()),
        };
        AnsatzFile {
            n_qubits: self.n_qubits(),
            reference,
            operators: self
                .generators
                .iter()
                .zip(&self.thetas)
                .map(|(g, &theta)| OperatorEntry {
                    pauli: format_pauli(g),
                    theta,
                })
                .collect(),
        }
    }

    pub fn from_file(file: &AnsatzFile) -> Result<Self> {
        let n = file.n_qubits;
        let reference = match &file.reference {
            ReferenceFile::Product(labels) => {
                if labels.len() != n {
                    return Err(Error::arg("product reference has the wrong length"));
                }
                crate::state::product_state(labels)?
            }
            ReferenceFile::Amplitudes(amps) => StateVector::new(
                n,
                amps.iter().map(|[re, im]| Complex64::new(*re, *im)).collect(),
            )?,
        };
        let mut a = Ansatz::new(reference);
        for op in &file.operators {
            a.append(parse_pauli(&op.pauli, n)?)?;
            *a.thetas.last_mut().unwrap() = op.theta;
        }
        Ok(a)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(text)?)
    }
}

/// `2(p − 1)` CNOTs for a weight-`p` rotation, zero for `p ≤ 1`.
pub fn cnots_for_rotation(g: &PauliString) -> usize {
    2 * g.weight().saturating_sub(1)
}

/// `−i·P·v` for a phase-free `P`.
pub(crate) fn minus_i_apply(p: &PauliString, v: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
    p.apply_add(v, Complex64::new(0.0, -1.0), &mut out);
    out
}

/// On-disk ansatz: reference plus the ordered `{pauli, theta}` list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzFile {
    pub n_qubits: usize,
    pub reference: ReferenceFile,
    pub operators: Vec<OperatorEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceFile {
    /// Bit of each qubit, qubit 0 first.
    Product(Vec<u8>),
    /// `[re, im]` pairs in basis order.
    Amplitudes(Vec<[f64; 2]>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorEntry {
    pub pauli: String,
    pub theta: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{inner, product_state};
    use crate::testing::{random_state, random_string, rng};
    use rand::Rng;

    fn p(s: &str, n: usize) -> PauliString {
        parse_pauli(s, n).unwrap()
    }

    fn fd_derivative(a: &Ansatz, mu: usize, h: f64) -> Vec<Complex64> {
        let mut plus = a.clone();
        let mut minus = a.clone();
        plus.thetas[mu] += h;
        minus.thetas[mu] -= h;
        let (sp, sm) = (plus.evaluate(), minus.evaluate());
        sp.amplitudes()
            .iter()
            .zip(sm.amplitudes())
            .map(|(x, y)| (x - y) / (2.0 * h))
            .collect()
    }

    #[test]
    fn evaluate_examples() {
        let r = random_state(2, 4);
        assert_eq!(Ansatz::new(r.clone()).evaluate(), r);

        let zeros = Ansatz::with_operators(r.clone(), vec![p("X0", 2), p("Y1 Z0", 2)], vec![0.0, 0.0])
            .unwrap();
        assert_eq!(zeros.evaluate(), r);

        let t = 0.83;
        let a = Ansatz::with_operators(product_state(&[0]).unwrap(), vec![p("X0", 1)], vec![t]).unwrap();
        let s = a.evaluate();
        assert!((s.amplitudes()[0] - Complex64::new(t.cos(), 0.0)).norm() < 1e-15);
        assert!((s.amplitudes()[1] - Complex64::new(0.0, -t.sin())).norm() < 1e-15);
    }

    #[test]
    fn application_order_is_first_generator_first() {
        // e^{-iπ/4 Y} then e^{-iπ/2 X}: different from the reverse order.
        let zero = product_state(&[0]).unwrap();
        let a = Ansatz::with_operators(zero.clone(), vec![p("Y0", 1), p("X0", 1)], vec![0.4, 1.1])
            .unwrap();
        let manual = zero.rotated(&p("Y0", 1), 0.4).unwrap().rotated(&p("X0", 1), 1.1).unwrap();
        assert_eq!(a.evaluate(), manual);
    }

    #[test]
    fn derivative_examples() {
        let a = Ansatz::with_operators(product_state(&[0]).unwrap(), vec![p("X0", 1)], vec![0.0]).unwrap();
        let d = a.derivative(0).unwrap();
        assert!((d.amplitudes()[1] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        let fd = fd_derivative(&a, 0, 1e-5);
        assert!((fd[1] - d.amplitudes()[1]).norm() < 1e-9);
        assert!(a.derivative(1).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut r = rng(17);
        for trial in 0..20 {
            let n = r.gen_range(1..=4);
            let n_params = r.gen_range(1..=5);
            let gens: Vec<PauliString> = (0..n_params).map(|_| random_string(n, &mut r)).collect();
            let thetas: Vec<f64> = (0..n_params).map(|_| r.gen_range(-3.0..3.0)).collect();
            let a = Ansatz::with_operators(random_state(n, trial), gens, thetas).unwrap();
            let (state, ders) = a.state_and_derivatives();
            assert_eq!(state, a.evaluate());
            for mu in 0..n_params {
                let d = a.derivative(mu).unwrap();
                let norm = d.norm();
                assert!((norm - 1.0).abs() < 1e-12);
                let fd = fd_derivative(&a, mu, 1e-5);
                let err: f64 = fd
                    .iter()
                    .zip(d.amplitudes())
                    .map(|(x, y)| (x - y).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                assert!(err / norm < 1e-6, "trial {trial} mu {mu}: {err}");
                for (x, y) in ders[mu].iter().zip(d.amplitudes()) {
                    assert!((x - y).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn append_keeps_state_and_grows_cnots() {
        let mut r = rng(3);
        let mut a = Ansatz::new(random_state(3, 9));
        let mut last_cnots = 0;
        for _ in 0..12 {
            let before = a.evaluate();
            let g = random_string(3, &mut r);
            let added = cnots_for_rotation(&g);
            a.append(g).unwrap();
            let n = a.len();
            a.thetas[n - 1] = 0.0;
            let after = a.evaluate();
            let f = inner(&before, &after).unwrap().norm_sqr();
            assert!((f - 1.0).abs() < 1e-12);
            assert_eq!(a.cnot_count(), last_cnots + added);
            last_cnots = a.cnot_count();
            // give it a nonzero angle so later appends act on a nontrivial state
            a.thetas[n - 1] = 0.3;
        }
        assert!(a.append(p("X0", 2)).is_err());
        assert!(a.append(p("X0", 3).with_phase(crate::pauli::Phase::MINUS_ONE)).is_err());
    }

    #[test]
    fn cnot_examples() {
        let r = product_state(&[0; 8]).unwrap();
        let mut a = Ansatz::new(r.clone());
        a.append(p("Z3", 8)).unwrap();
        assert_eq!(a.cnot_count(), 0);
        let before = a.cnot_count();
        a.append(p("X0 X1", 8)).unwrap();
        assert_eq!(a.cnot_count(), before + 2);

        let mut fifty = Ansatz::new(r.clone());
        for k in 0..50 {
            let i = k % 7;
            fifty.append(p(&format!("Y{} Y{}", i, i + 1), 8)).unwrap();
        }
        assert_eq!(fifty.cnot_count(), 100);

        let mut three = Ansatz::new(r);
        three.append(p("X0 Y2 Z5", 8)).unwrap();
        assert_eq!(three.cnot_count(), 4);
    }

    #[test]
    fn json_round_trip() {
        let a = Ansatz::with_operators(
            product_state(&[0, 1, 0]).unwrap(),
            vec![p("X0 X1", 3), p("Z2", 3), p("Y0 Z1 X2", 3)],
            vec![0.1, -2.0 / 3.0, std::f64::consts::PI * 1e-7],
        )
        .unwrap();
        let text = a.to_json().unwrap();
        assert!(text.contains("\"pauli\": \"X0 X1\""));
        assert_eq!(Ansatz::from_json(&text).unwrap(), a);

        let b = Ansatz::with_operators(random_state(2, 5), vec![p("Y1", 2)], vec![0.25]).unwrap();
        assert_eq!(Ansatz::from_json(&b.to_json().unwrap()).unwrap(), b);
    }
}
