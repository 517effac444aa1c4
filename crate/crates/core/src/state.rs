//! Dense statevectors.
//!
//! Basis convention: qubit 0 is the least-significant bit of the basis index,
//! so `|q_{n-1} … q_1 q_0⟩` sits at index `Σ q_i 2^i`.

use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::{PauliString, PauliSum};

/// Largest register for which dense matrices are built.
pub const MAX_DENSE_QUBITS: usize = 14;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Wraps amplitudes; the length must be `2^n_qubits`. No normalization is imposed.
    pub fn new(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        if n_qubits == 0 || n_qubits > 30 {
            return Err(Error::arg(format!("unsupported register size {n_qubits}")));
        }
        if amps.len() != 1usize << n_qubits {
            return Err(Error::arg(format!(
                "{} amplitudes for {n_qubits} qubits",
                amps.len()
            )));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::numeric("non-finite amplitude"));
        }
        Ok(StateVector { n_qubits, amps })
    }

    pub(crate) fn from_raw(n_qubits: usize, amps: Vec<Complex64>) -> Self {
        debug_assert_eq!(amps.len(), 1usize << n_qubits);
        StateVector { n_qubits, amps }
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > 30 {
            return Err(Error::arg(format!("unsupported register size {n_qubits}")));
        }
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::arg(format!("basis index {index} out of range")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::State("cannot normalize a zero or non-finite state".into()));
        }
        self.amps.iter_mut().for_each(|a| *a /= n);
        Ok(self)
    }

    pub fn is_finite(&self) -> bool {
        self.amps.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::arg(format!(
                "inner product of {}-qubit and {}-qubit states",
                self.n_qubits, other.n_qubits
            )));
        }
        Ok(dot(&self.amps, &other.amps))
    }

    /// `e^{−iθP}|ψ⟩ = cos θ |ψ⟩ − i sin θ P|ψ⟩` for a phase-free `P`.
    pub fn rotated(&self, p: &PauliString, theta: f64) -> Result<StateVector> {
        let mut out = self.clone();
        out.rotate(p, theta)?;
        Ok(out)
    }

    /// In-place Pauli rotation.
    pub fn rotate(&mut self, p: &PauliString, theta: f64) -> Result<()> {
        if !p.is_phase_free() {
            return Err(Error::arg(format!(
                "rotation generator {p} must carry phase +1"
            )));
        }
        if p.n_qubits() != self.n_qubits {
            return Err(Error::arg(format!(
                "{}-qubit generator on {}-qubit state",
                p.n_qubits(),
                self.n_qubits
            )));
        }
        rotate_amplitudes(&mut self.amps, p, theta);
        Ok(())
    }
}

/// `Σ conj(a_i) b_i`.
#[inline]
pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    Complex64::new(re, im)
}

/// Applies `e^{−iθP}` in place; `P` must be phase-free and match the register.
pub(crate) fn rotate_amplitudes(amps: &mut [Complex64], p: &PauliString, theta: f64) {
    if theta == 0.0 {
        return;
    }
    let (s, c) = theta.sin_cos();
    // −i sin θ · (base phase of P)
    let f = Complex64::new(0.0, -s) * p.base_factor();
    let x = p.x_mask() as usize;
    if x == 0 {
        let plus = Complex64::new(c, 0.0) + f;
        let minus = Complex64::new(c, 0.0) - f;
        for (b, a) in amps.iter_mut().enumerate() {
            *a *= if p.sign(b) > 0.0 { plus } else { minus };
        }
        return;
    }
    let top = 63 - (x as u64).leading_zeros() as usize;
    let top_bit = 1usize << top;
    for b in 0..amps.len() {
        if b & top_bit != 0 {
            continue;
        }
        let bx = b ^ x;
        let ab = amps[b];
        let abx = amps[bx];
        // (Pψ)[b] = f(bx) ψ[bx], (Pψ)[bx] = f(b) ψ[b]
        amps[b] = ab * c + f * p.sign(bx) * abx;
        amps[bx] = abx * c + f * p.sign(b) * ab;
    }
}

/// `⟨a|b⟩`.
pub fn inner(a: &StateVector, b: &StateVector) -> Result<Complex64> {
    a.inner(b)
}

/// `e^{−iθP}|ψ⟩`.
pub fn apply_pauli_rotation(p: &PauliString, theta: f64, psi: &StateVector) -> Result<StateVector> {
    psi.rotated(p, theta)
}

/// Computational basis product state; `labels[i]` is the bit of qubit `i`.
pub fn product_state(labels: &[u8]) -> Result<StateVector> {
    if labels.is_empty() {
        return Err(Error::arg("product state needs at least one qubit"));
    }
    let mut index = 0usize;
    for (i, &l) in labels.iter().enumerate() {
        match l {
            0 => {}
            1 => index |= 1 << i,
            other => {
                return Err(Error::arg(format!(
                    "qubit {i} label {other} is not 0 or 1"
                )))
            }
        }
    }
    StateVector::basis(labels.len(), index)
}

/// Full eigendecomposition of a Hermitian Pauli sum.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub n_qubits: usize,
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Eigenvectors as columns, ordered like `values`.
    pub vectors: DMatrix<Complex64>,
}

impl Spectrum {
    pub fn of(h: &PauliSum) -> Result<Self> {
        let n = h.n_qubits();
        if n > MAX_DENSE_QUBITS {
            return Err(Error::arg(format!(
                "dense eigensolve limited to {MAX_DENSE_QUBITS} qubits, got {n}"
            )));
        }
        let dense = h.to_dense();
        let (values, vectors) = if h.is_real() {
            let real = dense.map(|c| c.re);
            let eig = real.symmetric_eigen();
            (
                eig.eigenvalues.iter().copied().collect::<Vec<f64>>(),
                eig.eigenvectors.map(|r| Complex64::new(r, 0.0)),
            )
        } else {
            let eig = dense.symmetric_eigen();
            (
                eig.eigenvalues.iter().copied().collect::<Vec<f64>>(),
                eig.eigenvectors,
            )
        };
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let sorted_values = order.iter().map(|&k| values[k]).collect();
        let sorted_vectors = DMatrix::from_fn(vectors.nrows(), vectors.ncols(), |r, c| {
            vectors[(r, order[c])]
        });
        Ok(Spectrum {
            n_qubits: n,
            values: sorted_values,
            vectors: sorted_vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `e^{−iHt}|ψ⟩`.
    pub fn evolve(&self, psi: &StateVector, t: f64) -> Result<StateVector> {
        if psi.n_qubits() != self.n_qubits {
            return Err(Error::arg("state and Hamiltonian registers differ"));
        }
        let dim = self.dim();
        let amps = psi.amplitudes();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); dim];
        for (k, ck) in coeffs.iter_mut().enumerate() {
            let col = self.vectors.column(k);
            let overlap = dot(col.as_slice(), amps);
            let (s, c) = (-self.values[k] * t).sin_cos();
            *ck = overlap * Complex64::new(c, s);
        }
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for (k, ck) in coeffs.iter().enumerate() {
            let col = self.vectors.column(k);
            for (o, v) in out.iter_mut().zip(col.iter()) {
                *o += v * ck;
            }
        }
        Ok(StateVector::from_raw(self.n_qubits, out))
    }
}

/// Lowest eigenpair of a Hamiltonian.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub energy: f64,
    pub state: StateVector,
    /// Distance to the next eigenvalue.
    pub gap: f64,
}

impl GroundState {
    /// True when the ground space is (numerically) degenerate.
    pub fn is_degenerate(&self) -> bool {
        self.gap < 1e-10
    }
}

/// Ground state by dense diagonalization. A degenerate ground space is
/// logged and an arbitrary member is returned.
pub fn ground_state(h: &PauliSum) -> Result<GroundState> {
    let spectrum = Spectrum::of(h)?;
    let energy = spectrum.values[0];
    let gap = spectrum.values.get(1).map(|e| e - energy).unwrap_or(f64::INFINITY);
    let amps: Vec<Complex64> = spectrum.vectors.column(0).iter().copied().collect();
    let state = StateVector::from_raw(h.n_qubits(), amps).normalized()?;
    let gs = GroundState { energy, state, gap };
    if gs.is_degenerate() {
        warn!("degenerate ground space (gap {gap:e}); returning an arbitrary member");
    }
    Ok(gs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::parse_pauli;
    use crate::testing::{dense_expm, random_state};
    use nalgebra::DVector;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn inner_examples() {
        let zero = StateVector::basis(1, 0).unwrap();
        let one = StateVector::basis(1, 1).unwrap();
        assert_eq!(inner(&zero, &zero).unwrap(), c(1.0, 0.0));
        assert_eq!(inner(&zero, &one).unwrap(), c(0.0, 0.0));
        let plus_i = StateVector::new(1, vec![c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)]).unwrap();
        assert!((inner(&zero, &plus_i).unwrap() - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!(inner(&zero, &StateVector::basis(2, 0).unwrap()).is_err());
    }

    #[test]
    fn inner_is_conjugate_linear_in_first_argument() {
        let a = random_state(2, 1);
        let b = random_state(2, 2);
        let scaled = StateVector::from_raw(2, a.amplitudes().iter().map(|x| x * c(0.0, 2.0)).collect());
        let lhs = inner(&scaled, &b).unwrap();
        let rhs = inner(&a, &b).unwrap() * c(0.0, -2.0);
        assert!((lhs - rhs).norm() < 1e-14);
        assert!((inner(&a, &a).unwrap() - 1.0).norm() < 1e-10);
    }

    #[test]
    fn rotation_examples() {
        let zero = StateVector::basis(1, 0).unwrap();
        let x = parse_pauli("X0", 1).unwrap();
        assert_eq!(apply_pauli_rotation(&x, 0.0, &zero).unwrap(), zero);

        let r = apply_pauli_rotation(&x, FRAC_PI_2, &zero).unwrap();
        let oracle = dense_expm(&x, FRAC_PI_2) * DVector::from_column_slice(zero.amplitudes());
        for (g, w) in r.amplitudes().iter().zip(oracle.iter()) {
            assert!((g - w).norm() < 1e-14);
        }
        assert!((r.amplitudes()[1] - c(0.0, -1.0)).norm() < 1e-15);

        let zz = parse_pauli("Z0 Z1", 2).unwrap();
        let s = StateVector::basis(2, 0).unwrap();
        let r = apply_pauli_rotation(&zz, FRAC_PI_4, &s).unwrap();
        let want = Complex64::from_polar(1.0, -FRAC_PI_4);
        assert!((r.amplitudes()[0] - want).norm() < 1e-15);
    }

    #[test]
    fn rotation_matches_dense_exponential() {
        for (k, text) in ["X0 Y1", "Y0 Z2", "Z1", "X0 X1 X2", "Y2"].iter().enumerate() {
            let p = parse_pauli(text, 3).unwrap();
            let psi = random_state(3, k as u64);
            let theta = 0.37 * (k as f64 + 1.0);
            let want = dense_expm(&p, theta) * DVector::from_column_slice(psi.amplitudes());
            let got = psi.rotated(&p, theta).unwrap();
            for (g, w) in got.amplitudes().iter().zip(want.iter()) {
                assert!((g - w).norm() < 1e-13, "{text}");
            }
        }
    }

    #[test]
    fn rotation_rejects_phased_generator() {
        let zero = StateVector::basis(1, 0).unwrap();
        let p = parse_pauli("X0", 1).unwrap().with_phase(crate::pauli::Phase::I);
        assert!(zero.rotated(&p, 0.1).is_err());
    }

    #[test]
    fn rotations_compose_additively() {
        let p = parse_pauli("X0 Y2", 3).unwrap();
        let psi = random_state(3, 11);
        let two = psi.rotated(&p, 0.2).unwrap().rotated(&p, 0.5).unwrap();
        let one = psi.rotated(&p, 0.7).unwrap();
        for (a, b) in two.amplitudes().iter().zip(one.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn product_state_examples() {
        assert_eq!(product_state(&[0, 0]).unwrap().amplitudes()[0], c(1.0, 0.0));
        assert_eq!(product_state(&[1, 0]).unwrap().amplitudes()[1], c(1.0, 0.0));
        let big = product_state(&[0; 10]).unwrap();
        assert_eq!(big.dim(), 1024);
        assert!((big.norm() - 1.0).abs() < 1e-15);
        assert!(product_state(&[2]).is_err());
    }

    #[test]
    fn ground_state_examples() {
        let mz = PauliSum::parse(1, &[(-1.0, "Z0")]).unwrap();
        let gs = ground_state(&mz).unwrap();
        assert!((gs.energy + 1.0).abs() < 1e-14);
        assert!((gs.state.amplitudes()[0].norm() - 1.0).abs() < 1e-12);

        let x = PauliSum::parse(1, &[(1.0, "X0")]).unwrap();
        let gs = ground_state(&x).unwrap();
        assert!((gs.energy + 1.0).abs() < 1e-14);
        let minus = StateVector::new(1, vec![c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)]).unwrap();
        assert!((inner(&minus, &gs.state).unwrap().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ground_state_residual_and_degeneracy_flag() {
        let h = PauliSum::parse(3, &[(1.0, "X0 Y1"), (-0.4, "Z2"), (0.8, "Y0 Y2"), (0.3, "X1")]).unwrap();
        let gs = ground_state(&h).unwrap();
        let hpsi = h.apply(&gs.state).unwrap();
        let res: f64 = hpsi
            .amplitudes()
            .iter()
            .zip(gs.state.amplitudes())
            .map(|(a, b)| (a - b * gs.energy).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(res < 1e-9);

        let zero = PauliSum::parse(2, &[(1.0, "Z0")]).unwrap();
        assert!(ground_state(&zero).unwrap().is_degenerate());
    }

    #[test]
    fn norm_survives_many_rotations() {
        let gens: Vec<PauliString> = ["X0 Y1", "Z2 X3", "Y0", "X1 X2 Z3", "Z0 Z3"]
            .iter()
            .map(|t| parse_pauli(t, 4).unwrap())
            .collect();
        let mut psi = random_state(4, 3);
        for k in 0..10_000 {
            let theta = ((k * 7919) % 1000) as f64 * 0.006_283 - 3.1;
            psi.rotate(&gens[k % gens.len()], theta).unwrap();
        }
        assert!((psi.norm() - 1.0).abs() < 1e-10);
    }
}
