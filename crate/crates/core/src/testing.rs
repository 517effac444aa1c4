//! Independent dense oracles for unit tests.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pauli::{Pauli, PauliString};
use crate::state::StateVector;

fn single(letter: Pauli) -> DMatrix<Complex64> {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    match letter {
        Pauli::I => DMatrix::from_row_slice(2, 2, &[l, o, o, l]),
        Pauli::X => DMatrix::from_row_slice(2, 2, &[o, l, l, o]),
        Pauli::Y => DMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
        Pauli::Z => DMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
    }
}

/// Kronecker-product matrix of a Pauli string; qubit 0 is the rightmost factor.
pub fn dense_pauli(p: &PauliString) -> DMatrix<Complex64> {
    let mut m = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    for site in (0..p.n_qubits()).rev() {
        m = m.kronecker(&single(p.letter(site)));
    }
    m * p.phase().to_complex()
}

/// Dense `exp(−iA)` by scaled Taylor series with squaring.
pub fn dense_expm_of(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let norm = a.norm();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a * Complex64::new(0.0, -1.0 / 2f64.powi(squarings as i32));
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..40 {
        term = &term * &scaled / Complex64::new(k as f64, 0.0);
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Dense `exp(−iθP)`.
pub fn dense_expm(p: &PauliString, theta: f64) -> DMatrix<Complex64> {
    dense_expm_of(&(dense_pauli(p) * Complex64::new(theta, 0.0)))
}

pub fn random_state(n_qubits: usize, seed: u64) -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps: Vec<Complex64> = (0..1usize << n_qubits)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    StateVector::new(n_qubits, amps).unwrap().normalized().unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniformly random phase-free string, possibly the identity.
pub fn random_string(n_qubits: usize, rng: &mut ChaCha8Rng) -> PauliString {
    let letters: Vec<Pauli> = (0..n_qubits)
        .map(|_| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][rng.gen_range(0..4)])
        .collect();
    PauliString::from_letters(&letters).unwrap()
}
