//! Pauli strings and real-weighted Pauli sums.
//!
//! A [`PauliString`] stores its letters as a pair of site-indexed bit masks
//! (`x`, `z`), with qubit `i` at bit `i`. The letter on a site is
//! `I = (0,0)`, `X = (1,0)`, `Z = (0,1)`, `Y = (1,1)`, and the string is the
//! operator `phase * ⊗_i L_i`. Phases are exact elements of `Z₄`.
//!
//! Matrix-free action on a basis state uses `Y = i X Z`:
//! `P|b⟩ = phase · i^{#Y} · (−1)^{|b ∧ z|} |b ⊕ x⟩`.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use indexmap::IndexMap;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::StateVector;

/// Largest register a [`PauliString`] can address.
pub const MAX_QUBITS: usize = 64;

/// Coefficients below this magnitude are dropped when a sum is canonicalized.
pub const COEFF_DROP_TOL: f64 = 1e-14;

/// Tolerance on `‖ψ‖ − 1` accepted by expectation values.
pub const NORM_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// A unit phase `i^k`, `k ∈ Z₄`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_power(k: u32) -> Self {
        Phase((k % 4) as u8)
    }

    pub fn power(self) -> u8 {
        self.0
    }

    pub fn is_real(self) -> bool {
        self.0 % 2 == 0
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

/// A phased tensor product of single-site Pauli operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_qubits: usize,
    x: u64,
    z: u64,
    phase: Phase,
}

impl PauliString {
    /// The identity on `n_qubits` sites.
    pub fn identity(n_qubits: usize) -> Result<Self> {
        check_register(n_qubits)?;
        Ok(PauliString {
            n_qubits,
            x: 0,
            z: 0,
            phase: Phase::ONE,
        })
    }

    /// Builds a phase-free string from `(site, letter)` pairs.
    pub fn from_sites(n_qubits: usize, sites: &[(usize, Pauli)]) -> Result<Self> {
        let mut p = Self::identity(n_qubits)?;
        let mut seen = 0u64;
        for &(site, letter) in sites {
            if site >= n_qubits {
                return Err(Error::arg(format!(
                    "site {site} out of range for {n_qubits} qubits"
                )));
            }
            if seen >> site & 1 == 1 {
                return Err(Error::arg(format!("site {site} given twice")));
            }
            seen |= 1 << site;
            let (bx, bz) = letter.bits();
            p.x |= (bx as u64) << site;
            p.z |= (bz as u64) << site;
        }
        Ok(p)
    }

    /// Builds a string from a dense letter sequence, site 0 first.
    pub fn from_letters(letters: &[Pauli]) -> Result<Self> {
        let sites: Vec<(usize, Pauli)> = letters.iter().copied().enumerate().collect();
        Self::from_sites(letters.len(), &sites)
    }

    /// Single-site operator.
    pub fn single(n_qubits: usize, site: usize, letter: Pauli) -> Result<Self> {
        Self::from_sites(n_qubits, &[(site, letter)])
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn letter(&self, site: usize) -> Pauli {
        Pauli::from_bits(self.x >> site & 1 == 1, self.z >> site & 1 == 1)
    }

    pub fn letters(&self) -> Vec<Pauli> {
        (0..self.n_qubits).map(|i| self.letter(i)).collect()
    }

    /// Non-identity `(site, letter)` pairs in site order.
    pub fn support(&self) -> Vec<(usize, Pauli)> {
        (0..self.n_qubits)
            .filter(|&i| (self.x | self.z) >> i & 1 == 1)
            .map(|i| (i, self.letter(i)))
            .collect()
    }

    /// Number of non-identity letters.
    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn is_phase_free(&self) -> bool {
        self.phase == Phase::ONE
    }

    /// The same letters with phase `+1`.
    pub fn without_phase(&self) -> Self {
        self.with_phase(Phase::ONE)
    }

    /// Letter content only; two strings with equal keys differ at most by phase.
    pub fn key(&self) -> (u64, u64) {
        (self.x, self.z)
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// Operator product `self · other`, phases included.
    pub fn product(&self, other: &PauliString) -> Result<PauliString> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::arg(format!(
                "pauli product of {}-qubit and {}-qubit strings",
                self.n_qubits, other.n_qubits
            )));
        }
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        // L = i^{xz} X^x Z^z per site; moving Z^{z1} past X^{x2} gives (−1)^{z1 x2}.
        let k = (self.x & self.z).count_ones() + (other.x & other.z).count_ones() + 4 * 64
            - (x & z).count_ones()
            + 2 * (self.z & other.x).count_ones();
        Ok(PauliString {
            n_qubits: self.n_qubits,
            x,
            z,
            phase: self.phase * other.phase * Phase::from_power(k),
        })
    }

    /// Phase picked up on basis index `b` including `phase · i^{#Y}`: `P|b⟩ = f(b) |b ⊕ x⟩`.
    #[inline]
    pub(crate) fn base_factor(&self) -> Complex64 {
        (self.phase * Phase::from_power((self.x & self.z).count_ones())).to_complex()
    }

    #[inline]
    pub(crate) fn sign(&self, b: usize) -> f64 {
        if (b as u64 & self.z).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    fn check_state(&self, psi: &StateVector) -> Result<()> {
        if psi.n_qubits() != self.n_qubits {
            return Err(Error::arg(format!(
                "{}-qubit operator applied to {}-qubit state",
                self.n_qubits,
                psi.n_qubits()
            )));
        }
        Ok(())
    }

    /// `P|ψ⟩`, computed matrix-free.
    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        self.check_state(psi)?;
        let mut out = vec![Complex64::new(0.0, 0.0); psi.dim()];
        self.apply_add(psi.amplitudes(), Complex64::new(1.0, 0.0), &mut out);
        Ok(StateVector::from_raw(self.n_qubits, out))
    }

    /// `out += scale · P·src` without dimension checks.
    pub(crate) fn apply_add(&self, src: &[Complex64], scale: Complex64, out: &mut [Complex64]) {
        let f = self.base_factor() * scale;
        let x = self.x as usize;
        for (b, &a) in src.iter().enumerate() {
            out[b ^ x] += f * self.sign(b) * a;
        }
    }

    /// `⟨a|P|b⟩` without dimension checks.
    pub(crate) fn matrix_element(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        let f = self.base_factor();
        let x = self.x as usize;
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &bi) in b.iter().enumerate() {
            acc += a[i ^ x].conj() * bi * self.sign(i);
        }
        f * acc
    }

    /// `⟨ψ|P|ψ⟩` (complex in general).
    pub fn expectation(&self, psi: &StateVector) -> Result<Complex64> {
        self.check_state(psi)?;
        Ok(self.matrix_element(psi.amplitudes(), psi.amplitudes()))
    }
}

fn check_register(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::arg(format!(
            "register size must be in 1..={MAX_QUBITS}, got {n_qubits}"
        )));
    }
    Ok(())
}

/// `a · b` with the accumulated unit phase.
pub fn pauli_product(a: &PauliString, b: &PauliString) -> Result<PauliString> {
    a.product(b)
}

/// `p|ψ⟩`.
pub fn apply_pauli(p: &PauliString, psi: &StateVector) -> Result<StateVector> {
    p.apply(psi)
}

/// Parses the `[XYZ]<site>` token grammar, e.g. `"X0 Y2"`. `"I"` or an empty
/// string is the identity.
pub fn parse_pauli(text: &str, n_qubits: usize) -> Result<PauliString> {
    check_register(n_qubits).map_err(|e| Error::Parse {
        position: 0,
        message: e.to_string(),
    })?;
    let mut sites = Vec::new();
    let mut seen = 0u64;
    let trimmed = text.trim();
    if trimmed == "I" {
        return PauliString::identity(n_qubits);
    }
    for (position, token) in tokens(text) {
        let err = |message: String| Error::Parse { position, message };
        let mut chars = token.chars();
        let letter = match chars.next() {
            Some('X') => Pauli::X,
            Some('Y') => Pauli::Y,
            Some('Z') => Pauli::Z,
            _ => return Err(err(format!("bad token `{token}`, expected [XYZ]<site>"))),
        };
        let digits = chars.as_str();
        if digits.is_empty() || !digits.bytes().all(|c| c.is_ascii_digit()) {
            return Err(err(format!("bad site index in `{token}`")));
        }
        let site: usize = digits
            .parse()
            .map_err(|_| err(format!("bad site index in `{token}`")))?;
        if site >= n_qubits {
            return Err(err(format!(
                "site {site} out of range for {n_qubits} qubits"
            )));
        }
        if seen >> site & 1 == 1 {
            return Err(err(format!("site {site} repeated")));
        }
        seen |= 1 << site;
        sites.push((site, letter));
    }
    PauliString::from_sites(n_qubits, &sites)
}

fn tokens(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s, &text[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s, &text[s..]));
    }
    out.into_iter()
}

/// Letters in token grammar; the phase is not part of the grammar.
pub fn format_pauli(p: &PauliString) -> String {
    if p.is_identity() {
        return "I".to_string();
    }
    p.support()
        .iter()
        .map(|(site, letter)| format!("{}{}", letter.symbol(), site))
        .collect::<Vec<_>>()
        .join(" ")
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase.power() {
            0 => "",
            1 => "i ",
            2 => "-",
            _ => "-i ",
        };
        write!(f, "{prefix}{}", format_pauli(self))
    }
}

/// A Hermitian operator `Σ_k c_k P_k` with real `c_k` and phase-free `P_k`,
/// kept in canonical form: duplicates merged in first-occurrence order and
/// negligible coefficients dropped.
#[derive(Clone, Debug)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<(f64, PauliString)>,
    square: OnceLock<Box<PauliSum>>,
}

impl PartialEq for PauliSum {
    fn eq(&self, other: &Self) -> bool {
        self.n_qubits == other.n_qubits && self.terms == other.terms
    }
}

impl PauliSum {
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_register(n_qubits)?;
        Ok(PauliSum {
            n_qubits,
            terms: Vec::new(),
            square: OnceLock::new(),
        })
    }

    /// Canonicalizes `(coefficient, string)` pairs. Strings with phase `−1`
    /// have the sign moved into the coefficient; imaginary phases are rejected.
    pub fn from_terms<I>(n_qubits: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, PauliString)>,
    {
        check_register(n_qubits)?;
        let mut merged: IndexMap<(u64, u64), f64> = IndexMap::new();
        for (c, p) in terms {
            if p.n_qubits() != n_qubits {
                return Err(Error::arg(format!(
                    "{}-qubit term in a {n_qubits}-qubit sum",
                    p.n_qubits()
                )));
            }
            if !c.is_finite() {
                return Err(Error::numeric(format!("non-finite coefficient for {p}")));
            }
            let sign = match p.phase() {
                Phase::ONE => 1.0,
                Phase::MINUS_ONE => -1.0,
                _ => {
                    return Err(Error::arg(format!(
                        "term {p} has an imaginary phase; sum would not be Hermitian"
                    )))
                }
            };
            *merged.entry(p.key()).or_insert(0.0) += sign * c;
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| c.abs() >= COEFF_DROP_TOL)
            .map(|((x, z), c)| {
                (
                    c,
                    PauliString {
                        n_qubits,
                        x,
                        z,
                        phase: Phase::ONE,
                    },
                )
            })
            .collect();
        Ok(PauliSum {
            n_qubits,
            terms,
            square: OnceLock::new(),
        })
    }

    /// Convenience constructor from grammar strings, e.g. `[(1.0, "Z0 Z1"), (0.5, "X0")]`.
    pub fn parse(n_qubits: usize, terms: &[(f64, &str)]) -> Result<Self> {
        let parsed = terms
            .iter()
            .map(|&(c, s)| parse_pauli(s, n_qubits).map(|p| (c, p)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_terms(n_qubits, parsed)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    /// Number of Pauli terms (`N_H`).
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn strings(&self) -> impl Iterator<Item = &PauliString> {
        self.terms.iter().map(|(_, p)| p)
    }

    /// Coefficient of the string with the same letters as `p`, or zero.
    pub fn coefficient(&self, p: &PauliString) -> f64 {
        self.terms
            .iter()
            .find(|(_, q)| q.key() == p.key())
            .map(|(c, _)| *c)
            .unwrap_or(0.0)
    }

    /// True when every term has a real matrix (even number of `Y` letters).
    pub fn is_real(&self) -> bool {
        self.terms
            .iter()
            .all(|(_, p)| (p.x & p.z).count_ones() % 2 == 0)
    }

    /// Largest-magnitude coefficient sum, an upper bound on the spectral norm.
    pub fn one_norm(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.abs()).sum()
    }

    /// `Ĥ²` as a canonical sum, computed once and cached.
    pub fn square(&self) -> &PauliSum {
        self.square.get_or_init(|| Box::new(self.compute_square()))
    }

    fn compute_square(&self) -> PauliSum {
        let mut acc: IndexMap<(u64, u64), Complex64> = IndexMap::new();
        for (ca, a) in &self.terms {
            for (cb, b) in &self.terms {
                let p = a.product(b).expect("terms share a register");
                *acc.entry(p.key()).or_insert(Complex64::new(0.0, 0.0)) +=
                    p.phase().to_complex() * (ca * cb);
            }
        }
        let n = self.n_qubits;
        let terms: Vec<(f64, PauliString)> = acc
            .into_iter()
            .map(|((x, z), c)| {
                debug_assert!(c.im.abs() < 1e-9, "anticommuting pairs must cancel");
                (
                    c.re,
                    PauliString {
                        n_qubits: n,
                        x,
                        z,
                        phase: Phase::ONE,
                    },
                )
            })
            .collect();
        PauliSum::from_terms(n, terms).expect("square of a valid sum is valid")
    }

    fn check_state(&self, psi: &StateVector) -> Result<()> {
        if psi.n_qubits() != self.n_qubits {
            return Err(Error::arg(format!(
                "{}-qubit operator applied to {}-qubit state",
                self.n_qubits,
                psi.n_qubits()
            )));
        }
        Ok(())
    }

    fn check_normalized(psi: &StateVector) -> Result<()> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::State(format!("state norm {norm} is not 1")));
        }
        Ok(())
    }

    /// `Ĥ|ψ⟩`.
    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        self.check_state(psi)?;
        let mut out = vec![Complex64::new(0.0, 0.0); psi.dim()];
        self.apply_add(psi.amplitudes(), &mut out);
        Ok(StateVector::from_raw(self.n_qubits, out))
    }

    pub(crate) fn apply_add(&self, src: &[Complex64], out: &mut [Complex64]) {
        for (c, p) in &self.terms {
            p.apply_add(src, Complex64::new(*c, 0.0), out);
        }
    }

    /// `⟨ψ|Ĥ|ψ⟩`; the imaginary part must vanish to 1e−12 before it is discarded.
    pub fn expectation(&self, psi: &StateVector) -> Result<f64> {
        self.check_state(psi)?;
        Self::check_normalized(psi)?;
        let amps = psi.amplitudes();
        let value: Complex64 = self
            .terms
            .iter()
            .map(|(c, p)| p.matrix_element(amps, amps) * *c)
            .sum();
        let scale = self.one_norm().max(1.0);
        if value.im.abs() > 1e-12 * scale {
            return Err(Error::numeric(format!(
                "expectation has imaginary part {}",
                value.im
            )));
        }
        Ok(value.re)
    }

    /// `⟨Ĥ²⟩ − ⟨Ĥ⟩²` using the cached square.
    pub fn variance(&self, psi: &StateVector) -> Result<f64> {
        let mean = self.expectation(psi)?;
        let mean_sq = self.square().expectation(psi)?;
        Ok(mean_sq - mean * mean)
    }

    /// Dense matrix in the computational basis (qubit 0 least significant).
    pub fn to_dense(&self) -> nalgebra::DMatrix<Complex64> {
        let dim = 1usize << self.n_qubits;
        let mut m = nalgebra::DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for (c, p) in &self.terms {
            let f = p.base_factor() * *c;
            let x = p.x as usize;
            for b in 0..dim {
                m[(b ^ x, b)] += f * p.sign(b);
            }
        }
        m
    }

    /// Deduplicated strings in term order.
    pub fn unique_strings(&self) -> Vec<PauliString> {
        let mut seen = HashMap::new();
        self.terms
            .iter()
            .filter(|(_, p)| seen.insert(p.key(), ()).is_none())
            .map(|(_, p)| *p)
            .collect()
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (c, p)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}*({})", format_pauli(p))?;
        }
        Ok(())
    }
}
