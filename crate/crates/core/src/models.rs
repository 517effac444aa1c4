//! Spin-chain Hamiltonians and their time dependence.

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString, PauliSum};

fn bond(n: usize, i: usize, j: usize, letter: Pauli) -> PauliString {
    PauliString::from_sites(n, &[(i, letter), (j, letter)]).expect("valid bond")
}

fn site(n: usize, i: usize, letter: Pauli) -> PauliString {
    PauliString::single(n, i, letter).expect("valid site")
}

/// Structural term list of the open XY chain in a transverse field:
/// `X_iX_{i+1}, Y_iY_{i+1}` per bond, then `Z_i` per site.
pub fn lsm_structure(n: usize) -> Result<Vec<PauliString>> {
    if n < 2 {
        return Err(Error::arg(format!("chain needs at least 2 sites, got {n}")));
    }
    let mut out = Vec::with_capacity(3 * n - 2);
    for i in 0..n - 1 {
        out.push(bond(n, i, i + 1, Pauli::X));
        out.push(bond(n, i, i + 1, Pauli::Y));
    }
    out.extend((0..n).map(|i| site(n, i, Pauli::Z)));
    Ok(out)
}

/// `−J Σ_i [(1+γ) X_iX_{i+1} + (1−γ) Y_iY_{i+1}] + h_z Σ_i Z_i`, open boundaries.
pub fn lsm_hamiltonian(n: usize, gamma: f64, h_z: f64, j: f64) -> Result<PauliSum> {
    let structure = lsm_structure(n)?;
    let mut terms = Vec::with_capacity(structure.len());
    for (k, p) in structure.into_iter().enumerate() {
        let c = if k < 2 * (n - 1) {
            if k % 2 == 0 {
                -j * (1.0 + gamma)
            } else {
                -j * (1.0 - gamma)
            }
        } else {
            h_z
        };
        terms.push((c, p));
    }
    PauliSum::from_terms(n, terms)
}

/// Structural term list of the mixed-field Ising chain:
/// `Z_iZ_{i+1}` per bond, then `X_i, Z_i` per site.
pub fn mfim_structure(n: usize, periodic: bool) -> Result<Vec<PauliString>> {
    check_mfim(n, periodic)?;
    let bonds = if periodic { n } else { n - 1 };
    let mut out: Vec<PauliString> = (0..bonds)
        .map(|i| bond(n, i, (i + 1) % n, Pauli::Z))
        .collect();
    for i in 0..n {
        out.push(site(n, i, Pauli::X));
        out.push(site(n, i, Pauli::Z));
    }
    Ok(out)
}

fn check_mfim(n: usize, periodic: bool) -> Result<()> {
    if n < 2 {
        return Err(Error::arg(format!("chain needs at least 2 sites, got {n}")));
    }
    if periodic && n < 3 {
        return Err(Error::arg(
            "periodic chain needs at least 3 sites (the wrap bond would double)",
        ));
    }
    Ok(())
}

/// `−J Σ Z_iZ_{i+1} + Σ (h_x X_i + h_z Z_i)`; zero fields drop out.
pub fn mfim_hamiltonian(n: usize, j: f64, h_x: f64, h_z: f64, periodic: bool) -> Result<PauliSum> {
    let structure = mfim_structure(n, periodic)?;
    let bonds = if periodic { n } else { n - 1 };
    let terms = structure.into_iter().enumerate().map(|(k, p)| {
        let c = if k < bonds {
            -j
        } else if (k - bonds) % 2 == 0 {
            h_x
        } else {
            h_z
        };
        (c, p)
    });
    PauliSum::from_terms(n, terms)
}

/// Time dependence of the Hamiltonian. The term structure is fixed per
/// schedule; only coefficients vary.
#[derive(Clone, Debug)]
pub enum Schedule {
    Constant(PauliSum),
    /// `γ(t) = 1 − 2t/T` for `0 ≤ t ≤ T`, then held at `γ = −1`.
    LsmRamp {
        n: usize,
        ramp_time: f64,
        h_z: f64,
        j: f64,
    },
    /// `pre` for `t < 0`, `post` for `t ≥ 0`.
    Quench { pre: PauliSum, post: PauliSum },
    /// `(1 − s) from + s to` with `s = t/T`, held at `to` after `T`.
    Interpolate {
        from: PauliSum,
        to: PauliSum,
        ramp_time: f64,
    },
}

pub fn schedule_lsm_ramp(n: usize, ramp_time: f64, h_z: f64) -> Result<Schedule> {
    if !(ramp_time > 0.0) {
        return Err(Error::arg(format!("ramp time must be positive, got {ramp_time}")));
    }
    lsm_structure(n)?;
    Ok(Schedule::LsmRamp {
        n,
        ramp_time,
        h_z,
        j: 1.0,
    })
}

pub fn schedule_quench(pre: PauliSum, post: PauliSum) -> Result<Schedule> {
    if pre.n_qubits() != post.n_qubits() {
        return Err(Error::arg("pre- and post-quench registers differ"));
    }
    Ok(Schedule::Quench { pre, post })
}

pub fn schedule_interpolate(from: PauliSum, to: PauliSum, ramp_time: f64) -> Result<Schedule> {
    if from.n_qubits() != to.n_qubits() {
        return Err(Error::arg("endpoint Hamiltonians act on different registers"));
    }
    if !(ramp_time > 0.0) {
        return Err(Error::arg(format!("ramp time must be positive, got {ramp_time}")));
    }
    Ok(Schedule::Interpolate { from, to, ramp_time })
}

impl Schedule {
    pub fn n_qubits(&self) -> usize {
        match self {
            Schedule::Constant(h) => h.n_qubits(),
            Schedule::LsmRamp { n, .. } => *n,
            Schedule::Quench { post, .. } => post.n_qubits(),
            Schedule::Interpolate { to, .. } => to.n_qubits(),
        }
    }

    /// Anisotropy of the ramp at time `t`.
    pub fn gamma_at(&self, t: f64) -> Option<f64> {
        match self {
            Schedule::LsmRamp { ramp_time, .. } => Some(if t >= *ramp_time {
                -1.0
            } else {
                1.0 - 2.0 * t.max(0.0) / ramp_time
            }),
            _ => None,
        }
    }

    pub fn hamiltonian_at(&self, t: f64) -> PauliSum {
        match self {
            Schedule::Constant(h) => h.clone(),
            Schedule::LsmRamp { n, h_z, j, .. } => {
                let gamma = self.gamma_at(t).expect("ramp has gamma");
                lsm_hamiltonian(*n, gamma, *h_z, *j).expect("validated at construction")
            }
            Schedule::Quench { pre, post } => {
                if t < 0.0 {
                    pre.clone()
                } else {
                    post.clone()
                }
            }
            Schedule::Interpolate { from, to, ramp_time } => {
                let s = (t / ramp_time).clamp(0.0, 1.0);
                if s == 0.0 {
                    return from.clone();
                }
                if s == 1.0 {
                    return to.clone();
                }
                let terms = to
                    .terms()
                    .iter()
                    .map(|&(c, p)| (s * c, p))
                    .chain(from.terms().iter().map(|&(c, p)| ((1.0 - s) * c, p)));
                PauliSum::from_terms(to.n_qubits(), terms).expect("endpoints validated")
            }
        }
    }

    /// Term strings independent of `t`, used for the Hamiltonian operator pool.
    pub fn structure(&self) -> Vec<PauliString> {
        match self {
            Schedule::Constant(h) => h.unique_strings(),
            Schedule::LsmRamp { n, .. } => lsm_structure(*n).expect("validated at construction"),
            Schedule::Quench { post, .. } => post.unique_strings(),
            Schedule::Interpolate { from, to, .. } => {
                let mut out = from.unique_strings();
                for p in to.unique_strings() {
                    if !out.contains(&p) {
                        out.push(p);
                    }
                }
                out
            }
        }
    }

    /// True when `H(t)` is constant for `t ≥ 0`.
    pub fn is_constant_after_start(&self) -> bool {
        !matches!(self, Schedule::LsmRamp { .. } | Schedule::Interpolate { .. })
    }

    /// Times at which `H(t)` changes form (kinks), inside `(0, t_final)`.
    pub fn breakpoints(&self, t_final: f64) -> Vec<f64> {
        match self {
            Schedule::LsmRamp { ramp_time, .. } | Schedule::Interpolate { ramp_time, .. }
                if *ramp_time < t_final =>
            {
                vec![*ramp_time]
            }
            _ => Vec::new(),
        }
    }
}
