//! Observables recorded along trajectories, and the trajectory deviation metric.
//!
//! Column names are stable: `energy`, `corr_<aa>_<i>_<j>` (e.g. `corr_xx_0_1`),
//! `loschmidt`, `fidelity`, `infidelity`.

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString, PauliSum};
use crate::state::StateVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn letter(self) -> Pauli {
        match self {
            Axis::X => Pauli::X,
            Axis::Y => Pauli::Y,
            Axis::Z => Pauli::Z,
        }
    }

    fn symbol(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }
}

/// `⟨σ^a_i σ^a_j⟩`.
pub fn pauli_correlator(psi: &StateVector, axis: Axis, i: usize, j: usize) -> Result<f64> {
    let n = psi.n_qubits();
    if i == j {
        return Err(Error::arg("correlator sites must differ"));
    }
    if i >= n || j >= n {
        return Err(Error::arg(format!(
            "correlator sites ({i}, {j}) out of range for {n} qubits"
        )));
    }
    let p = PauliString::from_sites(n, &[(i, axis.letter()), (j, axis.letter())])?;
    Ok(p.expectation(psi)?.re)
}

/// `|⟨ψ₀|ψ_t⟩|²`.
pub fn loschmidt_echo(psi0: &StateVector, psi_t: &StateVector) -> Result<f64> {
    Ok(psi0.inner(psi_t)?.norm_sqr())
}

/// `|⟨a|b⟩|²`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr())
}

/// `s = sqrt(Σ_t (O_test(t) − O_ref(t))² / (N_t − 1))` over the test mesh.
///
/// Each test time is matched to the nearest reference time. Both series are
/// `(t, value)` pairs sorted by time.
pub fn trajectory_std(test: &[(f64, f64)], reference: &[(f64, f64)]) -> Result<f64> {
    if test.len() < 2 {
        return Err(Error::arg(format!(
            "need at least 2 test points, got {}",
            test.len()
        )));
    }
    if reference.is_empty() {
        return Err(Error::arg("reference series is empty"));
    }
    let sum: f64 = test
        .iter()
        .map(|&(t, v)| {
            let r = reference[nearest_index(reference, t)].1;
            (v - r) * (v - r)
        })
        .sum();
    Ok((sum / (test.len() - 1) as f64).sqrt())
}

/// [`trajectory_std`] restricted to test times in `[t_start, t_end]`.
pub fn trajectory_std_window(
    test: &[(f64, f64)],
    reference: &[(f64, f64)],
    t_start: f64,
    t_end: f64,
) -> Result<f64> {
    let window: Vec<(f64, f64)> = test
        .iter()
        .copied()
        .filter(|&(t, _)| t >= t_start - 1e-12 && t <= t_end + 1e-12)
        .collect();
    trajectory_std(&window, reference)
}

/// Index of the sample nearest to `t` in a time-sorted series (earlier wins ties).
pub fn nearest_index(series: &[(f64, f64)], t: f64) -> usize {
    let k = series.partition_point(|&(s, _)| s < t);
    if k == 0 {
        0
    } else if k == series.len() {
        series.len() - 1
    } else if (series[k].0 - t) < (t - series[k - 1].0) {
        k
    } else {
        k - 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ObservableKind {
    /// `⟨H(t)⟩`.
    Energy,
    PauliCorrelator { axis: Axis, i: usize, j: usize },
    /// Return probability to the initial state.
    Loschmidt,
    /// Overlap with the exact reference state at the same time.
    Fidelity,
    Infidelity,
}

/// An observable column. In configs:
/// `{"kind": "pauli_correlator", "axis": "x", "i": 0, "j": 1, "name": "...", "scale": 0.25}`,
/// where `name` defaults to the canonical column name and `scale` to 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ObservableSpec", into = "ObservableSpec")]
pub struct Observable {
    pub name: String,
    pub kind: ObservableKind,
    /// Multiplies the bare value; used for correlator conventions (`S = σ/2` gives 0.25).
    pub scale: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KindTag {
    Energy,
    PauliCorrelator,
    Loschmidt,
    Fidelity,
    Infidelity,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservableSpec {
    kind: KindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    axis: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    i: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    j: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
}

impl TryFrom<ObservableSpec> for Observable {
    type Error = String;

    fn try_from(spec: ObservableSpec) -> std::result::Result<Self, String> {
        let correlator = spec.kind == KindTag::PauliCorrelator;
        if !correlator && (spec.axis.is_some() || spec.i.is_some() || spec.j.is_some()) {
            return Err("`axis`, `i` and `j` only apply to pauli_correlator".into());
        }
        let mut obs = match spec.kind {
            KindTag::Energy => Observable::energy(),
            KindTag::Loschmidt => Observable::loschmidt(),
            KindTag::Fidelity => Observable::fidelity(),
            KindTag::Infidelity => Observable::infidelity(),
            KindTag::PauliCorrelator => match (spec.axis, spec.i, spec.j) {
                (Some(axis), Some(i), Some(j)) => Observable::correlator(axis, i, j),
                _ => return Err("pauli_correlator needs `axis`, `i` and `j`".into()),
            },
        };
        if let Some(name) = spec.name {
            if name.is_empty() || name.contains(',') || name.contains('"') {
                return Err(format!("`{name}` is not a usable column name"));
            }
            obs.name = name;
        }
        obs.scale = spec.scale.unwrap_or(1.0);
        Ok(obs)
    }
}

impl From<Observable> for ObservableSpec {
    fn from(o: Observable) -> Self {
        let (kind, axis, i, j) = match o.kind {
            ObservableKind::Energy => (KindTag::Energy, None, None, None),
            ObservableKind::PauliCorrelator { axis, i, j } => {
                (KindTag::PauliCorrelator, Some(axis), Some(i), Some(j))
            }
            ObservableKind::Loschmidt => (KindTag::Loschmidt, None, None, None),
            ObservableKind::Fidelity => (KindTag::Fidelity, None, None, None),
            ObservableKind::Infidelity => (KindTag::Infidelity, None, None, None),
        };
        ObservableSpec {
            kind,
            name: Some(o.name),
            axis,
            i,
            j,
            scale: Some(o.scale),
        }
    }
}

impl Observable {
    pub fn energy() -> Self {
        Observable {
            name: "energy".into(),
            kind: ObservableKind::Energy,
            scale: 1.0,
        }
    }

    pub fn correlator(axis: Axis, i: usize, j: usize) -> Self {
        let a = axis.symbol();
        Observable {
            name: format!("corr_{a}{a}_{i}_{j}"),
            kind: ObservableKind::PauliCorrelator { axis, i, j },
            scale: 1.0,
        }
    }

    pub fn loschmidt() -> Self {
        Observable {
            name: "loschmidt".into(),
            kind: ObservableKind::Loschmidt,
            scale: 1.0,
        }
    }

    pub fn fidelity() -> Self {
        Observable {
            name: "fidelity".into(),
            kind: ObservableKind::Fidelity,
            scale: 1.0,
        }
    }

    pub fn infidelity() -> Self {
        Observable {
            name: "infidelity".into(),
            kind: ObservableKind::Infidelity,
            scale: 1.0,
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn needs_reference(&self) -> bool {
        matches!(self.kind, ObservableKind::Fidelity | ObservableKind::Infidelity)
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// What an observable may look at.
pub struct EvalContext<'a> {
    pub psi: &'a StateVector,
    pub hamiltonian: &'a PauliSum,
    pub initial: &'a StateVector,
    pub reference: Option<&'a StateVector>,
}

/// Named observables with unique names, evaluated in order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObservableSet(Vec<Observable>);

impl ObservableSet {
    pub fn new(items: Vec<Observable>) -> Result<Self> {
        let set = ObservableSet(items);
        set.validate(None)?;
        Ok(set)
    }

    /// Checks name uniqueness and, when `n_qubits` is given, correlator sites.
    pub fn validate(&self, n_qubits: Option<usize>) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (k, o) in self.0.iter().enumerate() {
            if !seen.insert(o.name.as_str()) {
                return Err(Error::config(
                    format!("observables[{k}].name"),
                    format!("duplicate observable name `{}`", o.name),
                ));
            }
            if !o.scale.is_finite() {
                return Err(Error::config(format!("observables[{k}].scale"), "must be finite"));
            }
            if let ObservableKind::PauliCorrelator { i, j, .. } = o.kind {
                if i == j {
                    return Err(Error::config(format!("observables[{k}]"), "sites must differ"));
                }
                if let Some(n) = n_qubits {
                    if i >= n || j >= n {
                        return Err(Error::config(
                            format!("observables[{k}]"),
                            format!("sites ({i}, {j}) out of range for {n} qubits"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn items(&self) -> &[Observable] {
        &self.0
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|o| o.name.as_str())
    }

    pub fn needs_reference(&self) -> bool {
        self.0.iter().any(Observable::needs_reference)
    }

    pub fn evaluate(&self, ctx: &EvalContext<'_>) -> Result<IndexMap<String, f64>> {
        let mut out = IndexMap::with_capacity(self.0.len());
        for o in &self.0 {
            let raw = match &o.kind {
                ObservableKind::Energy => ctx.hamiltonian.expectation(ctx.psi)?,
                ObservableKind::PauliCorrelator { axis, i, j } => {
                    pauli_correlator(ctx.psi, *axis, *i, *j)?
                }
                ObservableKind::Loschmidt => loschmidt_echo(ctx.initial, ctx.psi)?,
                ObservableKind::Fidelity | ObservableKind::Infidelity => {
                    let reference = ctx.reference.ok_or_else(|| {
                        Error::arg(format!("observable `{}` needs a reference state", o.name))
                    })?;
                    let f = fidelity(reference, ctx.psi)?;
                    if o.kind == ObservableKind::Fidelity {
                        f
                    } else {
                        1.0 - f
                    }
                }
            };
            out.insert(o.name.clone(), raw * o.scale);
        }
        Ok(out)
    }
}
