//! Entangled data-encoding feature map.
//!
//! A feature vector `x` of length `n` is mapped to
//! `|Φ(x)⟩ = (u(x) H^⊗n)^reps |0⟩^⊗n`, where `u(x)` is the diagonal unitary
//!
//! ```text
//! u(x) = exp(i [ Σ_i x_i Z_i + Σ_(i,j) (π - x_i)(π - x_j) Z_i Z_j ])
//! ```
//!
//! and the pair sum runs over the entanglement pattern. All terms are
//! diagonal and commute, so each layer is applied as a single phase vector.
//! The angle enters the exponent exactly once: there is no factor of two as in
//! some SDKs' `P(2φ)` gate decompositions, so kernels computed here differ from
//! such SDKs at equal inputs.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{parity_sign, StateVector, MAX_QUBITS};

/// Which qubit pairs receive a two-qubit term (or CX in the ansatz).
///
/// Variant order doubles as the tie-break order when ranking grid cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntanglementPattern {
    Circular,
    Full,
    Linear,
}

impl EntanglementPattern {
    pub const ALL: [EntanglementPattern; 3] = [Self::Circular, Self::Full, Self::Linear];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Circular => "circular",
            Self::Full => "full",
            Self::Linear => "linear",
        }
    }
}

impl fmt::Display for EntanglementPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntanglementPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "circular" => Ok(Self::Circular),
            "full" => Ok(Self::Full),
            "linear" => Ok(Self::Linear),
            other => Err(Error::config(format!(
                "unknown entanglement pattern `{other}` (expected circular, full or linear)"
            ))),
        }
    }
}

/// Ordered qubit pairs for a pattern.
///
/// `linear` is the nearest-neighbour chain, `circular` appends the wrap-around
/// pair `(n-1, 0)` when `n >= 3` (for two qubits the wrap-around would repeat
/// the only pair), and `full` lists every `i < j` lexicographically.
pub fn entanglement_pairs(n: usize, pattern: EntanglementPattern) -> Vec<(usize, usize)> {
    let chain = || (0..n.saturating_sub(1)).map(|i| (i, i + 1));
    match pattern {
        EntanglementPattern::Linear => chain().collect(),
        EntanglementPattern::Circular => {
            let mut pairs: Vec<_> = chain().collect();
            if n >= 3 {
                pairs.push((n - 1, 0));
            }
            pairs
        }
        EntanglementPattern::Full => (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect(),
    }
}

/// Single-qubit coefficient, `φ_i(x) = x_i`.
#[inline]
pub fn phi_single(x_i: f64) -> f64 {
    x_i
}

/// Pair coefficient, `φ_ij(x) = (π - x_i)(π - x_j)`.
#[inline]
pub fn phi_pair(x_i: f64, x_j: f64) -> f64 {
    (PI - x_i) * (PI - x_j)
}

/// Blueprint of the encoding circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "FeatureMapRepr", into = "FeatureMapRepr")]
pub struct FeatureMapSpec {
    n_qubits: usize,
    reps: usize,
    pattern: EntanglementPattern,
}

impl FeatureMapSpec {
    pub fn new(n_qubits: usize, reps: usize, pattern: EntanglementPattern) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::config(format!(
                "feature map qubit count must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        if reps == 0 {
            return Err(Error::config("reps must be an integer and at least 1"));
        }
        Ok(Self {
            n_qubits,
            reps,
            pattern,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn reps(&self) -> usize {
        self.reps
    }

    pub fn pattern(&self) -> EntanglementPattern {
        self.pattern
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        entanglement_pairs(self.n_qubits, self.pattern)
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_qubits {
            return Err(Error::Shape {
                what: "feature vector length",
                expected: self.n_qubits,
                found: x.len(),
            });
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct FeatureMapRepr {
    qubits: usize,
    reps: usize,
    entanglement: EntanglementPattern,
}

impl TryFrom<FeatureMapRepr> for FeatureMapSpec {
    type Error = Error;

    fn try_from(r: FeatureMapRepr) -> Result<Self> {
        FeatureMapSpec::new(r.qubits, r.reps, r.entanglement)
    }
}

impl From<FeatureMapSpec> for FeatureMapRepr {
    fn from(s: FeatureMapSpec) -> Self {
        FeatureMapRepr {
            qubits: s.n_qubits,
            reps: s.reps,
            entanglement: s.pattern,
        }
    }
}

/// One commuting term `angle · Z_mask` of the diagonal generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseTerm {
    pub mask: usize,
    pub angle: f64,
}

/// Generator terms of one encoding layer: the `n` single-qubit terms in qubit
/// order followed by one term per entanglement pair, in pattern order.
pub fn phase_terms(x: &[f64], spec: &FeatureMapSpec) -> Result<Vec<PhaseTerm>> {
    spec.check_input(x)?;
    let singles = x.iter().enumerate().map(|(i, &xi)| PhaseTerm {
        mask: 1 << i,
        angle: phi_single(xi),
    });
    let pairs = spec.pairs().into_iter().map(|(i, j)| PhaseTerm {
        mask: (1 << i) | (1 << j),
        angle: phi_pair(x[i], x[j]),
    });
    Ok(singles.chain(pairs).collect())
}

/// Phase vector of `exp(i Σ_k angle_k Z_{mask_k})` over all `2^n` basis states.
/// Terms are summed in mask order, so equal term sets give bit-identical phases.
pub fn diagonal_phases(n_qubits: usize, terms: &[PhaseTerm]) -> Vec<f64> {
    let mut sorted = terms.to_vec();
    sorted.sort_by_key(|t| t.mask);
    (0..1usize << n_qubits)
        .map(|b| sorted.iter().map(|t| t.angle * parity_sign(b & t.mask)).sum())
        .collect()
}

/// Runs `H^⊗n` followed by the diagonal layer once per entry of `layers`,
/// starting from `|0⟩^⊗n`.
pub fn encode_layers(n_qubits: usize, layers: &[Vec<PhaseTerm>]) -> Result<StateVector> {
    let mut state = StateVector::zero(n_qubits)?;
    for terms in layers {
        state.apply_hadamard_all();
        state.apply_diagonal_phase(&diagonal_phases(n_qubits, terms))?;
    }
    Ok(state)
}

/// Encodes an already scaled feature vector as `|Φ(x)⟩`.
pub fn encode(x: &[f64], spec: &FeatureMapSpec) -> Result<StateVector> {
    let terms = phase_terms(x, spec)?;
    let phases = diagonal_phases(spec.n_qubits, &terms);
    let mut state = StateVector::zero(spec.n_qubits)?;
    for _ in 0..spec.reps {
        state.apply_hadamard_all();
        state.apply_diagonal_phase(&phases)?;
    }
    Ok(state)
}
