//! Dense statevector simulation for small registers.
//!
//! Basis ordering: qubit 0 is the least-significant bit of the basis index,
//! so basis state `b` has qubit `q` set iff `(b >> q) & 1 == 1`. All modules
//! built on top of this one (feature map, ansatz, observables) use the same
//! convention.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 20;

/// A pure state of `n_qubits` qubits stored as `2^n` complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// The all-zeros computational basis state `|0...0⟩`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::config(format!(
                "qubit count must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Builds a state from raw amplitudes. The caller is responsible for
    /// normalization; only the length is checked.
    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::config(format!(
                "qubit count must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        if amps.len() != 1 << n_qubits {
            return Err(Error::Shape {
                what: "amplitude vector",
                expected: 1 << n_qubits,
                found: amps.len(),
            });
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Hilbert-space dimension, `2^n_qubits`.
    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Squared 2-norm of the amplitude vector.
    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Applies a Hadamard gate to every qubit.
    pub fn apply_hadamard_all(&mut self) {
        for q in 0..self.n_qubits {
            self.apply_hadamard(q);
        }
    }

    fn apply_hadamard(&mut self, qubit: usize) {
        let bit = 1 << qubit;
        for b in 0..self.amps.len() {
            if b & bit == 0 {
                let a0 = self.amps[b];
                let a1 = self.amps[b | bit];
                self.amps[b] = (a0 + a1) * FRAC_1_SQRT_2;
                self.amps[b | bit] = (a0 - a1) * FRAC_1_SQRT_2;
            }
        }
    }

    /// Multiplies amplitude `b` by `exp(i * phases[b])`.
    pub fn apply_diagonal_phase(&mut self, phases: &[f64]) -> Result<()> {
        if phases.len() != self.amps.len() {
            return Err(Error::Shape {
                what: "diagonal phase vector",
                expected: self.amps.len(),
                found: phases.len(),
            });
        }
        for (a, &phi) in self.amps.iter_mut().zip(phases) {
            *a *= Complex64::from_polar(1.0, phi);
        }
        Ok(())
    }

    /// `RY(θ) = [[cos θ/2, -sin θ/2], [sin θ/2, cos θ/2]]` on one qubit.
    pub fn apply_ry(&mut self, qubit: usize, angle: f64) -> Result<()> {
        self.check_qubit(qubit)?;
        let (s, c) = (angle / 2.0).sin_cos();
        let bit = 1 << qubit;
        for b in 0..self.amps.len() {
            if b & bit == 0 {
                let a0 = self.amps[b];
                let a1 = self.amps[b | bit];
                self.amps[b] = a0 * c - a1 * s;
                self.amps[b | bit] = a0 * s + a1 * c;
            }
        }
        Ok(())
    }

    /// Controlled-NOT: flips `target` on every basis state whose `control` bit is set.
    pub fn apply_cx(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::Index(format!(
                "CX control and target must differ (both {control})"
            )));
        }
        let cbit = 1 << control;
        let tbit = 1 << target;
        for b in 0..self.amps.len() {
            if b & cbit != 0 && b & tbit == 0 {
                self.amps.swap(b, b | tbit);
            }
        }
        Ok(())
    }

    /// `⟨self|other⟩ = Σ_b conj(self_b) · other_b`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::Shape {
                what: "inner product qubit count",
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// Expectation value of a tensor product of Z operators.
    pub fn expectation_z(&self, obs: &PauliZString) -> Result<f64> {
        if obs.n_qubits != self.n_qubits {
            return Err(Error::Shape {
                what: "observable qubit count",
                expected: self.n_qubits,
                found: obs.n_qubits,
            });
        }
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(b, a)| obs.eigenvalue(b) * a.norm_sqr())
            .sum())
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            Err(Error::Index(format!(
                "qubit {qubit} out of range for a {}-qubit register",
                self.n_qubits
            )))
        } else {
            Ok(())
        }
    }
}

/// A Z operator on each qubit of `support`, identity elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ZStringRepr", into = "ZStringRepr")]
pub struct PauliZString {
    n_qubits: usize,
    mask: usize,
}

impl PauliZString {
    pub fn new(n_qubits: usize, support: &[usize]) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::config(format!(
                "qubit count must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        let mut mask = 0usize;
        for &q in support {
            if q >= n_qubits {
                return Err(Error::Index(format!(
                    "Z-string support index {q} out of range for {n_qubits} qubits"
                )));
            }
            mask |= 1 << q;
        }
        Ok(Self { n_qubits, mask })
    }

    /// Z on every qubit (full parity).
    pub fn all(n_qubits: usize) -> Result<Self> {
        let support: Vec<usize> = (0..n_qubits).collect();
        Self::new(n_qubits, &support)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn mask(&self) -> usize {
        self.mask
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.n_qubits).filter(|q| self.mask >> q & 1 == 1).collect()
    }

    /// Diagonal entry on basis state `b`: `(-1)^popcount(b & support)`.
    #[inline]
    pub fn eigenvalue(&self, b: usize) -> f64 {
        parity_sign(b & self.mask)
    }
}

#[inline]
pub(crate) fn parity_sign(bits: usize) -> f64 {
    if bits.count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

#[derive(Serialize, Deserialize)]
struct ZStringRepr {
    n_qubits: usize,
    support: Vec<usize>,
}

impl TryFrom<ZStringRepr> for PauliZString {
    type Error = Error;

    fn try_from(r: ZStringRepr) -> Result<Self> {
        PauliZString::new(r.n_qubits, &r.support)
    }
}

impl From<PauliZString> for ZStringRepr {
    fn from(z: PauliZString) -> Self {
        ZStringRepr {
            n_qubits: z.n_qubits,
            support: z.support(),
        }
    }
}
