//! Estimator-style quantum neural network.
//!
//! `f(x; θ) = ⟨Φ(x)| U(θ)† O U(θ) |Φ(x)⟩` with the feature map `Φ`, a layered
//! RY/CX ansatz `U(θ)` and a Z-string observable `O`. Gradients with respect
//! to both `θ` and `x` are exact parameter-shift rules.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featmap::{encode, encode_layers, phase_terms, EntanglementPattern, FeatureMapSpec};
use crate::qsim::{PauliZString, StateVector, MAX_QUBITS};

/// `reps + 1` RY layers with a CX block between consecutive layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "AnsatzRepr", into = "AnsatzRepr")]
pub struct AnsatzSpec {
    n_qubits: usize,
    reps: usize,
    pattern: EntanglementPattern,
}

impl AnsatzSpec {
    pub fn new(n_qubits: usize, reps: usize, pattern: EntanglementPattern) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::config(format!(
                "ansatz qubit count must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        if reps == 0 {
            return Err(Error::config("ansatz reps must be an integer and at least 1"));
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

    pub fn num_parameters(&self) -> usize {
        self.n_qubits * (self.reps + 1)
    }
}

#[derive(Serialize, Deserialize)]
struct AnsatzRepr {
    qubits: usize,
    reps: usize,
    entanglement: EntanglementPattern,
}

impl TryFrom<AnsatzRepr> for AnsatzSpec {
    type Error = Error;

    fn try_from(r: AnsatzRepr) -> Result<Self> {
        AnsatzSpec::new(r.qubits, r.reps, r.entanglement)
    }
}

impl From<AnsatzSpec> for AnsatzRepr {
    fn from(s: AnsatzSpec) -> Self {
        AnsatzRepr {
            qubits: s.n_qubits,
            reps: s.reps,
            entanglement: s.pattern,
        }
    }
}

/// Applies the ansatz in place. `theta` is layer-major: `theta[l * n + q]` is
/// the RY angle of qubit `q` in layer `l`. CX pairs follow the pattern order
/// with the first index as control.
pub fn ansatz_apply(state: &mut StateVector, theta: &[f64], spec: &AnsatzSpec) -> Result<()> {
    if theta.len() != spec.num_parameters() {
        return Err(Error::Shape {
            what: "ansatz parameter count",
            expected: spec.num_parameters(),
            found: theta.len(),
        });
    }
    if state.n_qubits() != spec.n_qubits {
        return Err(Error::Shape {
            what: "ansatz qubit count",
            expected: spec.n_qubits,
            found: state.n_qubits(),
        });
    }
    let n = spec.n_qubits;
    let pairs = crate::featmap::entanglement_pairs(n, spec.pattern);
    for (layer, angles) in theta.chunks(n).enumerate() {
        if layer > 0 {
            for &(c, t) in &pairs {
                state.apply_cx(c, t)?;
            }
        }
        for (q, &a) in angles.iter().enumerate() {
            state.apply_ry(q, a)?;
        }
    }
    Ok(())
}

/// `⟨ψ|U(θ)† O U(θ)|ψ⟩` for an arbitrary prepared state `ψ`.
pub fn ansatz_expectation(initial: &StateVector, theta: &[f64], spec: &AnsatzSpec, obs: &PauliZString) -> Result<f64> {
    let mut s = initial.clone();
    ansatz_apply(&mut s, theta, spec)?;
    s.expectation_z(obs)
}

/// Parameter-shift gradient of [`ansatz_expectation`] with respect to `theta`.
pub fn ansatz_weight_gradient(
    initial: &StateVector,
    theta: &[f64],
    spec: &AnsatzSpec,
    obs: &PauliZString,
) -> Result<Vec<f64>> {
    let mut shifted = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            shifted[i] = theta[i] + FRAC_PI_2;
            let plus = ansatz_expectation(initial, &shifted, spec, obs)?;
            shifted[i] = theta[i] - FRAC_PI_2;
            let minus = ansatz_expectation(initial, &shifted, spec, obs)?;
            shifted[i] = theta[i];
            Ok((plus - minus) / 2.0)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QnnModel {
    pub feature_map: FeatureMapSpec,
    pub ansatz: AnsatzSpec,
    pub weights: Vec<f64>,
    pub observable: PauliZString,
}

impl QnnModel {
    pub fn new(
        feature_map: FeatureMapSpec,
        ansatz: AnsatzSpec,
        weights: Vec<f64>,
        observable: PauliZString,
    ) -> Result<Self> {
        let model = Self {
            feature_map,
            ansatz,
            weights,
            observable,
        };
        model.validate()?;
        Ok(model)
    }

    /// Weights drawn uniformly from `[-π, π]`; observable defaults to Z on every qubit.
    pub fn init<R: Rng + ?Sized>(
        feature_map: FeatureMapSpec,
        ansatz: AnsatzSpec,
        observable: Option<PauliZString>,
        rng: &mut R,
    ) -> Result<Self> {
        let observable = match observable {
            Some(o) => o,
            None => PauliZString::all(ansatz.n_qubits())?,
        };
        let weights = (0..ansatz.num_parameters()).map(|_| rng.gen_range(-PI..=PI)).collect();
        Self::new(feature_map, ansatz, weights, observable)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.feature_map.n_qubits();
        if self.ansatz.n_qubits() != n {
            return Err(Error::Shape {
                what: "ansatz qubits vs feature map qubits",
                expected: n,
                found: self.ansatz.n_qubits(),
            });
        }
        if self.observable.n_qubits() != n {
            return Err(Error::Shape {
                what: "observable qubits vs feature map qubits",
                expected: n,
                found: self.observable.n_qubits(),
            });
        }
        if self.weights.len() != self.ansatz.num_parameters() {
            return Err(Error::Shape {
                what: "QNN weight count",
                expected: self.ansatz.num_parameters(),
                found: self.weights.len(),
            });
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numeric("QNN weights must be finite".into()));
        }
        Ok(())
    }

    pub fn n_inputs(&self) -> usize {
        self.feature_map.n_qubits()
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        let psi = encode(x, &self.feature_map)?;
        ansatz_expectation(&psi, &self.weights, &self.ansatz, &self.observable)
    }

    /// `∂f/∂θ` by the ±π/2 shift rule.
    pub fn grad_weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        let psi = encode(x, &self.feature_map)?;
        ansatz_weight_gradient(&psi, &self.weights, &self.ansatz, &self.observable)
    }

    /// `∂f/∂x`.
    ///
    /// Each encoding term is `exp(i a Z_S)`, whose derivative in `a` is exactly
    /// `f(a + π/4) - f(a - π/4)`. The angle derivatives are then pushed
    /// through `∂φ_i/∂x_i = 1` and `∂φ_ij/∂x_i = -(π - x_j)`, summed over
    /// every repetition of the encoding layer.
    pub fn grad_inputs(&self, x: &[f64]) -> Result<Vec<f64>> {
        let fm = &self.feature_map;
        let n = fm.n_qubits();
        let terms = phase_terms(x, fm)?;
        let pairs = fm.pairs();
        let mut layers = vec![terms.clone(); fm.reps()];
        let eval = |layers: &[Vec<_>]| -> Result<f64> {
            let psi = encode_layers(n, layers)?;
            ansatz_expectation(&psi, &self.weights, &self.ansatz, &self.observable)
        };

        let mut grad = vec![0.0; n];
        for r in 0..fm.reps() {
            for (k, term) in terms.iter().enumerate() {
                layers[r][k].angle = term.angle + FRAC_PI_4;
                let plus = eval(&layers)?;
                layers[r][k].angle = term.angle - FRAC_PI_4;
                let minus = eval(&layers)?;
                layers[r][k].angle = term.angle;
                let d_angle = plus - minus;
                if k < n {
                    grad[k] += d_angle;
                } else {
                    let (i, j) = pairs[k - n];
                    grad[i] -= d_angle * (PI - x[j]);
                    grad[j] -= d_angle * (PI - x[i]);
                }
            }
        }
        Ok(grad)
    }
}
