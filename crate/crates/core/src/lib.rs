//! Quantum-kernel SVMs and estimator QNNs on an exact statevector simulator,
//! with an experiment harness for small materials datasets.
//!
//! Qubit 0 is the least-significant bit of every basis index.

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod featmap;
pub mod hybrid;
pub mod qkernel;
pub mod qnn;
pub mod qsim;
pub mod svm;

pub use dataset::{LabelConvention, Sample, ScalerParams, SplitPlan, SplitScheme, TargetScaler};
pub use error::{Error, Result};
pub use featmap::{EntanglementPattern, FeatureMapSpec};
pub use hybrid::{AffineLayer, AngleMap, HybridModel, Objective, Optimizer, TrainConfig, Trainable};
pub use qkernel::KernelMatrix;
pub use qnn::{AnsatzSpec, QnnModel};
pub use qsim::{PauliZString, StateVector};
pub use svm::{SmoParams, SvcModel, SvrModel};
