//! Hyperparameter sweeps with repeated cross-validation, metrics and
//! plot-ready outputs.

mod metrics;
mod output;
mod run;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{
    derive_labels, LabelConvention, Sample, SplitScheme, DEFAULT_SCALE_MAX, MG_SFE_THRESHOLD, N_FEATURES,
};
use crate::error::{Error, Result};
use crate::featmap::{EntanglementPattern, FeatureMapSpec};
use crate::hybrid::{Objective, TrainConfig};
use crate::qnn::AnsatzSpec;

pub use metrics::{accuracy, mean, r2_scores, std_dev, R2Scores};
pub use output::{emit_outputs, heatmap_csv};
pub use run::{evaluate_cell, fit_full, fold_kernels, run_grid};

pub const SCHEMA_VERSION: u32 = 1;

/// Ordering used to break ties between equally scored cells.
pub const TIE_BREAK: &str =
    "smaller reps, then smaller C, then entanglement circular<full<linear, then smaller epsilon";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Svc,
    Svr,
    Qnn,
    HybridQnn,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [Self::Svc, Self::Svr, Self::Qnn, Self::HybridQnn];

    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKind::Svc => "svc",
            TaskKind::Svr => "svr",
            TaskKind::Qnn => "qnn",
            TaskKind::HybridQnn => "hybrid-qnn",
        }
    }

    /// Whether cells are scored by accuracy rather than R².
    pub fn is_classification(&self, objective: Objective) -> bool {
        match self {
            TaskKind::Svc => true,
            TaskKind::Svr => false,
            TaskKind::Qnn | TaskKind::HybridQnn => objective == Objective::Classification,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskKind::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown task `{s}` (expected svc, svr, qnn or hybrid-qnn)")))
    }
}

/// One point of a hyperparameter grid. `c` is set for SVM tasks and
/// `epsilon` for SVR only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub reps: usize,
    pub entanglement: EntanglementPattern,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl Cell {
    pub fn feature_map(&self) -> Result<FeatureMapSpec> {
        FeatureMapSpec::new(N_FEATURES, self.reps, self.entanglement)
    }

    /// Ansatz with the same depth and pattern as the feature map.
    pub fn ansatz(&self) -> Result<AnsatzSpec> {
        AnsatzSpec::new(N_FEATURES, self.reps, self.entanglement)
    }

    pub(crate) fn require_c(&self) -> Result<f64> {
        self.c.ok_or_else(|| Error::config("SVM cell without a C value"))
    }

    pub(crate) fn require_epsilon(&self) -> Result<f64> {
        self.epsilon
            .ok_or_else(|| Error::config("SVR cell without an epsilon value"))
    }

    /// Key where smaller sorts first under the tie-break rule.
    fn tie_key(&self) -> (usize, f64, EntanglementPattern, f64) {
        (
            self.reps,
            self.c.unwrap_or(0.0),
            self.entanglement,
            self.epsilon.unwrap_or(0.0),
        )
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "reps={} entanglement={}", self.reps, self.entanglement)?;
        if let Some(c) = self.c {
            write!(f, " C={c}")?;
        }
        if let Some(e) = self.epsilon {
            write!(f, " epsilon={e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub reps: Vec<usize>,
    pub entanglement: Vec<EntanglementPattern>,
    #[serde(default)]
    pub c: Vec<f64>,
    #[serde(default)]
    pub epsilon: Vec<f64>,
}

impl GridSpec {
    pub fn default_for(task: TaskKind) -> Self {
        let svm = GridSpec {
            reps: vec![1, 2, 3, 4, 5],
            entanglement: EntanglementPattern::ALL.to_vec(),
            c: vec![0.1, 1.0, 10.0, 100.0],
            epsilon: Vec::new(),
        };
        match task {
            TaskKind::Svc => svm,
            TaskKind::Svr => GridSpec {
                epsilon: vec![0.01, 0.001],
                ..svm
            },
            TaskKind::Qnn | TaskKind::HybridQnn => GridSpec {
                reps: vec![1, 2, 3],
                entanglement: vec![EntanglementPattern::Full],
                c: Vec::new(),
                epsilon: Vec::new(),
            },
        }
    }

    /// Cells in grid order: entanglement, then reps, then C, then epsilon.
    /// Options a task does not use are ignored.
    pub fn cells(&self, task: TaskKind) -> Result<Vec<Cell>> {
        if self.reps.is_empty() || self.entanglement.is_empty() {
            return Err(Error::config("grid needs at least one reps and one entanglement value"));
        }
        if let Some(r) = self.reps.iter().find(|&&r| r < 1) {
            return Err(Error::config(format!("reps must be at least 1, got {r}")));
        }
        let uses_c = matches!(task, TaskKind::Svc | TaskKind::Svr);
        let uses_eps = task == TaskKind::Svr;
        let cs: Vec<Option<f64>> = if uses_c {
            if self.c.is_empty() {
                return Err(Error::config("SVM grid needs at least one C value"));
            }
            if let Some(c) = self.c.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
                return Err(Error::config(format!("C must be positive, got {c}")));
            }
            self.c.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        let eps: Vec<Option<f64>> = if uses_eps {
            if self.epsilon.is_empty() {
                return Err(Error::config("SVR grid needs at least one epsilon value"));
            }
            if let Some(e) = self.epsilon.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
                return Err(Error::config(format!("epsilon must be non-negative, got {e}")));
            }
            self.epsilon.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        let mut cells = Vec::new();
        for &entanglement in &self.entanglement {
            for &reps in &self.reps {
                for &c in &cs {
                    for &epsilon in &eps {
                        cells.push(Cell {
                            reps,
                            entanglement,
                            c,
                            epsilon,
                        });
                    }
                }
            }
        }
        Ok(cells)
    }
}

/// How a cell is scored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub scheme: SplitScheme,
    /// Number of master seeds the whole split scheme is repeated with.
    pub sweeps: usize,
    pub scale_max: f64,
    pub smo_tol: f64,
    pub training: TrainConfig,
    /// Loss used by the QNN tasks.
    pub objective: Objective,
    pub label_threshold: f64,
    pub label_convention: LabelConvention,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            scheme: SplitScheme::default(),
            sweeps: 3,
            scale_max: DEFAULT_SCALE_MAX,
            smo_tol: 1e-3,
            training: TrainConfig {
                epochs: 100,
                ..TrainConfig::default()
            },
            objective: Objective::Classification,
            label_threshold: MG_SFE_THRESHOLD,
            label_convention: LabelConvention::default(),
        }
    }
}

impl Protocol {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 {
            return Err(Error::config("at least one sweep is required"));
        }
        if !(self.scale_max > 0.0 && self.scale_max.is_finite()) {
            return Err(Error::config(format!(
                "scale max must be positive, got {}",
                self.scale_max
            )));
        }
        if self.smo_tol.is_nan() || self.smo_tol <= 0.0 {
            return Err(Error::config(format!(
                "SMO tolerance must be positive, got {}",
                self.smo_tol
            )));
        }
        Ok(())
    }

    /// Master seed of sweep `r`.
    pub fn sweep_seed(seed: u64, r: usize) -> u64 {
        seed.wrapping_add(r as u64)
    }
}

/// Dataset columns used by the harness, with labels derived once.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub elements: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub sfe: Vec<f64>,
    pub labels: Vec<u8>,
}

impl LabeledData {
    pub fn new(samples: &[Sample], threshold: f64, convention: LabelConvention) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::config("dataset is empty"));
        }
        let mut samples = samples.to_vec();
        derive_labels(&mut samples, threshold, convention)?;
        let sfe = samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.sfe
                    .ok_or_else(|| Error::config(format!("sample {i} ({}) has no SFE value", s.element)))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            elements: samples.iter().map(|s| s.element.clone()).collect(),
            features: samples.iter().map(Sample::features).collect(),
            sfe,
            labels: samples.iter().map(|s| s.label.unwrap_or(0)).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub(crate) fn rows(&self, idx: &[usize]) -> Vec<Vec<f64>> {
        idx.iter().map(|&i| self.features[i].clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub cell: Cell,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Every validation score, sweep-major.
    pub scores: Vec<f64>,
    /// Mean score of each sweep.
    pub sweep_means: Vec<f64>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Kept out of serialized reports so reruns stay byte-identical.
    #[serde(skip)]
    pub wall_time_ms: u128,
}

impl TrialResult {
    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestCell {
    /// Position in `Report::results`.
    pub index: usize,
    pub cell: Cell,
    pub mean: f64,
    pub tie_break: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementPrediction {
    pub element: String,
    pub actual: f64,
    pub predicted: f64,
}

/// A model trained and scored on the complete dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullFit {
    pub cell: Cell,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r2: Option<R2Scores>,
    pub predictions: Vec<ElementPrediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub fingerprint: String,
    pub n_samples: usize,
    pub n_label_one: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: String,
    pub task: TaskKind,
    /// Score used for cells: `accuracy` or `coefficient_of_determination`.
    pub metric: String,
    pub dataset: DatasetInfo,
    pub seed: u64,
    /// Master seed of each sweep.
    pub sweep_seeds: Vec<u64>,
    pub protocol: Protocol,
    pub grid: GridSpec,
    pub results: Vec<TrialResult>,
    pub best: Option<BestCell>,
    /// Full-data fits: the best cell for SVM tasks, every successful cell
    /// for QNN tasks.
    pub full_data: Vec<FullFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl Report {
    pub fn failed_cells(&self) -> usize {
        self.results.iter().filter(|r| !r.is_ok()).count()
            + self.full_data.iter().filter(|f| f.status == CellStatus::Failed).count()
    }
}

/// Index of the best successful cell under the tie-break rule.
pub fn select_best(results: &[TrialResult]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in results.iter().enumerate() {
        let Some(m) = r.mean.filter(|_| r.is_ok()) else {
            continue;
        };
        best = match best {
            None => Some((i, m)),
            Some((j, bm)) => {
                let better = m > bm
                    || (m == bm
                        && r.cell.tie_key().partial_cmp(&results[j].cell.tie_key()) == Some(std::cmp::Ordering::Less));
                if better {
                    Some((i, m))
                } else {
                    Some((j, bm))
                }
            }
        };
    }
    best.map(|(i, _)| i)
}
