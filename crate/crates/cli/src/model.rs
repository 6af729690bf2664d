use serde::{Deserialize, Serialize};

use qkml_core::experiment::{accuracy, r2_scores, Cell, LabeledData, Protocol, TaskKind};
use qkml_core::hybrid::{fit_hybrid, TrainOutcome};
use qkml_core::qkernel::{cross_matrix, gram_matrix};
use qkml_core::svm::{predict_svc, predict_svr, train_svc, train_svr};
use qkml_core::{
    Error, FeatureMapSpec, HybridModel, LabelConvention, Objective, Result, ScalerParams, SmoParams, SvcModel,
    SvrModel, TargetScaler,
};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelBody {
    Svc {
        feature_map: FeatureMapSpec,
        model: SvcModel,
        /// Scaled training rows the dual coefficients refer to.
        train_features: Vec<Vec<f64>>,
    },
    Svr {
        feature_map: FeatureMapSpec,
        model: SvrModel,
        train_features: Vec<Vec<f64>>,
    },
    Hybrid {
        model: HybridModel,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target_scaler: Option<TargetScaler>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub schema_version: u32,
    pub tool_version: String,
    pub task: TaskKind,
    pub cell: Cell,
    pub label_threshold: f64,
    pub label_convention: LabelConvention,
    pub scaler: ScalerParams,
    /// Accuracy or coefficient of determination on the training data.
    pub training_score: f64,
    /// Largest |actual - predicted| on the training data (SFE units or labels).
    pub training_max_abs_residual: f64,
    pub body: ModelBody,
}

impl SavedModel {
    pub fn is_classification(&self) -> bool {
        match &self.body {
            ModelBody::Svc { .. } => true,
            ModelBody::Svr { .. } => false,
            ModelBody::Hybrid { model, .. } => model.objective == Objective::Classification,
        }
    }

    /// Predictions for raw (unscaled) feature rows: 0/1 labels for
    /// classifiers, SFE in mJ/m² for regressors.
    pub fn predict(&self, raw: &[Vec<f64>]) -> Result<Vec<f64>> {
        let x = self.scaler.transform(raw)?;
        match &self.body {
            ModelBody::Svc {
                feature_map,
                model,
                train_features,
            } => {
                let k = cross_matrix(&x, train_features, feature_map)?;
                Ok(predict_svc(model, &k)?
                    .labels
                    .iter()
                    .map(|&l| if l > 0 { 1.0 } else { 0.0 })
                    .collect())
            }
            ModelBody::Svr {
                feature_map,
                model,
                train_features,
            } => predict_svr(model, &cross_matrix(&x, train_features, feature_map)?),
            ModelBody::Hybrid { model, target_scaler } => x
                .iter()
                .map(|row| match model.objective {
                    Objective::Classification => model.classify(row).map(f64::from),
                    Objective::Regression => {
                        let s = target_scaler
                            .as_ref()
                            .ok_or_else(|| Error::Config("regression model without a target scaler".into()))?;
                        model.forward(row).map(|o| s.unscale(o))
                    }
                })
                .collect(),
        }
    }
}

/// Fits one cell on every sample. Returns the QNN loss history when there is one.
pub fn train_model(
    task: TaskKind,
    cell: &Cell,
    data: &LabeledData,
    protocol: &Protocol,
    seed: u64,
) -> Result<(SavedModel, Option<TrainOutcome>)> {
    let scaler = ScalerParams::fit(&data.features, protocol.scale_max)?;
    let x = scaler.transform(&data.features)?;
    let mut outcome = None;
    let body = match task {
        TaskKind::Svc | TaskKind::Svr => {
            let fm = cell.feature_map()?;
            let k = gram_matrix(&x, &fm)?;
            let c = cell
                .c
                .ok_or_else(|| Error::Config("SVM training needs a C value".into()))?;
            let params = SmoParams::new(c).with_tol(protocol.smo_tol);
            if task == TaskKind::Svc {
                let y: Vec<f64> = data.labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
                ModelBody::Svc {
                    feature_map: fm,
                    model: train_svc(&k, &y, &params)?,
                    train_features: x,
                }
            } else {
                let eps = cell
                    .epsilon
                    .ok_or_else(|| Error::Config("SVR training needs an epsilon value".into()))?;
                ModelBody::Svr {
                    feature_map: fm,
                    model: train_svr(&k, &data.sfe, eps, &params)?,
                    train_features: x,
                }
            }
        }
        TaskKind::Qnn | TaskKind::HybridQnn => {
            let mut config = protocol.training;
            config.seed = seed;
            let (targets, target_scaler) = match protocol.objective {
                Objective::Classification => (data.labels.iter().map(|&l| f64::from(l)).collect(), None),
                Objective::Regression => {
                    let s = TargetScaler::fit(&data.sfe)?;
                    (data.sfe.iter().map(|&v| s.scale(v)).collect::<Vec<_>>(), Some(s))
                }
            };
            let out = fit_hybrid(
                &x,
                &targets,
                cell.feature_map()?,
                cell.ansatz()?,
                protocol.objective,
                task == TaskKind::Qnn,
                &config,
            )?;
            let model = out.model.clone();
            outcome = Some(out);
            ModelBody::Hybrid { model, target_scaler }
        }
    };
    let mut saved = SavedModel {
        schema_version: MODEL_SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        task,
        cell: *cell,
        label_threshold: protocol.label_threshold,
        label_convention: protocol.label_convention,
        scaler,
        training_score: 0.0,
        training_max_abs_residual: 0.0,
        body,
    };
    let pred = saved.predict(&data.features)?;
    let actual: Vec<f64> = if saved.is_classification() {
        data.labels.iter().map(|&l| f64::from(l)).collect()
    } else {
        data.sfe.clone()
    };
    saved.training_score = if saved.is_classification() {
        accuracy(&pred, &actual)?
    } else {
        r2_scores(&pred, &actual)?.coefficient_of_determination
    };
    saved.training_max_abs_residual = pred.iter().zip(&actual).map(|(p, a)| (p - a).abs()).fold(0.0, f64::max);
    Ok((saved, outcome))
}
