use std::time::Instant;

use rayon::prelude::*;

use super::metrics::{accuracy, mean, r2_scores, std_dev};
use super::{
    select_best, BestCell, Cell, CellStatus, DatasetInfo, ElementPrediction, FullFit, GridSpec, LabeledData, Protocol,
    Report, TaskKind, TrialResult, SCHEMA_VERSION, TIE_BREAK,
};
use crate::dataset::{make_splits, ScalerParams, SplitPlan, TargetScaler};
use crate::error::{Error, Result};
use crate::hybrid::{fit_hybrid, Objective};
use crate::qkernel::{cross_matrix, gram_matrix, KernelMatrix};
use crate::svm::{predict_svc, predict_svr, train_svc, train_svr, SmoParams};

fn svc_targets(labels: &[u8]) -> Vec<f64> {
    labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect()
}

fn split_seed(sweep_seed: u64, split: usize) -> u64 {
    sweep_seed.wrapping_mul(1_000_003).wrapping_add(split as u64)
}

/// Training Gram matrix and validation-by-training cross kernel of one split,
/// with the feature scaler fit on the training rows only.
pub fn fold_kernels(
    cell: &Cell,
    data: &LabeledData,
    plan: &SplitPlan,
    scale_max: f64,
) -> Result<(KernelMatrix, KernelMatrix)> {
    let (xtr, xva) = scale_fold(data, &plan.train, &plan.validation, scale_max)?;
    let fm = cell.feature_map()?;
    Ok((gram_matrix(&xtr, &fm)?, cross_matrix(&xva, &xtr, &fm)?))
}

type Rows = Vec<Vec<f64>>;

fn scale_fold(data: &LabeledData, train: &[usize], eval: &[usize], scale_max: f64) -> Result<(Rows, Rows)> {
    let raw_train = data.rows(train);
    let scaler = ScalerParams::fit(&raw_train, scale_max)?;
    Ok((scaler.transform(&raw_train)?, scaler.transform(&data.rows(eval))?))
}

/// Trains on `train` and predicts `eval`. Classification predictions are
/// 0/1 labels; regression predictions are in SFE units.
fn fit_predict(
    task: TaskKind,
    cell: &Cell,
    data: &LabeledData,
    protocol: &Protocol,
    train: &[usize],
    eval: &[usize],
    seed: u64,
) -> Result<Vec<f64>> {
    let (xtr, xev) = scale_fold(data, train, eval, protocol.scale_max)?;
    match task {
        TaskKind::Svc | TaskKind::Svr => {
            let fm = cell.feature_map()?;
            let k = gram_matrix(&xtr, &fm)?;
            let kx = cross_matrix(&xev, &xtr, &fm)?;
            let params = SmoParams::new(cell.require_c()?).with_tol(protocol.smo_tol);
            if task == TaskKind::Svc {
                let y = svc_targets(&train.iter().map(|&i| data.labels[i]).collect::<Vec<_>>());
                let model = train_svc(&k, &y, &params)?;
                let pred = predict_svc(&model, &kx)?;
                Ok(pred.labels.iter().map(|&l| if l > 0 { 1.0 } else { 0.0 }).collect())
            } else {
                let t: Vec<f64> = train.iter().map(|&i| data.sfe[i]).collect();
                let model = train_svr(&k, &t, cell.require_epsilon()?, &params)?;
                predict_svr(&model, &kx)
            }
        }
        TaskKind::Qnn | TaskKind::HybridQnn => {
            let pure = task == TaskKind::Qnn;
            let mut config = protocol.training;
            config.seed = seed;
            match protocol.objective {
                Objective::Classification => {
                    let t: Vec<f64> = train.iter().map(|&i| f64::from(data.labels[i])).collect();
                    let out = fit_hybrid(
                        &xtr,
                        &t,
                        cell.feature_map()?,
                        cell.ansatz()?,
                        protocol.objective,
                        pure,
                        &config,
                    )?;
                    xev.iter().map(|x| out.model.classify(x).map(f64::from)).collect()
                }
                Objective::Regression => {
                    let raw: Vec<f64> = train.iter().map(|&i| data.sfe[i]).collect();
                    let scaler = TargetScaler::fit(&raw)?;
                    let t: Vec<f64> = raw.iter().map(|&v| scaler.scale(v)).collect();
                    let out = fit_hybrid(
                        &xtr,
                        &t,
                        cell.feature_map()?,
                        cell.ansatz()?,
                        protocol.objective,
                        pure,
                        &config,
                    )?;
                    xev.iter()
                        .map(|x| out.model.forward(x).map(|o| scaler.unscale(o)))
                        .collect()
                }
            }
        }
    }
}

fn score(task: TaskKind, protocol: &Protocol, data: &LabeledData, idx: &[usize], pred: &[f64]) -> Result<f64> {
    if task.is_classification(protocol.objective) {
        let actual: Vec<f64> = idx.iter().map(|&i| f64::from(data.labels[i])).collect();
        accuracy(pred, &actual)
    } else {
        let actual: Vec<f64> = idx.iter().map(|&i| data.sfe[i]).collect();
        Ok(r2_scores(pred, &actual)?.coefficient_of_determination)
    }
}

/// Runs every split of every sweep for one cell. Any split error marks the
/// whole cell failed with that error as its reason.
pub fn evaluate_cell(task: TaskKind, cell: &Cell, data: &LabeledData, protocol: &Protocol, seed: u64) -> TrialResult {
    let start = Instant::now();
    let outcome = (|| -> Result<(Vec<f64>, Vec<f64>)> {
        protocol.validate()?;
        let mut scores = Vec::new();
        let mut sweep_means = Vec::new();
        for r in 0..protocol.sweeps {
            let s = Protocol::sweep_seed(seed, r);
            let splits = make_splits(data.len(), protocol.scheme, s)?;
            let mut sweep = Vec::with_capacity(splits.len());
            for plan in &splits {
                let pred = fit_predict(
                    task,
                    cell,
                    data,
                    protocol,
                    &plan.train,
                    &plan.validation,
                    split_seed(s, plan.index),
                )
                .and_then(|p| score(task, protocol, data, &plan.validation, &p))
                .map_err(|e| Error::Numeric(format!("sweep seed {s}, split {}: {e}", plan.index)))?;
                sweep.push(pred);
            }
            sweep_means.push(mean(&sweep));
            scores.extend(sweep);
        }
        Ok((scores, sweep_means))
    })();
    let wall_time_ms = start.elapsed().as_millis();
    match outcome {
        Ok((scores, sweep_means)) => TrialResult {
            cell: *cell,
            status: CellStatus::Ok,
            reason: None,
            mean: Some(mean(&scores)),
            std: Some(std_dev(&scores)),
            scores,
            sweep_means,
            wall_time_ms,
        },
        Err(e) => TrialResult {
            cell: *cell,
            status: CellStatus::Failed,
            reason: Some(e.to_string()),
            scores: Vec::new(),
            sweep_means: Vec::new(),
            mean: None,
            std: None,
            wall_time_ms,
        },
    }
}

/// Trains on all samples and predicts them back.
pub fn fit_full(task: TaskKind, cell: &Cell, data: &LabeledData, protocol: &Protocol, seed: u64) -> FullFit {
    let all: Vec<usize> = (0..data.len()).collect();
    let classification = task.is_classification(protocol.objective);
    let fitted = fit_predict(task, cell, data, protocol, &all, &all, seed).and_then(|pred| {
        let actual: Vec<f64> = if classification {
            data.labels.iter().map(|&l| f64::from(l)).collect()
        } else {
            data.sfe.clone()
        };
        let (acc, r2) = if classification {
            (Some(accuracy(&pred, &actual)?), None)
        } else {
            (None, Some(r2_scores(&pred, &actual)?))
        };
        let predictions = data
            .elements
            .iter()
            .zip(actual.iter().zip(&pred))
            .map(|(e, (&a, &p))| ElementPrediction {
                element: e.clone(),
                actual: a,
                predicted: p,
            })
            .collect();
        Ok((acc, r2, predictions))
    });
    match fitted {
        Ok((accuracy, r2, predictions)) => FullFit {
            cell: *cell,
            status: CellStatus::Ok,
            reason: None,
            accuracy,
            r2,
            predictions,
        },
        Err(e) => FullFit {
            cell: *cell,
            status: CellStatus::Failed,
            reason: Some(e.to_string()),
            accuracy: None,
            r2: None,
            predictions: Vec::new(),
        },
    }
}

/// Evaluates every grid cell in parallel on the current rayon pool, keeping
/// grid order, then fits the selected cells on the full dataset.
pub fn run_grid(
    task: TaskKind,
    grid: &GridSpec,
    data: &LabeledData,
    protocol: &Protocol,
    seed: u64,
    fingerprint: &str,
) -> Result<Report> {
    protocol.validate()?;
    let cells = grid.cells(task)?;
    let results: Vec<TrialResult> = cells
        .par_iter()
        .map(|cell| evaluate_cell(task, cell, data, protocol, seed))
        .collect();
    if results.iter().all(|r| !r.is_ok()) {
        let reason = results[0].reason.clone().unwrap_or_default();
        return Err(Error::Numeric(format!(
            "all {} grid cells failed; first failure: {reason}",
            results.len()
        )));
    }
    let best = select_best(&results).map(|index| BestCell {
        index,
        cell: results[index].cell,
        mean: results[index].mean.unwrap_or(f64::NAN),
        tie_break: TIE_BREAK.to_string(),
    });
    let full_cells: Vec<Cell> = match task {
        TaskKind::Svc | TaskKind::Svr => best.iter().map(|b| b.cell).collect(),
        TaskKind::Qnn | TaskKind::HybridQnn => results.iter().filter(|r| r.is_ok()).map(|r| r.cell).collect(),
    };
    let full_data = full_cells
        .par_iter()
        .map(|cell| fit_full(task, cell, data, protocol, seed))
        .collect();
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        task,
        metric: if task.is_classification(protocol.objective) {
            "accuracy".into()
        } else {
            "coefficient_of_determination".into()
        },
        dataset: DatasetInfo {
            fingerprint: fingerprint.to_string(),
            n_samples: data.len(),
            n_label_one: data.labels.iter().filter(|&&l| l == 1).count(),
        },
        seed,
        sweep_seeds: (0..protocol.sweeps).map(|r| Protocol::sweep_seed(seed, r)).collect(),
        protocol: *protocol,
        grid: grid.clone(),
        results,
        best,
        full_data,
        config: None,
    })
}
