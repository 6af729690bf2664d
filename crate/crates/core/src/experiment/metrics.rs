use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of positions where `predictions` and `labels` agree exactly.
pub fn accuracy<T: PartialEq>(predictions: &[T], labels: &[T]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape {
            what: "accuracy predictions vs labels",
            expected: labels.len(),
            found: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::Metric("accuracy of an empty set".into()));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct R2Scores {
    /// Squared Pearson correlation between predictions and targets.
    pub pearson_r2: f64,
    /// `1 - SS_res / SS_tot`.
    pub coefficient_of_determination: f64,
}

/// Both R² flavours. A constant prediction vector has zero correlation.
pub fn r2_scores(predictions: &[f64], targets: &[f64]) -> Result<R2Scores> {
    if predictions.len() != targets.len() {
        return Err(Error::Shape {
            what: "r2 predictions vs targets",
            expected: targets.len(),
            found: predictions.len(),
        });
    }
    let m = targets.len();
    if m < 2 {
        return Err(Error::Metric(format!("R² needs at least 2 samples, got {m}")));
    }
    let t_mean = mean(targets);
    let p_mean = mean(predictions);
    let ss_tot: f64 = targets.iter().map(|t| (t - t_mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Metric("zero target variance".into()));
    }
    let ss_res: f64 = predictions.iter().zip(targets).map(|(p, t)| (t - p).powi(2)).sum();
    let ss_pred: f64 = predictions.iter().map(|p| (p - p_mean).powi(2)).sum();
    let cov: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - p_mean) * (t - t_mean))
        .sum();
    let pearson_r2 = if ss_pred == 0.0 {
        0.0
    } else {
        (cov * cov / (ss_pred * ss_tot)).min(1.0)
    };
    Ok(R2Scores {
        pearson_r2,
        coefficient_of_determination: 1.0 - ss_res / ss_tot,
    })
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let mu = mean(xs);
    (xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}
