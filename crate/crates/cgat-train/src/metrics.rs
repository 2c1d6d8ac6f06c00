//! Classification metrics: support-weighted precision/recall/F1 from a
//! one-vs-rest confusion matrix, plus ordinal mean absolute error.

use cgat_model::Model;

use crate::{Dataset, Result, TrainError};

#[derive(Clone, Debug)]
pub struct Metrics {
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub mae: f64,
    pub per_class_f1: Vec<f64>,
    pub confusion: Vec<Vec<usize>>,
}

/// Score predictions against truth. Each class contributes its one-vs-rest
/// F1 = TP / (TP + (FP + FN) / 2), weighted by the class's share of the
/// truth, so classes absent from the truth carry zero weight. MAE reads
/// the labels as ordinal stage indices.
pub fn evaluate_predictions(
    truth: &[usize],
    predicted: &[usize],
    classes: usize,
) -> Result<Metrics> {
    if truth.is_empty() {
        return Err(TrainError::EmptyEvalSet);
    }
    if truth.len() != predicted.len() {
        return Err(TrainError::DataMismatch {
            detail: format!("{} truth labels vs {} predictions", truth.len(), predicted.len()),
        });
    }
    if let Some(&bad) = truth.iter().chain(predicted).find(|&&l| l >= classes) {
        return Err(TrainError::DataMismatch {
            detail: format!("label {bad} outside {classes} classes"),
        });
    }
    let mut confusion = vec![vec![0usize; classes]; classes];
    let mut abs_err = 0.0;
    for (&t, &p) in truth.iter().zip(predicted) {
        confusion[t][p] += 1;
        abs_err += (t as f64 - p as f64).abs();
    }
    let n = truth.len() as f64;
    let mut per_class_f1 = vec![0.0; classes];
    let mut weighted_precision = 0.0;
    let mut weighted_recall = 0.0;
    let mut weighted_f1 = 0.0;
    for c in 0..classes {
        let tp = confusion[c][c] as f64;
        let support: usize = confusion[c].iter().sum();
        let fn_ = support as f64 - tp;
        let fp = (0..classes).map(|t| confusion[t][c]).sum::<usize>() as f64 - tp;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let denom = tp + 0.5 * (fp + fn_);
        per_class_f1[c] = if denom > 0.0 { tp / denom } else { 0.0 };
        let weight = support as f64 / n;
        weighted_precision += weight * precision;
        weighted_recall += weight * recall;
        weighted_f1 += weight * per_class_f1[c];
    }
    Ok(Metrics {
        weighted_precision,
        weighted_recall,
        weighted_f1,
        mae: abs_err / n,
        per_class_f1,
        confusion,
    })
}

/// Run the model over the selected samples in evaluation mode and score
/// the argmax predictions.
pub fn evaluate(
    model: &Model,
    data: &Dataset,
    indices: &[usize],
    batch_size: usize,
) -> Result<Metrics> {
    if indices.is_empty() {
        return Err(TrainError::EmptyEvalSet);
    }
    let cls = model.wants_cls().then(|| model.config().cls_mode);
    let mut predicted = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(batch_size.max(1)) {
        let batch = data.batch(chunk, cls)?;
        predicted.extend(model.predict(&batch)?.labels);
    }
    evaluate_predictions(&data.labels_of(indices), &predicted, data.classes)
}
