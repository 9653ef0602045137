//! Classification metrics (balanced accuracy, accuracy, F1), dataset
//! evaluation and CSV reporting. Class 1 is the positive class throughout.

use std::path::Path;

use crate::data::{Dataset, Featurized};
use crate::error::{Error, Result};
use crate::model::{featurize, predict, ModelSpec};
use crate::params::ParameterVector;

/// Binary confusion counts with class 1 as positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn record(&mut self, predicted: u8, actual: u8) {
        match (predicted, actual) {
            (1, 1) => self.tp += 1,
            (1, 0) => self.fp += 1,
            (0, 0) => self.tn += 1,
            _ => self.fn_ += 1,
        }
    }
}

/// Metric bundle over `n` examples; every metric lies in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub ba: f64,
    pub acc: f64,
    pub f1: f64,
    pub n: usize,
}

/// Mean of sensitivity and specificity. A side with a zero denominator
/// contributes the neutral value 0.5 so single-class sets do not abort
/// sweeps.
pub fn balanced_accuracy(cm: &ConfusionMatrix) -> f64 {
    let sens = if cm.tp + cm.fn_ > 0 {
        cm.tp as f64 / (cm.tp + cm.fn_) as f64
    } else {
        0.5
    };
    let spec = if cm.tn + cm.fp > 0 {
        cm.tn as f64 / (cm.tn + cm.fp) as f64
    } else {
        0.5
    };
    0.5 * (sens + spec)
}

pub fn accuracy(cm: &ConfusionMatrix) -> f64 {
    let total = cm.total();
    if total == 0 {
        return 0.0;
    }
    (cm.tp + cm.tn) as f64 / total as f64
}

/// Positive-class F1; 0 by convention when the denominator vanishes.
pub fn f1(cm: &ConfusionMatrix) -> f64 {
    let denom = 2 * cm.tp + cm.fp + cm.fn_;
    if denom == 0 {
        return 0.0;
    }
    2.0 * cm.tp as f64 / denom as f64
}

/// Confusion counts of `params` over an already-featurized dataset.
pub fn confusion_featurized(
    params: &ParameterVector,
    data: &Featurized,
) -> Result<ConfusionMatrix> {
    if data.is_empty() {
        return Err(Error::Data("cannot evaluate on an empty dataset".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (features, label) in data {
        let pred = predict(params, features)?;
        cm.record(pred.label, *label);
    }
    Ok(cm)
}

/// Confusion counts of `params` over a text dataset.
pub fn confusion(
    params: &ParameterVector,
    spec: &ModelSpec,
    ds: &Dataset,
) -> Result<ConfusionMatrix> {
    if ds.is_empty() {
        return Err(Error::Data("cannot evaluate on an empty dataset".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for e in &ds.examples {
        let pred = predict(params, &featurize(&e.text, spec))?;
        cm.record(pred.label, e.label);
    }
    Ok(cm)
}

pub fn metrics_from(cm: &ConfusionMatrix) -> Metrics {
    Metrics {
        ba: balanced_accuracy(cm),
        acc: accuracy(cm),
        f1: f1(cm),
        n: cm.total(),
    }
}

/// Balanced accuracy, accuracy and F1 of `params` on `ds`.
pub fn evaluate(params: &ParameterVector, spec: &ModelSpec, ds: &Dataset) -> Result<Metrics> {
    Ok(metrics_from(&confusion(params, spec, ds)?))
}

pub fn evaluate_featurized(params: &ParameterVector, data: &Featurized) -> Result<Metrics> {
    Ok(metrics_from(&confusion_featurized(params, data)?))
}

/// One validation checkpoint in a training history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationPoint {
    pub iter: usize,
    pub metrics: Metrics,
}

fn metrics_row(m: &Metrics) -> String {
    format!("{:.6},{:.6},{:.6},{}", m.ba, m.acc, m.f1, m.n)
}

/// Write the validation history as CSV: header `iter,ba,acc,f1,n`, one row
/// per validation point, 6-decimal fixed formatting, LF line endings.
pub fn report_csv(history: &[ValidationPoint], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("iter,ba,acc,f1,n\n");
    for p in history {
        out.push_str(&format!("{},{}\n", p.iter, metrics_row(&p.metrics)));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Write a single metrics row as CSV with header `ba,acc,f1,n`.
pub fn final_metrics_csv(metrics: &Metrics, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format!("ba,acc,f1,n\n{}\n", metrics_row(metrics)))?;
    Ok(())
}
