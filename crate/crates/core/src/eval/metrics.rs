use serde::{Deserialize, Serialize};

use crate::classify::ScoredPrediction;
use crate::error::{Error, Result};
use crate::Label;

/// Confusion matrix with "sensitive" as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn record(&mut self, predicted: Label, truth: Label) {
        match (predicted.is_positive(), truth.is_positive()) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn from_labels(predicted: &[Label], truth: &[Label]) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(Error::IdMismatch(format!(
                "{} predictions for {} ground-truth labels",
                predicted.len(),
                truth.len()
            )));
        }
        let mut c = ConfusionCounts::default();
        for (&p, &t) in predicted.iter().zip(truth) {
            c.record(p, t);
        }
        Ok(c)
    }

    /// The same outcomes with the roles of the two classes exchanged.
    pub fn swap_classes(&self) -> Self {
        ConfusionCounts {
            tp: self.tn,
            fp: self.fn_,
            tn: self.tp,
            fn_: self.fp,
        }
    }

    pub fn tpr(&self) -> Result<f64> {
        ratio(self.tp, self.tp + self.fn_, "no positive ground truth (tp + fn = 0)")
    }

    pub fn tnr(&self) -> Result<f64> {
        ratio(self.tn, self.tn + self.fp, "no negative ground truth (tn + fp = 0)")
    }

    pub fn precision(&self) -> Result<f64> {
        ratio(self.tp, self.tp + self.fp, "no positive predictions (tp + fp = 0)")
    }

    pub fn recall(&self) -> Result<f64> {
        self.tpr()
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, o: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts::new(self.tp + o.tp, self.fp + o.fp, self.tn + o.tn, self.fn_ + o.fn_)
    }
}

fn ratio(num: u64, den: u64, what: &'static str) -> Result<f64> {
    if den == 0 {
        Err(Error::UndefinedRate(what))
    } else {
        Ok(num as f64 / den as f64)
    }
}

/// Tallies predictions against ground truth. Both lists must list the same
/// video ids in the same order.
pub fn confusion(predictions: &[ScoredPrediction], truth: &[(String, Label)]) -> Result<ConfusionCounts> {
    if predictions.len() != truth.len() {
        return Err(Error::IdMismatch(format!(
            "{} predictions for {} ground-truth labels",
            predictions.len(),
            truth.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (p, (id, label)) in predictions.iter().zip(truth) {
        if &p.video_id != id {
            return Err(Error::IdMismatch(format!("prediction for {:?} aligned with {:?}", p.video_id, id)));
        }
        c.record(p.decided_label, *label);
    }
    Ok(c)
}

/// `(TPR + TNR) / 2`.
pub fn normalized_accuracy(c: &ConfusionCounts) -> Result<f64> {
    Ok((c.tpr()? + c.tnr()?) / 2.0)
}

/// `(1 + β²)·P·R / (β²·P + R)`.
pub fn f_beta_from(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    (1.0 + b2) * (precision * recall) / (b2 * precision + recall)
}

/// F-beta of the positive class. Zero when there are no true positives but
/// some errors; undefined when nothing is positive in truth or prediction.
pub fn f_beta(c: &ConfusionCounts, beta: f64) -> Result<f64> {
    if c.tp + c.fp == 0 && c.tp + c.fn_ == 0 {
        return Err(Error::FUndefined);
    }
    if c.tp == 0 {
        return Ok(0.0);
    }
    Ok(f_beta_from(c.precision()?, c.recall()?, beta))
}

pub fn f2(c: &ConfusionCounts) -> Result<f64> {
    f_beta(c, 2.0)
}
