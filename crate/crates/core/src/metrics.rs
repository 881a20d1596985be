//! Binary classification metrics.
//!
//! The ironic class (label 1) is the positive class throughout. Any metric
//! with a zero denominator is reported as 0.0 rather than NaN so that runs on
//! degenerate predictions still produce comparable reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Confusion counts plus the derived scalar metrics for one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub false_neg: u64,
    pub tn: u64,
}

impl MetricsReport {
    /// Computes all metrics from aligned prediction / gold label slices.
    ///
    /// Labels must be 0 or 1; the slices must be non-empty and equal length.
    pub fn from_predictions(predicted: &[u8], gold: &[u8]) -> Result<Self> {
        if predicted.len() != gold.len() {
            return Err(Error::InvalidArgument(format!(
                "prediction/label length mismatch: {} vs {}",
                predicted.len(),
                gold.len()
            )));
        }
        if predicted.is_empty() {
            return Err(Error::InvalidArgument(
                "cannot score an empty prediction set".into(),
            ));
        }
        let (mut tp, mut fp, mut false_neg, mut tn) = (0u64, 0u64, 0u64, 0u64);
        for (&p, &y) in predicted.iter().zip(gold) {
            if p > 1 || y > 1 {
                return Err(Error::InvalidArgument(format!(
                    "labels must be 0 or 1, got predicted={p} gold={y}"
                )));
            }
            match (p, y) {
                (1, 1) => tp += 1,
                (1, 0) => fp += 1,
                (0, 1) => false_neg += 1,
                (0, 0) => tn += 1,
                _ => unreachable!(),
            }
        }
        Ok(Self::from_counts(tp, fp, false_neg, tn))
    }

    /// Computes the derived metrics from raw confusion counts.
    pub fn from_counts(tp: u64, fp: u64, false_neg: u64, tn: u64) -> Self {
        let total = tp + fp + false_neg + tn;
        let accuracy = ratio(tp + tn, total);
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + false_neg);
        let f1 = f1_from_pr(precision, recall);
        Self {
            accuracy,
            precision,
            recall,
            f1,
            tp,
            fp,
            false_neg,
            tn,
        }
    }
}

/// Four-decimal rendering for reports; the stored values keep full precision.
impl std::fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "accuracy  {:.4}", self.accuracy)?;
        writeln!(f, "precision {:.4}", self.precision)?;
        writeln!(f, "recall    {:.4}", self.recall)?;
        writeln!(f, "f1        {:.4}", self.f1)?;
        write!(
            f,
            "tp {}  fp {}  fn {}  tn {}",
            self.tp, self.fp, self.false_neg, self.tn
        )
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall; 0.0 when both are zero.
pub fn f1_from_pr(precision: f64, recall: f64) -> f64 {
    let den = precision + recall;
    if den == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / den
    }
}
