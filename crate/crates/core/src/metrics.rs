//! Classification metrics with malicious as the positive class.

use std::cmp::Ordering;

use serde::Serialize;

use crate::dataset::Label;
use crate::error::{Error, Result};

/// Scores above this probability of being malicious are predicted malicious.
/// A score of exactly 0.5 is predicted benign.
pub const DECISION_THRESHOLD: f64 = 0.5;

/// One scored sample: probability of the malicious class and the true label.
pub type Scored = (f64, Label);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn record(&mut self, predicted: Label, actual: Label) {
        match (predicted, actual) {
            (Label::Malicious, Label::Malicious) => self.tp += 1,
            (Label::Malicious, Label::Benign) => self.fp += 1,
            (Label::Benign, Label::Benign) => self.tn += 1,
            (Label::Benign, Label::Malicious) => self.fn_ += 1,
        }
    }

    /// The same counts with the roles of the two classes exchanged.
    pub fn swapped(&self) -> Self {
        ConfusionMatrix {
            tp: self.tn,
            fp: self.fn_,
            tn: self.tp,
            fn_: self.fp,
        }
    }
}

pub fn predicted_label(p_malicious: f64) -> Label {
    if p_malicious > DECISION_THRESHOLD {
        Label::Malicious
    } else {
        Label::Benign
    }
}

pub fn confusion(scores: &[Scored]) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::default();
    for &(p, label) in scores {
        cm.record(predicted_label(p), label);
    }
    cm
}

/// Accuracy, precision, recall and F-measure. A ratio whose denominator is
/// zero is reported as 0 with its `*_degenerate` flag set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub precision_degenerate: bool,
    pub recall_degenerate: bool,
    pub f_measure_degenerate: bool,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn summary(cm: &ConfusionMatrix) -> Result<Summary> {
    if cm.total() == 0 {
        return Err(Error::EmptyDataset("confusion matrix has no samples"));
    }
    let accuracy = (cm.tp + cm.tn) as f64 / cm.total() as f64;
    let (precision, precision_degenerate) = ratio(cm.tp, cm.tp + cm.fp);
    let (recall, recall_degenerate) = ratio(cm.tp, cm.tp + cm.fn_);
    let (f_measure, f_measure_degenerate) = if precision + recall == 0.0 {
        (0.0, true)
    } else {
        (2.0 * precision * recall / (precision + recall), false)
    };
    Ok(Summary {
        accuracy,
        precision,
        recall,
        f_measure,
        precision_degenerate,
        recall_degenerate,
        f_measure_degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

/// Per-class and macro-averaged precision, recall and F-measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassBreakdown {
    pub benign: ClassScores,
    pub malicious: ClassScores,
    pub macro_average: ClassScores,
}

pub fn class_breakdown(cm: &ConfusionMatrix) -> Result<ClassBreakdown> {
    let pick = |s: Summary| ClassScores {
        precision: s.precision,
        recall: s.recall,
        f_measure: s.f_measure,
    };
    let malicious = pick(summary(cm)?);
    let benign = pick(summary(&cm.swapped())?);
    Ok(ClassBreakdown {
        benign,
        malicious,
        macro_average: ClassScores {
            precision: (benign.precision + malicious.precision) / 2.0,
            recall: (benign.recall + malicious.recall) / 2.0,
            f_measure: (benign.f_measure + malicious.f_measure) / 2.0,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    /// `(false_positive_rate, true_positive_rate)` from `(0,0)` to `(1,1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Area under a polyline by the trapezoid rule.
pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// ROC curve swept over every distinct score, highest first. Samples with
/// equal scores enter the curve together as one diagonal segment.
pub fn roc(scores: &[Scored]) -> Result<RocCurve> {
    if scores.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let positives = scores.iter().filter(|(_, l)| *l == Label::Malicious).count() as u64;
    let negatives = scores.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::InvalidInput(
            "ROC needs at least one sample of each class".into(),
        ));
    }

    let mut sorted: Vec<Scored> = scores.to_vec();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    for block in sorted.chunk_by(|a, b| a.0 == b.0) {
        for (_, label) in block {
            match label {
                Label::Malicious => tp += 1,
                Label::Benign => fp += 1,
            }
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
    }
    if points.last() != Some(&(1.0, 1.0)) {
        points.push((1.0, 1.0));
    }
    let auc = trapezoid_area(&points);
    Ok(RocCurve { points, auc })
}

/// Everything `evaluate` reports about one scored dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub samples: u64,
    pub threshold: f64,
    pub confusion: ConfusionMatrix,
    #[serde(flatten)]
    pub summary: Summary,
    pub per_class: ClassBreakdown,
    /// `None` when the data holds only one class.
    pub auc: Option<f64>,
}

/// Builds the report and, when both classes are present, the ROC curve.
pub fn evaluate_scores(scores: &[Scored]) -> Result<(EvalReport, Option<RocCurve>)> {
    let cm = confusion(scores);
    let curve = match roc(scores) {
        Ok(curve) => Some(curve),
        Err(Error::InvalidInput(_)) if !scores.iter().any(|(s, _)| s.is_nan()) => None,
        Err(e) => return Err(e),
    };
    let report = EvalReport {
        samples: cm.total(),
        threshold: DECISION_THRESHOLD,
        confusion: cm,
        summary: summary(&cm)?,
        per_class: class_breakdown(&cm)?,
        auc: curve.as_ref().map(|c| c.auc),
    };
    Ok((report, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Benign as B, Malicious as M};

    #[test]
    fn confusion_basic() {
        let cm = confusion(&[(0.9, M), (0.2, B)]);
        assert_eq!(cm, ConfusionMatrix { tp: 1, fp: 0, tn: 1, fn_: 0 });
    }

    #[test]
    fn confusion_tie_is_benign() {
        let cm = confusion(&[(0.5, M), (0.5, B), (0.5, B)]);
        assert_eq!(cm, ConfusionMatrix { tp: 0, fp: 0, tn: 2, fn_: 1 });
    }

    #[test]
    fn confusion_six_samples() {
        let scores = [(0.9, M), (0.8, M), (0.7, B), (0.1, M), (0.2, B), (0.3, B)];
        let cm = confusion(&scores);
        assert_eq!(cm, ConfusionMatrix { tp: 2, fp: 1, tn: 2, fn_: 1 });
        let s = summary(&cm).unwrap();
        assert!((s.accuracy - 4.0 / 6.0).abs() < 1e-15);
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.f_measure - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn summary_perfect() {
        let s = summary(&ConfusionMatrix { tp: 3, fp: 0, tn: 4, fn_: 0 }).unwrap();
        assert_eq!((s.accuracy, s.precision, s.recall, s.f_measure), (1.0, 1.0, 1.0, 1.0));
        assert!(!s.precision_degenerate && !s.recall_degenerate && !s.f_measure_degenerate);
    }

    #[test]
    fn summary_degenerate_precision() {
        let s = summary(&ConfusionMatrix { tp: 0, fp: 0, tn: 4, fn_: 2 }).unwrap();
        assert_eq!(s.precision, 0.0);
        assert!(s.precision_degenerate);
        assert_eq!(s.f_measure, 0.0);
    }

    #[test]
    fn summary_empty() {
        assert!(summary(&ConfusionMatrix::default()).is_err());
    }

    #[test]
    fn class_breakdown_macro() {
        let cm = ConfusionMatrix { tp: 2, fp: 1, tn: 3, fn_: 0 };
        let b = class_breakdown(&cm).unwrap();
        assert!((b.malicious.precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(b.benign.precision, 1.0);
        assert!((b.benign.recall - 0.75).abs() < 1e-15);
        assert!((b.macro_average.precision - (2.0 / 3.0 + 1.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn roc_perfect_separation() {
        let r = roc(&[(0.9, M), (0.8, M), (0.3, B), (0.1, B)]).unwrap();
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(r.points.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn roc_all_tied() {
        let r = roc(&[(0.4, M), (0.4, B), (0.4, B), (0.4, M), (0.4, M)]).unwrap();
        assert_eq!(r.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(r.auc, 0.5);
    }

    #[test]
    fn roc_single_class_rejected() {
        assert!(roc(&[(0.4, M), (0.9, M)]).is_err());
        assert!(roc(&[(f64::NAN, M), (0.9, B)]).is_err());
    }

    #[test]
    fn report_single_class_has_no_auc() {
        let (report, curve) = evaluate_scores(&[(0.9, M), (0.3, M)]).unwrap();
        assert!(curve.is_none() && report.auc.is_none());
        assert_eq!(report.confusion, ConfusionMatrix { tp: 1, fp: 0, tn: 0, fn_: 1 });
        assert_eq!(report.summary.accuracy, 0.5);
    }

    #[test]
    fn roc_hand_case() {
        // Ranking M B M B: steps (0,.5) (.5,.5) (.5,1) (1,1); area 0.75.
        let r = roc(&[(0.9, M), (0.7, B), (0.6, M), (0.2, B)]).unwrap();
        assert_eq!(r.points, vec![(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)]);
        assert_eq!(r.auc, 0.75);
    }
}
