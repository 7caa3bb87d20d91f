use serde::{Deserialize, Serialize};

use crate::corpus::{SentimentLabel, NUM_CLASSES};
use crate::error::{Error, Result};

pub type ConfusionMatrix = [[usize; NUM_CLASSES]; NUM_CLASSES];

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    /// Indexed by class index.
    pub per_class: Vec<ClassMetrics>,
    pub fold_id: Option<usize>,
}

/// Entry `(i, j)` counts posts of true class `i` predicted as `j`.
pub fn confusion_matrix(y_true: &[SentimentLabel], y_pred: &[SentimentLabel]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut m = [[0; NUM_CLASSES]; NUM_CLASSES];
    for (t, p) in y_true.iter().zip(y_pred) {
        m[t.index()][p.index()] += 1;
    }
    Ok(m)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn metrics_from_confusion(m: &ConfusionMatrix) -> MetricsReport {
    let n: usize = m.iter().flatten().sum();
    let mut per_class = Vec::with_capacity(NUM_CLASSES);
    let (mut wp, mut wr, mut wf) = (0.0, 0.0, 0.0);
    for c in 0..NUM_CLASSES {
        let tp = m[c][c];
        let support: usize = m[c].iter().sum();
        let predicted: usize = (0..NUM_CLASSES).map(|r| m[r][c]).sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let w = ratio(support, n);
        wp += w * precision;
        wr += w * recall;
        wf += w * f1;
        per_class.push(ClassMetrics {
            precision,
            recall,
            f1,
            support,
        });
    }
    let correct: usize = (0..NUM_CLASSES).map(|c| m[c][c]).sum();
    MetricsReport {
        accuracy: ratio(correct, n),
        weighted_precision: wp,
        weighted_recall: wr,
        weighted_f1: wf,
        per_class,
        fold_id: None,
    }
}

/// Support-weighted precision, recall and F1 plus accuracy. Undefined
/// ratios count as 0.
pub fn weighted_metrics(y_true: &[SentimentLabel], y_pred: &[SentimentLabel]) -> Result<MetricsReport> {
    Ok(metrics_from_confusion(&confusion_matrix(y_true, y_pred)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use SentimentLabel::*;

    #[test]
    fn confusion_cases() {
        let m = confusion_matrix(&[Hate, CounterHate, Neutral], &[Hate, CounterHate, Neutral]).unwrap();
        assert_eq!(m, [[1, 0, 0], [0, 1, 0], [0, 0, 1]]);
        let m = confusion_matrix(&[Hate, Hate], &[CounterHate, CounterHate]).unwrap();
        assert_eq!(m[0][1], 2);
        assert!(matches!(confusion_matrix(&[Hate], &[]), Err(Error::LengthMismatch(1, 0))));
    }

    #[test]
    fn skewed_predictions() {
        let r = weighted_metrics(&[Hate, Hate, Hate, CounterHate], &[Hate; 4]).unwrap();
        assert!((r.weighted_recall - 0.75).abs() < 1e-12);
        assert!((r.accuracy - 0.75).abs() < 1e-12);
        // Hate precision 3/4, recall 1, f1 6/7; counterhate all zero.
        assert!((r.weighted_precision - 0.75 * 0.75).abs() < 1e-12);
        assert!((r.weighted_f1 - 0.75 * 6.0 / 7.0).abs() < 1e-12);
        assert_eq!(r.per_class[1].support, 1);
        assert_eq!(r.per_class[2], ClassMetrics::default());
    }

    #[test]
    fn perfect_predictions() {
        let y = [Neutral, Hate, CounterHate, Hate];
        let r = weighted_metrics(&y, &y).unwrap();
        assert_eq!(
            (r.accuracy, r.weighted_precision, r.weighted_recall, r.weighted_f1),
            (1.0, 1.0, 1.0, 1.0)
        );
    }
}
