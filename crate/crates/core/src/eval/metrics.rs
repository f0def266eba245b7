//! Accuracy and macro-averaged precision, recall and F1 over the two classes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

impl Metrics {
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.accuracy,
            self.macro_precision,
            self.macro_recall,
            self.macro_f1,
        ]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            accuracy: a[0],
            macro_precision: a[1],
            macro_recall: a[2],
            macro_f1: a[3],
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Macro scores average the per-class values of classes 0 and 1; any 0/0 is
/// taken as 0. Macro F1 is the mean of per-class F1.
pub fn compute_metrics(predictions: &[u8], labels: &[u8]) -> Result<Metrics> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions but {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument(
            "metrics need at least one label".into(),
        ));
    }
    let mut confusion = [[0usize; 2]; 2];
    for (&p, &y) in predictions.iter().zip(labels) {
        if p > 1 || y > 1 {
            return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
        }
        confusion[usize::from(y)][usize::from(p)] += 1;
    }
    let mut p_sum = 0.0;
    let mut r_sum = 0.0;
    let mut f_sum = 0.0;
    for c in 0..2 {
        let tp = confusion[c][c];
        let predicted = confusion[0][c] + confusion[1][c];
        let actual = confusion[c][0] + confusion[c][1];
        let p = ratio(tp, predicted);
        let r = ratio(tp, actual);
        let f = if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        };
        p_sum += p;
        r_sum += r;
        f_sum += f;
    }
    Ok(Metrics {
        accuracy: ratio(confusion[0][0] + confusion[1][1], labels.len()),
        macro_precision: p_sum / 2.0,
        macro_recall: r_sum / 2.0,
        macro_f1: f_sum / 2.0,
    })
}

/// Mean and sample standard deviation (n − 1) per metric. The deviation is
/// 0 for a single entry.
pub fn aggregate(per_fold: &[Metrics]) -> Option<(Metrics, Metrics)> {
    if per_fold.is_empty() {
        return None;
    }
    let n = per_fold.len() as f64;
    let mut mean = [0.0; 4];
    for m in per_fold {
        for (a, v) in mean.iter_mut().zip(m.as_array()) {
            *a += v;
        }
    }
    mean.iter_mut().for_each(|a| *a /= n);
    let mut std = [0.0; 4];
    if per_fold.len() > 1 {
        for m in per_fold {
            for ((s, v), mu) in std.iter_mut().zip(m.as_array()).zip(mean) {
                *s += (v - mu) * (v - mu);
            }
        }
        std.iter_mut().for_each(|s| *s = (*s / (n - 1.0)).sqrt());
    }
    Some((Metrics::from_array(mean), Metrics::from_array(std)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let m = compute_metrics(&[0, 1, 1], &[0, 1, 1]).unwrap();
        assert_eq!(m.as_array(), [1.0; 4]);
    }

    #[test]
    fn one_of_each_cell() {
        let m = compute_metrics(&[1, 0, 1, 0], &[1, 0, 0, 1]).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.macro_f1, 0.5);
    }

    #[test]
    fn constant_prediction_on_balanced_labels() {
        let m = compute_metrics(&[0, 0, 0, 0], &[0, 1, 0, 1]).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.macro_recall, 0.5);
        assert_eq!(m.macro_precision, 0.25);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(compute_metrics(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn aggregate_uses_sample_std() {
        let a = Metrics::from_array([0.5; 4]);
        let b = Metrics::from_array([1.0; 4]);
        let (mean, std) = aggregate(&[a, b]).unwrap();
        assert_eq!(mean.accuracy, 0.75);
        assert!((std.accuracy - 0.125f64.sqrt()).abs() < 1e-15);
    }
}
