use proptest::prelude::*;

use svfend_core::eval::{aggregate, compute_metrics, Metrics};

/// Per-class (precision, recall, f1) from explicit counts.
fn per_class(pred: &[u8], gold: &[u8], c: u8) -> (f64, f64, f64) {
    let tp = pred
        .iter()
        .zip(gold)
        .filter(|(&p, &g)| p == c && g == c)
        .count() as f64;
    let predicted = pred.iter().filter(|&&p| p == c).count() as f64;
    let actual = gold.iter().filter(|&&g| g == c).count() as f64;
    let p = if predicted == 0.0 {
        0.0
    } else {
        tp / predicted
    };
    let r = if actual == 0.0 { 0.0 } else { tp / actual };
    let f = if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    };
    (p, r, f)
}

#[test]
fn all_correct_is_perfect() {
    let m = compute_metrics(&[0, 1, 1, 0], &[0, 1, 1, 0]).unwrap();
    assert_eq!(m.as_array(), [1.0; 4]);
}

#[test]
fn single_class_predictions_get_zero_for_the_missing_class() {
    let m = compute_metrics(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap();
    assert_eq!(m.accuracy, 0.5);
    assert_eq!(m.macro_precision, 0.25);
    assert_eq!(m.macro_recall, 0.5);
    assert!((m.macro_f1 - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn mismatched_or_empty_inputs_are_errors() {
    assert!(compute_metrics(&[0, 1], &[0]).is_err());
    assert!(compute_metrics(&[], &[]).is_err());
    assert!(compute_metrics(&[2], &[0]).is_err());
}

#[test]
fn aggregate_uses_sample_deviation() {
    let a = Metrics::from_array([0.5, 0.5, 0.5, 0.5]);
    let b = Metrics::from_array([1.0, 1.0, 1.0, 1.0]);
    let (mean, std) = aggregate(&[a, b]).unwrap();
    assert_eq!(mean.accuracy, 0.75);
    assert!((std.accuracy - 0.125f64.sqrt()).abs() < 1e-12);
    let (_, std1) = aggregate(&[a]).unwrap();
    assert_eq!(std1.as_array(), [0.0; 4]);
    assert!(aggregate(&[]).is_none());
}

proptest! {
    #[test]
    fn matches_confusion_oracle(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..500)) {
        let (pred, gold): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
        let m = compute_metrics(&pred, &gold).unwrap();
        let c0 = per_class(&pred, &gold, 0);
        let c1 = per_class(&pred, &gold, 1);
        let acc = pred.iter().zip(&gold).filter(|(p, g)| p == g).count() as f64 / pred.len() as f64;
        let want = [acc, (c0.0 + c1.0) / 2.0, (c0.1 + c1.1) / 2.0, (c0.2 + c1.2) / 2.0];
        for (g, w) in m.as_array().iter().zip(want) {
            prop_assert!((g - w).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(g));
        }
    }

    #[test]
    fn aggregate_is_recomputable(folds in prop::collection::vec(prop::array::uniform4(0.0f64..1.0), 2..8)) {
        let ms: Vec<Metrics> = folds.iter().map(|&a| Metrics::from_array(a)).collect();
        let (mean, std) = aggregate(&ms).unwrap();
        let n = folds.len() as f64;
        for k in 0..4 {
            let mu = folds.iter().map(|f| f[k]).sum::<f64>() / n;
            let var = folds.iter().map(|f| (f[k] - mu).powi(2)).sum::<f64>() / (n - 1.0);
            prop_assert!((mean.as_array()[k] - mu).abs() < 1e-12);
            prop_assert!((std.as_array()[k] - var.sqrt()).abs() < 1e-12);
        }
    }
}
