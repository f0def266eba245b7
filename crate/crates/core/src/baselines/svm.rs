//! Linear SVM with per-column L2 normalization, trained by dual coordinate
//! descent on the squared hinge loss. The bias is an extra constant feature.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmConfig {
    pub c: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            max_iter: 1000,
            tol: 1e-4,
            seed: 0,
        }
    }
}

/// Column L2 norms fitted on training rows; zero columns keep scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnNormalizer {
    pub norms: Vec<f64>,
}

impl ColumnNormalizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let mut norms = vec![0.0; d];
        for r in rows {
            for (n, x) in norms.iter_mut().zip(r) {
                *n += x * x;
            }
        }
        for n in &mut norms {
            *n = if *n > 0.0 { n.sqrt() } else { 1.0 };
        }
        Self { norms }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.norms).map(|(x, n)| x / n).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub normalizer: ColumnNormalizer,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearSvm {
    pub fn decision(&self, row: &[f64]) -> f64 {
        let x = self.normalizer.transform(row);
        x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.bias
    }

    /// Label 1 when the decision value is positive.
    pub fn predict(&self, row: &[f64]) -> u8 {
        u8::from(self.decision(row) > 0.0)
    }
}

pub fn train_svm(features: &[Vec<f64>], labels: &[u8], config: &SvmConfig) -> Result<LinearSvm> {
    if features.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let d = features.first().map_or(0, Vec::len);
    if features.iter().any(|r| r.len() != d) {
        return Err(Error::Shape("feature rows differ in length".into()));
    }
    if !(labels.contains(&0) && labels.contains(&1)) {
        return Err(Error::InvalidArgument(
            "SVM training needs both classes present".into(),
        ));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
    }
    if config.c.is_nan() || config.c <= 0.0 {
        return Err(Error::InvalidArgument("C must be positive".into()));
    }

    let normalizer = ColumnNormalizer::fit(features);
    let xs: Vec<Vec<f64>> = features
        .iter()
        .map(|r| {
            let mut v = normalizer.transform(r);
            v.push(1.0);
            v
        })
        .collect();
    let ys: Vec<f64> = labels
        .iter()
        .map(|&y| if y == 1 { 1.0 } else { -1.0 })
        .collect();
    let diag = 0.5 / config.c;
    let qii: Vec<f64> = xs
        .iter()
        .map(|x| x.iter().map(|v| v * v).sum::<f64>() + diag)
        .collect();

    let n = xs.len();
    let mut w = vec![0.0; d + 1];
    let mut alpha = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    for _ in 0..config.max_iter {
        order.shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            let wx: f64 = w.iter().zip(&xs[i]).map(|(a, b)| a * b).sum();
            let g = ys[i] * wx - 1.0 + diag * alpha[i];
            let pg = if alpha[i] == 0.0 { g.min(0.0) } else { g };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / qii[i]).max(0.0);
                let step = (alpha[i] - old) * ys[i];
                for (wj, xj) in w.iter_mut().zip(&xs[i]) {
                    *wj += step * xj;
                }
            }
        }
        if pg_max - pg_min < config.tol {
            break;
        }
    }
    let bias = w.pop().unwrap_or(0.0);
    Ok(LinearSvm {
        normalizer,
        weights: w,
        bias,
    })
}
