//! Convolutional sentence classifier over token embeddings.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, ParamStore, Var};
use crate::encoders::FeatureSequence;
use crate::error::{Error, Result};
use crate::nn::{dropout, softmax_head, Classifier, Linear};
use crate::tensor::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextCnnConfig {
    pub input_dim: usize,
    pub widths: Vec<usize>,
    pub kernels: usize,
    pub dropout: f64,
}

impl TextCnnConfig {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            widths: vec![3, 4, 5],
            kernels: 14,
            dropout: 0.1,
        }
    }

    pub fn min_len(&self) -> usize {
        self.widths.iter().copied().max().unwrap_or(1)
    }
}

#[derive(Debug, Clone)]
pub struct TextCnn {
    config: TextCnnConfig,
    params: ParamStore,
    convs: Vec<Linear>,
    head: Linear,
}

impl TextCnn {
    pub fn new(config: TextCnnConfig, seed: u64) -> Result<Self> {
        if config.widths.is_empty() || config.widths.contains(&0) || config.kernels == 0 {
            return Err(Error::InvalidArgument(
                "text-cnn needs positive filter widths and kernel count".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let convs = config
            .widths
            .iter()
            .map(|&w| {
                Linear::new(
                    &mut params,
                    &mut rng,
                    &format!("conv{w}"),
                    w * config.input_dim,
                    config.kernels,
                )
            })
            .collect();
        let head = Linear::new(
            &mut params,
            &mut rng,
            "classifier",
            config.widths.len() * config.kernels,
            2,
        );
        Ok(Self {
            config,
            params,
            convs,
            head,
        })
    }

    pub fn config(&self) -> &TextCnnConfig {
        &self.config
    }

    pub fn conv(&self, i: usize) -> Linear {
        self.convs[i]
    }

    pub fn head(&self) -> Linear {
        self.head
    }

    /// The pooled `1 × (widths · kernels)` feature.
    pub fn pooled_node(
        &self,
        g: &mut Graph,
        seq: &FeatureSequence,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Var> {
        if seq.dim() != self.config.input_dim {
            return Err(Error::Shape(format!(
                "text-cnn expects width {}, got {}",
                self.config.input_dim,
                seq.dim()
            )));
        }
        if seq.len() < self.config.min_len() {
            return Err(Error::Shape(format!(
                "text-cnn needs at least {} steps after padding, got {}",
                self.config.min_len(),
                seq.len()
            )));
        }
        // Only the valid prefix feeds the convolutions.
        let valid = seq.mask.iter().take_while(|&&m| m).count();
        let rows = valid.max(1);
        let x = Matrix::from_fn(rows, seq.dim(), |r, c| {
            if r < valid {
                seq.values.get(r, c)
            } else {
                0.0
            }
        });
        let x = g.input(x);
        let mut pooled = Vec::with_capacity(self.convs.len());
        for (conv, &w) in self.convs.iter().zip(&self.config.widths) {
            let starts: Vec<usize> = if valid >= w {
                (0..=valid - w).collect()
            } else {
                vec![0]
            };
            let windows = g.im2col(x, w, &starts);
            let h = conv.forward(g, windows);
            let h = g.relu(h);
            pooled.push(g.max_rows(h));
        }
        let feat = g.concat_cols(&pooled);
        Ok(dropout(g, feat, self.config.dropout, rng))
    }
}

impl Classifier for TextCnn {
    type Input = FeatureSequence;

    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn probs_node(
        &self,
        g: &mut Graph,
        input: &FeatureSequence,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Var> {
        let feat = self.pooled_node(g, input, rng)?;
        softmax_head(g, &self.head, feat, "text-cnn classifier")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::cap_and_pad;

    #[test]
    fn probabilities_sum_to_one() {
        let m = TextCnn::new(TextCnnConfig::new(4), 1).unwrap();
        let seq = cap_and_pad(
            &FeatureSequence::from_rows(Matrix::from_fn(7, 4, |r, c| (r * 4 + c) as f64 * 0.1)),
            9,
        );
        let p = m.predict_proba(&seq).unwrap();
        assert!((p[0] + p[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_parameters_give_uniform_output() {
        let mut m = TextCnn::new(TextCnnConfig::new(3), 2).unwrap();
        let ids: Vec<_> = m.params().ids().collect();
        for id in ids {
            m.params_mut().get_mut(id).data_mut().fill(0.0);
        }
        let seq = FeatureSequence::from_rows(Matrix::from_fn(6, 3, |r, c| (r + c) as f64));
        assert_eq!(m.predict_proba(&seq).unwrap(), [0.5, 0.5]);
    }

    #[test]
    fn short_sequences_are_rejected() {
        let m = TextCnn::new(TextCnnConfig::new(2), 0).unwrap();
        let seq = FeatureSequence::from_rows(Matrix::zeros(4, 2));
        assert!(m.predict_proba(&seq).is_err());
    }
}
