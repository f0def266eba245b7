//! Attention pooling over a feature sequence followed by a softmax head.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{Graph, ParamId, ParamStore, Var};
use crate::encoders::FeatureSequence;
use crate::error::{Error, Result};
use crate::nn::{softmax_head, xavier, Classifier, Linear};

#[derive(Debug, Clone)]
pub struct AttentionPoolClassifier {
    dim: usize,
    params: ParamStore,
    score: ParamId,
    head: Linear,
}

impl AttentionPoolClassifier {
    pub fn new(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let score = params.add("attention.score", xavier(&mut rng, dim, 1));
        let head = Linear::new(&mut params, &mut rng, "classifier", dim, 2);
        Self {
            dim,
            params,
            score,
            head,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn score_param(&self) -> ParamId {
        self.score
    }

    /// Returns `(weights 1 × n, pooled 1 × d)`.
    pub fn pool_nodes(&self, g: &mut Graph, seq: &FeatureSequence) -> Result<(Var, Var)> {
        if seq.dim() != self.dim {
            return Err(Error::Shape(format!(
                "attention pool expects width {}, got {}",
                self.dim,
                seq.dim()
            )));
        }
        if seq.mask.len() != seq.len() {
            return Err(Error::Shape(
                "mask length differs from sequence length".into(),
            ));
        }
        if !seq.is_present() {
            return Err(Error::InvalidArgument(
                "attention pooling needs at least one valid step".into(),
            ));
        }
        let x = g.input(seq.values.clone());
        let v = g.param(self.score);
        let scores = g.matmul(x, v);
        let scores = g.transpose(scores);
        let w = g.masked_softmax(scores, &seq.mask);
        let pooled = g.matmul(w, x);
        Ok((w, pooled))
    }

    pub fn attention_weights(&self, seq: &FeatureSequence) -> Result<Vec<f64>> {
        let mut g = Graph::new(&self.params);
        let (w, _) = self.pool_nodes(&mut g, seq)?;
        Ok(g.value(w).data().to_vec())
    }

    pub fn pooled(&self, seq: &FeatureSequence) -> Result<Vec<f64>> {
        let mut g = Graph::new(&self.params);
        let (_, p) = self.pool_nodes(&mut g, seq)?;
        Ok(g.value(p).data().to_vec())
    }
}

impl Classifier for AttentionPoolClassifier {
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
        _rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Var> {
        let (_, pooled) = self.pool_nodes(g, input)?;
        softmax_head(g, &self.head, pooled, "attention-pool classifier")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Matrix;

    #[test]
    fn single_valid_step_is_passed_through() {
        let m = AttentionPoolClassifier::new(3, 4);
        let seq = FeatureSequence {
            values: Matrix::from_vec(2, 3, vec![1.0, -2.0, 0.5, 9.0, 9.0, 9.0]),
            mask: vec![true, false],
            native_length: 1,
        };
        assert_eq!(m.attention_weights(&seq).unwrap(), vec![1.0, 0.0]);
        assert_eq!(m.pooled(&seq).unwrap(), vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn identical_steps_share_weight() {
        let m = AttentionPoolClassifier::new(2, 1);
        let seq = FeatureSequence::from_rows(Matrix::from_vec(2, 2, vec![0.3, 0.7, 0.3, 0.7]));
        let w = m.attention_weights(&seq).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-12 && (w[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_mask_is_an_error() {
        let m = AttentionPoolClassifier::new(2, 1);
        assert!(m.predict_proba(&FeatureSequence::absent(2)).is_err());
    }
}
