//! Layers, losses, the optimizer and checkpoints shared by every trainable
//! classifier in the crate.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::autograd::{Gradients, Graph, ParamId, ParamStore, Var};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Probability clamp applied before taking logs in the loss.
pub const PROB_EPS: f64 = 1e-7;

/// Cross-entropy of a two-class probability vector against label `y`,
/// probabilities clamped to `[ε, 1 − ε]`.
pub fn loss(p: [f64; 2], y: u8) -> f64 {
    let y = f64::from(y);
    let p0 = p[0].clamp(PROB_EPS, 1.0 - PROB_EPS);
    let p1 = p[1].clamp(PROB_EPS, 1.0 - PROB_EPS);
    -((1.0 - y) * p0.ln() + y * p1.ln())
}

/// Argmax; an exact tie resolves to 0 (real).
pub fn predict(p: [f64; 2]) -> u8 {
    u8::from(p[1] > p[0])
}

pub fn xavier(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Matrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Matrix::from_fn(fan_in, fan_out, |_, _| rng.gen_range(-limit..limit))
}

/// `y = x W + b`, `W: [in, out]`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        inp: usize,
        out: usize,
    ) -> Self {
        Self {
            weight: store.add(format!("{name}.weight"), xavier(rng, inp, out)),
            bias: store.add(format!("{name}.bias"), Matrix::zeros(1, out)),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let w = g.param(self.weight);
        let b = g.param(self.bias);
        let y = g.matmul(x, w);
        g.add_row(y, b)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        Self {
            gain: store.add(
                format!("{name}.gain"),
                Matrix::from_vec(1, dim, vec![1.0; dim]),
            ),
            bias: store.add(format!("{name}.bias"), Matrix::zeros(1, dim)),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let n = g.layer_norm(x);
        let gain = g.param(self.gain);
        let bias = g.param(self.bias);
        let n = g.mul_row(n, gain);
        g.add_row(n, bias)
    }
}

/// Inverted dropout. `None` means evaluation mode.
pub fn dropout(g: &mut Graph, x: Var, p: f64, rng: Option<&mut ChaCha8Rng>) -> Var {
    let Some(rng) = rng else { return x };
    if p <= 0.0 {
        return x;
    }
    let (r, c) = g.value(x).shape();
    let keep = 1.0 / (1.0 - p);
    let mask = Matrix::from_fn(r, c, |_, _| if rng.gen::<f64>() < p { 0.0 } else { keep });
    g.mul_const(x, mask)
}

/// Multi-head attention; queries from one sequence, keys and values from
/// another (or the same).
#[derive(Debug, Clone, Copy)]
pub struct MultiHeadAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub heads: usize,
    pub dim: usize,
}

impl MultiHeadAttention {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        dim: usize,
        heads: usize,
    ) -> Self {
        assert!(
            heads > 0 && dim.is_multiple_of(heads),
            "dim {dim} not divisible by {heads} heads"
        );
        Self {
            query: Linear::new(store, rng, &format!("{name}.query"), dim, dim),
            key: Linear::new(store, rng, &format!("{name}.key"), dim, dim),
            value: Linear::new(store, rng, &format!("{name}.value"), dim, dim),
            output: Linear::new(store, rng, &format!("{name}.output"), dim, dim),
            heads,
            dim,
        }
    }

    /// Returns the attended output and the per-head attention weights
    /// (`[T_query, T_context]` each). Context positions whose `context_mask`
    /// entry is false receive exactly zero weight.
    pub fn forward(
        &self,
        g: &mut Graph,
        x: Var,
        context: Var,
        context_mask: &[bool],
    ) -> (Var, Vec<Var>) {
        let q = self.query.forward(g, x);
        let k = self.key.forward(g, context);
        let v = self.value.forward(g, context);
        let dh = self.dim / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut outs = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = g.slice_cols(q, h * dh, dh);
            let kh = g.slice_cols(k, h * dh, dh);
            let vh = g.slice_cols(v, h * dh, dh);
            let scores = g.matmul_t(qh, kh);
            let scores = g.scale(scores, scale);
            let a = g.masked_softmax(scores, context_mask);
            weights.push(a);
            outs.push(g.matmul(a, vh));
        }
        let cat = if outs.len() == 1 {
            outs[0]
        } else {
            g.concat_cols(&outs)
        };
        (self.output.forward(g, cat), weights)
    }
}

/// Post-norm transformer layer: attention sublayer then a ReLU feed-forward
/// sublayer, each wrapped in residual + layer norm.
#[derive(Debug, Clone, Copy)]
pub struct TransformerLayer {
    pub attention: MultiHeadAttention,
    pub norm1: LayerNorm,
    pub ff1: Linear,
    pub ff2: Linear,
    pub norm2: LayerNorm,
}

impl TransformerLayer {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        dim: usize,
        heads: usize,
        ff_dim: usize,
    ) -> Self {
        Self {
            attention: MultiHeadAttention::new(
                store,
                rng,
                &format!("{name}.attention"),
                dim,
                heads,
            ),
            norm1: LayerNorm::new(store, &format!("{name}.norm1"), dim),
            ff1: Linear::new(store, rng, &format!("{name}.ff1"), dim, ff_dim),
            ff2: Linear::new(store, rng, &format!("{name}.ff2"), ff_dim, dim),
            norm2: LayerNorm::new(store, &format!("{name}.norm2"), dim),
        }
    }

    /// When no context position is valid the attention sublayer contributes
    /// nothing and `x` passes through the residual path and normalization.
    pub fn forward(
        &self,
        g: &mut Graph,
        x: Var,
        context: Var,
        context_mask: &[bool],
        dropout_p: f64,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Var {
        let h = if context_mask.iter().any(|&m| m) {
            let (att, _) = self.attention.forward(g, x, context, context_mask);
            let att = dropout(g, att, dropout_p, rng.as_deref_mut());
            g.add(x, att)
        } else {
            x
        };
        let h = self.norm1.forward(g, h);
        let f = self.ff1.forward(g, h);
        let f = g.relu(f);
        let f = self.ff2.forward(g, f);
        let f = dropout(g, f, dropout_p, rng);
        let out = g.add(h, f);
        self.norm2.forward(g, out)
    }
}

/// A two-class model trainable by the harness.
pub trait Classifier: Send + Sync {
    type Input: Sync;

    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;

    /// Builds the forward pass and returns the `1 × 2` probability node.
    fn probs_node(
        &self,
        g: &mut Graph,
        input: &Self::Input,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Var>;

    fn predict_proba(&self, input: &Self::Input) -> Result<[f64; 2]> {
        let mut g = Graph::new(self.params());
        let p = self.probs_node(&mut g, input, None)?;
        let v = g.value(p);
        Ok([v.get(0, 0), v.get(0, 1)])
    }

    /// Loss and parameter gradients for one example.
    fn loss_and_grads(
        &self,
        input: &Self::Input,
        label: u8,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, Gradients)> {
        let mut g = Graph::new(self.params());
        let p = self.probs_node(&mut g, input, rng)?;
        let l = g.clamped_nll(p, usize::from(label), PROB_EPS);
        let value = g.value(l).get(0, 0);
        Ok((value, g.backward(l)))
    }
}

/// Two-class softmax head over a `1 × d` feature.
pub fn softmax_head(g: &mut Graph, head: &Linear, x: Var, stage: &'static str) -> Result<Var> {
    let logits = head.forward(g, x);
    let p = g.softmax(logits);
    if !g.value(p).is_finite() {
        return Err(Error::NonFinite(stage));
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adaptive-moment optimizer state.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    m: Gradients,
    v: Gradients,
    step: u64,
}

impl Adam {
    pub fn new(params: &ParamStore, config: AdamConfig) -> Self {
        Self {
            config,
            m: params.zero_grads(),
            v: params.zero_grads(),
            step: 0,
        }
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients) {
        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for id in params.ids().collect::<Vec<_>>() {
            let g = grads.get(id).data();
            let m = self.m.get_mut(id).data_mut();
            for (mi, gi) in m.iter_mut().zip(g) {
                *mi = c.beta1 * *mi + (1.0 - c.beta1) * gi;
            }
            let v = self.v.get_mut(id).data_mut();
            for (vi, gi) in v.iter_mut().zip(g) {
                *vi = c.beta2 * *vi + (1.0 - c.beta2) * gi * gi;
            }
            let m = self.m.get(id).data();
            let v = self.v.get(id).data();
            for ((p, mi), vi) in params.get_mut(id).data_mut().iter_mut().zip(m).zip(v) {
                *p -= c.learning_rate * (mi / bc1) / ((vi / bc2).sqrt() + c.epsilon);
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: [usize; 2],
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointManifest<C> {
    config: C,
    dtype: String,
    tensors: Vec<TensorEntry>,
}

/// Writes `<stem>.json` (config + tensor manifest) and `<stem>.bin`
/// (little-endian f32, manifest order).
pub fn save_checkpoint<C: Serialize>(stem: &Path, config: &C, params: &ParamStore) -> Result<()> {
    let mut bytes = Vec::with_capacity(params.num_scalars() * 4);
    let mut tensors = Vec::with_capacity(params.len());
    let mut offset = 0;
    for (name, m) in params.iter() {
        tensors.push(TensorEntry {
            name: name.to_string(),
            shape: [m.rows(), m.cols()],
            offset,
        });
        for &v in m.data() {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        offset += m.data().len();
    }
    let manifest = CheckpointManifest {
        config,
        dtype: crate::cache::DTYPE_F32LE.to_string(),
        tensors,
    };
    if let Some(parent) = stem.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let json_path = stem.with_extension("json");
    let bin_path = stem.with_extension("bin");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&json_path, json + "\n").map_err(|e| Error::io(&json_path, e))?;
    fs::write(&bin_path, bytes).map_err(|e| Error::io(&bin_path, e))
}

/// Reads the config of a checkpoint.
pub fn load_checkpoint_config<C: DeserializeOwned>(stem: &Path) -> Result<C> {
    Ok(read_manifest::<C>(stem)?.config)
}

/// Overwrites `params` with the tensors stored at `stem`; names and shapes
/// must match exactly.
pub fn load_checkpoint_params<C: DeserializeOwned>(
    stem: &Path,
    params: &mut ParamStore,
) -> Result<()> {
    let manifest = read_manifest::<C>(stem)?;
    let bin_path = stem.with_extension("bin");
    let bytes = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    let floats: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    if manifest.tensors.len() != params.len() {
        return Err(Error::Shape(format!(
            "checkpoint has {} tensors, model has {}",
            manifest.tensors.len(),
            params.len()
        )));
    }
    for t in &manifest.tensors {
        let id = params
            .id(&t.name)
            .ok_or_else(|| Error::Shape(format!("unknown tensor `{}` in checkpoint", t.name)))?;
        let target = params.get_mut(id);
        if target.shape() != (t.shape[0], t.shape[1]) {
            return Err(Error::Shape(format!(
                "tensor `{}`: checkpoint {:?}, model {:?}",
                t.name,
                t.shape,
                target.shape()
            )));
        }
        let n = t.shape[0] * t.shape[1];
        let src = floats
            .get(t.offset..t.offset + n)
            .ok_or_else(|| Error::Shape(format!("tensor `{}` runs past the data file", t.name)))?;
        for (d, s) in target.data_mut().iter_mut().zip(src) {
            *d = f64::from(*s);
        }
    }
    Ok(())
}

fn read_manifest<C: DeserializeOwned>(stem: &Path) -> Result<CheckpointManifest<C>> {
    let json_path = stem.with_extension("json");
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("{}: {e}", json_path.display()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn loss_values() {
        assert!((loss([0.5, 0.5], 0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((loss([0.5, 0.5], 1) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(loss([0.0, 1.0], 1) <= -(1.0 - PROB_EPS).ln() + 1e-15);
        assert!((loss([0.9, 0.1], 1) - std::f64::consts::LN_10).abs() < 1e-9);
        assert!(loss([1.0, 0.0], 1).is_finite());
    }

    #[test]
    fn predict_rules() {
        assert_eq!(predict([0.7, 0.3]), 0);
        assert_eq!(predict([0.5, 0.5]), 0);
        assert_eq!(predict([0.2, 0.8]), 1);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut store = ParamStore::new();
        let w = store.add("w", Matrix::from_vec(1, 2, vec![3.0, -2.0]));
        let mut opt = Adam::new(
            &store,
            AdamConfig {
                learning_rate: 0.1,
                ..AdamConfig::default()
            },
        );
        for _ in 0..500 {
            let mut grads = store.zero_grads();
            let g = store.get(w).clone();
            grads.get_mut(w).add_assign(&g);
            opt.step(&mut store, &grads);
        }
        assert!(store.get(w).data().iter().all(|v| v.abs() < 1e-2));
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let lin = Linear::new(&mut store, &mut rng, "head", 3, 2);
        let stem = dir.path().join("ckpt");
        save_checkpoint(&stem, &"cfg", &store).unwrap();
        let mut other = ParamStore::new();
        let mut rng2 = ChaCha8Rng::seed_from_u64(99);
        Linear::new(&mut other, &mut rng2, "head", 3, 2);
        load_checkpoint_params::<String>(&stem, &mut other).unwrap();
        let a = store.get(lin.weight);
        let b = other.get(lin.weight);
        assert!(a.max_abs_diff(b) < 1e-6);
        assert_eq!(load_checkpoint_config::<String>(&stem).unwrap(), "cfg");
    }
}
