//! The co-attention fusion classifier.
//!
//! Pipeline for one sample:
//! 1. project all six inputs to `hidden_dim` (padded rows re-zeroed);
//! 2. text ⇄ audio co-attention block;
//! 3. audio-enhanced text ⇄ frames co-attention block;
//! 4. masked temporal means of the enhanced text, audio and frame streams;
//! 5. one self-attention transformer layer over the six modality slots
//!    `[text, audio, frame, clip, comment, user]`;
//! 6. mean over the six outputs gives the fused feature;
//! 7. linear layer + softmax gives `[p_real, p_fake]`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, ParamStore, Var};
use crate::encoders::{FeatureSequence, InputDims, Modality, ModalityBundle, SequenceCaps};
use crate::error::{Error, Result};
use crate::nn::{softmax_head, Classifier, Linear, TransformerLayer};
use crate::tensor::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub coattn_heads: usize,
    pub fusion_heads: usize,
    pub dropout: f64,
    /// Feed-forward width as a multiple of `hidden_dim`.
    pub ff_multiplier: usize,
    pub use_positional_encoding: bool,
    pub input_dims: InputDims,
    pub caps: SequenceCaps,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 128,
            coattn_heads: 4,
            fusion_heads: 2,
            dropout: 0.1,
            ff_multiplier: 4,
            use_positional_encoding: false,
            input_dims: InputDims::default(),
            caps: SequenceCaps::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.hidden_dim == 0 || self.coattn_heads == 0 || self.fusion_heads == 0 {
            return bad("hidden_dim and head counts must be positive".into());
        }
        if !self.hidden_dim.is_multiple_of(self.coattn_heads)
            || !self.hidden_dim.is_multiple_of(self.fusion_heads)
        {
            return bad(format!(
                "hidden_dim {} must be divisible by coattn_heads {} and fusion_heads {}",
                self.hidden_dim, self.coattn_heads, self.fusion_heads
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.ff_multiplier == 0 {
            return bad("ff_multiplier must be positive".into());
        }
        let c = &self.caps;
        if c.text == 0 || c.audio == 0 || c.frames == 0 || c.comments == 0 {
            return bad("sequence caps must be positive".into());
        }
        Ok(())
    }
}

/// Two transformer streams; each stream's queries attend to the other
/// stream's keys and values.
#[derive(Debug, Clone, Copy)]
pub struct CoAttentionBlock {
    pub first: TransformerLayer,
    pub second: TransformerLayer,
}

impl CoAttentionBlock {
    fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        streams: (&str, &str),
        config: &ModelConfig,
    ) -> Self {
        let h = config.hidden_dim;
        let ff = h * config.ff_multiplier;
        Self {
            first: TransformerLayer::new(
                store,
                rng,
                &format!("{name}.{}", streams.0),
                h,
                config.coattn_heads,
                ff,
            ),
            second: TransformerLayer::new(
                store,
                rng,
                &format!("{name}.{}", streams.1),
                h,
                config.coattn_heads,
                ff,
            ),
        }
    }

    /// Both streams are computed from the block inputs; padded rows of the
    /// outputs are re-zeroed.
    #[allow(clippy::too_many_arguments)]
    pub fn forward(
        &self,
        g: &mut Graph,
        a: Var,
        mask_a: &[bool],
        b: Var,
        mask_b: &[bool],
        dropout: f64,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> (Var, Var) {
        let a_out = self
            .first
            .forward(g, a, b, mask_b, dropout, rng.as_deref_mut());
        let b_out = self.second.forward(g, b, a, mask_a, dropout, rng);
        (g.mask_rows(a_out, mask_a), g.mask_rows(b_out, mask_b))
    }
}

/// Projected inputs, all at `hidden_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedBundle {
    pub text: Matrix,
    pub audio: Matrix,
    pub frames: Matrix,
    pub clip: Matrix,
    pub comment: Matrix,
    pub user: Matrix,
}

#[derive(Debug, Clone)]
pub struct SvFend {
    config: ModelConfig,
    params: ParamStore,
    /// Indexed like [`Modality::ALL`].
    projections: [Linear; 6],
    text_audio: CoAttentionBlock,
    text_frame: CoAttentionBlock,
    fusion: TransformerLayer,
    classifier: Linear,
}

struct ProjectedVars {
    text: Var,
    audio: Var,
    frames: Var,
    clip: Var,
    comment: Var,
    user: Var,
}

impl SvFend {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let h = config.hidden_dim;
        let projections = Modality::ALL.map(|m| {
            Linear::new(
                &mut store,
                &mut rng,
                &format!("proj.{}", m.as_str()),
                config.input_dims.get(m),
                h,
            )
        });
        let text_audio = CoAttentionBlock::new(
            &mut store,
            &mut rng,
            "coattn_text_audio",
            ("text", "audio"),
            &config,
        );
        let text_frame = CoAttentionBlock::new(
            &mut store,
            &mut rng,
            "coattn_text_frame",
            ("text", "frame"),
            &config,
        );
        let fusion = TransformerLayer::new(
            &mut store,
            &mut rng,
            "fusion",
            h,
            config.fusion_heads,
            h * config.ff_multiplier,
        );
        let classifier = Linear::new(&mut store, &mut rng, "classifier", h, 2);
        Ok(Self {
            config,
            params: store,
            projections,
            text_audio,
            text_frame,
            fusion,
            classifier,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn text_audio_block(&self) -> &CoAttentionBlock {
        &self.text_audio
    }

    pub fn text_frame_block(&self) -> &CoAttentionBlock {
        &self.text_frame
    }

    pub fn classifier(&self) -> &Linear {
        &self.classifier
    }

    pub fn projection(&self, m: Modality) -> &Linear {
        &self.projections[Modality::ALL
            .iter()
            .position(|&x| x == m)
            .expect("modality")]
    }

    fn check_dims(&self, bundle: &ModalityBundle) -> Result<()> {
        let d = &self.config.input_dims;
        let checks = [
            ("text", bundle.text.dim(), d.text),
            ("audio", bundle.audio.dim(), d.audio),
            ("frame", bundle.frames.dim(), d.frame),
            ("clip", bundle.clip_vec.len(), d.clip),
            ("comment", bundle.comment_vec.len(), d.comment),
            ("user", bundle.user_vec.len(), d.user),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(Error::Shape(format!(
                    "{name} input has width {got}, model expects {want}"
                )));
            }
        }
        for (name, s) in [
            ("text", &bundle.text),
            ("audio", &bundle.audio),
            ("frame", &bundle.frames),
        ] {
            if s.mask.len() != s.len() {
                return Err(Error::Shape(format!(
                    "{name} mask length differs from sequence length"
                )));
            }
        }
        Ok(())
    }

    fn project_seq(&self, g: &mut Graph, m: Modality, seq: &FeatureSequence) -> Var {
        let x = g.input(seq.values.clone());
        let y = self.projection(m).forward(g, x);
        let y = if self.config.use_positional_encoding {
            let pe = sinusoidal(seq.len(), self.config.hidden_dim);
            let pe = g.input(pe);
            g.add(y, pe)
        } else {
            y
        };
        g.mask_rows(y, &seq.mask)
    }

    fn project_vec(&self, g: &mut Graph, m: Modality, v: &[f64], present: bool) -> Var {
        let x = g.input(Matrix::row_vector(v.to_vec()));
        let y = self.projection(m).forward(g, x);
        g.mask_rows(y, &[present])
    }

    fn project(&self, g: &mut Graph, bundle: &ModalityBundle) -> Result<ProjectedVars> {
        self.check_dims(bundle)?;
        let p = &bundle.presence;
        let vars = ProjectedVars {
            text: self.project_seq(g, Modality::Text, &bundle.text),
            audio: self.project_seq(g, Modality::Audio, &bundle.audio),
            frames: self.project_seq(g, Modality::Frame, &bundle.frames),
            clip: self.project_vec(g, Modality::Clip, &bundle.clip_vec, p.clip),
            comment: self.project_vec(g, Modality::Comment, &bundle.comment_vec, p.comment),
            user: self.project_vec(g, Modality::User, &bundle.user_vec, p.user),
        };
        let all = [
            vars.text,
            vars.audio,
            vars.frames,
            vars.clip,
            vars.comment,
            vars.user,
        ];
        if !all.iter().all(|&v| g.value(v).is_finite()) {
            return Err(Error::NonFinite("projection"));
        }
        Ok(vars)
    }

    /// Every input mapped to `hidden_dim`, evaluation mode.
    pub fn project_inputs(&self, bundle: &ModalityBundle) -> Result<ProjectedBundle> {
        let mut g = Graph::new(&self.params);
        let v = self.project(&mut g, bundle)?;
        Ok(ProjectedBundle {
            text: g.value(v.text).clone(),
            audio: g.value(v.audio).clone(),
            frames: g.value(v.frames).clone(),
            clip: g.value(v.clip).clone(),
            comment: g.value(v.comment).clone(),
            user: g.value(v.user).clone(),
        })
    }

    /// Runs one co-attention block on already-projected sequences
    /// (evaluation mode). `first_block` selects text⇄audio, otherwise
    /// text⇄frame.
    pub fn co_attention(
        &self,
        first_block: bool,
        a: &FeatureSequence,
        b: &FeatureSequence,
    ) -> Result<(Matrix, Matrix)> {
        let h = self.config.hidden_dim;
        if a.dim() != h || b.dim() != h {
            return Err(Error::Shape(format!(
                "co-attention inputs must have width {h}, got {} and {}",
                a.dim(),
                b.dim()
            )));
        }
        let block = if first_block {
            &self.text_audio
        } else {
            &self.text_frame
        };
        let mut g = Graph::new(&self.params);
        let av = g.input(a.values.clone());
        let bv = g.input(b.values.clone());
        let (ao, bo) = block.forward(&mut g, av, &a.mask, bv, &b.mask, 0.0, None);
        Ok((g.value(ao).clone(), g.value(bo).clone()))
    }

    /// Evaluation-mode probabilities `[p_real, p_fake]`.
    pub fn forward(&self, bundle: &ModalityBundle) -> Result<[f64; 2]> {
        self.predict_proba(bundle)
    }

    /// Fused feature (mean of the fusion outputs), evaluation mode.
    pub fn fused_feature(&self, bundle: &ModalityBundle) -> Result<Vec<f64>> {
        let mut g = Graph::new(&self.params);
        let fused = self.fused_node(&mut g, bundle, None)?;
        Ok(g.value(fused).data().to_vec())
    }

    fn fused_node(
        &self,
        g: &mut Graph,
        bundle: &ModalityBundle,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Var> {
        // Padded rows never reach valid positions, so dropping them up front
        // gives the same result at a fraction of the cost.
        let trimmed;
        let bundle = match trim_padding(bundle) {
            Some(b) => {
                trimmed = b;
                &trimmed
            }
            None => bundle,
        };
        let p = self.project(g, bundle)?;
        let dropout = self.config.dropout;
        let (tm, am, fm) = (&bundle.text.mask, &bundle.audio.mask, &bundle.frames.mask);

        let (text_a, audio_t) =
            self.text_audio
                .forward(g, p.text, tm, p.audio, am, dropout, rng.as_deref_mut());
        if !g.value(text_a).is_finite() || !g.value(audio_t).is_finite() {
            return Err(Error::NonFinite("co-attention text-audio"));
        }
        let (text_af, frame_t) =
            self.text_frame
                .forward(g, text_a, tm, p.frames, fm, dropout, rng.as_deref_mut());
        if !g.value(text_af).is_finite() || !g.value(frame_t).is_finite() {
            return Err(Error::NonFinite("co-attention text-frame"));
        }

        let x_text = g.masked_mean(text_af, tm);
        let x_audio = g.masked_mean(audio_t, am);
        let x_frame = g.masked_mean(frame_t, fm);
        let slots = g.concat_rows(&[x_text, x_audio, x_frame, p.clip, p.comment, p.user]);
        let fused = self
            .fusion
            .forward(g, slots, slots, &[true; 6], dropout, rng);
        if !g.value(fused).is_finite() {
            return Err(Error::NonFinite("fusion"));
        }
        Ok(g.masked_mean(fused, &[true; 6]))
    }
}

impl Classifier for SvFend {
    type Input = ModalityBundle;

    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn probs_node(
        &self,
        g: &mut Graph,
        input: &ModalityBundle,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Var> {
        let fused = self.fused_node(g, input, rng)?;
        softmax_head(g, &self.classifier, fused, "classifier")
    }
}

fn trim_seq(seq: &FeatureSequence) -> Option<FeatureSequence> {
    if seq.mask.len() != seq.len() {
        return None;
    }
    let valid = seq.mask.iter().take_while(|&&m| m).count();
    if seq.mask[valid..].iter().any(|&m| m) {
        return None;
    }
    let rows = valid.max(1);
    if rows >= seq.len() {
        return None;
    }
    Some(FeatureSequence {
        values: Matrix::from_fn(rows, seq.dim(), |r, c| seq.values.get(r, c)),
        mask: seq.mask[..rows].to_vec(),
        native_length: seq.native_length,
    })
}

/// Copy of `bundle` with trailing padding removed from the three sequences,
/// or `None` when nothing can be trimmed.
fn trim_padding(bundle: &ModalityBundle) -> Option<ModalityBundle> {
    let text = trim_seq(&bundle.text);
    let audio = trim_seq(&bundle.audio);
    let frames = trim_seq(&bundle.frames);
    if text.is_none() && audio.is_none() && frames.is_none() {
        return None;
    }
    Some(ModalityBundle {
        text: text.unwrap_or_else(|| bundle.text.clone()),
        audio: audio.unwrap_or_else(|| bundle.audio.clone()),
        frames: frames.unwrap_or_else(|| bundle.frames.clone()),
        clip_vec: bundle.clip_vec.clone(),
        comment_vec: bundle.comment_vec.clone(),
        user_vec: bundle.user_vec.clone(),
        presence: bundle.presence,
    })
}

/// Standard sine/cosine position table.
pub fn sinusoidal(len: usize, dim: usize) -> Matrix {
    Matrix::from_fn(len, dim, |pos, i| {
        let rate = 1.0 / 10_000f64.powf((2 * (i / 2)) as f64 / dim as f64);
        let angle = pos as f64 * rate;
        if i % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::{cap_and_pad, Presence};
    use rand::Rng;

    pub(crate) fn tiny_config() -> ModelConfig {
        ModelConfig {
            hidden_dim: 8,
            coattn_heads: 2,
            fusion_heads: 2,
            dropout: 0.0,
            ff_multiplier: 4,
            use_positional_encoding: false,
            input_dims: InputDims {
                text: 5,
                audio: 4,
                frame: 6,
                clip: 3,
                comment: 4,
                user: 2,
            },
            caps: SequenceCaps {
                text: 3,
                audio: 3,
                frames: 3,
                comments: 3,
            },
        }
    }

    fn rand_seq(rng: &mut ChaCha8Rng, valid: usize, cap: usize, d: usize) -> FeatureSequence {
        let s =
            FeatureSequence::from_rows(Matrix::from_fn(valid, d, |_, _| rng.gen_range(-1.0..1.0)));
        cap_and_pad(&s, cap)
    }

    fn rand_bundle(rng: &mut ChaCha8Rng, c: &ModelConfig) -> ModalityBundle {
        let d = c.input_dims;
        let v = |rng: &mut ChaCha8Rng, n| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        ModalityBundle {
            text: rand_seq(rng, 2, 3, d.text),
            audio: rand_seq(rng, 3, 3, d.audio),
            frames: rand_seq(rng, 1, 3, d.frame),
            clip_vec: v(rng, d.clip),
            comment_vec: v(rng, d.comment),
            user_vec: v(rng, d.user),
            presence: Presence {
                text: true,
                audio: true,
                frame: true,
                clip: true,
                comment: true,
                user: true,
            },
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let c = tiny_config();
        let m = SvFend::new(c.clone(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let p = m.forward(&rand_bundle(&mut rng, &c)).unwrap();
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
            assert!(p[0] > 0.0 && p[1] > 0.0);
        }
    }

    #[test]
    fn zero_head_gives_even_odds() {
        let c = tiny_config();
        let mut m = SvFend::new(c.clone(), 1).unwrap();
        let head = *m.classifier();
        m.params_mut().get_mut(head.weight).data_mut().fill(0.0);
        m.params_mut().get_mut(head.bias).data_mut().fill(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(m.forward(&rand_bundle(&mut rng, &c)).unwrap(), [0.5, 0.5]);
    }

    #[test]
    fn invalid_config_rejected() {
        let mut c = tiny_config();
        c.hidden_dim = 9;
        assert!(SvFend::new(c, 0).is_err());
        let mut c = tiny_config();
        c.dropout = 1.0;
        assert!(SvFend::new(c, 0).is_err());
    }

    #[test]
    fn wrong_input_width_is_shape_error() {
        let c = tiny_config();
        let m = SvFend::new(c.clone(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut b = rand_bundle(&mut rng, &c);
        b.user_vec.push(0.0);
        assert!(matches!(m.forward(&b), Err(Error::Shape(_))));
    }

    #[test]
    fn absent_user_projects_to_zero() {
        let c = tiny_config();
        let m = SvFend::new(c.clone(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut b = rand_bundle(&mut rng, &c);
        b.user_vec = vec![0.0; c.input_dims.user];
        b.presence.user = false;
        let p = m.project_inputs(&b).unwrap();
        assert!(p.user.data().iter().all(|&v| v == 0.0));
        assert_eq!(p.text.shape(), (3, 8));
        assert!(p.text.row(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn co_attention_preserves_lengths() {
        let c = tiny_config();
        let m = SvFend::new(c, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for la in 1..=8 {
            for lb in 1..=8 {
                let a = rand_seq(&mut rng, la, la, 8);
                let b = rand_seq(&mut rng, lb, lb, 8);
                let (ao, bo) = m.co_attention(true, &a, &b).unwrap();
                assert_eq!(ao.shape(), (la, 8));
                assert_eq!(bo.shape(), (lb, 8));
            }
        }
    }

    #[test]
    fn positional_encoding_variant_runs() {
        let mut c = tiny_config();
        c.use_positional_encoding = true;
        let m = SvFend::new(c.clone(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = m.forward(&rand_bundle(&mut rng, &c)).unwrap();
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn default_config_matches_published_settings() {
        let c = ModelConfig::default();
        assert_eq!((c.hidden_dim, c.coattn_heads, c.fusion_heads), (128, 4, 2));
        assert_eq!(
            (c.caps.frames, c.caps.audio, c.caps.comments, c.caps.text),
            (83, 50, 23, 512)
        );
        c.validate().unwrap();
    }

    #[test]
    fn extra_padding_does_not_change_output() {
        let c = tiny_config();
        let m = SvFend::new(c.clone(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = rand_bundle(&mut rng, &c);
        let mut long = b.clone();
        for s in [&mut long.text, &mut long.audio, &mut long.frames] {
            let valid = s.valid_len();
            let mut t = FeatureSequence::from_rows(Matrix::from_fn(valid, s.dim(), |r, k| {
                s.values.get(r, k)
            }));
            t.native_length = s.native_length;
            *s = cap_and_pad(&t, 7);
        }
        let p = m.forward(&b).unwrap();
        let q = m.forward(&long).unwrap();
        assert!((p[0] - q[0]).abs() < 1e-12);
    }
}
