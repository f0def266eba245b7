//! Raw sample fields → fixed-contract feature inputs.
//!
//! Pretrained extractors are opaque here: a modality is either read from a
//! precomputed cache, produced by a deterministic hash stub, or (for text
//! fields) embedded by hashing tokens.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cache::FeatureSource;
use crate::data::NewsVideoSample;
use crate::error::{Error, Result};
use crate::tensor::Matrix;
use crate::text::{hash_to_unit, tokenize, StableHasher};

/// Token inserted between title and transcript.
pub const SEPARATOR_TOKEN: &str = "[SEP]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Audio,
    Frame,
    Clip,
    Comment,
    User,
}

impl Modality {
    pub const ALL: [Modality; 6] = [
        Modality::Text,
        Modality::Audio,
        Modality::Frame,
        Modality::Clip,
        Modality::Comment,
        Modality::User,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Text => "text",
            Modality::Audio => "audio",
            Modality::Frame => "frame",
            Modality::Clip => "clip",
            Modality::Comment => "comment",
            Modality::User => "user",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Modality::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown modality `{s}`")))
    }
}

/// A length-capped matrix of per-step features with a prefix validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub values: Matrix,
    pub mask: Vec<bool>,
    /// Number of steps before capping.
    pub native_length: usize,
}

impl FeatureSequence {
    /// Every row valid.
    pub fn from_rows(values: Matrix) -> Self {
        let n = values.rows();
        Self {
            values,
            mask: vec![true; n],
            native_length: n,
        }
    }

    /// One zero step, masked out.
    pub fn absent(dim: usize) -> Self {
        Self {
            values: Matrix::zeros(1, dim),
            mask: vec![false],
            native_length: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn valid_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_present(&self) -> bool {
        self.mask.iter().any(|&m| m)
    }
}

/// Indices chosen when `n` steps are uniformly sampled down to `max_len`:
/// `floor(i · n / max_len)` for `i in 0..max_len`.
pub fn uniform_indices(n: usize, max_len: usize) -> Vec<usize> {
    (0..max_len).map(|i| i * n / max_len).collect()
}

/// Forces the output to exactly `max_len` steps: uniform sampling when the
/// valid prefix is longer, zero padding (masked) when it is shorter.
pub fn cap_and_pad(seq: &FeatureSequence, max_len: usize) -> FeatureSequence {
    assert!(max_len >= 1, "max_len must be >= 1");
    let valid = seq.valid_len();
    let d = seq.dim();
    let mut values = Matrix::zeros(max_len, d);
    let mut mask = vec![false; max_len];
    if valid > max_len {
        for (i, src) in uniform_indices(valid, max_len).into_iter().enumerate() {
            values.row_mut(i).copy_from_slice(seq.values.row(src));
            mask[i] = true;
        }
    } else {
        for i in 0..valid {
            values.row_mut(i).copy_from_slice(seq.values.row(i));
        }
        mask[..valid].fill(true);
    }
    FeatureSequence {
        values,
        mask,
        native_length: seq.native_length,
    }
}

/// Like-weighted comment weights `(l_j + 1) / (Σ l + k)`.
pub fn comment_weights(like_counts: &[u64]) -> Vec<f64> {
    let k = like_counts.len() as f64;
    let total: f64 = like_counts.iter().map(|&l| l as f64).sum::<f64>() + k;
    like_counts
        .iter()
        .map(|&l| (l as f64 + 1.0) / total)
        .collect()
}

/// Like-weighted sum of comment vectors. With no comments the result is a
/// zero vector of width `dim` and the returned presence flag is false.
pub fn aggregate_comments(
    comment_vectors: &[Vec<f64>],
    like_counts: &[u64],
    dim: usize,
) -> Result<(Vec<f64>, bool)> {
    if comment_vectors.len() != like_counts.len() {
        return Err(Error::Shape(format!(
            "{} comment vectors but {} like counts",
            comment_vectors.len(),
            like_counts.len()
        )));
    }
    if comment_vectors.is_empty() {
        return Ok((vec![0.0; dim], false));
    }
    if let Some(bad) = comment_vectors.iter().find(|v| v.len() != dim) {
        return Err(Error::Shape(format!(
            "comment vector of width {} where {dim} expected",
            bad.len()
        )));
    }
    let mut out = vec![0.0; dim];
    for (v, w) in comment_vectors.iter().zip(comment_weights(like_counts)) {
        for (o, x) in out.iter_mut().zip(v) {
            *o += w * x;
        }
    }
    Ok((out, true))
}

/// Mean over valid steps; zero vector when none are valid.
pub fn masked_mean(seq: &FeatureSequence) -> Vec<f64> {
    let mut out = vec![0.0; seq.dim()];
    let n = seq.valid_len();
    if n == 0 {
        return out;
    }
    for (r, _) in seq.mask.iter().enumerate().filter(|(_, &m)| m) {
        for (o, x) in out.iter_mut().zip(seq.values.row(r)) {
            *o += x;
        }
    }
    for o in &mut out {
        *o /= n as f64;
    }
    out
}

/// Averaged motion feature from per-clip features.
pub fn aggregate_clips(clips: &FeatureSequence) -> Vec<f64> {
    masked_mean(clips)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderBackend {
    /// Values hashed from (sample id, modality, step, dim).
    Stub,
    /// Values hashed from (token, dim); text-bearing modalities only.
    TokenHash,
    /// Read from the feature cache named in `media_refs`; falls back to the
    /// stub when `stub_fallback` is set and the reference is missing.
    Cache { stub_fallback: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderPlugin {
    pub modality: Modality,
    pub output_dim: usize,
    pub deterministic: bool,
    pub backend: EncoderBackend,
    /// Sequence length produced by the stub for non-text modalities.
    #[serde(default = "default_stub_steps")]
    pub stub_steps: usize,
}

fn default_stub_steps() -> usize {
    8
}

impl EncoderPlugin {
    pub fn new(modality: Modality, output_dim: usize, backend: EncoderBackend) -> Self {
        Self {
            modality,
            output_dim,
            deterministic: true,
            backend,
            stub_steps: default_stub_steps(),
        }
    }

    pub fn stub(modality: Modality, output_dim: usize) -> Self {
        Self::new(modality, output_dim, EncoderBackend::Stub)
    }

    pub fn name(&self) -> String {
        match self.backend {
            EncoderBackend::Stub => "stub".into(),
            EncoderBackend::TokenHash => "token-hash".into(),
            EncoderBackend::Cache {
                stub_fallback: true,
            } => "cache+stub".into(),
            EncoderBackend::Cache {
                stub_fallback: false,
            } => "cache".into(),
        }
    }

    /// Plugin by registry name: `stub`, `token-hash`, `cache`, `cache+stub`.
    pub fn by_name(name: &str, modality: Modality, output_dim: usize) -> Result<Self> {
        let backend = match name {
            "stub" => EncoderBackend::Stub,
            "token-hash" => EncoderBackend::TokenHash,
            "cache" => EncoderBackend::Cache {
                stub_fallback: false,
            },
            "cache+stub" => EncoderBackend::Cache {
                stub_fallback: true,
            },
            other => return Err(Error::InvalidArgument(format!(
                "unknown encoder plugin `{other}` (expected stub, token-hash, cache, cache+stub)"
            ))),
        };
        Ok(Self::new(modality, output_dim, backend))
    }

    fn stub_matrix(&self, sample_id: &str, rows: usize) -> Matrix {
        let base = StableHasher::default()
            .str(sample_id)
            .str(self.modality.as_str());
        Matrix::from_fn(rows, self.output_dim, |t, d| {
            hash_to_unit(base.u64(t as u64).u64(d as u64).finish())
        })
    }

    fn token_matrix(&self, tokens: &[String]) -> Matrix {
        Matrix::from_fn(tokens.len(), self.output_dim, |t, d| {
            hash_to_unit(
                StableHasher::default()
                    .str(&tokens[t])
                    .u64(d as u64)
                    .finish(),
            )
        })
    }

    fn load_cache(&self, reference: &str, source: &dyn FeatureSource) -> Result<Matrix> {
        let cached = source.load(reference)?;
        if cached.cols() != self.output_dim {
            return Err(Error::Shape(format!(
                "{} cache `{reference}` has width {} but the plugin expects {}",
                self.modality,
                cached.cols(),
                self.output_dim
            )));
        }
        Ok(Matrix::from_vec(
            cached.rows(),
            cached.cols(),
            cached.values.iter().map(|&v| f64::from(v)).collect(),
        ))
    }
}

/// Per-sample inputs an encoder may consult.
pub struct EncodeContext<'a> {
    pub sample_id: &'a str,
    pub media_ref: Option<&'a str>,
    pub source: &'a dyn FeatureSource,
}

/// Title and transcript joined by the separator token, at most `max_tokens`.
pub fn text_tokens(title: &str, transcript: &str, max_tokens: usize) -> Vec<String> {
    let mut tokens = tokenize(title);
    let rest = tokenize(transcript);
    if !tokens.is_empty() && !rest.is_empty() {
        tokens.push(SEPARATOR_TOKEN.to_string());
    }
    tokens.extend(rest);
    tokens.truncate(max_tokens);
    tokens
}

pub fn encode_text(
    title: &str,
    transcript: &str,
    plugin: &EncoderPlugin,
    max_tokens: usize,
    ctx: &EncodeContext<'_>,
) -> Result<FeatureSequence> {
    if plugin.modality != Modality::Text {
        return Err(Error::InvalidArgument(format!(
            "encode_text needs a text plugin, got {}",
            plugin.modality
        )));
    }
    let tokens = text_tokens(title, transcript, max_tokens);
    let from_cache = match (plugin.backend, ctx.media_ref) {
        (EncoderBackend::Cache { .. }, Some(r)) => Some(plugin.load_cache(r, ctx.source)?),
        (
            EncoderBackend::Cache {
                stub_fallback: false,
            },
            None,
        ) => return Err(Error::MissingMedia("text".into())),
        _ => None,
    };
    let values = match from_cache {
        Some(m) => truncate_rows(m, max_tokens),
        None if tokens.is_empty() => return Ok(FeatureSequence::absent(plugin.output_dim)),
        None => match plugin.backend {
            EncoderBackend::TokenHash => plugin.token_matrix(&tokens),
            _ => plugin.stub_matrix(ctx.sample_id, tokens.len()),
        },
    };
    if values.rows() == 0 {
        return Ok(FeatureSequence::absent(plugin.output_dim));
    }
    Ok(FeatureSequence::from_rows(values))
}

fn truncate_rows(m: Matrix, max_rows: usize) -> Matrix {
    if m.rows() <= max_rows {
        return m;
    }
    let cols = m.cols();
    let mut data = m.into_data();
    data.truncate(max_rows * cols);
    Matrix::from_vec(max_rows, cols, data)
}

/// Raw input for the non-text modalities.
pub enum RawInput<'a> {
    /// Audio, frame or clip: only the cache reference matters.
    Media,
    Comments(&'a [String]),
    Introduction(&'a str),
}

pub fn encode_modality(
    raw: RawInput<'_>,
    plugin: &EncoderPlugin,
    ctx: &EncodeContext<'_>,
) -> Result<FeatureSequence> {
    let m = plugin.modality;
    if m == Modality::Text {
        return Err(Error::InvalidArgument(
            "use encode_text for the text modality".into(),
        ));
    }
    if let EncoderBackend::Cache { stub_fallback } = plugin.backend {
        match ctx.media_ref {
            Some(r) => {
                let values = plugin.load_cache(r, ctx.source)?;
                if m == Modality::User && values.rows() != 1 {
                    return Err(Error::Shape(format!(
                        "user cache `{r}` must have exactly one row, found {}",
                        values.rows()
                    )));
                }
                if let RawInput::Comments(texts) = raw {
                    if values.rows() != texts.len() {
                        return Err(Error::Shape(format!(
                            "comment cache `{r}` has {} rows for {} comments",
                            values.rows(),
                            texts.len()
                        )));
                    }
                }
                return Ok(if values.rows() == 0 {
                    FeatureSequence::absent(plugin.output_dim)
                } else {
                    FeatureSequence::from_rows(values)
                });
            }
            None if !stub_fallback => {
                // Absent comments / introductions are data, not errors.
                let nothing = match raw {
                    RawInput::Comments(t) => t.is_empty(),
                    RawInput::Introduction(s) => s.trim().is_empty(),
                    RawInput::Media => false,
                };
                if nothing {
                    return Ok(FeatureSequence::absent(plugin.output_dim));
                }
                return Err(Error::MissingMedia(m.as_str().into()));
            }
            None => {}
        }
    }
    let values = match raw {
        RawInput::Media => plugin.stub_matrix(ctx.sample_id, plugin.stub_steps),
        RawInput::Comments(texts) => {
            if texts.is_empty() {
                return Ok(FeatureSequence::absent(plugin.output_dim));
            }
            let mut m = Matrix::zeros(texts.len(), plugin.output_dim);
            for (j, t) in texts.iter().enumerate() {
                let row = text_vector(plugin, ctx.sample_id, j, t);
                m.row_mut(j).copy_from_slice(&row);
            }
            m
        }
        RawInput::Introduction(intro) => {
            if intro.trim().is_empty() {
                return Ok(FeatureSequence::absent(plugin.output_dim));
            }
            Matrix::row_vector(text_vector(plugin, ctx.sample_id, 0, intro))
        }
    };
    Ok(FeatureSequence::from_rows(values))
}

/// One vector for a short text: mean token embedding for `TokenHash`,
/// otherwise the stub row at `step`.
fn text_vector(plugin: &EncoderPlugin, sample_id: &str, step: usize, text: &str) -> Vec<f64> {
    match plugin.backend {
        EncoderBackend::TokenHash => {
            let tokens = tokenize(text);
            if tokens.is_empty() {
                return vec![0.0; plugin.output_dim];
            }
            masked_mean(&FeatureSequence::from_rows(plugin.token_matrix(&tokens)))
        }
        _ => {
            let base = StableHasher::default()
                .str(sample_id)
                .str(plugin.modality.as_str());
            (0..plugin.output_dim)
                .map(|d| hash_to_unit(base.u64(step as u64).u64(d as u64).finish()))
                .collect()
        }
    }
}

/// Sequence-length caps applied before modelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceCaps {
    pub text: usize,
    pub audio: usize,
    pub frames: usize,
    pub comments: usize,
}

impl Default for SequenceCaps {
    fn default() -> Self {
        Self {
            text: 512,
            audio: 50,
            frames: 83,
            comments: 23,
        }
    }
}

/// One encoder per modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PluginRegistry {
    pub text: EncoderPlugin,
    pub audio: EncoderPlugin,
    pub frame: EncoderPlugin,
    pub clip: EncoderPlugin,
    pub comment: EncoderPlugin,
    pub user: EncoderPlugin,
}

/// Per-modality output widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDims {
    pub text: usize,
    pub audio: usize,
    pub frame: usize,
    pub clip: usize,
    pub comment: usize,
    pub user: usize,
}

impl Default for InputDims {
    /// Widths of the usual pretrained extractors (BERT, VGGish, VGG19, C3D).
    fn default() -> Self {
        Self {
            text: 768,
            audio: 128,
            frame: 4096,
            clip: 4096,
            comment: 768,
            user: 768,
        }
    }
}

impl InputDims {
    pub fn get(&self, m: Modality) -> usize {
        match m {
            Modality::Text => self.text,
            Modality::Audio => self.audio,
            Modality::Frame => self.frame,
            Modality::Clip => self.clip,
            Modality::Comment => self.comment,
            Modality::User => self.user,
        }
    }
}

impl PluginRegistry {
    pub fn uniform(dims: InputDims, backend: EncoderBackend) -> Self {
        let p = |m| EncoderPlugin::new(m, dims.get(m), backend);
        Self {
            text: p(Modality::Text),
            audio: p(Modality::Audio),
            frame: p(Modality::Frame),
            clip: p(Modality::Clip),
            comment: p(Modality::Comment),
            user: p(Modality::User),
        }
    }

    pub fn stubs(dims: InputDims) -> Self {
        Self::uniform(dims, EncoderBackend::Stub)
    }

    /// Cache-backed registry that falls back to stubs for missing refs.
    pub fn cached(dims: InputDims) -> Self {
        Self::uniform(
            dims,
            EncoderBackend::Cache {
                stub_fallback: true,
            },
        )
    }

    pub fn get(&self, m: Modality) -> &EncoderPlugin {
        match m {
            Modality::Text => &self.text,
            Modality::Audio => &self.audio,
            Modality::Frame => &self.frame,
            Modality::Clip => &self.clip,
            Modality::Comment => &self.comment,
            Modality::User => &self.user,
        }
    }

    pub fn dims(&self) -> InputDims {
        InputDims {
            text: self.text.output_dim,
            audio: self.audio.output_dim,
            frame: self.frame.output_dim,
            clip: self.clip.output_dim,
            comment: self.comment.output_dim,
            user: self.user.output_dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Presence {
    pub text: bool,
    pub audio: bool,
    pub frame: bool,
    pub clip: bool,
    pub comment: bool,
    pub user: bool,
}

/// Every modality of one sample, capped but not yet aggregated.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSample {
    pub text: FeatureSequence,
    pub audio: FeatureSequence,
    pub frames: FeatureSequence,
    pub clips: FeatureSequence,
    pub comments: FeatureSequence,
    /// Like counts of the comments kept in `comments`, same order.
    pub comment_likes: Vec<u64>,
    pub user: FeatureSequence,
}

/// The six inputs of the fusion model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityBundle {
    pub text: FeatureSequence,
    pub audio: FeatureSequence,
    pub frames: FeatureSequence,
    pub clip_vec: Vec<f64>,
    pub comment_vec: Vec<f64>,
    pub user_vec: Vec<f64>,
    pub presence: Presence,
}

impl ModalityBundle {
    pub fn is_finite(&self) -> bool {
        self.text.values.is_finite()
            && self.audio.values.is_finite()
            && self.frames.values.is_finite()
            && [&self.clip_vec, &self.comment_vec, &self.user_vec]
                .iter()
                .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

pub fn encode_sample(
    sample: &NewsVideoSample,
    plugins: &PluginRegistry,
    caps: &SequenceCaps,
    source: &dyn FeatureSource,
) -> Result<EncodedSample> {
    let ctx = |m: Modality| EncodeContext {
        sample_id: &sample.sample_id,
        media_ref: sample.media_refs.get(m.as_str()).map(String::as_str),
        source,
    };
    let text = encode_text(
        &sample.title,
        &sample.transcript,
        &plugins.text,
        caps.text,
        &ctx(Modality::Text),
    )?;
    let audio = encode_modality(RawInput::Media, &plugins.audio, &ctx(Modality::Audio))?;
    let frames = encode_modality(RawInput::Media, &plugins.frame, &ctx(Modality::Frame))?;
    let clips = encode_modality(RawInput::Media, &plugins.clip, &ctx(Modality::Clip))?;
    let texts: Vec<String> = sample.comments.iter().map(|c| c.text.clone()).collect();
    let comments = encode_modality(
        RawInput::Comments(&texts),
        &plugins.comment,
        &ctx(Modality::Comment),
    )?;
    let user = encode_modality(
        RawInput::Introduction(&sample.publisher.introduction),
        &plugins.user,
        &ctx(Modality::User),
    )?;

    // Comments beyond the cap are chosen by the same uniform rule as frames;
    // their like counts follow the same indices.
    let likes: Vec<u64> = sample
        .comments
        .iter()
        .map(|c| c.like_count.max(0) as u64)
        .collect();
    let k = comments.valid_len();
    let comment_likes = if k > caps.comments {
        uniform_indices(k, caps.comments)
            .into_iter()
            .map(|i| likes[i])
            .collect()
    } else {
        likes[..k.min(likes.len())].to_vec()
    };

    Ok(EncodedSample {
        text: cap_and_pad(&text, caps.text),
        audio: cap_and_pad(&audio, caps.audio),
        frames: cap_and_pad(&frames, caps.frames),
        clips: cap_and_pad(&clips, caps.frames),
        comments: cap_and_pad(&comments, caps.comments),
        comment_likes,
        user,
    })
}

impl EncodedSample {
    pub fn bundle(&self) -> Result<ModalityBundle> {
        let k = self.comments.valid_len();
        let vectors: Vec<Vec<f64>> = (0..k)
            .map(|j| self.comments.values.row(j).to_vec())
            .collect();
        let (comment_vec, comment_present) =
            aggregate_comments(&vectors, &self.comment_likes, self.comments.dim())?;
        let user_present = self.user.is_present();
        let user_vec = if user_present {
            self.user.values.row(0).to_vec()
        } else {
            vec![0.0; self.user.dim()]
        };
        Ok(ModalityBundle {
            presence: Presence {
                text: self.text.is_present(),
                audio: self.audio.is_present(),
                frame: self.frames.is_present(),
                clip: self.clips.is_present(),
                comment: comment_present,
                user: user_present,
            },
            text: self.text.clone(),
            audio: self.audio.clone(),
            frames: self.frames.clone(),
            clip_vec: aggregate_clips(&self.clips),
            comment_vec,
            user_vec,
        })
    }
}

pub fn build_bundle(
    sample: &NewsVideoSample,
    plugins: &PluginRegistry,
    caps: &SequenceCaps,
    source: &dyn FeatureSource,
) -> Result<ModalityBundle> {
    encode_sample(sample, plugins, caps, source)?.bundle()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::{CachedFeatures, MemorySource, NoSource};

    fn ctx<'a>(source: &'a dyn FeatureSource, media: Option<&'a str>) -> EncodeContext<'a> {
        EncodeContext {
            sample_id: "s1",
            media_ref: media,
            source,
        }
    }

    fn seq(rows: &[&[f64]]) -> FeatureSequence {
        let d = rows[0].len();
        FeatureSequence::from_rows(Matrix::from_vec(
            rows.len(),
            d,
            rows.iter().flat_map(|r| r.iter().copied()).collect(),
        ))
    }

    #[test]
    fn text_shape_and_determinism() {
        let p = EncoderPlugin::stub(Modality::Text, 4);
        let a = encode_text("a", "", &p, 512, &ctx(&NoSource, None)).unwrap();
        assert!(a.native_length >= 1);
        assert_eq!(a.dim(), 4);
        let b = encode_text("a", "", &p, 512, &ctx(&NoSource, None)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn long_transcript_is_truncated_to_512() {
        let p = EncoderPlugin::stub(Modality::Text, 4);
        let transcript = vec!["word"; 600].join(" ");
        let s = encode_text("t", &transcript, &p, 512, &ctx(&NoSource, None)).unwrap();
        assert_eq!(s.native_length, 512);
    }

    #[test]
    fn empty_text_is_absent() {
        let p = EncoderPlugin::stub(Modality::Text, 4);
        let s = encode_text("", "", &p, 512, &ctx(&NoSource, None)).unwrap();
        assert_eq!(s.len(), 1);
        assert!(!s.is_present());
        assert!(s.values.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn separator_joins_title_and_transcript() {
        assert_eq!(
            text_tokens("a b", "c", 10),
            vec!["a", "b", SEPARATOR_TOKEN, "c"]
        );
        assert_eq!(text_tokens("a b", "", 10), vec!["a", "b"]);
    }

    #[test]
    fn empty_introduction_is_absent() {
        let p = EncoderPlugin::stub(Modality::User, 5);
        let s = encode_modality(RawInput::Introduction(""), &p, &ctx(&NoSource, None)).unwrap();
        assert_eq!(s.len(), 1);
        assert!(!s.is_present());
    }

    #[test]
    fn missing_media_without_fallback_names_modality() {
        let p = EncoderPlugin::new(
            Modality::Audio,
            3,
            EncoderBackend::Cache {
                stub_fallback: false,
            },
        );
        let e = encode_modality(RawInput::Media, &p, &ctx(&NoSource, None)).unwrap_err();
        assert!(e.to_string().contains("audio"));
    }

    #[test]
    fn cache_width_mismatch_is_an_error() {
        let mut src = MemorySource::default();
        src.insert("a", CachedFeatures::new("audio", 2, 3, vec![0.0; 6], "t"));
        let p = EncoderPlugin::new(
            Modality::Audio,
            4,
            EncoderBackend::Cache {
                stub_fallback: false,
            },
        );
        assert!(matches!(
            encode_modality(RawInput::Media, &p, &ctx(&src, Some("a"))),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn cap_and_pad_pads_50_to_83() {
        let s = FeatureSequence::from_rows(Matrix::from_fn(50, 2, |r, c| (r + c) as f64 + 1.0));
        let out = cap_and_pad(&s, 83);
        assert_eq!(out.len(), 83);
        assert_eq!(out.mask.iter().filter(|&&m| m).count(), 50);
        assert!(out.mask[..50].iter().all(|&m| m));
        assert!(out.mask[50..].iter().all(|&m| !m));
        assert!((50..83).all(|r| out.values.row(r).iter().all(|&v| v == 0.0)));
        assert_eq!(out.native_length, 50);
    }

    #[test]
    fn cap_and_pad_identity_at_cap() {
        let s = FeatureSequence::from_rows(Matrix::from_fn(83, 3, |r, c| (r * 3 + c) as f64));
        assert_eq!(cap_and_pad(&s, 83), s);
    }

    #[test]
    fn cap_and_pad_samples_even_indices() {
        let s = FeatureSequence::from_rows(Matrix::from_fn(100, 1, |r, _| r as f64));
        let out = cap_and_pad(&s, 50);
        let picked: Vec<f64> = (0..50).map(|r| out.values.get(r, 0)).collect();
        let expected: Vec<f64> = (0..50).map(|i| (2 * i) as f64).collect();
        assert_eq!(picked, expected);
        assert_eq!(out.native_length, 100);
    }

    #[test]
    fn comment_aggregation_examples() {
        let c = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let (v, present) = aggregate_comments(&c, &[0, 0], 2).unwrap();
        assert!(present);
        assert_eq!(v, vec![0.5, 0.5]);

        let (v, _) = aggregate_comments(&c[..1], &[41], 2).unwrap();
        assert_eq!(v, vec![1.0, 0.0]);

        // (3+1)/(4+2) and (1+1)/(4+2)
        let (v, _) = aggregate_comments(&c, &[3, 1], 2).unwrap();
        assert!((v[0] - 4.0 / 6.0).abs() < 1e-12);
        assert!((v[1] - 2.0 / 6.0).abs() < 1e-12);

        let (v, present) = aggregate_comments(&[], &[], 3).unwrap();
        assert!(!present);
        assert_eq!(v, vec![0.0; 3]);

        assert!(aggregate_comments(&[vec![1.0], vec![1.0, 2.0]], &[0, 0], 1).is_err());
        assert!(aggregate_comments(&c, &[0], 2).is_err());
    }

    #[test]
    fn clip_mean_respects_mask() {
        assert_eq!(
            aggregate_clips(&seq(&[&[2.0, 0.0], &[0.0, 2.0]])),
            vec![1.0, 1.0]
        );
        let padded = cap_and_pad(&seq(&[&[3.0, -1.0]]), 2);
        assert_eq!(aggregate_clips(&padded), vec![3.0, -1.0]);
        assert_eq!(aggregate_clips(&FeatureSequence::absent(2)), vec![0.0, 0.0]);
    }
}
