//! TOML run configuration. Every key is optional; command-line flags take
//! precedence over the file.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;
use svfend_core::baselines::SvmConfig;
use svfend_core::eval::{Method, SplitKind, TrainConfig};
use svfend_core::model::ModelConfig;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub split: Option<SplitKind>,
    pub seed: Option<u64>,
    pub methods: Option<Vec<Method>>,
    pub output_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub lexicon_dir: Option<PathBuf>,
    pub patterns: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelOverrides,
    #[serde(default)]
    pub train: TrainOverrides,
    #[serde(default)]
    pub svm: SvmOverrides,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOverrides {
    pub hidden_dim: Option<usize>,
    pub coattn_heads: Option<usize>,
    pub fusion_heads: Option<usize>,
    pub dropout: Option<f64>,
    pub ff_multiplier: Option<usize>,
    pub use_positional_encoding: Option<bool>,
    pub max_text_tokens: Option<usize>,
    pub max_audio_frames: Option<usize>,
    pub max_frames: Option<usize>,
    pub max_comments: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub epochs: Option<usize>,
    pub patience: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub validation_fraction: Option<f64>,
    pub target_train_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmOverrides {
    pub c: Option<f64>,
    pub max_iter: Option<usize>,
    pub min_df: Option<usize>,
}

fn pick<T>(dst: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *dst = v;
    }
}

impl ModelOverrides {
    pub fn merge(&mut self, other: &ModelOverrides) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            hidden_dim,
            coattn_heads,
            fusion_heads,
            dropout,
            ff_multiplier,
            use_positional_encoding,
            max_text_tokens,
            max_audio_frames,
            max_frames,
            max_comments
        );
    }

    pub fn apply(&self, c: &mut ModelConfig) {
        pick(&mut c.hidden_dim, self.hidden_dim);
        pick(&mut c.coattn_heads, self.coattn_heads);
        pick(&mut c.fusion_heads, self.fusion_heads);
        pick(&mut c.dropout, self.dropout);
        pick(&mut c.ff_multiplier, self.ff_multiplier);
        pick(&mut c.use_positional_encoding, self.use_positional_encoding);
        pick(&mut c.caps.text, self.max_text_tokens);
        pick(&mut c.caps.audio, self.max_audio_frames);
        pick(&mut c.caps.frames, self.max_frames);
        pick(&mut c.caps.comments, self.max_comments);
    }
}

impl TrainOverrides {
    pub fn merge(&mut self, other: &TrainOverrides) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            epochs,
            patience,
            learning_rate,
            batch_size,
            validation_fraction,
            target_train_accuracy
        );
    }

    pub fn apply(&self, c: &mut TrainConfig) {
        pick(&mut c.epochs, self.epochs);
        pick(&mut c.patience, self.patience);
        pick(&mut c.learning_rate, self.learning_rate);
        pick(&mut c.batch_size, self.batch_size);
        pick(&mut c.validation_fraction, self.validation_fraction);
        if self.target_train_accuracy.is_some() {
            c.target_train_accuracy = self.target_train_accuracy;
        }
    }
}

impl SvmOverrides {
    pub fn apply(&self, c: &mut SvmConfig, min_df: &mut usize) {
        pick(&mut c.c, self.c);
        pick(&mut c.max_iter, self.max_iter);
        pick(min_df, self.min_df);
    }
}

impl RunConfig {
    /// Parses `path`; relative paths inside are resolved against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.dataset,
            &mut cfg.output_dir,
            &mut cfg.cache_dir,
            &mut cfg.lexicon_dir,
            &mut cfg.patterns,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn load_opt(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
        assert!(toml::from_str::<RunConfig>("[model]\nwidth = 3").is_err());
    }

    #[test]
    fn overrides_apply_over_defaults() {
        let cfg: RunConfig = toml::from_str(
            "methods = [\"svfend\", \"majority\"]\nsplit = \"temporal\"\n[model]\nhidden_dim = 32\n[train]\nepochs = 3",
        )
        .unwrap();
        let mut m = ModelConfig::default();
        cfg.model.apply(&mut m);
        assert_eq!(m.hidden_dim, 32);
        let mut t = TrainConfig::default();
        cfg.train.apply(&mut t);
        assert_eq!(t.epochs, 3);
        assert_eq!(cfg.split, Some(SplitKind::Temporal));
        assert_eq!(cfg.methods.unwrap().len(), 2);
    }
}
