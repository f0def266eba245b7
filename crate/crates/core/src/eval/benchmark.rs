//! Method registry and the per-fold benchmark loop.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{aggregate, compute_metrics, Metrics};
use super::split::{Fold, SplitKind, SplitSpec};
use super::train::{predict_all, train_model, Example, TrainConfig};
use crate::baselines::handcrafted::DEFAULT_MIN_DF;
use crate::baselines::{
    train_svm, AttentionPoolClassifier, FeatureGroup, HandcraftedExtractor, LexiconSet, SvmConfig,
    TextCnn, TextCnnConfig,
};
use crate::cache::FeatureSource;
use crate::data::{Dataset, NewsVideoSample};
use crate::encoders::{
    encode_sample, FeatureSequence, InputDims, Modality, ModalityBundle, PluginRegistry,
    SequenceCaps,
};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, SvFend};
use crate::nn::{predict, Classifier};
use crate::text::StableHasher;

/// Audio frame hop of the usual audio embedding extractor, in seconds.
pub const AUDIO_HOP_SECS: f64 = 0.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Majority,
    SvmMeta,
    SvmText,
    SvmComment,
    Textcnn,
    AttnComment,
    AttnFrame,
    AttnClip,
    AttnAudio,
    Svfend,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Majority,
        Method::SvmMeta,
        Method::SvmText,
        Method::SvmComment,
        Method::Textcnn,
        Method::AttnComment,
        Method::AttnFrame,
        Method::AttnClip,
        Method::AttnAudio,
        Method::Svfend,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Majority => "majority",
            Method::SvmMeta => "svm_meta",
            Method::SvmText => "svm_text",
            Method::SvmComment => "svm_comment",
            Method::Textcnn => "textcnn",
            Method::AttnComment => "attn_comment",
            Method::AttnFrame => "attn_frame",
            Method::AttnClip => "attn_clip",
            Method::AttnAudio => "attn_audio",
            Method::Svfend => "svfend",
        }
    }

    /// Input-modality abbreviation: M metadata, T title, Tr transcript,
    /// C comments, F frames, V clips, A audio.
    pub fn modality_tag(self) -> &'static str {
        match self {
            Method::Majority => "-",
            Method::SvmMeta => "M",
            Method::SvmText | Method::Textcnn => "T&Tr",
            Method::SvmComment | Method::AttnComment => "C",
            Method::AttnFrame => "F",
            Method::AttnClip => "V",
            Method::AttnAudio => "A",
            Method::Svfend => "T&Tr&A&F&V&C&M",
        }
    }

    pub fn registered_names() -> Vec<&'static str> {
        Self::ALL.iter().map(|m| m.name()).collect()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown method `{s}`; registered methods: {}",
                    Self::registered_names().join(", ")
                ))
            })
    }
}

/// Everything a benchmark run depends on besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub methods: Vec<Method>,
    pub split: SplitKind,
    pub seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub svm: SvmConfig,
    pub min_df: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Svfend],
            split: SplitKind::EventFiveFold,
            seed: 0,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            svm: SvmConfig::default(),
            min_df: DEFAULT_MIN_DF,
        }
    }
}

/// Encoded inputs of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSample {
    pub bundle: ModalityBundle,
    /// Capped clip and comment sequences (the bundle keeps only their
    /// aggregates).
    pub clips: FeatureSequence,
    pub comments: FeatureSequence,
}

impl PreparedSample {
    /// Duration estimated from the number of audio frames, 0 when unknown.
    pub fn duration_secs(&self) -> f64 {
        self.bundle.audio.native_length as f64 * AUDIO_HOP_SECS
    }
}

pub fn prepare_samples(
    dataset: &Dataset,
    plugins: &PluginRegistry,
    caps: &SequenceCaps,
    source: &dyn FeatureSource,
) -> Result<Vec<PreparedSample>> {
    dataset
        .samples()
        .par_iter()
        .map(|s| {
            let enc = encode_sample(s, plugins, caps, source)?;
            Ok(PreparedSample {
                bundle: enc.bundle()?,
                clips: enc.clips,
                comments: enc.comments,
            })
        })
        .collect()
}

/// Widths of the cached features, read from the first sample that has each
/// modality. Modalities with no cache keep `fallback`.
pub fn infer_input_dims(
    dataset: &Dataset,
    source: &dyn FeatureSource,
    fallback: InputDims,
) -> Result<InputDims> {
    let mut dims = fallback;
    for m in Modality::ALL {
        let Some(reference) = dataset
            .samples()
            .iter()
            .find_map(|s| s.media_refs.get(m.as_str()))
        else {
            continue;
        };
        let cols = source.load(reference)?.cols();
        match m {
            Modality::Text => dims.text = cols,
            Modality::Audio => dims.audio = cols,
            Modality::Frame => dims.frame = cols,
            Modality::Clip => dims.clip = cols,
            Modality::Comment => dims.comment = cols,
            Modality::User => dims.user = cols,
        }
    }
    Ok(dims)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub metrics: Metrics,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub method: Method,
    pub fold: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub modality_tag: String,
    pub folds: Vec<FoldResult>,
    /// Present for multi-fold splits with at least one successful fold.
    pub mean: Option<Metrics>,
    /// Sample standard deviation over folds.
    pub std: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub n_samples: usize,
    pub methods: Vec<MethodReport>,
    pub failures: Vec<CellFailure>,
}

pub const CSV_HEADER: &str =
    "method,modality_tag,fold,accuracy,macro_precision,macro_recall,macro_f1";

impl BenchmarkReport {
    /// Per-fold rows followed by `mean`/`std` rows for each method. A
    /// temporal run has one row per method with fold `temporal`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        let mut row = |method: &MethodReport, fold: &str, m: &Metrics| {
            let [a, p, r, f] = m.as_array();
            out.push_str(&format!(
                "{},{},{},{a},{p},{r},{f}\n",
                method.method, method.modality_tag, fold
            ));
        };
        for m in &self.methods {
            for f in &m.folds {
                let label = match self.config.split {
                    SplitKind::Temporal => "temporal".to_string(),
                    SplitKind::EventFiveFold => f.fold.to_string(),
                };
                row(m, &label, &f.metrics);
            }
            if let (Some(mean), Some(std)) = (&m.mean, &m.std) {
                row(m, "mean", mean);
                row(m, "std", std);
            }
        }
        out
    }

    pub fn has_failures(&self) -> bool {
        !self.failures.is_empty()
    }
}

fn cell_seed(seed: u64, method: Method, fold: usize) -> u64 {
    StableHasher::default()
        .u64(seed)
        .str(method.name())
        .u64(fold as u64)
        .finish()
}

/// Trains and tests every method on every fold. A failing cell is recorded
/// and the run continues.
pub fn run_benchmark(
    dataset: &Dataset,
    prepared: &[PreparedSample],
    split: &SplitSpec,
    config: &BenchmarkConfig,
    lexicons: &LexiconSet,
) -> Result<BenchmarkReport> {
    if prepared.len() != dataset.len() {
        return Err(Error::Shape(format!(
            "{} prepared samples for {} dataset samples",
            prepared.len(),
            dataset.len()
        )));
    }
    if split.kind != config.split {
        return Err(Error::InvalidArgument(
            "split kind differs from the configured split".into(),
        ));
    }
    config.train.validate()?;
    let mut methods = Vec::new();
    let mut failures = Vec::new();
    for &method in &config.methods {
        let mut folds = Vec::new();
        for fold in &split.folds {
            let seed = cell_seed(config.seed, method, fold.index);
            match run_cell(method, dataset, prepared, fold, config, lexicons, seed) {
                Ok(r) => folds.push(r),
                Err(e) => failures.push(CellFailure {
                    method,
                    fold: fold.index,
                    error: e.to_string(),
                }),
            }
        }
        let (mean, std) = if split.folds.len() > 1 {
            let per: Vec<Metrics> = folds.iter().map(|f| f.metrics).collect();
            aggregate(&per).map_or((None, None), |(m, s)| (Some(m), Some(s)))
        } else {
            (None, None)
        };
        methods.push(MethodReport {
            method,
            modality_tag: method.modality_tag().to_string(),
            folds,
            mean,
            std,
        });
    }
    Ok(BenchmarkReport {
        config: config.clone(),
        n_samples: dataset.len(),
        methods,
        failures,
    })
}

/// Whether a sample carries the input a method needs.
fn usable(method: Method, sample: &NewsVideoSample, p: &PreparedSample) -> bool {
    match method {
        Method::SvmComment => !sample.comments.is_empty(),
        Method::AttnComment => p.comments.is_present(),
        Method::AttnFrame => p.bundle.frames.is_present(),
        Method::AttnClip => p.clips.is_present(),
        Method::AttnAudio => p.bundle.audio.is_present(),
        _ => true,
    }
}

fn run_cell(
    method: Method,
    dataset: &Dataset,
    prepared: &[PreparedSample],
    fold: &Fold,
    config: &BenchmarkConfig,
    lexicons: &LexiconSet,
    seed: u64,
) -> Result<FoldResult> {
    let keep = |ids: &[usize]| -> Vec<usize> {
        ids.iter()
            .copied()
            .filter(|&i| usable(method, dataset.get(i), &prepared[i]))
            .collect()
    };
    let (train, val, test) = (keep(&fold.train), keep(&fold.validation), keep(&fold.test));
    if train.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{method}: no usable training samples"
        )));
    }
    if test.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{method}: no usable test samples"
        )));
    }
    let labels = |ids: &[usize]| -> Vec<u8> { ids.iter().map(|&i| dataset.get(i).label).collect() };
    let mut train_cfg = config.train.clone();
    train_cfg.seed = seed;

    let predictions: Vec<u8> = match method {
        Method::Majority => {
            let y = labels(&train);
            let fakes = y.iter().filter(|&&l| l == 1).count();
            let majority = u8::from(2 * fakes > y.len());
            vec![majority; test.len()]
        }
        Method::SvmMeta | Method::SvmText | Method::SvmComment => {
            let (groups, tfidf) = match method {
                Method::SvmMeta => (FeatureGroup::Metadata, false),
                Method::SvmText => (FeatureGroup::Text, true),
                _ => (FeatureGroup::Comment, true),
            };
            // The SVM has no early stopping, so validation samples train too.
            let fit_ids: Vec<usize> = train.iter().chain(&val).copied().collect();
            let mut ex = HandcraftedExtractor::new(&[groups], tfidf, lexicons.clone());
            let fit_samples: Vec<&NewsVideoSample> =
                fit_ids.iter().map(|&i| dataset.get(i)).collect();
            ex.fit(&fit_samples, config.min_df);
            let feats = |ids: &[usize]| -> Result<Vec<Vec<f64>>> {
                ids.iter()
                    .map(|&i| {
                        Ok(ex
                            .extract(dataset.get(i), prepared[i].duration_secs())?
                            .values)
                    })
                    .collect()
            };
            let svm_cfg = SvmConfig { seed, ..config.svm };
            let model = train_svm(&feats(&fit_ids)?, &labels(&fit_ids), &svm_cfg)?;
            feats(&test)?.iter().map(|x| model.predict(x)).collect()
        }
        Method::Textcnn => {
            let dim = prepared[train[0]].bundle.text.dim();
            let model = TextCnn::new(TextCnnConfig::new(dim), seed)?;
            fit_and_predict(
                model,
                |i| &prepared[i].bundle.text,
                dataset,
                &train,
                &val,
                &test,
                &train_cfg,
            )?
        }
        Method::AttnComment | Method::AttnFrame | Method::AttnClip | Method::AttnAudio => {
            let pick = move |i: usize| -> &FeatureSequence {
                let p = &prepared[i];
                match method {
                    Method::AttnComment => &p.comments,
                    Method::AttnFrame => &p.bundle.frames,
                    Method::AttnClip => &p.clips,
                    _ => &p.bundle.audio,
                }
            };
            let model = AttentionPoolClassifier::new(pick(train[0]).dim(), seed);
            fit_and_predict(model, pick, dataset, &train, &val, &test, &train_cfg)?
        }
        Method::Svfend => {
            let mut model_cfg = config.model.clone();
            let b = &prepared[train[0]].bundle;
            model_cfg.input_dims = InputDims {
                text: b.text.dim(),
                audio: b.audio.dim(),
                frame: b.frames.dim(),
                clip: b.clip_vec.len(),
                comment: b.comment_vec.len(),
                user: b.user_vec.len(),
            };
            let model = SvFend::new(model_cfg, seed)?;
            fit_and_predict(
                model,
                |i| &prepared[i].bundle,
                dataset,
                &train,
                &val,
                &test,
                &train_cfg,
            )?
        }
    };
    Ok(FoldResult {
        fold: fold.index,
        metrics: compute_metrics(&predictions, &labels(&test))?,
        n_test: test.len(),
    })
}

fn fit_and_predict<'a, C, F>(
    mut model: C,
    input: F,
    dataset: &'a Dataset,
    train: &[usize],
    val: &[usize],
    test: &[usize],
    config: &TrainConfig,
) -> Result<Vec<u8>>
where
    C: Classifier,
    C::Input: 'a,
    F: Fn(usize) -> &'a C::Input,
{
    let examples = |ids: &[usize]| -> Vec<Example<'a, C::Input>> {
        ids.iter()
            .map(|&i| {
                let s = dataset.get(i);
                Example {
                    input: input(i),
                    label: s.label,
                    group: s.event_id.as_str(),
                }
            })
            .collect()
    };
    let train_ex = examples(train);
    let val_ex = examples(val);
    train_model(
        &mut model,
        &train_ex,
        (!val_ex.is_empty()).then_some(val_ex.as_slice()),
        config,
    )?;
    let inputs: Vec<&C::Input> = test.iter().map(|&i| input(i)).collect();
    Ok(predict_all(&model, &inputs)?
        .into_iter()
        .map(predict)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        let err = "nope".parse::<Method>().unwrap_err().to_string();
        assert!(err.contains("svfend") && err.contains("majority"));
    }
}
