use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use svfend_core::autograd::ParamStore;
use svfend_core::baselines::LexiconSet;
use svfend_core::cache::DirSource;
use svfend_core::data::{load_dataset, Dataset};
use svfend_core::encoders::{InputDims, PluginRegistry};
use svfend_core::eval::{
    infer_input_dims, make_split, prepare_samples, run_benchmark, train_model, BenchmarkConfig,
    Example, Method, SplitKind, TrainConfig,
};
use svfend_core::model::{ModelConfig, SvFend};
use svfend_core::nn::{
    load_checkpoint_config, load_checkpoint_params, save_checkpoint, Classifier,
};
use svfend_core::synthetic::generate_synthetic_dataset;

use crate::config::RunConfig;
use crate::{
    require, BenchmarkArgs, DataArgs, InspectArgs, ModelFlags, Outcome, SplitArgs, SynthArgs,
    TrainArgs, TrainFlags,
};

pub fn synth(a: &SynthArgs) -> Result<()> {
    if a.events < 2 {
        bail!("--events must be at least 2, got {}", a.events);
    }
    if a.per_event < 1 {
        bail!("--per-event must be at least 1");
    }
    let corpus = generate_synthetic_dataset(a.events, a.per_event, a.seed, a.separability)?;
    fs::create_dir_all(&a.out)
        .with_context(|| format!("cannot create output directory {}", a.out.display()))?;
    corpus
        .write_to(&a.out)
        .with_context(|| format!("cannot write dataset to {}", a.out.display()))?;
    let d = &corpus.dataset;
    let fake = d.samples().iter().filter(|s| s.is_fake()).count();
    println!(
        "wrote {} samples ({fake} fake, {} real) in {} events to {}",
        d.len(),
        d.len() - fake,
        d.events().len(),
        a.out.join("dataset.jsonl").display()
    );
    Ok(())
}

/// Resolved dataset inputs.
struct Loaded {
    dataset: Dataset,
    path: PathBuf,
    cache_root: PathBuf,
}

fn load(data: &DataArgs, cfg: &RunConfig) -> Result<Loaded> {
    let path = data.dataset.clone().or_else(|| cfg.dataset.clone());
    let path = require(&path, "dataset")?.to_path_buf();
    let report = load_dataset(&path, !data.lenient)
        .with_context(|| format!("cannot load dataset {}", path.display()))?;
    for (line, reason) in &report.skipped {
        eprintln!("skipped line {line}: {reason}");
    }
    let cache_root = data
        .cache_dir
        .clone()
        .or_else(|| cfg.cache_dir.clone())
        .unwrap_or_else(|| path.parent().unwrap_or(Path::new(".")).to_path_buf());
    Ok(Loaded {
        dataset: report.dataset,
        path,
        cache_root,
    })
}

fn split_kind(flag: &Option<String>, cfg: &RunConfig) -> Result<SplitKind> {
    Ok(match flag {
        Some(s) => s.parse()?,
        None => cfg.split.unwrap_or(SplitKind::EventFiveFold),
    })
}

#[derive(Serialize)]
struct FoldIds<'a> {
    index: usize,
    train: Vec<&'a str>,
    validation: Vec<&'a str>,
    test: Vec<&'a str>,
}

#[derive(Serialize)]
struct SplitFile<'a> {
    kind: SplitKind,
    seed: u64,
    boundaries: Option<(i64, i64)>,
    event_folds: &'a std::collections::BTreeMap<String, usize>,
    folds: Vec<FoldIds<'a>>,
}

pub fn split(a: &SplitArgs) -> Result<()> {
    let cfg = RunConfig::load_opt(a.data.config.as_deref())?;
    let kind = split_kind(&a.kind, &cfg)?;
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let l = load(&a.data, &cfg)?;
    let spec = make_split(&l.dataset, kind, seed)?;
    let ids = |v: &[usize]| {
        v.iter()
            .map(|&i| l.dataset.get(i).sample_id.as_str())
            .collect()
    };
    let file = SplitFile {
        kind,
        seed,
        boundaries: spec.boundaries,
        event_folds: &spec.event_folds,
        folds: spec
            .folds
            .iter()
            .map(|f| FoldIds {
                index: f.index,
                train: ids(&f.train),
                validation: ids(&f.validation),
                test: ids(&f.test),
            })
            .collect(),
    };
    write_json(&a.out, &file)?;
    for f in &spec.folds {
        println!(
            "fold {}: train {} validation {} test {}",
            f.index,
            f.train.len(),
            f.validation.len(),
            f.test.len()
        );
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn model_config(flags: &ModelFlags, cfg: &RunConfig) -> ModelConfig {
    let mut o = cfg.model.clone();
    o.merge(&flags.overrides());
    let mut m = ModelConfig::default();
    o.apply(&mut m);
    m
}

fn train_config(flags: &TrainFlags, cfg: &RunConfig, seed: u64) -> TrainConfig {
    let mut o = cfg.train.clone();
    o.merge(&flags.overrides());
    let mut t = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    o.apply(&mut t);
    t
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let cfg = RunConfig::load_opt(a.data.config.as_deref())?;
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let out = a
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| "model".into());
    let l = load(&a.data, &cfg)?;
    let source = DirSource::new(&l.cache_root);
    let mut model_cfg = model_config(&a.model, &cfg);
    model_cfg.input_dims = infer_input_dims(&l.dataset, &source, InputDims::default())?;
    model_cfg.validate()?;
    let train_cfg = train_config(&a.train, &cfg, seed);
    train_cfg.validate()?;

    let plugins = PluginRegistry::cached(model_cfg.input_dims);
    let prepared = prepare_samples(&l.dataset, &plugins, &model_cfg.caps, &source)?;
    let examples: Vec<Example<'_, _>> = prepared
        .iter()
        .zip(l.dataset.samples())
        .map(|(p, s)| Example {
            input: &p.bundle,
            label: s.label,
            group: s.event_id.as_str(),
        })
        .collect();
    let mut model = SvFend::new(model_cfg.clone(), seed)?;
    let outcome = train_model(&mut model, &examples, None, &train_cfg)?;

    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    save_checkpoint(&out.join("model"), &model_cfg, model.params())?;
    write_json(&out.join("history.json"), &outcome)?;
    let last = outcome.history.last().expect("at least one epoch");
    println!(
        "trained {} epochs (best {}), train accuracy {:.4}, validation accuracy {}",
        outcome.epochs_run(),
        outcome.best_epoch,
        last.train_accuracy,
        last.val_accuracy
            .map_or("n/a".to_string(), |v| format!("{v:.4}"))
    );
    println!("checkpoint written to {}", out.join("model.json").display());
    Ok(())
}

#[derive(Serialize)]
struct Provenance<'a> {
    dataset: String,
    cache_root: String,
    input_dims: InputDims,
    report: &'a svfend_core::eval::BenchmarkReport,
}

pub fn benchmark(a: &BenchmarkArgs) -> Result<Outcome> {
    let cfg = RunConfig::load_opt(a.data.config.as_deref())?;
    let methods: Vec<Method> = match (&a.methods, &cfg.methods) {
        (Some(names), _) => names
            .iter()
            .map(|n| n.trim().parse::<Method>())
            .collect::<svfend_core::Result<_>>()?,
        (None, Some(m)) => m.clone(),
        (None, None) => Method::ALL.to_vec(),
    };
    if methods.is_empty() {
        bail!("no methods selected");
    }
    let split = split_kind(&a.split, &cfg)?;
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let out = a
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| "report".into());
    let lexicon_dir = a.lexicon_dir.clone().or_else(|| cfg.lexicon_dir.clone());
    let lexicons = match &lexicon_dir {
        Some(d) => LexiconSet::load_dir(d)
            .with_context(|| format!("cannot load lexicons from {}", d.display()))?,
        None => LexiconSet::default(),
    };

    let mut bench = BenchmarkConfig {
        methods,
        split,
        seed,
        model: model_config(&a.model, &cfg),
        train: train_config(&a.train, &cfg, seed),
        ..BenchmarkConfig::default()
    };
    cfg.svm.apply(&mut bench.svm, &mut bench.min_df);
    bench.train.validate()?;

    let l = load(&a.data, &cfg)?;
    let source = DirSource::new(&l.cache_root);
    let dims = infer_input_dims(&l.dataset, &source, InputDims::default())?;
    bench.model.input_dims = dims;
    bench.model.validate()?;
    let plugins = PluginRegistry::cached(dims);
    let prepared = prepare_samples(&l.dataset, &plugins, &bench.model.caps, &source)?;
    let spec = make_split(&l.dataset, split, seed)?;
    let report = run_benchmark(&l.dataset, &prepared, &spec, &bench, &lexicons)?;

    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    let csv_path = out.join("report.csv");
    fs::write(&csv_path, report.to_csv())
        .with_context(|| format!("cannot write {}", csv_path.display()))?;
    write_json(
        &out.join("report.json"),
        &Provenance {
            dataset: l.path.display().to_string(),
            cache_root: l.cache_root.display().to_string(),
            input_dims: dims,
            report: &report,
        },
    )?;

    for m in &report.methods {
        match (&m.mean, &m.std, m.folds.first()) {
            (Some(mean), Some(std), _) => println!(
                "{:<13} {:<15} accuracy {:.4} ± {:.4}  macro-F1 {:.4} ± {:.4}",
                m.method.name(),
                m.modality_tag,
                mean.accuracy,
                std.accuracy,
                mean.macro_f1,
                std.macro_f1
            ),
            (_, _, Some(f)) => println!(
                "{:<13} {:<15} accuracy {:.4}  macro-F1 {:.4}",
                m.method.name(),
                m.modality_tag,
                f.metrics.accuracy,
                f.metrics.macro_f1
            ),
            _ => println!(
                "{:<13} {:<15} no successful folds",
                m.method.name(),
                m.modality_tag
            ),
        }
    }
    for f in &report.failures {
        eprintln!("method {} fold {} failed: {}", f.method, f.fold, f.error);
    }
    println!("report written to {}", csv_path.display());
    Ok(if report.has_failures() {
        Outcome::Partial
    } else {
        Outcome::Done
    })
}

pub fn inspect(a: &InspectArgs) -> Result<()> {
    if let Some(stem) = &a.checkpoint {
        let config: ModelConfig = load_checkpoint_config(stem)?;
        let mut model = SvFend::new(config.clone(), 0)?;
        load_checkpoint_params::<ModelConfig>(stem, model.params_mut())?;
        let params: &ParamStore = model.params();
        println!("{}", serde_json::to_string_pretty(&config)?);
        println!(
            "{} tensors, {} parameters",
            params.len(),
            params.num_scalars()
        );
        return Ok(());
    }
    let Some(path) = &a.dataset else {
        bail!("pass --dataset or --checkpoint");
    };
    let report = load_dataset(path, false)?;
    let d = &report.dataset;
    let fake = d.samples().iter().filter(|s| s.is_fake()).count();
    let comments: usize = d.samples().iter().map(|s| s.comments.len()).sum();
    println!("samples        {}", d.len());
    println!("fake / real    {fake} / {}", d.len() - fake);
    println!("events         {}", d.events().len());
    println!("comments       {comments}");
    println!("skipped lines  {}", report.skipped.len());
    for (line, reason) in &report.skipped {
        println!("  line {line}: {reason}");
    }
    Ok(())
}
