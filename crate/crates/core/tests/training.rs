use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use svfend_core::baselines::{AttentionPoolClassifier, TextCnn, TextCnnConfig};
use svfend_core::encoders::{FeatureSequence, InputDims, ModalityBundle, PluginRegistry};
use svfend_core::eval::{predict_all, prepare_samples, train_model, Example, TrainConfig};
use svfend_core::model::{ModelConfig, SvFend};
use svfend_core::nn::Classifier;
use svfend_core::synthetic::{generate_synthetic_dataset, SyntheticCorpus};
use svfend_core::tensor::Matrix;

struct Fixture {
    corpus: SyntheticCorpus,
    bundles: Vec<ModalityBundle>,
    config: ModelConfig,
}

fn fixture(separability: f64) -> Fixture {
    let corpus = generate_synthetic_dataset(12, 4, 5, separability).unwrap();
    let s = corpus.dims;
    let dims = InputDims {
        text: s.text,
        audio: s.audio,
        frame: s.frame,
        clip: s.clip,
        comment: s.comment,
        user: s.user,
    };
    let config = ModelConfig {
        hidden_dim: 16,
        input_dims: dims,
        ..ModelConfig::default()
    };
    let prepared = prepare_samples(
        &corpus.dataset,
        &PluginRegistry::cached(dims),
        &config.caps,
        &corpus.features,
    )
    .unwrap();
    Fixture {
        bundles: prepared.into_iter().map(|p| p.bundle).collect(),
        corpus,
        config,
    }
}

impl Fixture {
    fn examples(&self) -> Vec<Example<'_, ModalityBundle>> {
        self.bundles
            .iter()
            .zip(self.corpus.dataset.samples())
            .map(|(b, s)| Example {
                input: b,
                label: s.label,
                group: s.event_id.as_str(),
            })
            .collect()
    }
}

fn config(epochs: usize, patience: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        patience,
        learning_rate: 1e-3,
        batch_size: 16,
        ..TrainConfig::default()
    }
}

#[test]
fn training_loss_falls_over_the_first_epochs() {
    let f = fixture(1.0);
    let mut model = SvFend::new(f.config.clone(), 0).unwrap();
    let cfg = TrainConfig {
        learning_rate: 1e-4,
        validation_fraction: 0.0,
        ..config(3, 10)
    };
    let out = train_model(&mut model, &f.examples(), None, &cfg).unwrap();
    let losses: Vec<f64> = out.history.iter().map(|h| h.train_loss).collect();
    assert_eq!(losses.len(), 3);
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
}

#[test]
fn zero_patience_stops_after_first_non_improving_epoch() {
    let f = fixture(1.0);
    let mut model = SvFend::new(f.config.clone(), 1).unwrap();
    let out = train_model(&mut model, &f.examples(), None, &config(40, 0)).unwrap();
    assert!(out.stopped_early);
    assert_eq!(out.epochs_run(), out.best_epoch + 2);
    let scores: Vec<f64> = out
        .history
        .iter()
        .map(|h| h.val_accuracy.unwrap())
        .collect();
    let last = scores.len() - 1;
    assert!(scores[last] <= scores[last - 1]);
    assert!(scores[..last].windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn best_parameters_are_restored() {
    let f = fixture(0.0);
    let ex = f.examples();
    let mut model = SvFend::new(f.config.clone(), 2).unwrap();
    let out = train_model(&mut model, &ex, None, &config(12, 3)).unwrap();
    assert_eq!(out.n_train + out.n_validation, ex.len());
    let best = out.history[out.best_epoch].val_accuracy.unwrap();
    assert!(out.history.iter().all(|h| h.val_accuracy.unwrap() <= best));
}

#[test]
fn training_is_reproducible() {
    let f = fixture(0.5);
    let ex = f.examples();
    let run = || {
        let mut m = SvFend::new(f.config.clone(), 3).unwrap();
        let out = train_model(&mut m, &ex, None, &config(4, 10)).unwrap();
        (out, m.params().clone())
    };
    let (a, pa) = run();
    let (b, pb) = run();
    assert_eq!(a, b);
    assert_eq!(pa, pb);
}

#[test]
fn target_accuracy_ends_training() {
    let f = fixture(1.0);
    let mut model = SvFend::new(f.config.clone(), 4).unwrap();
    let cfg = TrainConfig {
        validation_fraction: 0.0,
        target_train_accuracy: Some(0.9),
        ..config(200, 200)
    };
    let out = train_model(&mut model, &f.examples(), None, &cfg).unwrap();
    assert!(out.reached_target);
    assert!(out.history.last().unwrap().train_accuracy >= 0.9);
    assert_eq!(out.n_validation, 0);
    let inputs: Vec<&ModalityBundle> = f.bundles.iter().collect();
    let correct = predict_all(&model, &inputs)
        .unwrap()
        .iter()
        .zip(f.corpus.dataset.samples())
        .filter(|(p, s)| u8::from(p[1] > p[0]) == s.label)
        .count();
    assert!(correct as f64 >= 0.9 * inputs.len() as f64);
}

#[test]
fn explicit_validation_set_is_used_as_given() {
    let f = fixture(1.0);
    let ex = f.examples();
    let (val, train) = ex.split_at(8);
    let mut model = SvFend::new(f.config.clone(), 5).unwrap();
    let out = train_model(&mut model, train, Some(val), &config(2, 5)).unwrap();
    assert_eq!((out.n_train, out.n_validation), (40, 8));
}

#[test]
fn invalid_training_inputs_are_rejected() {
    let f = fixture(1.0);
    let mut model = SvFend::new(f.config.clone(), 6).unwrap();
    assert!(train_model(&mut model, &[], None, &config(1, 1)).is_err());
    let mut ex = f.examples();
    ex[0].label = 2;
    assert!(train_model(&mut model, &ex, None, &config(1, 1)).is_err());
    let bad = TrainConfig {
        batch_size: 0,
        ..config(1, 1)
    };
    assert!(train_model(&mut model, &f.examples(), None, &bad).is_err());
}

/// Sequences whose rows carry the label in column 0.
fn labelled_sequences(n: usize, dim: usize, seed: u64) -> Vec<(FeatureSequence, u8)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let y = (i % 2) as u8;
            let len = rng.gen_range(5..12);
            let m = Matrix::from_fn(len, dim, |_, c| {
                let noise = rng.gen_range(-0.3..0.3);
                if c == 0 {
                    f64::from(y) * 2.0 - 1.0 + noise
                } else {
                    noise
                }
            });
            (FeatureSequence::from_rows(m), y)
        })
        .collect()
}

fn fit_accuracy<C: Classifier<Input = FeatureSequence>>(
    model: &mut C,
    data: &[(FeatureSequence, u8)],
) -> f64 {
    let groups: Vec<String> = (0..data.len()).map(|i| format!("g{i}")).collect();
    let ex: Vec<Example<'_, FeatureSequence>> = data
        .iter()
        .zip(&groups)
        .map(|((s, y), g)| Example {
            input: s,
            label: *y,
            group: g,
        })
        .collect();
    let cfg = TrainConfig {
        validation_fraction: 0.0,
        learning_rate: 1e-2,
        ..config(30, 30)
    };
    let out = train_model(model, &ex, None, &cfg).unwrap();
    out.history[out.best_epoch].train_accuracy
}

#[test]
fn baseline_networks_fit_a_planted_signal() {
    let data = labelled_sequences(40, 6, 8);
    let mut cnn = TextCnn::new(TextCnnConfig::new(6), 1).unwrap();
    assert!(fit_accuracy(&mut cnn, &data) >= 0.9);
    let mut pool = AttentionPoolClassifier::new(6, 1);
    assert!(fit_accuracy(&mut pool, &data) >= 0.9);
}
