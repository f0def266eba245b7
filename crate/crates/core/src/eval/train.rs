//! Mini-batch training with Adam, validation-based early stopping and
//! best-epoch restore.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{loss, predict, Adam, AdamConfig, Classifier};
use crate::text::StableHasher;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Epochs without validation improvement tolerated before stopping.
    pub patience: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Share of training events carved out for early stopping.
    pub validation_fraction: f64,
    pub seed: u64,
    /// Stop as soon as evaluation-mode training accuracy reaches this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_train_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            patience: 5,
            learning_rate: 1e-4,
            batch_size: 64,
            validation_fraction: 0.1,
            seed: 0,
            target_train_accuracy: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must lie in [0, 1)");
        }
        Ok(())
    }
}

type ExampleRefs<'e, 'a, I> = Vec<&'e Example<'a, I>>;

/// One labelled input; `group` is the event the sample belongs to.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a, I> {
    pub input: &'a I,
    pub label: u8,
    pub group: &'a str,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Evaluation-mode loss and accuracy on the fitted examples.
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub reached_target: bool,
    pub n_train: usize,
    pub n_validation: usize,
}

impl TrainOutcome {
    pub fn epochs_run(&self) -> usize {
        self.history.len()
    }
}

/// Splits example indices into (fit, validation) by event. At least one
/// event is held out when the fraction is positive.
pub fn carve_validation<I>(
    examples: &[Example<'_, I>],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let all: Vec<usize> = (0..examples.len()).collect();
    if fraction <= 0.0 {
        return Ok((all, Vec::new()));
    }
    let mut events: Vec<&str> = examples
        .iter()
        .map(|e| e.group)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n_val = ((fraction * events.len() as f64).round() as usize).max(1);
    if n_val >= events.len() {
        return Err(Error::InvalidArgument(format!(
            "holding out {n_val} of {} training events for validation leaves no training data",
            events.len()
        )));
    }
    events.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let held: BTreeSet<&str> = events[..n_val].iter().copied().collect();
    Ok(all
        .into_iter()
        .partition(|&i| !held.contains(examples[i].group)))
}

/// Evaluation-mode probabilities.
pub fn predict_all<C: Classifier>(model: &C, inputs: &[&C::Input]) -> Result<Vec<[f64; 2]>> {
    inputs.par_iter().map(|x| model.predict_proba(x)).collect()
}

fn evaluate<C: Classifier>(model: &C, examples: &[&Example<'_, C::Input>]) -> Result<(f64, f64)> {
    let inputs: Vec<&C::Input> = examples.iter().map(|e| e.input).collect();
    let probs = predict_all(model, &inputs)?;
    let n = examples.len() as f64;
    let mut total = 0.0;
    let mut correct = 0usize;
    for (p, e) in probs.iter().zip(examples) {
        total += loss(*p, e.label);
        correct += usize::from(predict(*p) == e.label);
    }
    Ok((total / n, correct as f64 / n))
}

fn example_seed(seed: u64, epoch: usize, batch: usize, k: usize) -> u64 {
    StableHasher::default()
        .u64(seed)
        .u64(epoch as u64)
        .u64(batch as u64)
        .u64(k as u64)
        .finish()
}

/// Trains `model` in place and leaves it at the best-monitored epoch.
///
/// The monitored score is validation accuracy, or training accuracy when
/// there is no validation data. Training stops once the score has failed to
/// improve for more than `patience` consecutive epochs.
pub fn train_model<C: Classifier>(
    model: &mut C,
    train: &[Example<'_, C::Input>],
    validation: Option<&[Example<'_, C::Input>]>,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if train.iter().any(|e| e.label > 1) {
        return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
    }
    let (fit, val): (ExampleRefs<'_, '_, C::Input>, ExampleRefs<'_, '_, C::Input>) =
        match validation {
            Some(v) => (train.iter().collect(), v.iter().collect()),
            None => {
                let (f, v) = carve_validation(train, config.validation_fraction, config.seed)?;
                (
                    f.into_iter().map(|i| &train[i]).collect(),
                    v.into_iter().map(|i| &train[i]).collect(),
                )
            }
        };

    let mut adam = Adam::new(
        model.params(),
        AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..fit.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, crate::autograd::ParamStore)> = None;
    let mut stale = 0;
    let mut stopped_early = false;
    let mut reached_target = false;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let model_ref = &*model;
            let results: Vec<Result<_>> = chunk
                .par_iter()
                .enumerate()
                .map(|(k, &i)| {
                    let mut r = ChaCha8Rng::seed_from_u64(example_seed(config.seed, epoch, b, k));
                    model_ref.loss_and_grads(fit[i].input, fit[i].label, Some(&mut r))
                })
                .collect();
            let mut total = model.params().zero_grads();
            for res in results {
                let (l, g) = res?;
                if !l.is_finite() {
                    return Err(Error::NonFinite("training loss"));
                }
                total.add(&g);
            }
            total.scale(1.0 / chunk.len() as f64);
            adam.step(model.params_mut(), &total);
        }

        let (train_loss, train_accuracy) = evaluate(model, &fit)?;
        let (val_loss, val_accuracy) = if val.is_empty() {
            (None, None)
        } else {
            let (l, a) = evaluate(model, &val)?;
            (Some(l), Some(a))
        };
        history.push(EpochRecord {
            epoch,
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
        });

        let score = val_accuracy.unwrap_or(train_accuracy);
        if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            best = Some((score, epoch, model.params().clone()));
            stale = 0;
        } else {
            stale += 1;
        }
        if config
            .target_train_accuracy
            .is_some_and(|t| train_accuracy >= t)
        {
            reached_target = true;
            break;
        }
        if stale > config.patience {
            stopped_early = true;
            break;
        }
    }

    let (_, best_epoch, params) = best.expect("at least one epoch ran");
    if !reached_target {
        *model.params_mut() = params;
    }
    Ok(TrainOutcome {
        history,
        best_epoch,
        stopped_early,
        reached_target,
        n_train: fit.len(),
        n_validation: val.len(),
    })
}
