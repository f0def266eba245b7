//! Event-level five-fold and chronological splits.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub const NUM_FOLDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitKind {
    #[serde(rename = "event5")]
    EventFiveFold,
    #[serde(rename = "temporal")]
    Temporal,
}

impl SplitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitKind::EventFiveFold => "event5",
            SplitKind::Temporal => "temporal",
        }
    }
}

impl fmt::Display for SplitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "event5" => Ok(SplitKind::EventFiveFold),
            "temporal" => Ok(SplitKind::Temporal),
            _ => Err(Error::InvalidArgument(format!(
                "unknown split `{s}` (expected event5 or temporal)"
            ))),
        }
    }
}

/// Sample indices of one train/test round. `validation` is empty for
/// event folds (carved later from training events) and fixed for the
/// temporal split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub kind: SplitKind,
    pub seed: u64,
    /// Event id → fold index (event kind only).
    pub event_folds: BTreeMap<String, usize>,
    /// First validation and first test timestamp (temporal kind only).
    pub boundaries: Option<(i64, i64)>,
    pub folds: Vec<Fold>,
}

pub fn make_split(dataset: &Dataset, kind: SplitKind, seed: u64) -> Result<SplitSpec> {
    match kind {
        SplitKind::EventFiveFold => {
            let event_folds = assign_event_folds(dataset, seed)?;
            let folds = folds_from_assignment(dataset, &event_folds);
            Ok(SplitSpec {
                kind,
                seed,
                event_folds,
                boundaries: None,
                folds,
            })
        }
        SplitKind::Temporal => {
            let t = temporal_split(dataset)?;
            let time = |i: usize| dataset.get(i).publish_time;
            Ok(SplitSpec {
                kind,
                seed,
                event_folds: BTreeMap::new(),
                boundaries: Some((time(t.validation[0]), time(t.test[0]))),
                folds: vec![t],
            })
        }
    }
}

fn assign_event_folds(dataset: &Dataset, seed: u64) -> Result<BTreeMap<String, usize>> {
    let mut events: Vec<&String> = dataset.events().keys().collect();
    if events.len() < NUM_FOLDS {
        return Err(Error::InvalidArgument(format!(
            "five-fold split needs at least {NUM_FOLDS} events, dataset has {}",
            events.len()
        )));
    }
    events.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(events
        .into_iter()
        .enumerate()
        .map(|(i, e)| (e.clone(), i % NUM_FOLDS))
        .collect())
}

fn folds_from_assignment(dataset: &Dataset, event_folds: &BTreeMap<String, usize>) -> Vec<Fold> {
    (0..NUM_FOLDS)
        .map(|f| {
            let (test, train) =
                (0..dataset.len()).partition(|&i| event_folds[&dataset.get(i).event_id] == f);
            Fold {
                index: f,
                train,
                validation: Vec::new(),
                test,
            }
        })
        .collect()
}

/// Five (train, test) folds; events are shuffled by `seed` and dealt
/// round-robin.
pub fn event_five_fold_split(dataset: &Dataset, seed: u64) -> Result<Vec<Fold>> {
    let assignment = assign_event_folds(dataset, seed)?;
    Ok(folds_from_assignment(dataset, &assignment))
}

/// Chronological 70/15/15 split; validation and test sizes are rounded
/// down and the remainder goes to training. Ties in time are broken by
/// sample id.
pub fn temporal_split(dataset: &Dataset) -> Result<Fold> {
    let n = dataset.len();
    let part = n * 15 / 100;
    if part == 0 {
        return Err(Error::InvalidArgument(format!(
            "temporal split needs at least 7 samples for non-empty validation and test sets, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (dataset.get(a), dataset.get(b));
        (x.publish_time, &x.sample_id).cmp(&(y.publish_time, &y.sample_id))
    });
    let n_train = n - 2 * part;
    Ok(Fold {
        index: 0,
        train: order[..n_train].to_vec(),
        validation: order[n_train..n_train + part].to_vec(),
        test: order[n_train + part..].to_vec(),
    })
}
