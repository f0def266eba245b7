//! Deterministic synthetic corpora for desk-scale experiments.
//!
//! Label signal is planted in two places, both scaled by `separability`:
//! dimension 0 of every cached feature matrix, and lexical cues in the raw
//! title/transcript/comments. At separability 1 both are exact functions of
//! the label; at 0 they are independent of it.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cache::{CachedFeatures, MemorySource};
use crate::data::{save_dataset, Comment, Dataset, NewsVideoSample, PublisherProfile};
use crate::encoders::Modality;
use crate::error::{Error, Result};

pub const SYNTH_PLUGIN: &str = "synthetic";
const BASE_TIME: i64 = 1_609_459_200;

const NEUTRAL_WORDS: &[&str] = &[
    "city", "road", "water", "market", "school", "report", "weather", "train", "river", "doctor",
    "police", "farm", "price", "bridge", "village", "festival", "station", "hospital", "museum",
    "harbor", "factory", "garden", "library", "airport", "council", "street", "village", "team",
    "game", "season", "morning", "evening", "people", "local", "family", "office", "driver",
    "student", "worker", "visitor",
];
const FAKE_TITLE_CUES: &[&str] = &["shocking", "you won't believe", "must share", "urgent"];
const FAKE_TRANSCRIPT_CUES: &[&str] = &["terrible", "scary", "disaster", "panic"];
const REAL_TRANSCRIPT_CUES: &[&str] = &["official", "confirmed", "announced"];
const DOUBT_COMMENTS: &[&str] = &["is this fake?", "really?", "this is a rumor", "fake news!"];
const PLAIN_COMMENTS: &[&str] = &["nice", "thanks for sharing", "good to know", "wow", "agree"];
const LOCATIONS: &[&str] = &[
    "Guangdong",
    "Zhejiang",
    "Beijing",
    "Sichuan",
    "Henan",
    "Shanghai",
];

/// Per-modality feature widths of the synthetic caches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticDims {
    pub text: usize,
    pub audio: usize,
    pub frame: usize,
    pub clip: usize,
    pub comment: usize,
    pub user: usize,
}

impl Default for SyntheticDims {
    fn default() -> Self {
        Self {
            text: 16,
            audio: 8,
            frame: 12,
            clip: 12,
            comment: 8,
            user: 8,
        }
    }
}

impl SyntheticDims {
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

/// A generated dataset together with the in-memory feature caches its
/// `media_refs` point into.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub dataset: Dataset,
    pub features: MemorySource,
    pub dims: SyntheticDims,
}

impl SyntheticCorpus {
    /// Writes `dataset.jsonl` and the cache tree under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        save_dataset(&self.dataset, &dir.join("dataset.jsonl"))?;
        self.features.write_all(dir)
    }
}

pub fn generate_synthetic_dataset(
    n_events: usize,
    samples_per_event: usize,
    seed: u64,
    separability: f64,
) -> Result<SyntheticCorpus> {
    generate_with_dims(
        n_events,
        samples_per_event,
        seed,
        separability,
        SyntheticDims::default(),
    )
}

pub fn generate_with_dims(
    n_events: usize,
    samples_per_event: usize,
    seed: u64,
    separability: f64,
    dims: SyntheticDims,
) -> Result<SyntheticCorpus> {
    if n_events < 2 {
        return Err(Error::InvalidArgument(format!(
            "n_events must be >= 2, got {n_events}"
        )));
    }
    if samples_per_event < 1 {
        return Err(Error::InvalidArgument(
            "samples_per_event must be >= 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&separability) {
        return Err(Error::InvalidArgument(format!(
            "separability must lie in [0, 1], got {separability}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n_events * samples_per_event);
    let mut features = MemorySource::default();
    let mut time = BASE_TIME;

    for e in 0..n_events {
        let event_id = format!("e{e:04}");
        let topic: Vec<&str> = NEUTRAL_WORDS
            .choose_multiple(&mut rng, 2)
            .copied()
            .collect();
        for j in 0..samples_per_event {
            // Alternating labels keep every event balanced; the event offset
            // balances single-sample events across the corpus.
            let label = ((j + e) % 2) as u8;
            let sample_id = format!("s{e:04}_{j:03}");
            time += rng.gen_range(60..3600);
            let cue_fake = if rng.gen::<f64>() < separability {
                label == 1
            } else {
                rng.gen_bool(0.5)
            };
            let mut sample = make_sample(
                &mut rng, &sample_id, &event_id, &topic, label, cue_fake, time,
            );
            // Frames and clips share the video timeline.
            let n_frames = rng.gen_range(3..=10);
            for m in Modality::ALL {
                let rows = match m {
                    Modality::Text => rng.gen_range(4..=12),
                    Modality::Audio => rng.gen_range(3..=10),
                    Modality::Frame | Modality::Clip => n_frames,
                    Modality::Comment => sample.comments.len(),
                    Modality::User => 1,
                };
                if rows == 0 {
                    continue;
                }
                let reference = format!("features/{sample_id}.{}.f32", m.as_str());
                let values = signal_matrix(&mut rng, rows, dims.get(m), label, separability);
                features.insert(
                    reference.clone(),
                    CachedFeatures::new(m.as_str(), rows, dims.get(m), values, SYNTH_PLUGIN),
                );
                sample.media_refs.insert(m.as_str().to_string(), reference);
            }
            samples.push(sample);
        }
    }
    Ok(SyntheticCorpus {
        dataset: Dataset::new(samples)?,
        features,
        dims,
    })
}

fn signal_matrix(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    label: u8,
    separability: f64,
) -> Vec<f32> {
    let sign = if label == 1 { 1.0 } else { -1.0 };
    let mut out = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        for d in 0..cols {
            let noise: f64 = rng.gen_range(-1.0..1.0);
            let v = if d == 0 {
                separability * sign + (1.0 - separability) * noise
            } else {
                noise
            };
            out.push(v as f32);
        }
    }
    out
}

fn words(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> Vec<&'static str> {
    let n = rng.gen_range(lo..=hi);
    (0..n)
        .map(|_| *NEUTRAL_WORDS.choose(rng).expect("non-empty"))
        .collect()
}

fn make_sample(
    rng: &mut ChaCha8Rng,
    sample_id: &str,
    event_id: &str,
    topic: &[&str],
    label: u8,
    cue_fake: bool,
    time: i64,
) -> NewsVideoSample {
    let mut title_words: Vec<&str> = topic.to_vec();
    title_words.extend(words(rng, 3, 8));
    let mut title = title_words.join(" ");
    if cue_fake {
        title = format!(
            "{}: {title}?!",
            FAKE_TITLE_CUES.choose(rng).expect("non-empty")
        );
    } else {
        title.push('.');
    }

    let mut transcript_words = words(rng, 0, 20);
    if !transcript_words.is_empty() {
        let cue = if cue_fake {
            FAKE_TRANSCRIPT_CUES
        } else {
            REAL_TRANSCRIPT_CUES
        };
        transcript_words.push(cue.choose(rng).expect("non-empty"));
    }
    let transcript = transcript_words.join(" ");

    let n_comments = if rng.gen_bool(0.25) {
        0
    } else {
        rng.gen_range(1..=8)
    };
    let mut comments: Vec<Comment> = (0..n_comments)
        .map(|_| Comment {
            text: PLAIN_COMMENTS.choose(rng).expect("non-empty").to_string(),
            like_count: rng.gen_range(0..50),
            reviewed_time: Some(time + rng.gen_range(60..86_400)),
            reply_count: Some(rng.gen_range(0..3)),
        })
        .collect();
    if cue_fake && !comments.is_empty() {
        let j = rng.gen_range(0..comments.len());
        comments[j].text = DOUBT_COMMENTS.choose(rng).expect("non-empty").to_string();
    }

    let fan_count = rng.gen_range(0..200_000);
    NewsVideoSample {
        sample_id: sample_id.to_string(),
        event_id: event_id.to_string(),
        title,
        transcript,
        publish_time: time,
        label,
        like_count: rng.gen_range(0..10_000),
        star_count: rng.gen_range(0..1_000),
        comment_count: comments.len() as i64 + rng.gen_range(0..20),
        comments,
        publisher: PublisherProfile {
            verified: rng.gen_bool(0.5),
            introduction: words(rng, 0, 6).join(" "),
            ip_location: Some(LOCATIONS.choose(rng).expect("non-empty").to_string()),
            fan_count,
            follow_count: rng.gen_range(0..2_000),
            total_like_count: rng.gen_range(0..1_000_000),
            video_count: rng.gen_range(1..500),
        },
        media_refs: BTreeMap::new(),
        quality_score: Some(rng.gen_range(2.0..8.0)),
        cover_hash: Some(format!("{:016x}", rng.gen::<u64>())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::validate_sample;

    #[test]
    fn two_single_sample_events_are_balanced() {
        let c = generate_synthetic_dataset(2, 1, 7, 1.0).unwrap();
        assert_eq!(c.dataset.len(), 2);
        assert_eq!(c.dataset.events().len(), 2);
        let mut labels: Vec<u8> = c.dataset.samples().iter().map(|s| s.label).collect();
        labels.sort();
        assert_eq!(labels, vec![0, 1]);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_synthetic_dataset(5, 3, 11, 0.5).unwrap();
        let b = generate_synthetic_dataset(5, 3, 11, 0.5).unwrap();
        assert_eq!(a.dataset.to_jsonl(), b.dataset.to_jsonl());
        assert_eq!(a.features, b.features);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(generate_synthetic_dataset(1, 1, 0, 1.0).is_err());
        assert!(generate_synthetic_dataset(2, 0, 0, 1.0).is_err());
        assert!(generate_synthetic_dataset(2, 1, 0, 1.5).is_err());
    }

    #[test]
    fn samples_are_valid_and_time_increases() {
        let c = generate_synthetic_dataset(6, 4, 1, 0.3).unwrap();
        let s = c.dataset.samples();
        assert!(s.iter().all(|x| validate_sample(x).is_empty()));
        assert!(s.windows(2).all(|w| w[0].publish_time < w[1].publish_time));
        for x in s {
            let f = c
                .features
                .iter()
                .find(|(k, _)| **k == x.media_refs["frame"])
                .unwrap()
                .1;
            let v = c
                .features
                .iter()
                .find(|(k, _)| **k == x.media_refs["clip"])
                .unwrap()
                .1;
            assert_eq!(f.rows(), v.rows());
            assert_eq!(x.comments.is_empty(), !x.media_refs.contains_key("comment"));
        }
    }

    #[test]
    fn events_balanced_with_even_size() {
        let c = generate_synthetic_dataset(5, 4, 2, 1.0).unwrap();
        for idx in c.dataset.events().values() {
            let fakes = idx.iter().filter(|&&i| c.dataset.get(i).label == 1).count();
            assert_eq!(fakes, 2);
        }
    }
}
