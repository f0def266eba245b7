//! Dataset schema, line-delimited loading/saving and validation.
//!
//! One sample per line. Field names mirror the crawled fields of the
//! short-video corpus; unknown keys are rejected.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of crawled comments per video.
pub const MAX_COMMENTS: usize = 100;

pub const LABEL_REAL: u8 = 0;
pub const LABEL_FAKE: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comment {
    pub text: String,
    pub like_count: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reviewed_time: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply_count: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublisherProfile {
    pub verified: bool,
    pub introduction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ip_location: Option<String>,
    pub fan_count: i64,
    pub follow_count: i64,
    pub total_like_count: i64,
    pub video_count: i64,
}

/// A single short news video with its social context.
///
/// Counts are stored signed so that a malformed record can be represented
/// and reported by [`validate_sample`] instead of failing deserialization
/// with an opaque message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewsVideoSample {
    pub sample_id: String,
    pub event_id: String,
    pub title: String,
    pub transcript: String,
    pub publish_time: i64,
    pub label: u8,
    pub like_count: i64,
    pub star_count: i64,
    pub comment_count: i64,
    pub comments: Vec<Comment>,
    pub publisher: PublisherProfile,
    pub media_refs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality_score: Option<f64>,
    /// Precomputed 64-bit cover-image hash, 16 lowercase hex digits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cover_hash: Option<String>,
}

impl NewsVideoSample {
    pub fn is_fake(&self) -> bool {
        self.label == LABEL_FAKE
    }

    pub fn cover_hash_value(&self) -> Option<u64> {
        self.cover_hash
            .as_deref()
            .and_then(|h| u64::from_str_radix(h, 16).ok())
    }
}

/// Immutable collection of samples with an event index.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<NewsVideoSample>,
    events: BTreeMap<String, Vec<usize>>,
}

impl Dataset {
    pub fn new(samples: Vec<NewsVideoSample>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for s in &samples {
            if !seen.insert(s.sample_id.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate sample_id `{}`",
                    s.sample_id
                )));
            }
        }
        let mut events: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, s) in samples.iter().enumerate() {
            events.entry(s.event_id.clone()).or_default().push(i);
        }
        Ok(Self { samples, events })
    }

    pub fn empty() -> Self {
        Self {
            samples: Vec::new(),
            events: BTreeMap::new(),
        }
    }

    pub fn samples(&self) -> &[NewsVideoSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Event id → indices into [`Dataset::samples`].
    pub fn events(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.events
    }

    pub fn get(&self, index: usize) -> &NewsVideoSample {
        &self.samples[index]
    }

    pub fn index_of(&self, sample_id: &str) -> Option<usize> {
        self.samples.iter().position(|s| s.sample_id == sample_id)
    }

    /// New dataset restricted to the given indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset::new(indices.iter().map(|&i| self.samples[i].clone()).collect())
            .expect("subset of a valid dataset has unique ids")
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            out.push_str(&serde_json::to_string(s).expect("sample serializes"));
            out.push('\n');
        }
        out
    }
}

/// Returns one description per violated invariant; empty means valid.
pub fn validate_sample(sample: &NewsVideoSample) -> Vec<String> {
    let mut v = Vec::new();
    if sample.sample_id.is_empty() {
        v.push("sample_id must be non-empty".to_string());
    }
    if sample.label > 1 {
        v.push("label not in {0,1}".to_string());
    }
    if sample.publish_time <= 0 {
        v.push("publish_time must be > 0".to_string());
    }
    for (name, value) in [
        ("like_count", sample.like_count),
        ("star_count", sample.star_count),
        ("comment_count", sample.comment_count),
    ] {
        if value < 0 {
            v.push(format!("{name} must be >= 0"));
        }
    }
    if sample.comments.len() > MAX_COMMENTS {
        v.push(format!("comments exceed {MAX_COMMENTS}"));
    }
    for (j, c) in sample.comments.iter().enumerate() {
        if c.like_count < 0 {
            v.push(format!("comments[{j}].like_count must be >= 0"));
        }
        if matches!(c.reply_count, Some(r) if r < 0) {
            v.push(format!("comments[{j}].reply_count must be >= 0"));
        }
    }
    let p = &sample.publisher;
    for (name, value) in [
        ("publisher.fan_count", p.fan_count),
        ("publisher.follow_count", p.follow_count),
        ("publisher.total_like_count", p.total_like_count),
        ("publisher.video_count", p.video_count),
    ] {
        if value < 0 {
            v.push(format!("{name} must be >= 0"));
        }
    }
    if matches!(sample.quality_score, Some(q) if !q.is_finite()) {
        v.push("quality_score must be finite".to_string());
    }
    if let Some(h) = &sample.cover_hash {
        if h.len() != 16 || u64::from_str_radix(h, 16).is_err() {
            v.push("cover_hash must be 16 hex digits".to_string());
        }
    }
    v
}

/// Outcome of [`load_dataset`].
#[derive(Debug, Clone)]
pub struct LoadReport {
    pub dataset: Dataset,
    /// (1-based line number, reason) for each record skipped in lenient mode.
    pub skipped: Vec<(usize, String)>,
}

pub fn load_dataset(path: &Path, strict: bool) -> Result<LoadReport> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(BufReader::new(file), strict)
}

pub fn parse_dataset<R: BufRead>(reader: R, strict: bool) -> Result<LoadReport> {
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    let mut ids = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: NewsVideoSample = match serde_json::from_str(&line) {
            Ok(s) => s,
            Err(e) => {
                if strict {
                    return Err(Error::Parse {
                        line: line_no,
                        message: e.to_string(),
                    });
                }
                skipped.push((line_no, e.to_string()));
                continue;
            }
        };
        // Unknown labels are fatal regardless of mode.
        if sample.label > 1 {
            return Err(Error::Invalid {
                line: line_no,
                field: "label".into(),
                rule: format!("has unknown value {}", sample.label),
            });
        }
        let violations = validate_sample(&sample);
        let duplicate = !ids.insert(sample.sample_id.clone());
        if let Some(first) = violations.first() {
            if strict {
                let field = first.split_whitespace().next().unwrap_or("").to_string();
                return Err(Error::Invalid {
                    line: line_no,
                    field,
                    rule: first.clone(),
                });
            }
            skipped.push((line_no, violations.join("; ")));
            continue;
        }
        if duplicate {
            if strict {
                return Err(Error::Invalid {
                    line: line_no,
                    field: "sample_id".into(),
                    rule: format!("duplicates `{}`", sample.sample_id),
                });
            }
            skipped.push((line_no, "duplicate sample_id".into()));
            continue;
        }
        samples.push(sample);
    }
    Ok(LoadReport {
        dataset: Dataset::new(samples)?,
        skipped,
    })
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(dataset.to_jsonl().as_bytes())
        .map_err(|e| Error::io(path, e))
}
