//! Dataset-level tallies: doubtful comments, likes by publisher fan count,
//! title term frequencies, IP locations, publish hours and cover-image
//! duplication.

use std::collections::BTreeMap;

use regex::{Regex, RegexBuilder};
use serde::Serialize;

use super::phash::cluster_duplicates;
use crate::data::{Dataset, LABEL_FAKE, LABEL_REAL};
use crate::error::{Error, Result};
use crate::text::words;

/// Per-label value, indexed by label (0 real, 1 fake).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ByLabel<T> {
    pub real: T,
    pub fake: T,
}

impl<T> ByLabel<T> {
    pub fn get(&self, label: u8) -> &T {
        if label == LABEL_FAKE {
            &self.fake
        } else {
            &self.real
        }
    }
}

/// Case-insensitive regexes, one per line; blank and `#` lines skipped.
pub fn parse_doubt_patterns(text: &str) -> Result<Vec<Regex>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|p| {
            RegexBuilder::new(p)
                .case_insensitive(true)
                .build()
                .map_err(|e| Error::Pattern {
                    pattern: p.to_string(),
                    message: e.to_string(),
                })
        })
        .collect()
}

/// Literal, case-insensitive patterns built from the bundled doubt list.
pub fn default_doubt_patterns() -> Vec<Regex> {
    include_str!("../../lexicons/doubt.txt")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|w| {
            RegexBuilder::new(&regex::escape(w))
                .case_insensitive(true)
                .build()
                .expect("escaped literal compiles")
        })
        .collect()
}

/// Share of videos per label with at least one comment matching any pattern.
/// Labels without videos report 0.
pub fn doubt_ratio(dataset: &Dataset, patterns: &[Regex]) -> ByLabel<f64> {
    let mut hit = [0usize; 2];
    let mut total = [0usize; 2];
    for s in dataset.samples() {
        let l = usize::from(s.label == LABEL_FAKE);
        total[l] += 1;
        if s.comments
            .iter()
            .any(|c| patterns.iter().any(|p| p.is_match(&c.text)))
        {
            hit[l] += 1;
        }
    }
    let r = |l: usize| {
        if total[l] == 0 {
            0.0
        } else {
            hit[l] as f64 / total[l] as f64
        }
    };
    ByLabel {
        real: r(0),
        fake: r(1),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FanBin {
    /// Inclusive lower bound; `None` is unbounded.
    pub lower: Option<i64>,
    /// Exclusive upper bound; `None` is unbounded.
    pub upper: Option<i64>,
    pub label: u8,
    pub count: usize,
    /// Mean video like count, 0 for an empty bin.
    pub mean_likes: f64,
}

/// Buckets `(-inf, b0), [b0, b1), …, [bn, inf)` by publisher fan count, one
/// row per bucket and label (real first).
pub fn likes_vs_fans(dataset: &Dataset, boundaries: &[i64]) -> Result<Vec<FanBin>> {
    if boundaries.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "fan-count bin boundaries must be strictly increasing".into(),
        ));
    }
    let n_bins = boundaries.len() + 1;
    let mut sums = vec![[0.0f64; 2]; n_bins];
    let mut counts = vec![[0usize; 2]; n_bins];
    for s in dataset.samples() {
        let b = boundaries.partition_point(|&x| x <= s.publisher.fan_count);
        let l = usize::from(s.label == LABEL_FAKE);
        sums[b][l] += s.like_count as f64;
        counts[b][l] += 1;
    }
    let mut out = Vec::with_capacity(n_bins * 2);
    for b in 0..n_bins {
        for (l, label) in [(0, LABEL_REAL), (1, LABEL_FAKE)] {
            let count = counts[b][l];
            out.push(FanBin {
                lower: b.checked_sub(1).map(|i| boundaries[i]),
                upper: boundaries.get(b).copied(),
                label,
                count,
                mean_likes: if count == 0 {
                    0.0
                } else {
                    sums[b][l] / count as f64
                },
            });
        }
    }
    Ok(out)
}

/// Title word counts per label.
pub fn title_term_frequencies(dataset: &Dataset) -> ByLabel<BTreeMap<String, usize>> {
    let mut out = ByLabel {
        real: BTreeMap::new(),
        fake: BTreeMap::new(),
    };
    for s in dataset.samples() {
        let table = if s.is_fake() {
            &mut out.fake
        } else {
            &mut out.real
        };
        for w in words(&s.title) {
            *table.entry(w).or_default() += 1;
        }
    }
    out
}

/// Publisher IP-location counts per label; missing locations count as
/// `unknown`.
pub fn ip_location_tally(dataset: &Dataset) -> ByLabel<BTreeMap<String, usize>> {
    let mut out = ByLabel {
        real: BTreeMap::new(),
        fake: BTreeMap::new(),
    };
    for s in dataset.samples() {
        let table = if s.is_fake() {
            &mut out.fake
        } else {
            &mut out.real
        };
        let loc = s
            .publisher
            .ip_location
            .clone()
            .unwrap_or_else(|| "unknown".into());
        *table.entry(loc).or_default() += 1;
    }
    out
}

/// Videos per local publish hour, with timestamps shifted by
/// `utc_offset_hours`.
pub fn publish_hour_histogram(dataset: &Dataset, utc_offset_hours: i64) -> ByLabel<[usize; 24]> {
    let mut out = ByLabel {
        real: [0; 24],
        fake: [0; 24],
    };
    for s in dataset.samples() {
        let local = s.publish_time + utc_offset_hours * 3600;
        let hour = local.rem_euclid(86_400) / 3600;
        let table = if s.is_fake() {
            &mut out.fake
        } else {
            &mut out.real
        };
        table[hour as usize] += 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DuplicationStats {
    pub items: usize,
    pub clusters: usize,
    pub rate: f64,
}

/// Cover-image duplication within each label. Samples without a stored
/// cover hash are skipped.
pub fn duplication_by_label(dataset: &Dataset, threshold: u32) -> ByLabel<DuplicationStats> {
    let stats = |label: u8| {
        let hashes: Vec<u64> = dataset
            .samples()
            .iter()
            .filter(|s| s.label == label)
            .filter_map(|s| s.cover_hash_value())
            .collect();
        let c = cluster_duplicates(&hashes, threshold);
        DuplicationStats {
            items: hashes.len(),
            clusters: c.n_clusters,
            rate: c.duplication_rate(),
        }
    };
    ByLabel {
        real: stats(LABEL_REAL),
        fake: stats(LABEL_FAKE),
    }
}
