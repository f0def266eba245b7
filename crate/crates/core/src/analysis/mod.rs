//! Exploratory analyses of a news-video corpus.

pub mod emotion;
pub mod extract;
pub mod phash;
pub mod stats;

pub use emotion::{emotion_profile, Emotion, EmotionLexicon};
pub use extract::{
    default_patterns, extract_key_sentences, load_patterns, parse_patterns, ExtractionPattern,
};
pub use phash::{cluster_duplicates, hamming, phash, Clustering, GrayImage};
pub use stats::{
    default_doubt_patterns, doubt_ratio, duplication_by_label, ip_location_tally, likes_vs_fans,
    parse_doubt_patterns, publish_hour_histogram, title_term_frequencies, ByLabel,
    DuplicationStats, FanBin,
};
