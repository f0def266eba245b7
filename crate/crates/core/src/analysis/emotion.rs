//! Lexicon-based emotion intensity profiles.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Joy,
    Like,
    Anger,
    Sadness,
    Fear,
    Disgust,
    Surprise,
}

impl Emotion {
    pub const ALL: [Emotion; 7] = [
        Emotion::Joy,
        Emotion::Like,
        Emotion::Anger,
        Emotion::Sadness,
        Emotion::Fear,
        Emotion::Disgust,
        Emotion::Surprise,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Emotion::Joy => "joy",
            Emotion::Like => "like",
            Emotion::Anger => "anger",
            Emotion::Sadness => "sadness",
            Emotion::Fear => "fear",
            Emotion::Disgust => "disgust",
            Emotion::Surprise => "surprise",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Emotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown emotion `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmotionLexicon {
    entries: Vec<(Vec<String>, Emotion, f64)>,
}

impl EmotionLexicon {
    /// Lines of `word<TAB>emotion<TAB>intensity`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: i + 1,
                message,
            };
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            let [word, emotion, intensity] = fields[..] else {
                return Err(parse_err(
                    "expected `word<TAB>emotion<TAB>intensity`".into(),
                ));
            };
            let emotion: Emotion = emotion
                .parse()
                .map_err(|e: Error| parse_err(e.to_string()))?;
            let intensity: f64 = intensity
                .parse()
                .map_err(|_| parse_err(format!("intensity `{intensity}` is not a number")))?;
            let tokens = tokenize(word);
            if !tokens.is_empty() {
                entries.push((tokens, emotion, intensity));
            }
        }
        Ok(Self { entries })
    }

    /// The small bundled word list.
    pub fn bundled() -> Self {
        Self::parse(include_str!("../../lexicons/emotion.txt"))
            .expect("bundled emotion lexicon parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Summed intensities per emotion over matched entries, divided by the
/// number of tokens. Indexed like [`Emotion::ALL`].
pub fn emotion_profile(text: &str, lexicon: &EmotionLexicon) -> [f64; 7] {
    let tokens = tokenize(text);
    let mut out = [0.0; 7];
    if tokens.is_empty() {
        return out;
    }
    for (entry, emotion, intensity) in &lexicon.entries {
        if entry.len() > tokens.len() {
            continue;
        }
        let hits = tokens
            .windows(entry.len())
            .filter(|w| *w == entry.as_slice())
            .count();
        out[emotion.index()] += hits as f64 * intensity;
    }
    let n = tokens.len() as f64;
    out.iter_mut().for_each(|v| *v /= n);
    out
}
