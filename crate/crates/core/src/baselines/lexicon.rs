//! Word lists used by the hand-crafted feature extractors.
//!
//! Files are UTF-8 with one entry per line; blank lines and lines starting
//! with `#` are ignored. Multi-token entries match as contiguous token runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::text::tokenize;

/// Entries pre-tokenized for matching.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    entries: Vec<Vec<String>>,
}

impl Lexicon {
    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(tokenize)
            .filter(|t| !t.is_empty())
            .collect();
        Self { entries }
    }

    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Self {
        Self {
            entries: words.iter().map(|w| tokenize(w.as_ref())).collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total occurrences of all entries in a token stream.
    pub fn count(&self, tokens: &[String]) -> usize {
        self.entries
            .iter()
            .map(|e| {
                if e.len() > tokens.len() {
                    0
                } else {
                    tokens
                        .windows(e.len())
                        .filter(|w| *w == e.as_slice())
                        .count()
                }
            })
            .sum()
    }

    pub fn matches(&self, tokens: &[String]) -> bool {
        self.count(tokens) > 0
    }
}

/// Category → lexicon, for category-count feature blocks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CategoryLexicon {
    pub categories: BTreeMap<String, Lexicon>,
}

impl CategoryLexicon {
    /// Lines of `category<TAB>entry`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (cat, word) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "expected `category<TAB>entry`".into(),
            })?;
            raw.entry(cat.trim().to_string())
                .or_default()
                .push(word.trim().to_string());
        }
        Ok(Self {
            categories: raw
                .into_iter()
                .map(|(k, v)| (k, Lexicon::from_words(&v)))
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconSet {
    pub positive: Lexicon,
    pub negative: Lexicon,
    pub clickbait: Lexicon,
    pub modal_particles: Lexicon,
    pub first_person: Lexicon,
    pub second_person: Lexicon,
    pub third_person: Lexicon,
    pub doubt: Lexicon,
    pub swear: Lexicon,
    pub psycholinguistic: CategoryLexicon,
}

impl Default for LexiconSet {
    /// The small bundled lists.
    fn default() -> Self {
        Self {
            positive: Lexicon::parse(include_str!("../../lexicons/positive.txt")),
            negative: Lexicon::parse(include_str!("../../lexicons/negative.txt")),
            clickbait: Lexicon::parse(include_str!("../../lexicons/clickbait.txt")),
            modal_particles: Lexicon::parse(include_str!("../../lexicons/modal_particles.txt")),
            first_person: Lexicon::parse(include_str!("../../lexicons/first_person.txt")),
            second_person: Lexicon::parse(include_str!("../../lexicons/second_person.txt")),
            third_person: Lexicon::parse(include_str!("../../lexicons/third_person.txt")),
            doubt: Lexicon::parse(include_str!("../../lexicons/doubt.txt")),
            swear: Lexicon::parse(include_str!("../../lexicons/swear.txt")),
            psycholinguistic: CategoryLexicon::parse(include_str!(
                "../../lexicons/psycholinguistic.txt"
            ))
            .expect("bundled psycholinguistic lexicon parses"),
        }
    }
}

impl LexiconSet {
    /// Loads `<name>.txt` files from `dir`, keeping the bundled list for
    /// any file that is absent.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::io(
                dir,
                std::io::Error::new(std::io::ErrorKind::NotFound, "lexicon directory not found"),
            ));
        }
        let mut set = Self::default();
        let slots: [(&str, &mut Lexicon); 9] = [
            ("positive", &mut set.positive),
            ("negative", &mut set.negative),
            ("clickbait", &mut set.clickbait),
            ("modal_particles", &mut set.modal_particles),
            ("first_person", &mut set.first_person),
            ("second_person", &mut set.second_person),
            ("third_person", &mut set.third_person),
            ("doubt", &mut set.doubt),
            ("swear", &mut set.swear),
        ];
        for (name, slot) in slots {
            let p = dir.join(format!("{name}.txt"));
            if p.exists() {
                *slot = Lexicon::load(&p)?;
            }
        }
        let p = dir.join("psycholinguistic.txt");
        if p.exists() {
            let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            set.psycholinguistic = CategoryLexicon::parse(&text)?;
        }
        Ok(set)
    }

    /// Personal pronouns of every person.
    pub fn personal_pronoun_count(&self, tokens: &[String]) -> usize {
        self.first_person.count(tokens)
            + self.second_person.count(tokens)
            + self.third_person.count(tokens)
    }
}
