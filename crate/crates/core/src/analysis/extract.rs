//! Key-sentence extraction from debunking articles by prioritized regexes.

use std::fs;
use std::path::Path;

use regex::Regex;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ExtractionPattern {
    pub pattern: String,
    pub group: usize,
    pub description: String,
    regex: Regex,
}

impl ExtractionPattern {
    pub fn new(pattern: &str, group: usize, description: &str) -> Result<Self> {
        let regex = Regex::new(pattern).map_err(|e| Error::Pattern {
            pattern: pattern.to_string(),
            message: e.to_string(),
        })?;
        if group >= regex.captures_len() {
            return Err(Error::Pattern {
                pattern: pattern.to_string(),
                message: format!(
                    "capture group {group} does not exist ({} groups)",
                    regex.captures_len() - 1
                ),
            });
        }
        Ok(Self {
            pattern: pattern.to_string(),
            group,
            description: description.to_string(),
            regex,
        })
    }

    /// The trimmed capture, if the pattern matches and the group took part.
    pub fn extract<'t>(&self, text: &'t str) -> Option<&'t str> {
        let caps = self.regex.captures(text)?;
        let m = caps.get(self.group)?;
        let s = m.as_str().trim();
        (!s.is_empty()).then_some(s)
    }
}

/// One pattern per line, priority by line order. A line is either a bare
/// regex (capture group 1, or 0 when it has none) or
/// `regex<TAB>group[<TAB>description]`. Blank lines and lines starting with
/// `#` are skipped.
pub fn parse_patterns(text: &str) -> Result<Vec<ExtractionPattern>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        let pattern = parts.next().unwrap_or_default();
        let group = match parts.next() {
            Some(g) => Some(g.trim().parse::<usize>().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("capture group `{g}` is not a non-negative integer"),
            })?),
            None => None,
        };
        let description = parts.next().unwrap_or_default().trim();
        let group = match group {
            Some(g) => g,
            None => {
                let n = Regex::new(pattern)
                    .map_err(|e| Error::Pattern {
                        pattern: pattern.to_string(),
                        message: e.to_string(),
                    })?
                    .captures_len();
                usize::from(n > 1)
            }
        };
        out.push(ExtractionPattern::new(pattern, group, description)?);
    }
    Ok(out)
}

pub fn load_patterns(path: &Path) -> Result<Vec<ExtractionPattern>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_patterns(&text)
}

/// The bundled patterns.
pub fn default_patterns() -> Vec<ExtractionPattern> {
    parse_patterns(include_str!("../../lexicons/patterns.txt")).expect("bundled patterns compile")
}

/// `(article index, claim)` for each article some pattern matches; the
/// first matching pattern wins.
pub fn extract_key_sentences<S: AsRef<str>>(
    articles: &[S],
    patterns: &[ExtractionPattern],
) -> Vec<(usize, String)> {
    articles
        .iter()
        .enumerate()
        .filter_map(|(i, a)| {
            patterns
                .iter()
                .find_map(|p| p.extract(a.as_ref()))
                .map(|s| (i, s.to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rumor_prefix_is_extracted() {
        let out = extract_key_sentences(
            &["Rumor: Can onions kill COVID-19 viruses?", "nothing to see"],
            &default_patterns(),
        );
        assert_eq!(
            out,
            vec![(0, "Can onions kill COVID-19 viruses?".to_string())]
        );
    }

    #[test]
    fn earlier_pattern_has_priority() {
        let pats = parse_patterns("first (\\w+)\nsecond (\\w+)\n").unwrap();
        let out = extract_key_sentences(&["second b first a"], &pats);
        assert_eq!(out, vec![(0, "a".to_string())]);
    }

    #[test]
    fn bad_patterns_name_themselves() {
        let err = parse_patterns("ok (x)\nbroken (").unwrap_err();
        assert!(err.to_string().contains("broken ("));
        assert!(ExtractionPattern::new("(a)", 2, "").is_err());
    }

    #[test]
    fn explicit_group_and_description() {
        let p = parse_patterns("(a)(b)\t2\tsecond letter").unwrap();
        assert_eq!(p[0].group, 2);
        assert_eq!(p[0].description, "second letter");
        assert_eq!(p[0].extract("ab"), Some("b"));
    }
}
